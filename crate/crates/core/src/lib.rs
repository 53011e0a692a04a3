//! Tag-based scenario categories for scenario-based assessment of automated
//! vehicles.
//!
//! * [`taxonomy`]: hierarchical tag trees and the subsumption order.
//! * [`category`]: scenario categories and their definition language.
//! * [`scenario`]: qualitative scenario records.
//! * [`matcher`]: does a category comprise a scenario?
//! * [`algebra`]: does one category include another? Conjunction, emptiness.
//! * [`store`]: a tag-indexed scenario store, tag queries and test-case selection.

pub mod algebra;
pub mod category;
pub mod error;
pub mod lexer;
pub mod matcher;
pub mod scenario;
pub mod store;
pub mod taxonomy;

pub use category::{lint_category, parse_category, serialize_category, Library, ScenarioCategory};
pub use error::{Diagnostic, ParseError, ParseErrorKind};
pub use matcher::{comprises, comprising_categories, MatchWitness};
pub use scenario::{parse_scenario, serialize_scenario, ScenarioRecord};
pub use taxonomy::{Registry, Scope, TagPath};
