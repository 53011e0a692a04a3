use std::fmt;

use thiserror::Error;

use crate::lexer::{LexError, Span};
use crate::taxonomy::{ResolveError, Scope};

/// A located error from one of the text parsers.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{span}: {kind}")]
pub struct ParseError {
    pub span: Span,
    pub kind: ParseErrorKind,
}

impl ParseError {
    pub(crate) fn new(span: Span, kind: ParseErrorKind) -> ParseError {
        ParseError { span, kind }
    }

    pub(crate) fn syntax(span: Span, message: impl Into<String>) -> ParseError {
        ParseError::new(span, ParseErrorKind::Syntax(message.into()))
    }
}

impl From<LexError> for ParseError {
    fn from(e: LexError) -> Self {
        ParseError::syntax(e.span, e.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("{0}")]
    Unresolved(#[from] ResolveError),
    #[error("`{tag}` is {actual}-scoped and cannot appear in {context}")]
    ScopeViolation {
        tag: String,
        actual: Scope,
        context: &'static str,
    },
    #[error("duplicate actor group `{0}`")]
    DuplicateGroup(String),
    #[error("sequence refers to undeclared actor group `{0}`")]
    UndeclaredGroup(String),
    #[error("duplicate category name {0:?}")]
    DuplicateCategory(String),
    #[error("duplicate actor id `{0}`")]
    DuplicateActor(String),
    #[error("more than one ego actor (`{first}` and `{second}`)")]
    TwoEgos { first: String, second: String },
    #[error("phase start {start} must be greater than the previous start {previous}")]
    NonIncreasingStep { previous: u32, start: u32 },
    #[error("phase start {0} is outside [0, 1000000)")]
    StepOutOfRange(u64),
    #[error("{0}")]
    Invalid(String),
}

/// A lint finding. Lint never fails; these are warnings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub span: Span,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: warning: {}", self.span, self.message)
    }
}
