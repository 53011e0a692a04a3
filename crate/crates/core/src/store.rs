//! Scenario store: an append-only file of single-line scenario records, an
//! in-memory tag index rebuilt on open, a boolean tag-query language, and
//! ODD-based test-case selection.
//!
//! File layout:
//!
//! ```text
//! scentag-store/1
//! scenario "s1" { actor ego ego { phase 0 { ... } } static { ... } }
//! scenario "s2" { ... }
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::{self, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::category::ScenarioCategory;
use crate::error::ParseError;
use crate::lexer::{tokenize, Cursor, Tok};
use crate::matcher::comprises;
use crate::scenario::{parse_scenario, scenario_to_line, ScenarioRecord};
use crate::taxonomy::{Registry, TagPath};

pub const STORE_HEADER: &str = "scentag-store/1";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("not a scenario store: expected header `{STORE_HEADER}`, found {found:?}")]
    BadHeader { found: String },
    #[error("store line {line}: {error}")]
    Corrupt { line: usize, error: ParseError },
    #[error("store already contains scenario `{0}`")]
    DuplicateId(String),
    #[error("store already exists at {0}")]
    AlreadyExists(PathBuf),
    #[error("unknown category {0:?}")]
    UnknownCategory(String),
    #[error("an ODD needs at least one category")]
    EmptyOdd,
    #[error("invalid record: {0}")]
    InvalidRecord(String),
}

/// Tag postings with ancestor closure: a scenario carrying `weather:rain/heavy`
/// is listed under that path, `weather:rain` and `weather:`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TagIndex {
    postings: BTreeMap<TagPath, BTreeSet<String>>,
}

impl TagIndex {
    pub fn insert(&mut self, record: &ScenarioRecord) {
        for tag in record.all_tags() {
            for p in tag.ancestors_or_self() {
                self.postings.entry(p).or_default().insert(record.id.clone());
            }
        }
    }

    pub fn postings(&self, tag: &TagPath) -> Option<&BTreeSet<String>> {
        self.postings.get(tag)
    }

    pub fn len(&self) -> usize {
        self.postings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.postings.is_empty()
    }
}

/// In-memory record set with its index.
#[derive(Debug, Clone, Default)]
pub struct Catalog {
    records: BTreeMap<String, ScenarioRecord>,
    order: Vec<String>,
    index: TagIndex,
}

impl Catalog {
    pub fn new() -> Catalog {
        Catalog::default()
    }

    pub fn from_records(records: impl IntoIterator<Item = ScenarioRecord>) -> Result<Catalog, StoreError> {
        let mut c = Catalog::new();
        for r in records {
            c.insert(r)?;
        }
        Ok(c)
    }

    pub fn insert(&mut self, record: ScenarioRecord) -> Result<(), StoreError> {
        if self.records.contains_key(&record.id) {
            return Err(StoreError::DuplicateId(record.id));
        }
        self.index.insert(&record);
        self.order.push(record.id.clone());
        self.records.insert(record.id.clone(), record);
        Ok(())
    }

    pub fn contains(&self, id: &str) -> bool {
        self.records.contains_key(id)
    }

    pub fn get(&self, id: &str) -> Option<&ScenarioRecord> {
        self.records.get(id)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Records in insertion order.
    pub fn records(&self) -> impl Iterator<Item = &ScenarioRecord> {
        self.order.iter().map(|id| &self.records[id])
    }

    pub fn ids(&self) -> impl Iterator<Item = &String> {
        self.records.keys()
    }

    pub fn index(&self) -> &TagIndex {
        &self.index
    }

    /// Evaluates `expr` with the tag index. Ids come back in ascending order.
    pub fn query(&self, expr: &QueryExpr) -> Vec<String> {
        self.eval(expr).into_iter().cloned().collect()
    }

    fn eval(&self, expr: &QueryExpr) -> BTreeSet<&String> {
        match expr {
            QueryExpr::Atom(t) => self.index.postings(t).map(|s| s.iter().collect()).unwrap_or_default(),
            QueryExpr::And(a, b) => {
                let left = self.eval(a);
                if left.is_empty() {
                    return left;
                }
                left.intersection(&self.eval(b)).copied().collect()
            }
            QueryExpr::Or(a, b) => {
                let mut left = self.eval(a);
                left.extend(self.eval(b));
                left
            }
            QueryExpr::Not(a) => {
                let inner = self.eval(a);
                self.records.keys().filter(|id| !inner.contains(id)).collect()
            }
        }
    }

    /// Evaluates `expr` by checking every record directly, without the index.
    pub fn query_scan(&self, expr: &QueryExpr) -> Vec<String> {
        self.records
            .values()
            .filter(|r| expr.matches(&r.all_tags()))
            .map(|r| r.id.clone())
            .collect()
    }
}

/// Append-only single-file store. Writers take an exclusive advisory lock on
/// the file; readers work on the snapshot loaded at open.
#[derive(Debug)]
pub struct Store {
    path: PathBuf,
    catalog: Catalog,
}

impl Store {
    /// Creates a new, empty store file.
    pub fn init(path: &Path) -> Result<Store, StoreError> {
        let mut f = match OpenOptions::new().write(true).create_new(true).open(path) {
            Ok(f) => f,
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => {
                return Err(StoreError::AlreadyExists(path.to_path_buf()))
            }
            Err(e) => return Err(e.into()),
        };
        writeln!(f, "{STORE_HEADER}")?;
        f.sync_all()?;
        Ok(Store {
            path: path.to_path_buf(),
            catalog: Catalog::new(),
        })
    }

    /// Loads a store and rebuilds its index.
    pub fn open(path: &Path, registry: &Registry) -> Result<Store, StoreError> {
        let mut f = File::open(path)?;
        f.lock_shared()?;
        let mut text = String::new();
        f.read_to_string(&mut text)?;
        f.unlock()?;
        Ok(Store {
            path: path.to_path_buf(),
            catalog: load(&text, registry)?,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    /// Appends a record and syncs it to disk. Under the writer lock the file
    /// is re-read, so ids added by other writers since open are also checked.
    pub fn add(&mut self, registry: &Registry, record: ScenarioRecord) -> Result<(), StoreError> {
        record
            .validate(registry)
            .map_err(|e| StoreError::InvalidRecord(e.to_string()))?;
        let mut f = OpenOptions::new().read(true).write(true).open(&self.path)?;
        f.lock()?;
        let mut text = String::new();
        f.read_to_string(&mut text)?;
        let current = load(&text, registry)?;
        if current.contains(&record.id) {
            return Err(StoreError::DuplicateId(record.id));
        }
        let mut line = scenario_to_line(&record);
        if !text.ends_with('\n') {
            line.insert(0, '\n');
        }
        line.push('\n');
        f.seek(SeekFrom::End(0))?;
        f.write_all(line.as_bytes())?;
        f.sync_data()?;
        f.unlock()?;
        self.catalog = current;
        self.catalog.insert(record)?;
        Ok(())
    }

    pub fn query(&self, expr: &QueryExpr) -> Vec<String> {
        self.catalog.query(expr)
    }
}

fn load(text: &str, registry: &Registry) -> Result<Catalog, StoreError> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim_end() == STORE_HEADER => {}
        other => {
            return Err(StoreError::BadHeader {
                found: other.unwrap_or("").to_string(),
            })
        }
    }
    let mut catalog = Catalog::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record = parse_scenario(registry, line).map_err(|error| StoreError::Corrupt { line: i + 2, error })?;
        let id = record.id.clone();
        catalog.insert(record).map_err(|_| StoreError::Corrupt {
            line: i + 2,
            error: ParseError::new(
                Default::default(),
                crate::error::ParseErrorKind::Invalid(format!("duplicate scenario id `{id}`")),
            ),
        })?;
    }
    Ok(catalog)
}

/// Boolean combination of tag atoms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum QueryExpr {
    Atom(TagPath),
    And(Box<QueryExpr>, Box<QueryExpr>),
    Or(Box<QueryExpr>, Box<QueryExpr>),
    Not(Box<QueryExpr>),
}

impl QueryExpr {
    /// Direct evaluation against one record's tags. An atom holds when some
    /// tag is equal to it or below it.
    pub fn matches(&self, tags: &BTreeSet<TagPath>) -> bool {
        match self {
            QueryExpr::Atom(a) => tags.iter().any(|t| a.subsumes(t)),
            QueryExpr::And(a, b) => a.matches(tags) && b.matches(tags),
            QueryExpr::Or(a, b) => a.matches(tags) || b.matches(tags),
            QueryExpr::Not(a) => !a.matches(tags),
        }
    }
}

/// S-expression form, e.g. `(AND weather:rain (NOT lighting:dark))`.
impl fmt::Display for QueryExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QueryExpr::Atom(t) => write!(f, "{t}"),
            QueryExpr::And(a, b) => write!(f, "(AND {a} {b})"),
            QueryExpr::Or(a, b) => write!(f, "(OR {a} {b})"),
            QueryExpr::Not(a) => write!(f, "(NOT {a})"),
        }
    }
}

/// Parses a query. Precedence is `NOT` > `AND` > `OR`; parentheses group.
pub fn parse_query(registry: &Registry, text: &str) -> Result<QueryExpr, ParseError> {
    let tokens = tokenize(text, false)?;
    let mut p = QueryParser {
        registry,
        cur: Cursor::new(tokens, text),
    };
    if p.cur.at_end() {
        return Err(ParseError::syntax(p.cur.span(), "empty query"));
    }
    let expr = p.or()?;
    if !p.cur.at_end() {
        return Err(ParseError::syntax(
            p.cur.span(),
            format!("unexpected {}", p.cur.describe_next()),
        ));
    }
    Ok(expr)
}

struct QueryParser<'r> {
    registry: &'r Registry,
    cur: Cursor,
}

impl QueryParser<'_> {
    fn or(&mut self) -> Result<QueryExpr, ParseError> {
        let mut left = self.and()?;
        while self.cur.eat_word("OR") {
            left = QueryExpr::Or(Box::new(left), Box::new(self.and()?));
        }
        Ok(left)
    }

    fn and(&mut self) -> Result<QueryExpr, ParseError> {
        let mut left = self.not()?;
        while self.cur.eat_word("AND") {
            left = QueryExpr::And(Box::new(left), Box::new(self.not()?));
        }
        Ok(left)
    }

    fn not(&mut self) -> Result<QueryExpr, ParseError> {
        if self.cur.eat_word("NOT") {
            return Ok(QueryExpr::Not(Box::new(self.not()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<QueryExpr, ParseError> {
        let span = self.cur.span();
        match self.cur.next() {
            Some(t) if matches!(t.tok, Tok::Path(_)) => {
                let Tok::Path(text) = &t.tok else { unreachable!() };
                let path = self
                    .registry
                    .resolve(text)
                    .map_err(|e| ParseError::new(t.span, e.into()))?;
                Ok(QueryExpr::Atom(path))
            }
            Some(t) if t.tok == Tok::LParen => {
                let inner = self.or()?;
                let close = self.cur.span();
                if !self.cur.eat(&Tok::RParen) {
                    return Err(ParseError::syntax(
                        close,
                        format!("expected `)`, found {}", self.cur.describe_next()),
                    ));
                }
                Ok(inner)
            }
            Some(t) => Err(ParseError::syntax(
                t.span,
                format!("expected a tag path, `NOT` or `(`, found {}", t.tok),
            )),
            None => Err(ParseError::syntax(
                span,
                "expected a tag path, `NOT` or `(`, found end of input",
            )),
        }
    }
}

/// An operational design domain given as a list of category names.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OddSpec {
    categories: Vec<String>,
}

impl OddSpec {
    pub fn new(categories: Vec<String>) -> Result<OddSpec, StoreError> {
        if categories.is_empty() {
            return Err(StoreError::EmptyOdd);
        }
        Ok(OddSpec { categories })
    }

    pub fn categories(&self) -> &[String] {
        &self.categories
    }
}

/// Scenarios comprised by at least one ODD category, each with the names of
/// all ODD categories that comprise it. Sorted by scenario id; category names
/// follow ODD order.
pub fn select_test_cases(
    registry: &Registry,
    catalog: &Catalog,
    library: &[ScenarioCategory],
    odd: &OddSpec,
) -> Result<Vec<(String, Vec<String>)>, StoreError> {
    let mut odd_categories = Vec::with_capacity(odd.categories.len());
    for name in &odd.categories {
        let c = library
            .iter()
            .find(|c| &c.name == name)
            .ok_or_else(|| StoreError::UnknownCategory(name.clone()))?;
        odd_categories.push(c);
    }
    let mut out = Vec::new();
    for id in catalog.ids() {
        let record = catalog.get(id).expect("listed id");
        let names: Vec<String> = odd_categories
            .iter()
            .filter(|c| comprises(registry, c, record).is_some())
            .map(|c| c.name.clone())
            .collect();
        if !names.is_empty() {
            out.push((id.clone(), names));
        }
    }
    Ok(out)
}
