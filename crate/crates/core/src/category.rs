//! Scenario categories: data model, the category language, the canonical
//! serializer and the linter.
//!
//! A category can be written in three styles that may be mixed freely:
//!
//! * a flat `tags { ... }` list, where each actor-scoped tag only needs to
//!   hold for *some* actor;
//! * `actor <group> { ... }` blocks, whose tags must all hold for the same
//!   actor (`actor ego` designates the ego vehicle);
//! * a `sequence { step { ... } ... }` block for tags whose order matters.
//!
//! ```text
//! category "cut-in at merging lanes" {
//!   actor ego { longitudinal_activity:driving_forward }
//!   actor other { lateral_activity:changing_lane }
//!   sequence {
//!     step { other: lead_vehicle:no_leader; }
//!     step { other: lead_vehicle:leader; }
//!   }
//! }
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::{Diagnostic, ParseError, ParseErrorKind};
use crate::lexer::{quote, tokenize, Cursor, Span, Tok, Token};
use crate::taxonomy::{Registry, Scope, TagPath};

pub const EGO: &str = "ego";

/// Who a snapshot entry constrains.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Subject {
    Group(String),
    /// The static environment and conditions.
    Static,
}

impl fmt::Display for Subject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Subject::Group(g) => f.write_str(g),
            Subject::Static => f.write_str("static"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActorGroup {
    pub id: String,
    pub is_ego: bool,
    pub requirements: BTreeSet<TagPath>,
}

impl ActorGroup {
    pub fn new(id: &str) -> ActorGroup {
        ActorGroup {
            id: id.to_string(),
            is_ego: id == EGO,
            requirements: BTreeSet::new(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Snapshot {
    pub entries: BTreeSet<(Subject, TagPath)>,
}

impl Snapshot {
    pub fn for_subject<'a>(&'a self, subject: &'a Subject) -> impl Iterator<Item = &'a TagPath> + 'a {
        self.entries.iter().filter(move |(s, _)| s == subject).map(|(_, t)| t)
    }
}

/// A qualitative description of a set of scenarios.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioCategory {
    pub name: String,
    /// Requirements of any scope; actor-scoped ones are satisfied
    /// independently by any actor.
    pub ungrouped: BTreeSet<TagPath>,
    pub groups: BTreeMap<String, ActorGroup>,
    pub sequence: Vec<Snapshot>,
}

impl ScenarioCategory {
    /// The category with no requirements, which comprises every scenario.
    pub fn universal(name: &str) -> ScenarioCategory {
        ScenarioCategory {
            name: name.to_string(),
            ungrouped: BTreeSet::new(),
            groups: BTreeMap::new(),
            sequence: Vec::new(),
        }
    }

    pub fn is_universal(&self) -> bool {
        self.ungrouped.is_empty() && self.groups.is_empty() && self.sequence.is_empty()
    }

    pub fn ego_group(&self) -> Option<&ActorGroup> {
        self.groups.values().find(|g| g.is_ego)
    }

    /// Every tag mentioned anywhere in the category.
    pub fn tags(&self) -> BTreeSet<TagPath> {
        let mut out = self.ungrouped.clone();
        for g in self.groups.values() {
            out.extend(g.requirements.iter().cloned());
        }
        for s in &self.sequence {
            out.extend(s.entries.iter().map(|(_, t)| t.clone()));
        }
        out
    }

    /// Dissolves all groups and the sequence into ungrouped requirements.
    pub fn flattened(&self) -> ScenarioCategory {
        let mut out = ScenarioCategory::universal(&self.name);
        out.ungrouped = self.tags();
        out
    }

    /// Moves every sequence entry into its group's unordered requirements
    /// (static entries become ungrouped).
    pub fn unordered(&self) -> ScenarioCategory {
        let mut out = self.clone();
        out.sequence.clear();
        for snap in &self.sequence {
            for (subject, tag) in &snap.entries {
                match subject {
                    Subject::Group(g) => {
                        out.groups
                            .get_mut(g)
                            .expect("sequence refers to declared group")
                            .requirements
                            .insert(tag.clone());
                    }
                    Subject::Static => {
                        out.ungrouped.insert(tag.clone());
                    }
                }
            }
        }
        out
    }

    /// Checks the structural invariants against a registry.
    pub fn validate(&self, registry: &Registry) -> Result<(), String> {
        let scope = |t: &TagPath| {
            if !registry.contains(t) {
                return Err(format!("unresolved tag `{t}`"));
            }
            Ok(registry.scope_of(t).expect("resolved"))
        };
        for t in &self.ungrouped {
            scope(t)?;
        }
        if self.groups.values().filter(|g| g.is_ego).count() > 1 {
            return Err("more than one ego group".into());
        }
        for (id, g) in &self.groups {
            if *id != g.id || g.is_ego != (id == EGO) {
                return Err(format!("inconsistent group `{id}`"));
            }
            for t in &g.requirements {
                if scope(t)? != Scope::Actor {
                    return Err(format!("non-actor tag `{t}` in group `{id}`"));
                }
            }
        }
        for (i, snap) in self.sequence.iter().enumerate() {
            if snap.entries.is_empty() {
                return Err(format!("step {} is empty", i + 1));
            }
            for (subject, t) in &snap.entries {
                let s = scope(t)?;
                match subject {
                    Subject::Group(g) if !self.groups.contains_key(g) => {
                        return Err(format!("step {} refers to undeclared group `{g}`", i + 1))
                    }
                    Subject::Group(_) if s != Scope::Actor => {
                        return Err(format!("non-actor tag `{t}` on a group in step {}", i + 1))
                    }
                    Subject::Static if s == Scope::Actor => {
                        return Err(format!("actor tag `{t}` on static in step {}", i + 1))
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }
}

/// Source locations recorded while parsing one category, used by the linter.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SourceMap {
    pub header: Span,
    pub ungrouped: BTreeMap<TagPath, Span>,
    pub groups: BTreeMap<String, GroupSpans>,
    pub steps: Vec<StepSpans>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GroupSpans {
    pub header: Span,
    pub requirements: BTreeMap<TagPath, Span>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StepSpans {
    pub header: Span,
    pub entries: BTreeMap<(Subject, TagPath), Span>,
}

/// A parsed category document with source locations.
#[derive(Debug, Clone, Default)]
pub struct Library {
    pub categories: Vec<ScenarioCategory>,
    pub spans: Vec<SourceMap>,
}

impl Library {
    pub fn parse(registry: &Registry, source: &str) -> Result<Library, ParseError> {
        let tokens = tokenize(source, true)?;
        let mut p = CategoryParser {
            registry,
            cur: Cursor::new(tokens, source),
        };
        let mut lib = Library::default();
        let mut names: BTreeSet<String> = BTreeSet::new();
        while !p.cur.at_end() {
            let span = p.cur.span();
            let (cat, map) = p.category()?;
            if !names.insert(cat.name.clone()) {
                return Err(ParseError::new(span, ParseErrorKind::DuplicateCategory(cat.name)));
            }
            lib.categories.push(cat);
            lib.spans.push(map);
        }
        Ok(lib)
    }

    pub fn get(&self, name: &str) -> Option<&ScenarioCategory> {
        self.categories.iter().find(|c| c.name == name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.categories.iter().map(|c| c.name.as_str())
    }
}

/// Parses every category in a document.
pub fn parse_category(registry: &Registry, source: &str) -> Result<Vec<ScenarioCategory>, ParseError> {
    Library::parse(registry, source).map(|l| l.categories)
}

struct CategoryParser<'r> {
    registry: &'r Registry,
    cur: Cursor,
}

/// Resolves a path token and checks its scope against what the context allows.
pub(crate) fn resolve_token(
    registry: &Registry,
    token: &Token,
    allowed: &[Scope],
    context: &'static str,
) -> Result<TagPath, ParseError> {
    let Tok::Path(text) = &token.tok else {
        return Err(ParseError::syntax(
            token.span,
            format!("expected a tag path, found {}", token.tok),
        ));
    };
    let path = registry
        .resolve(text)
        .map_err(|e| ParseError::new(token.span, e.into()))?;
    let scope = registry.scope_of(&path).expect("resolved path has a tree");
    if !allowed.contains(&scope) {
        return Err(ParseError::new(
            token.span,
            ParseErrorKind::ScopeViolation {
                tag: path.to_string(),
                actual: scope,
                context,
            },
        ));
    }
    Ok(path)
}

impl CategoryParser<'_> {
    fn expect(&mut self, tok: Tok) -> Result<Span, ParseError> {
        let span = self.cur.span();
        if self.cur.eat(&tok) {
            Ok(span)
        } else {
            Err(ParseError::syntax(
                span,
                format!("expected {tok}, found {}", self.cur.describe_next()),
            ))
        }
    }

    /// `{ path* }`
    fn path_block(&mut self, allowed: &[Scope], context: &'static str) -> Result<Vec<(TagPath, Span)>, ParseError> {
        self.expect(Tok::LBrace)?;
        let mut out = Vec::new();
        loop {
            match self.cur.peek_tok() {
                Some(Tok::RBrace) => {
                    self.cur.next();
                    return Ok(out);
                }
                Some(Tok::Path(_)) => {
                    let t = self.cur.next().expect("peeked");
                    out.push((resolve_token(self.registry, &t, allowed, context)?, t.span));
                }
                _ => {
                    return Err(ParseError::syntax(
                        self.cur.span(),
                        format!("expected a tag path or `}}`, found {}", self.cur.describe_next()),
                    ))
                }
            }
        }
    }

    fn category(&mut self) -> Result<(ScenarioCategory, SourceMap), ParseError> {
        let header = self.cur.span();
        if !self.cur.eat_word("category") {
            return Err(ParseError::syntax(
                header,
                format!("expected `category`, found {}", self.cur.describe_next()),
            ));
        }
        let name = match self.cur.next() {
            Some(Token { tok: Tok::Str(s), .. }) => s,
            other => {
                return Err(ParseError::syntax(
                    other.map(|t| t.span).unwrap_or(header),
                    "expected a quoted category name",
                ))
            }
        };
        let mut cat = ScenarioCategory::universal(&name);
        let mut map = SourceMap {
            header,
            ..SourceMap::default()
        };
        let mut seen_sequence = false;
        self.expect(Tok::LBrace)?;
        loop {
            let span = self.cur.span();
            let Some(token) = self.cur.next() else {
                return Err(ParseError::syntax(span, "unexpected end of input, expected `}`"));
            };
            match token.tok {
                Tok::RBrace => break,
                Tok::Word(ref w) if w == "tags" => {
                    for (t, s) in self.path_block(&[Scope::Actor, Scope::Static, Scope::Condition], "a tags block")? {
                        map.ungrouped.entry(t.clone()).or_insert(s);
                        cat.ungrouped.insert(t);
                    }
                }
                Tok::Word(ref w) if w == "static" => {
                    for (t, s) in self.path_block(&[Scope::Static, Scope::Condition], "a static block")? {
                        map.ungrouped.entry(t.clone()).or_insert(s);
                        cat.ungrouped.insert(t);
                    }
                }
                Tok::Word(ref w) if w == "actor" => {
                    let id = match self.cur.next() {
                        Some(Token { tok: Tok::Word(id), .. }) if is_group_id(&id) => id,
                        other => {
                            return Err(ParseError::syntax(
                                other.map(|t| t.span).unwrap_or(span),
                                "expected an actor group id",
                            ))
                        }
                    };
                    if cat.groups.contains_key(&id) {
                        return Err(ParseError::new(span, ParseErrorKind::DuplicateGroup(id)));
                    }
                    let mut group = ActorGroup::new(&id);
                    let mut spans = GroupSpans {
                        header: span,
                        ..GroupSpans::default()
                    };
                    for (t, s) in self.path_block(&[Scope::Actor], "an actor group")? {
                        spans.requirements.entry(t.clone()).or_insert(s);
                        group.requirements.insert(t);
                    }
                    cat.groups.insert(id.clone(), group);
                    map.groups.insert(id, spans);
                }
                Tok::Word(ref w) if w == "sequence" => {
                    if seen_sequence {
                        return Err(ParseError::syntax(span, "only one sequence block is allowed"));
                    }
                    seen_sequence = true;
                    self.sequence(&mut cat, &mut map)?;
                }
                other => {
                    return Err(ParseError::syntax(
                        token.span,
                        format!("expected `tags`, `actor`, `static`, `sequence` or `}}`, found {other}"),
                    ))
                }
            }
        }
        // Steps may only mention groups declared somewhere in the category.
        for (snap, spans) in cat.sequence.iter().zip(&map.steps) {
            for (subject, tag) in &snap.entries {
                if let Subject::Group(g) = subject {
                    if !cat.groups.contains_key(g) {
                        let at = spans.entries[&(subject.clone(), tag.clone())];
                        return Err(ParseError::new(at, ParseErrorKind::UndeclaredGroup(g.clone())));
                    }
                }
            }
        }
        Ok((cat, map))
    }

    fn sequence(&mut self, cat: &mut ScenarioCategory, map: &mut SourceMap) -> Result<(), ParseError> {
        self.expect(Tok::LBrace)?;
        loop {
            let span = self.cur.span();
            if self.cur.eat(&Tok::RBrace) {
                return Ok(());
            }
            if !self.cur.eat_word("step") {
                return Err(ParseError::syntax(
                    span,
                    format!("expected `step` or `}}`, found {}", self.cur.describe_next()),
                ));
            }
            self.expect(Tok::LBrace)?;
            let mut snap = Snapshot::default();
            let mut spans = StepSpans {
                header: span,
                ..StepSpans::default()
            };
            loop {
                if self.cur.eat(&Tok::RBrace) {
                    break;
                }
                if self.cur.eat(&Tok::Semi) {
                    continue;
                }
                let Some(label_tok) = self.cur.next() else {
                    return Err(ParseError::syntax(self.cur.span(), "unexpected end of input in step"));
                };
                let subject = match &label_tok.tok {
                    Tok::Path(p) if p.ends_with(':') && p.len() > 1 => {
                        let id = &p[..p.len() - 1];
                        if id == "static" {
                            Subject::Static
                        } else {
                            Subject::Group(id.to_string())
                        }
                    }
                    other => {
                        return Err(ParseError::syntax(
                            label_tok.span,
                            format!("expected `<group>:` or `static:`, found {other}"),
                        ))
                    }
                };
                let (allowed, context): (&[Scope], &'static str) = match subject {
                    Subject::Static => (&[Scope::Static, Scope::Condition], "a static step entry"),
                    Subject::Group(_) => (&[Scope::Actor], "an actor step entry"),
                };
                let mut any = false;
                while let Some(Tok::Path(_)) = self.cur.peek_tok() {
                    let t = self.cur.next().expect("peeked");
                    let path = resolve_token(self.registry, &t, allowed, context)?;
                    spans.entries.entry((subject.clone(), path.clone())).or_insert(t.span);
                    snap.entries.insert((subject.clone(), path));
                    any = true;
                }
                if !any {
                    return Err(ParseError::syntax(
                        self.cur.span(),
                        format!("expected a tag path after `{subject}:`"),
                    ));
                }
                match self.cur.peek_tok() {
                    Some(Tok::Semi) | Some(Tok::RBrace) => {}
                    _ => {
                        return Err(ParseError::syntax(
                            self.cur.span(),
                            format!("expected `;` or `}}`, found {}", self.cur.describe_next()),
                        ))
                    }
                }
            }
            if snap.entries.is_empty() {
                return Err(ParseError::syntax(span, "a step needs at least one entry"));
            }
            cat.sequence.push(snap);
            map.steps.push(spans);
        }
    }
}

fn is_group_id(text: &str) -> bool {
    text.chars().next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && text.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Canonical text for one category. Groups are sorted by id and every
/// requirement list by canonical path text; sequence order is kept.
pub fn serialize_category(registry: &Registry, category: &ScenarioCategory) -> String {
    let mut out = format!("category {} {{", quote(&category.name));
    if category.is_universal() {
        out.push_str("}\n");
        return out;
    }
    out.push('\n');
    let block = |out: &mut String, head: &str, tags: &mut dyn Iterator<Item = &TagPath>| {
        let tags: Vec<&TagPath> = tags.collect();
        if tags.is_empty() {
            out.push_str(&format!("  {head} {{}}\n"));
            return;
        }
        out.push_str(&format!("  {head} {{\n"));
        for t in tags {
            out.push_str(&format!("    {t}\n"));
        }
        out.push_str("  }\n");
    };
    let actor_tags: Vec<&TagPath> = category
        .ungrouped
        .iter()
        .filter(|t| is_actor_like(registry, t))
        .collect();
    if !actor_tags.is_empty() {
        block(&mut out, "tags", &mut actor_tags.into_iter());
    }
    for g in category.groups.values() {
        block(&mut out, &format!("actor {}", g.id), &mut g.requirements.iter());
    }
    let static_tags: Vec<&TagPath> = category
        .ungrouped
        .iter()
        .filter(|t| !is_actor_like(registry, t))
        .collect();
    if !static_tags.is_empty() {
        block(&mut out, "static", &mut static_tags.into_iter());
    }
    if !category.sequence.is_empty() {
        out.push_str("  sequence {\n");
        for snap in &category.sequence {
            out.push_str("    step {");
            let mut current: Option<&Subject> = None;
            for (subject, tag) in &snap.entries {
                if current != Some(subject) {
                    if current.is_some() {
                        out.push(';');
                    }
                    out.push_str(&format!(" {subject}:"));
                    current = Some(subject);
                }
                out.push_str(&format!(" {tag}"));
            }
            out.push_str("; }\n");
        }
        out.push_str("  }\n");
    }
    out.push_str("}\n");
    out
}

/// Tags of unknown trees go to `tags`, which accepts every scope.
fn is_actor_like(registry: &Registry, tag: &TagPath) -> bool {
    !matches!(registry.scope_of(tag), Some(Scope::Static | Scope::Condition))
}

/// Canonical text for a list of categories, separated by blank lines.
pub fn serialize_library(registry: &Registry, categories: &[ScenarioCategory]) -> String {
    categories
        .iter()
        .map(|c| serialize_category(registry, c))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Lints one category. `spans` should be the source map produced when the
/// category was parsed; diagnostics point at the offending requirement.
pub fn lint_category(_registry: &Registry, category: &ScenarioCategory, spans: &SourceMap) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let span_or = |m: Option<&Span>, fallback: Span| m.copied().unwrap_or(fallback);

    let mut redundant = |tags: &mut dyn Iterator<Item = &TagPath>, where_: &str, locate: &dyn Fn(&TagPath) -> Span| {
        let tags: Vec<&TagPath> = tags.collect();
        for general in &tags {
            for specific in &tags {
                if general != specific && general.subsumes(specific) {
                    out.push(Diagnostic {
                        span: locate(general),
                        message: format!(
                            "redundant requirement `{general}` in {where_}: implied by the more specific `{specific}`"
                        ),
                    });
                }
            }
        }
    };

    redundant(&mut category.ungrouped.iter(), "ungrouped tags", &|t| {
        span_or(spans.ungrouped.get(t), spans.header)
    });
    for g in category.groups.values() {
        let gs = spans.groups.get(&g.id);
        let header = gs.map(|s| s.header).unwrap_or(spans.header);
        redundant(&mut g.requirements.iter(), &format!("actor group `{}`", g.id), &|t| {
            span_or(gs.and_then(|s| s.requirements.get(t)), header)
        });
    }
    for (i, snap) in category.sequence.iter().enumerate() {
        let ss = spans.steps.get(i);
        let header = ss.map(|s| s.header).unwrap_or(spans.header);
        let subjects: BTreeSet<&Subject> = snap.entries.iter().map(|(s, _)| s).collect();
        for subject in subjects {
            redundant(
                &mut snap.for_subject(subject),
                &format!("step {} entry `{subject}`", i + 1),
                &|t| span_or(ss.and_then(|s| s.entries.get(&(subject.clone(), t.clone()))), header),
            );
        }
    }

    for g in category.groups.values() {
        let in_sequence = category
            .sequence
            .iter()
            .any(|s| s.entries.iter().any(|(sub, _)| *sub == Subject::Group(g.id.clone())));
        if g.requirements.is_empty() && !in_sequence {
            out.push(Diagnostic {
                span: spans.groups.get(&g.id).map(|s| s.header).unwrap_or(spans.header),
                message: format!("actor group `{}` is declared but never constrained", g.id),
            });
        }
    }

    for i in 1..category.sequence.len() {
        if category.sequence[i] == category.sequence[i - 1] {
            out.push(Diagnostic {
                span: spans.steps.get(i).map(|s| s.header).unwrap_or(spans.header),
                message: format!("step {} has the same tags as step {}: no state change", i + 1, i),
            });
        }
    }
    out.sort_by(|a, b| (a.span, &a.message).cmp(&(b.span, &b.message)));
    out
}
