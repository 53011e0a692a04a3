//! Qualitative scenario records: the tag projection of a concrete scenario.
//!
//! Time is a global integer step. Each actor has a list of phases; a phase's
//! tags hold from its start step until the actor's next phase, and the last
//! phase holds forever after.

use std::collections::{BTreeMap, BTreeSet};

use crate::category::resolve_token;
use crate::error::{ParseError, ParseErrorKind};
use crate::lexer::{is_word_char, quote, tokenize, Cursor, Span, Tok, Token};
use crate::taxonomy::{Registry, Scope, TagPath};

/// Exclusive upper bound for phase start steps.
pub const MAX_STEP: u32 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Phase {
    pub start: u32,
    pub tags: BTreeSet<TagPath>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActorRecord {
    pub id: String,
    pub is_ego: bool,
    /// Tags that hold for the whole scenario (actor type, initial state).
    pub persistent: BTreeSet<TagPath>,
    pub phases: Vec<Phase>,
}

impl ActorRecord {
    /// Persistent tags plus the tags of the last phase starting at or before
    /// `step`.
    pub fn tags_active_at(&self, step: u32) -> BTreeSet<TagPath> {
        let mut out = self.persistent.clone();
        if let Some(phase) = self.phases.iter().rev().find(|p| p.start <= step) {
            out.extend(phase.tags.iter().cloned());
        }
        out
    }

    /// Every tag the actor carries at any time.
    pub fn all_tags(&self) -> BTreeSet<TagPath> {
        let mut out = self.persistent.clone();
        for p in &self.phases {
            out.extend(p.tags.iter().cloned());
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioRecord {
    pub id: String,
    pub actors: Vec<ActorRecord>,
    pub static_tags: BTreeSet<TagPath>,
    pub condition_tags: BTreeSet<TagPath>,
    /// Free-text provenance.
    pub source: String,
}

impl ScenarioRecord {
    pub fn new(id: &str) -> ScenarioRecord {
        ScenarioRecord {
            id: id.to_string(),
            actors: Vec::new(),
            static_tags: BTreeSet::new(),
            condition_tags: BTreeSet::new(),
            source: String::new(),
        }
    }

    pub fn ego(&self) -> Option<&ActorRecord> {
        self.actors.iter().find(|a| a.is_ego)
    }

    pub fn actor(&self, id: &str) -> Option<&ActorRecord> {
        self.actors.iter().find(|a| a.id == id)
    }

    /// Every tag in the record, whatever its scope or time.
    pub fn all_tags(&self) -> BTreeSet<TagPath> {
        let mut out: BTreeSet<TagPath> = self.static_tags.union(&self.condition_tags).cloned().collect();
        for a in &self.actors {
            out.extend(a.all_tags());
        }
        out
    }

    /// Checks all record invariants against a registry.
    pub fn validate(&self, registry: &Registry) -> Result<(), ParseErrorKind> {
        let invalid = |m: String| ParseErrorKind::Invalid(m);
        if !is_identifier(&self.id) {
            return Err(invalid(format!("invalid scenario id {:?}", self.id)));
        }
        let check = |t: &TagPath, want: Scope, context: &'static str| -> Result<(), ParseErrorKind> {
            let scope = registry
                .scope_of(t)
                .filter(|_| registry.contains(t))
                .ok_or_else(|| invalid(format!("unresolved tag `{t}`")))?;
            if scope != want {
                return Err(ParseErrorKind::ScopeViolation {
                    tag: t.to_string(),
                    actual: scope,
                    context,
                });
            }
            Ok(())
        };
        let mut ids = BTreeSet::new();
        let mut ego: Option<&str> = None;
        for a in &self.actors {
            if !is_identifier(&a.id) {
                return Err(invalid(format!("invalid actor id {:?}", a.id)));
            }
            if !ids.insert(a.id.as_str()) {
                return Err(ParseErrorKind::DuplicateActor(a.id.clone()));
            }
            if a.is_ego {
                if let Some(first) = ego {
                    return Err(ParseErrorKind::TwoEgos {
                        first: first.to_string(),
                        second: a.id.clone(),
                    });
                }
                ego = Some(&a.id);
            }
            if a.phases.is_empty() {
                return Err(invalid(format!("actor `{}` has no phases", a.id)));
            }
            for t in &a.persistent {
                check(t, Scope::Actor, "actor tags")?;
            }
            let mut previous: Option<u32> = None;
            for p in &a.phases {
                if p.start >= MAX_STEP {
                    return Err(ParseErrorKind::StepOutOfRange(p.start as u64));
                }
                if let Some(prev) = previous {
                    if p.start <= prev {
                        return Err(ParseErrorKind::NonIncreasingStep {
                            previous: prev,
                            start: p.start,
                        });
                    }
                }
                previous = Some(p.start);
                if p.tags.is_empty() {
                    return Err(invalid(format!("phase {} of `{}` has no tags", p.start, a.id)));
                }
                for t in &p.tags {
                    check(t, Scope::Actor, "a phase")?;
                }
            }
        }
        for t in &self.static_tags {
            check(t, Scope::Static, "a static block")?;
        }
        for t in &self.condition_tags {
            check(t, Scope::Condition, "a conditions block")?;
        }
        Ok(())
    }
}

pub(crate) fn is_identifier(text: &str) -> bool {
    !text.is_empty() && text.chars().all(is_word_char)
}

/// Parses a document holding exactly one scenario.
pub fn parse_scenario(registry: &Registry, source: &str) -> Result<ScenarioRecord, ParseError> {
    let tokens = tokenize(source, true)?;
    let mut p = ScenarioParser {
        registry,
        cur: Cursor::new(tokens, source),
    };
    let record = p.scenario()?;
    if !p.cur.at_end() {
        return Err(ParseError::syntax(
            p.cur.span(),
            format!(
                "expected end of input after the scenario, found {}",
                p.cur.describe_next()
            ),
        ));
    }
    Ok(record)
}

struct ScenarioParser<'r> {
    registry: &'r Registry,
    cur: Cursor,
}

impl ScenarioParser<'_> {
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

    fn path_block(&mut self, scope: Scope, context: &'static str) -> Result<Vec<TagPath>, ParseError> {
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
                    out.push(resolve_token(self.registry, &t, &[scope], context)?);
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

    fn scenario(&mut self) -> Result<ScenarioRecord, ParseError> {
        let header = self.cur.span();
        if !self.cur.eat_word("scenario") {
            return Err(ParseError::syntax(
                header,
                format!("expected `scenario`, found {}", self.cur.describe_next()),
            ));
        }
        let id = match self.cur.next() {
            Some(Token { tok: Tok::Str(s), span }) => {
                if !is_identifier(&s) {
                    return Err(ParseError::syntax(span, format!("invalid scenario id {s:?}")));
                }
                s
            }
            other => {
                return Err(ParseError::syntax(
                    other.map(|t| t.span).unwrap_or(header),
                    "expected a quoted scenario id",
                ))
            }
        };
        let mut rec = ScenarioRecord::new(&id);
        let mut actor_spans: BTreeMap<String, Span> = BTreeMap::new();
        let mut ego_id: Option<String> = None;
        self.expect(Tok::LBrace)?;
        loop {
            let span = self.cur.span();
            let Some(token) = self.cur.next() else {
                return Err(ParseError::syntax(span, "unexpected end of input, expected `}`"));
            };
            match token.tok {
                Tok::RBrace => break,
                Tok::Word(ref w) if w == "source" => match self.cur.next() {
                    Some(Token { tok: Tok::Str(s), .. }) => rec.source = s,
                    other => {
                        return Err(ParseError::syntax(
                            other.map(|t| t.span).unwrap_or(span),
                            "expected a quoted source text",
                        ))
                    }
                },
                Tok::Word(ref w) if w == "static" => {
                    rec.static_tags
                        .extend(self.path_block(Scope::Static, "a static block")?);
                }
                Tok::Word(ref w) if w == "conditions" => {
                    rec.condition_tags
                        .extend(self.path_block(Scope::Condition, "a conditions block")?);
                }
                Tok::Word(ref w) if w == "actor" => {
                    let actor = self.actor(span)?;
                    if actor_spans.contains_key(&actor.id) {
                        return Err(ParseError::new(span, ParseErrorKind::DuplicateActor(actor.id)));
                    }
                    if actor.is_ego {
                        if let Some(first) = &ego_id {
                            return Err(ParseError::new(
                                span,
                                ParseErrorKind::TwoEgos {
                                    first: first.clone(),
                                    second: actor.id,
                                },
                            ));
                        }
                        ego_id = Some(actor.id.clone());
                    }
                    actor_spans.insert(actor.id.clone(), span);
                    rec.actors.push(actor);
                }
                other => {
                    return Err(ParseError::syntax(
                        token.span,
                        format!("expected `actor`, `static`, `conditions`, `source` or `}}`, found {other}"),
                    ))
                }
            }
        }
        Ok(rec)
    }

    fn actor(&mut self, header: Span) -> Result<ActorRecord, ParseError> {
        let id = match self.cur.next() {
            Some(Token { tok: Tok::Word(id), .. }) => id,
            other => {
                return Err(ParseError::syntax(
                    other.map(|t| t.span).unwrap_or(header),
                    "expected an actor id",
                ))
            }
        };
        let is_ego = self.cur.eat_word("ego");
        let mut actor = ActorRecord {
            id,
            is_ego,
            persistent: BTreeSet::new(),
            phases: Vec::new(),
        };
        self.expect(Tok::LBrace)?;
        loop {
            let span = self.cur.span();
            let Some(token) = self.cur.next() else {
                return Err(ParseError::syntax(span, "unexpected end of input, expected `}`"));
            };
            match token.tok {
                Tok::RBrace => break,
                Tok::Word(ref w) if w == "tags" => {
                    actor.persistent.extend(self.path_block(Scope::Actor, "actor tags")?);
                }
                Tok::Word(ref w) if w == "phase" => {
                    let step_span = self.cur.span();
                    let start: u64 = match self.cur.next() {
                        Some(Token { tok: Tok::Word(n), .. }) => n.parse().map_err(|_| {
                            ParseError::syntax(step_span, format!("expected a step number, found `{n}`"))
                        })?,
                        _ => return Err(ParseError::syntax(step_span, "expected a step number")),
                    };
                    if start >= MAX_STEP as u64 {
                        return Err(ParseError::new(step_span, ParseErrorKind::StepOutOfRange(start)));
                    }
                    let start = start as u32;
                    if let Some(prev) = actor.phases.last() {
                        if start <= prev.start {
                            return Err(ParseError::new(
                                step_span,
                                ParseErrorKind::NonIncreasingStep {
                                    previous: prev.start,
                                    start,
                                },
                            ));
                        }
                    }
                    let tags: BTreeSet<TagPath> = self.path_block(Scope::Actor, "a phase")?.into_iter().collect();
                    if tags.is_empty() {
                        return Err(ParseError::syntax(span, "a phase needs at least one tag"));
                    }
                    actor.phases.push(Phase { start, tags });
                }
                other => {
                    return Err(ParseError::syntax(
                        token.span,
                        format!("expected `tags`, `phase` or `}}`, found {other}"),
                    ))
                }
            }
        }
        if actor.phases.is_empty() {
            return Err(ParseError::new(
                header,
                ParseErrorKind::Invalid(format!("actor `{}` has no phases", actor.id)),
            ));
        }
        Ok(actor)
    }
}

fn push_block(out: &mut String, indent: &str, head: &str, tags: &BTreeSet<TagPath>) {
    if tags.is_empty() {
        return;
    }
    out.push_str(&format!("{indent}{head} {{\n"));
    for t in tags {
        out.push_str(&format!("{indent}  {t}\n"));
    }
    out.push_str(&format!("{indent}}}\n"));
}

/// Canonical multi-line text for a record. Actor order is kept.
pub fn serialize_scenario(record: &ScenarioRecord) -> String {
    let mut out = format!("scenario {} {{\n", quote(&record.id));
    if !record.source.is_empty() {
        out.push_str(&format!("  source {}\n", quote(&record.source)));
    }
    for a in &record.actors {
        out.push_str(&format!("  actor {}{} {{\n", a.id, if a.is_ego { " ego" } else { "" }));
        push_block(&mut out, "    ", "tags", &a.persistent);
        for p in &a.phases {
            push_block(&mut out, "    ", &format!("phase {}", p.start), &p.tags);
        }
        out.push_str("  }\n");
    }
    push_block(&mut out, "  ", "static", &record.static_tags);
    push_block(&mut out, "  ", "conditions", &record.condition_tags);
    out.push_str("}\n");
    out
}

/// Single-line form used by the scenario store. Strings are escaped, so the
/// result never contains a newline.
pub fn scenario_to_line(record: &ScenarioRecord) -> String {
    serialize_scenario(record)
        .lines()
        .map(str::trim)
        .collect::<Vec<_>>()
        .join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reg() -> Registry {
        Registry::builtin()
    }

    const CUT_IN: &str = r#"
        scenario "cutin" {
          source "highway recording"
          actor ego ego { phase 0 { longitudinal_activity:driving_forward } }
          actor v1 {
            tags { actor_type:vehicle/category_m initial_state:direction/same_as_ego }
            phase 0 { lateral_activity:changing_lane lead_vehicle:no_leader }
            phase 1 { lead_vehicle:leader }
          }
          static { road_layout:straight }
          conditions { weather:clear }
        }"#;

    #[test]
    fn parses_cut_in() {
        let r = parse_scenario(&reg(), CUT_IN).unwrap();
        assert_eq!(r.id, "cutin");
        assert_eq!(r.actors.len(), 2);
        assert_eq!(r.ego().unwrap().id, "ego");
        let v1 = r.actor("v1").unwrap();
        assert_eq!(v1.phases.len(), 2);
        assert!(r.validate(&reg()).is_ok());
    }

    #[test]
    fn tags_active_at_follows_phases() {
        let r = parse_scenario(&reg(), CUT_IN).unwrap();
        let v1 = r.actor("v1").unwrap();
        let text = |s: BTreeSet<TagPath>| s.into_iter().map(|t| t.to_string()).collect::<Vec<_>>();
        assert_eq!(
            text(v1.tags_active_at(0)),
            [
                "actor_type:vehicle/category_m",
                "initial_state:direction/same_as_ego",
                "lateral_activity:changing_lane",
                "lead_vehicle:no_leader"
            ]
        );
        assert_eq!(
            text(v1.tags_active_at(1)),
            [
                "actor_type:vehicle/category_m",
                "initial_state:direction/same_as_ego",
                "lead_vehicle:leader"
            ]
        );
        assert_eq!(v1.tags_active_at(500), v1.tags_active_at(1));

        let mut late = v1.clone();
        late.phases[0].start = 3;
        late.phases[1].start = 5;
        assert_eq!(late.tags_active_at(2), late.persistent);
    }

    #[test]
    fn ordering_error() {
        let src = r#"scenario "s" { actor a { phase 2 { lead_vehicle:leader } phase 2 { lead_vehicle:no_leader } } }"#;
        let e = parse_scenario(&reg(), src).unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::NonIncreasingStep { previous: 2, start: 2 });
        assert_eq!(e.span.col, 64);
    }

    #[test]
    fn structural_errors() {
        let r = reg();
        let e = parse_scenario(
            &r,
            r#"scenario "s" { actor a { phase 0 { lead_vehicle:leader } } actor a { phase 0 { lead_vehicle:leader } } }"#,
        )
        .unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::DuplicateActor("a".into()));
        let e = parse_scenario(
            &r,
            r#"scenario "s" { actor a ego { phase 0 { lead_vehicle:leader } } actor b ego { phase 0 { lead_vehicle:leader } } }"#,
        )
        .unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::TwoEgos { .. }));
        let e = parse_scenario(&r, r#"scenario "s" { static { weather:rain } }"#).unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::ScopeViolation { .. }));
        let e = parse_scenario(&r, r#"scenario "s" { conditions { road_layout:straight } }"#).unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::ScopeViolation { .. }));
        let e = parse_scenario(&r, r#"scenario "s" { actor a { phase 0 { weather:rain } } }"#).unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::ScopeViolation { .. }));
        let e = parse_scenario(&r, r#"scenario "s" { actor a { tags { actor_type:vehicle } } }"#).unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::Invalid(_)));
        let e = parse_scenario(
            &r,
            r#"scenario "s" { actor a { phase 1000000 { lead_vehicle:leader } } }"#,
        )
        .unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::StepOutOfRange(1_000_000));
        let e = parse_scenario(&r, r#"scenario "a b" {}"#).unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::Syntax(_)));
        let e = parse_scenario(&r, r#"scenario "s" {} scenario "t" {}"#).unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::Syntax(_)));
        let e = parse_scenario(&r, r#"scenario "s" { actor a { phase 0 { road_layout:bogus } } }"#).unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::Unresolved(_)));
    }

    #[test]
    fn round_trip_and_single_line() {
        let mut r = parse_scenario(&reg(), CUT_IN).unwrap();
        r.source = "line one\nline \"two\"".into();
        let text = serialize_scenario(&r);
        assert_eq!(parse_scenario(&reg(), &text).unwrap(), r);
        let line = scenario_to_line(&r);
        assert!(!line.contains('\n'));
        assert_eq!(parse_scenario(&reg(), &line).unwrap(), r);
    }

    #[test]
    fn empty_scenario_is_valid() {
        let r = parse_scenario(&reg(), r#"scenario "nothing" {}"#).unwrap();
        assert!(r.actors.is_empty());
        assert_eq!(serialize_scenario(&r), "scenario \"nothing\" {\n}\n");
    }
}
