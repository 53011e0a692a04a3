//! Category-to-category reasoning.
//!
//! A category *includes* another when it comprises every scenario the other
//! comprises. Two procedures decide this:
//!
//! * [`includes_syntactic`] looks for a requirement mapping showing that every
//!   requirement of the larger category is implied by one of the smaller. It
//!   is sound but incomplete, so it answers `Includes` or `Unknown`.
//! * [`includes_semantic`] enumerates every scenario record in a bounded
//!   universe and looks for a counterexample. Its answers hold relative to
//!   the bounds only.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::ops::ControlFlow;

use thiserror::Error;

use crate::category::{ActorGroup, ScenarioCategory, Snapshot, Subject};
use crate::matcher::{comprises, verify_witness};
use crate::scenario::{serialize_scenario, ActorRecord, Phase, ScenarioRecord};
use crate::taxonomy::{Registry, Scope, TagPath};

/// Largest universe [`includes_semantic`] and [`is_satisfiable`] will search.
pub const MAX_UNIVERSE: u128 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AlgebraError {
    #[error("universe of {size} records exceeds the limit of {MAX_UNIVERSE}")]
    BoundsTooLarge { size: u128 },
    #[error("invalid bounds: {0}")]
    InvalidBounds(String),
    #[error("cannot conjoin two categories that both have a sequence")]
    BothSequenced,
    #[error("cannot conjoin two categories that both have non-ego actor groups")]
    BothGrouped,
    #[error("cannot conjoin: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InclusionStatus {
    Includes,
    NotIncludes,
    Unknown,
}

impl InclusionStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            InclusionStatus::Includes => "INCLUDES",
            InclusionStatus::NotIncludes => "NOT_INCLUDES",
            InclusionStatus::Unknown => "UNKNOWN",
        }
    }
}

/// Maps each requirement of the larger category to the requirement of the
/// smaller one that implies it.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct InclusionProof {
    pub ungrouped: BTreeMap<TagPath, TagPath>,
    /// Larger group id to smaller group id.
    pub group_map: BTreeMap<String, String>,
    pub group_requirements: BTreeMap<(String, TagPath), TagPath>,
    /// For each larger snapshot, the index of the smaller snapshot it maps to.
    pub snapshot_map: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InclusionVerdict {
    pub status: InclusionStatus,
    pub proof: Option<InclusionProof>,
    pub counterexample: Option<ScenarioRecord>,
    /// How the verdict was reached, including bounds for semantic checks.
    pub note: String,
}

impl InclusionVerdict {
    fn unknown(note: &str) -> InclusionVerdict {
        InclusionVerdict {
            status: InclusionStatus::Unknown,
            proof: None,
            counterexample: None,
            note: note.to_string(),
        }
    }
}

fn first_subsumed<'a>(general: &TagPath, pool: impl IntoIterator<Item = &'a TagPath>) -> Option<&'a TagPath> {
    pool.into_iter().filter(|t| general.subsumes(t)).min()
}

/// Sound syntactic inclusion check.
pub fn includes_syntactic(
    _registry: &Registry,
    larger: &ScenarioCategory,
    smaller: &ScenarioCategory,
) -> InclusionVerdict {
    const NOTE: &str = "syntactic requirement mapping";
    let mut proof = InclusionProof::default();
    for req in &larger.ungrouped {
        match first_subsumed(req, &smaller.ungrouped) {
            Some(s) => {
                proof.ungrouped.insert(req.clone(), s.clone());
            }
            None => return InclusionVerdict::unknown(NOTE),
        }
    }

    let large_groups: Vec<&ActorGroup> = larger.groups.values().collect();
    let candidates: Vec<Vec<&ActorGroup>> = large_groups
        .iter()
        .map(|lg| {
            smaller
                .groups
                .values()
                .filter(|sg| sg.is_ego == lg.is_ego)
                .filter(|sg| {
                    lg.requirements
                        .iter()
                        .all(|r| first_subsumed(r, &sg.requirements).is_some())
                })
                .collect()
        })
        .collect();
    if candidates.iter().any(Vec::is_empty) {
        return InclusionVerdict::unknown(NOTE);
    }

    let mut chosen: Vec<&ActorGroup> = Vec::with_capacity(large_groups.len());
    let found = map_groups(0, &candidates, &mut chosen, &mut |chosen| {
        let map: BTreeMap<&str, &str> = large_groups
            .iter()
            .zip(chosen)
            .map(|(l, s)| (l.id.as_str(), s.id.as_str()))
            .collect();
        embed_sequence(&larger.sequence, &smaller.sequence, &map)
    });
    let Some(snapshot_map) = found else {
        return InclusionVerdict::unknown(NOTE);
    };
    for (lg, sg) in large_groups.iter().zip(&chosen) {
        proof.group_map.insert(lg.id.clone(), sg.id.clone());
        for r in &lg.requirements {
            let s = first_subsumed(r, &sg.requirements).expect("candidate filter checked this");
            proof.group_requirements.insert((lg.id.clone(), r.clone()), s.clone());
        }
    }
    proof.snapshot_map = snapshot_map;
    InclusionVerdict {
        status: InclusionStatus::Includes,
        proof: Some(proof),
        counterexample: None,
        note: NOTE.to_string(),
    }
}

fn map_groups<'a, T>(
    depth: usize,
    candidates: &[Vec<&'a ActorGroup>],
    chosen: &mut Vec<&'a ActorGroup>,
    accept: &mut dyn FnMut(&[&'a ActorGroup]) -> Option<T>,
) -> Option<T> {
    if depth == candidates.len() {
        return accept(chosen);
    }
    for &c in &candidates[depth] {
        if chosen.iter().any(|g| g.id == c.id) {
            continue;
        }
        chosen.push(c);
        if let Some(found) = map_groups(depth + 1, candidates, chosen, accept) {
            return Some(found);
        }
        chosen.pop();
    }
    None
}

/// Order-preserving embedding of the larger sequence into the smaller one,
/// earliest match first.
fn embed_sequence(larger: &[Snapshot], smaller: &[Snapshot], map: &BTreeMap<&str, &str>) -> Option<Vec<usize>> {
    let covers = |l: &Snapshot, s: &Snapshot| {
        l.entries.iter().all(|(subject, req)| {
            let target = match subject {
                Subject::Group(g) => Subject::Group(map[g.as_str()].to_string()),
                Subject::Static => Subject::Static,
            };
            first_subsumed(req, s.for_subject(&target)).is_some()
        })
    };
    let mut out = Vec::with_capacity(larger.len());
    let mut next = 0;
    for l in larger {
        let j = (next..smaller.len()).find(|&j| covers(l, &smaller[j]))?;
        out.push(j);
        next = j + 1;
    }
    Some(out)
}

/// The finite domain searched by the semantic procedures.
///
/// A record in the universe has between 0 and `max_actors` actors named
/// `a1`, `a2`, ...; when it has actors, `a1` may or may not be the ego. Each
/// actor has 1 to `max_phases` phases, the first starting at step 0 and the
/// rest at strictly increasing steps in `1..=max_actors * (max_phases - 1)`,
/// which realizes every interleaving of phase changes across actors. Phase
/// tags are nonempty subsets of the actor pool; persistent tags are empty.
/// Static and condition tags are arbitrary subsets of their pools.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UniverseBounds {
    pub max_actors: usize,
    pub max_phases: usize,
    pub tag_pool: BTreeSet<TagPath>,
    /// Trees of which a phase (or the static/condition set) carries at most
    /// one tag.
    pub exclusive: BTreeSet<String>,
}

impl UniverseBounds {
    pub fn new(max_actors: usize, max_phases: usize, tag_pool: BTreeSet<TagPath>) -> UniverseBounds {
        UniverseBounds {
            max_actors,
            max_phases,
            tag_pool,
            exclusive: BTreeSet::new(),
        }
    }

    /// Pool made of every tag mentioned by `categories`. If none of them is
    /// actor-scoped but some category declares a group, `actor_type:vehicle`
    /// (or the first actor tree's root) is added so actors can exist.
    pub fn for_categories(
        registry: &Registry,
        categories: &[&ScenarioCategory],
        max_actors: usize,
        max_phases: usize,
    ) -> UniverseBounds {
        let mut pool: BTreeSet<TagPath> = categories.iter().flat_map(|c| c.tags()).collect();
        let has_actor = pool.iter().any(|t| registry.scope_of(t) == Some(Scope::Actor));
        let has_groups = categories.iter().any(|c| !c.groups.is_empty());
        if !has_actor && has_groups {
            let filler = registry.resolve("actor_type:vehicle").ok().or_else(|| {
                registry
                    .trees()
                    .iter()
                    .find(|t| t.scope == Scope::Actor)
                    .map(|t| TagPath::root(&t.id))
            });
            pool.extend(filler);
        }
        UniverseBounds::new(max_actors, max_phases, pool)
    }

    pub fn describe(&self) -> String {
        let pool: Vec<String> = self.tag_pool.iter().map(|t| t.to_string()).collect();
        let mut out = format!(
            "bounded: max_actors={} max_phases={} pool=[{}]",
            self.max_actors,
            self.max_phases,
            pool.join(" ")
        );
        if !self.exclusive.is_empty() {
            let ex: Vec<&str> = self.exclusive.iter().map(String::as_str).collect();
            let _ = write!(out, " exclusive=[{}]", ex.join(" "));
        }
        out
    }
}

/// Precomputed enumeration of a bounded universe.
struct Universe {
    actor_options: Vec<Vec<Phase>>,
    static_sets: Vec<BTreeSet<TagPath>>,
    condition_sets: Vec<BTreeSet<TagPath>>,
    max_actors: usize,
}

fn respects_exclusive(tags: &BTreeSet<TagPath>, exclusive: &BTreeSet<String>) -> bool {
    let mut seen = BTreeSet::new();
    tags.iter()
        .filter(|t| exclusive.contains(t.tree()))
        .all(|t| seen.insert(t.tree()))
}

/// Subsets of `pool` in binary-counting order, skipping the empty set when
/// `nonempty` is set.
fn subsets(pool: &[TagPath], nonempty: bool, exclusive: &BTreeSet<String>) -> Vec<BTreeSet<TagPath>> {
    let start = usize::from(nonempty);
    (start..1usize << pool.len())
        .map(|mask| {
            pool.iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, t)| t.clone())
                .collect::<BTreeSet<TagPath>>()
        })
        .filter(|s| respects_exclusive(s, exclusive))
        .collect()
}

/// Strictly increasing `k`-combinations of `1..=n`, lexicographic.
fn combinations(n: u32, k: usize) -> Vec<Vec<u32>> {
    fn go(from: u32, n: u32, k: usize, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for v in from..=n {
            cur.push(v);
            go(v + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(1, n, k, &mut Vec::new(), &mut out);
    out
}

fn binomial(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    (0..k).fold(1u128, |acc, i| acc * (n - i) / (i + 1))
}

impl Universe {
    fn new(registry: &Registry, bounds: &UniverseBounds) -> Result<Universe, AlgebraError> {
        if bounds.max_actors < 1 {
            return Err(AlgebraError::InvalidBounds("max_actors must be at least 1".into()));
        }
        if bounds.max_phases < 1 {
            return Err(AlgebraError::InvalidBounds("max_phases must be at least 1".into()));
        }
        let mut by_scope: BTreeMap<Scope, Vec<TagPath>> = BTreeMap::new();
        for t in &bounds.tag_pool {
            if !registry.contains(t) {
                return Err(AlgebraError::InvalidBounds(format!("pool tag `{t}` does not resolve")));
            }
            by_scope
                .entry(registry.scope_of(t).expect("resolved"))
                .or_default()
                .push(t.clone());
        }
        let actor_pool = by_scope.remove(&Scope::Actor).unwrap_or_default();
        let static_pool = by_scope.remove(&Scope::Static).unwrap_or_default();
        let condition_pool = by_scope.remove(&Scope::Condition).unwrap_or_default();
        if actor_pool.len() + static_pool.len() + condition_pool.len() > 40 {
            return Err(AlgebraError::BoundsTooLarge { size: u128::MAX });
        }

        // Size check before building anything.
        let change_points = (bounds.max_actors * (bounds.max_phases - 1)) as u128;
        let phase_sets = (1u128 << actor_pool.len()) - 1;
        let mut per_actor: u128 = 0;
        for k in 1..=bounds.max_phases as u128 {
            per_actor = per_actor
                .saturating_add(binomial(change_points, k - 1).saturating_mul(phase_sets.saturating_pow(k as u32)));
        }
        let mut records: u128 = 1;
        let mut power: u128 = 1;
        for _ in 1..=bounds.max_actors {
            power = power.saturating_mul(per_actor);
            records = records.saturating_add(power.saturating_mul(2));
        }
        let size = records
            .saturating_mul(1u128 << static_pool.len())
            .saturating_mul(1u128 << condition_pool.len());
        if size > MAX_UNIVERSE {
            return Err(AlgebraError::BoundsTooLarge { size });
        }

        let phase_sets = subsets(&actor_pool, true, &bounds.exclusive);
        let mut actor_options = Vec::new();
        for k in 1..=bounds.max_phases {
            for starts in combinations(change_points as u32, k - 1) {
                let starts: Vec<u32> = std::iter::once(0).chain(starts).collect();
                // Mixed-radix count over phase tag sets, last phase fastest.
                let radix = phase_sets.len();
                let total = radix.pow(k as u32);
                for m in 0..total {
                    let mut rest = m;
                    let mut phases: Vec<Phase> = Vec::with_capacity(k);
                    for &start in starts.iter().rev() {
                        phases.push(Phase {
                            start,
                            tags: phase_sets[rest % radix].clone(),
                        });
                        rest /= radix;
                    }
                    phases.reverse();
                    actor_options.push(phases);
                }
            }
        }
        Ok(Universe {
            actor_options,
            static_sets: subsets(&static_pool, false, &bounds.exclusive),
            condition_sets: subsets(&condition_pool, false, &bounds.exclusive),
            max_actors: bounds.max_actors,
        })
    }

    /// Visits every record in enumeration order until `visit` breaks.
    fn for_each<T>(&self, mut visit: impl FnMut(&ScenarioRecord) -> ControlFlow<T>) -> Option<T> {
        let mut counter = 0usize;
        for n in 0..=self.max_actors {
            if n > 0 && self.actor_options.is_empty() {
                break;
            }
            for st in &self.static_sets {
                for cond in &self.condition_sets {
                    let egos: &[bool] = if n == 0 { &[false] } else { &[false, true] };
                    for &ego in egos {
                        let mut idx = vec![0usize; n];
                        loop {
                            counter += 1;
                            let mut rec = ScenarioRecord::new(&format!("u{counter}"));
                            rec.static_tags = st.clone();
                            rec.condition_tags = cond.clone();
                            rec.actors = idx
                                .iter()
                                .enumerate()
                                .map(|(a, &o)| ActorRecord {
                                    id: format!("a{}", a + 1),
                                    is_ego: ego && a == 0,
                                    persistent: BTreeSet::new(),
                                    phases: self.actor_options[o].clone(),
                                })
                                .collect();
                            if let ControlFlow::Break(found) = visit(&rec) {
                                return Some(found);
                            }
                            // Odometer over actor options, last actor fastest.
                            let mut pos = n;
                            let mut done = true;
                            while pos > 0 {
                                pos -= 1;
                                idx[pos] += 1;
                                if idx[pos] < self.actor_options.len() {
                                    done = false;
                                    break;
                                }
                                idx[pos] = 0;
                            }
                            if done {
                                break;
                            }
                        }
                    }
                }
            }
        }
        None
    }
}

/// Visits every record of the bounded universe in enumeration order.
pub fn enumerate_universe<T>(
    registry: &Registry,
    bounds: &UniverseBounds,
    visit: impl FnMut(&ScenarioRecord) -> ControlFlow<T>,
) -> Result<Option<T>, AlgebraError> {
    Ok(Universe::new(registry, bounds)?.for_each(visit))
}

/// Bounded semantic inclusion check. Returns `NotIncludes` with the first
/// counterexample in enumeration order, or `Includes` relative to `bounds`.
pub fn includes_semantic(
    registry: &Registry,
    larger: &ScenarioCategory,
    smaller: &ScenarioCategory,
    bounds: &UniverseBounds,
) -> Result<InclusionVerdict, AlgebraError> {
    let found = enumerate_universe(registry, bounds, |rec| {
        match comprises(registry, smaller, rec) {
            Some(w) if comprises(registry, larger, rec).is_none() => {
                // Counterexamples are re-verified before they leave this function.
                match verify_witness(smaller, rec, &w) {
                    Ok(()) => ControlFlow::Break(rec.clone()),
                    Err(e) => panic!("matcher produced an invalid witness: {e}"),
                }
            }
            _ => ControlFlow::Continue(()),
        }
    })?;
    Ok(match found {
        Some(cex) => InclusionVerdict {
            status: InclusionStatus::NotIncludes,
            proof: None,
            counterexample: Some(cex),
            note: bounds.describe(),
        },
        None => InclusionVerdict {
            status: InclusionStatus::Includes,
            proof: None,
            counterexample: None,
            note: bounds.describe(),
        },
    })
}

/// First record of the bounded universe that `category` comprises.
///
/// When the universe is too large to enumerate, the record built directly
/// from the category's requirements is tried instead; it is returned if it
/// lies inside the bounds and the category comprises it.
pub fn is_satisfiable(
    registry: &Registry,
    category: &ScenarioCategory,
    bounds: &UniverseBounds,
) -> Result<Option<ScenarioRecord>, AlgebraError> {
    let searched = enumerate_universe(registry, bounds, |rec| {
        if comprises(registry, category, rec).is_some() {
            ControlFlow::Break(rec.clone())
        } else {
            ControlFlow::Continue(())
        }
    });
    match searched {
        Err(e @ AlgebraError::BoundsTooLarge { .. }) => match canonical_record(registry, category, bounds) {
            Some(rec) if comprises(registry, category, &rec).is_some() => Ok(Some(rec)),
            _ => Err(e),
        },
        other => other,
    }
}

/// The smallest-effort record for a category: one actor per group (the ego
/// first), one phase per snapshot holding the group's requirements and that
/// snapshot's entries, and every static or condition requirement present.
/// `None` when the record falls outside `bounds`.
fn canonical_record(
    registry: &Registry,
    category: &ScenarioCategory,
    bounds: &UniverseBounds,
) -> Option<ScenarioRecord> {
    let mut rec = ScenarioRecord::new("canonical");
    let mut env: BTreeSet<TagPath> = category.ungrouped.clone();
    for snap in &category.sequence {
        env.extend(snap.for_subject(&Subject::Static).cloned());
    }
    let mut loose: BTreeSet<TagPath> = BTreeSet::new();
    for t in env {
        match registry.scope_of(&t)? {
            Scope::Static => {
                rec.static_tags.insert(t);
            }
            Scope::Condition => {
                rec.condition_tags.insert(t);
            }
            Scope::Actor => {
                loose.insert(t);
            }
        }
    }

    let mut groups: Vec<&ActorGroup> = category.groups.values().collect();
    groups.sort_by_key(|g| !g.is_ego);
    let filler = bounds
        .tag_pool
        .iter()
        .find(|t| registry.scope_of(t) == Some(Scope::Actor))?;
    let mut actors: Vec<(bool, Vec<Phase>)> = Vec::new();
    for g in &groups {
        let subject = Subject::Group(g.id.clone());
        let mut phases: Vec<Phase> = Vec::new();
        let steps = category.sequence.len().max(1);
        for i in 0..steps {
            let mut tags = g.requirements.clone();
            if let Some(snap) = category.sequence.get(i) {
                tags.extend(snap.for_subject(&subject).cloned());
            }
            if i > 0 && tags == g.requirements {
                continue;
            }
            if tags.is_empty() {
                tags.insert(filler.clone());
            }
            phases.push(Phase { start: i as u32, tags });
        }
        actors.push((g.is_ego, phases));
    }
    if !loose.is_empty() {
        match actors.first_mut() {
            Some((_, phases)) => phases[0].tags.extend(loose),
            None => actors.push((false, vec![Phase { start: 0, tags: loose }])),
        }
    }
    rec.actors = actors
        .into_iter()
        .enumerate()
        .map(|(i, (is_ego, phases))| ActorRecord {
            id: format!("a{}", i + 1),
            is_ego,
            persistent: BTreeSet::new(),
            phases,
        })
        .collect();
    in_universe(registry, &rec, bounds).then_some(rec)
}

fn in_universe(registry: &Registry, rec: &ScenarioRecord, bounds: &UniverseBounds) -> bool {
    let last_start = (bounds.max_actors * bounds.max_phases.saturating_sub(1)) as u32;
    let pooled = |tags: &BTreeSet<TagPath>| {
        tags.iter().all(|t| bounds.tag_pool.contains(t)) && respects_exclusive(tags, &bounds.exclusive)
    };
    rec.actors.len() <= bounds.max_actors
        && rec.actors.iter().skip(1).all(|a| !a.is_ego)
        && rec.actors.iter().all(|a| {
            a.phases.len() <= bounds.max_phases
                && a.phases.first().is_some_and(|p| p.start == 0)
                && a.phases
                    .iter()
                    .all(|p| p.start <= last_start && !p.tags.is_empty() && pooled(&p.tags))
        })
        && pooled(&rec.static_tags)
        && pooled(&rec.condition_tags)
        && rec.validate(registry).is_ok()
}

/// A category comprising exactly the scenarios both inputs comprise.
///
/// Ungrouped requirements are unioned and ego groups merged. Non-ego groups
/// and the sequence are taken from whichever input has them; when both
/// inputs have a sequence, or both have non-ego groups, there is no exact
/// conjunction in the language and the call is refused.
pub fn conjoin(
    _registry: &Registry,
    a: &ScenarioCategory,
    b: &ScenarioCategory,
) -> Result<ScenarioCategory, AlgebraError> {
    if !a.sequence.is_empty() && !b.sequence.is_empty() {
        return Err(AlgebraError::BothSequenced);
    }
    let non_ego = |c: &ScenarioCategory| c.groups.values().any(|g| !g.is_ego);
    if non_ego(a) && non_ego(b) {
        return Err(AlgebraError::BothGrouped);
    }
    let mut out = ScenarioCategory::universal(&format!("{} & {}", a.name, b.name));
    out.ungrouped = a.ungrouped.union(&b.ungrouped).cloned().collect();
    for src in [a, b] {
        for g in src.groups.values() {
            let slot = out.groups.entry(g.id.clone()).or_insert_with(|| ActorGroup::new(&g.id));
            if slot.is_ego != g.is_ego {
                return Err(AlgebraError::Invalid(format!("group `{}` differs in ego flag", g.id)));
            }
            slot.requirements.extend(g.requirements.iter().cloned());
        }
        if !src.sequence.is_empty() {
            out.sequence = src.sequence.clone();
        }
    }
    Ok(out)
}

/// Text rendering of a verdict.
pub fn render_verdict(verdict: &InclusionVerdict, larger: &str, smaller: &str) -> String {
    let mut out = format!("{} ({})\n", verdict.status.as_str(), verdict.note);
    let _ = writeln!(out, "larger: {larger:?}");
    let _ = writeln!(out, "smaller: {smaller:?}");
    if let Some(p) = &verdict.proof {
        out.push_str("proof:\n");
        for (l, s) in &p.ungrouped {
            let _ = writeln!(out, "  tags: {l} <= {s}");
        }
        for (l, s) in &p.group_map {
            let _ = writeln!(out, "  group {l} -> {s}");
        }
        for ((g, l), s) in &p.group_requirements {
            let _ = writeln!(out, "  actor {g}: {l} <= {s}");
        }
        for (i, j) in p.snapshot_map.iter().enumerate() {
            let _ = writeln!(out, "  step {} -> step {}", i + 1, j + 1);
        }
    }
    if let Some(c) = &verdict.counterexample {
        out.push_str("counterexample:\n");
        out.push_str(&serialize_scenario(c));
    }
    out
}
