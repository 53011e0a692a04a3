//! Decides whether a scenario category comprises a scenario record.
//!
//! The answer comes with a [`MatchWitness`]: the binding of actor groups to
//! actors, the step assigned to each sequence snapshot, and for every
//! requirement the concrete tag that satisfied it. [`verify_witness`] checks
//! a witness without re-running the search.
//!
//! Semantics:
//!
//! * ungrouped static/condition requirements must be met by the record's
//!   static/condition tags;
//! * each ungrouped actor requirement must be met by *some* actor at *some*
//!   time, independently of the others;
//! * groups are bound injectively to actors, the `ego` group to the ego actor
//!   and every other group to a non-ego actor, and a group's requirements
//!   must each hold for its actor at some time;
//! * snapshots are assigned strictly increasing steps at which all their
//!   entries hold.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::category::{ScenarioCategory, Subject};
use crate::lexer::quote;
use crate::scenario::{ActorRecord, ScenarioRecord};
use crate::taxonomy::{Registry, TagPath};

/// Where a requirement sits in a category.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Site {
    Ungrouped(TagPath),
    Group(String, TagPath),
    /// Zero-based snapshot index.
    Step(usize, Subject, TagPath),
}

impl Site {
    pub fn requirement(&self) -> &TagPath {
        match self {
            Site::Ungrouped(t) | Site::Group(_, t) | Site::Step(_, _, t) => t,
        }
    }
}

/// What supplied a satisfying tag.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Holder {
    Actor(String),
    Static,
    Condition,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Satisfaction {
    pub holder: Holder,
    pub tag: TagPath,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchWitness {
    /// Group id to actor id; injective.
    pub binding: BTreeMap<String, String>,
    /// One strictly increasing step per snapshot.
    pub snapshot_steps: Vec<u32>,
    pub satisfied_by: BTreeMap<Site, Satisfaction>,
}

/// Returns a tag from `available` that `requirement` subsumes, preferring the
/// smallest canonical text.
pub fn requirement_satisfied<'a, I>(_registry: &Registry, requirement: &TagPath, available: I) -> Option<TagPath>
where
    I: IntoIterator<Item = &'a TagPath>,
{
    satisfied_by(requirement, available).cloned()
}

fn satisfied_by<'a, I>(requirement: &TagPath, available: I) -> Option<&'a TagPath>
where
    I: IntoIterator<Item = &'a TagPath>,
{
    available.into_iter().filter(|t| requirement.subsumes(t)).min()
}

struct ActorView<'a> {
    record: &'a ActorRecord,
    all: BTreeSet<TagPath>,
}

/// Searches for a witness that `category` comprises `scenario`.
///
/// Groups are tried in id order and actors in id order, and snapshots take
/// the earliest feasible step, so the result is deterministic.
pub fn comprises(_registry: &Registry, category: &ScenarioCategory, scenario: &ScenarioRecord) -> Option<MatchWitness> {
    let mut actors: Vec<ActorView> = scenario
        .actors
        .iter()
        .map(|a| ActorView {
            record: a,
            all: a.all_tags(),
        })
        .collect();
    actors.sort_by(|a, b| a.record.id.cmp(&b.record.id));

    let mut satisfied = BTreeMap::new();

    for req in &category.ungrouped {
        let sat = if let Some(t) = satisfied_by(req, &scenario.static_tags) {
            Satisfaction {
                holder: Holder::Static,
                tag: t.clone(),
            }
        } else if let Some(t) = satisfied_by(req, &scenario.condition_tags) {
            Satisfaction {
                holder: Holder::Condition,
                tag: t.clone(),
            }
        } else {
            actors.iter().find_map(|a| {
                satisfied_by(req, &a.all).map(|t| Satisfaction {
                    holder: Holder::Actor(a.record.id.clone()),
                    tag: t.clone(),
                })
            })?
        };
        satisfied.insert(Site::Ungrouped(req.clone()), sat);
    }

    // Per-group feasibility first: which actors could each group bind to?
    let groups: Vec<_> = category.groups.values().collect();
    let mut candidates: Vec<Vec<usize>> = Vec::with_capacity(groups.len());
    for g in &groups {
        let c: Vec<usize> = actors
            .iter()
            .enumerate()
            .filter(|(_, a)| a.record.is_ego == g.is_ego)
            .filter(|(_, a)| g.requirements.iter().all(|r| satisfied_by(r, &a.all).is_some()))
            .map(|(i, _)| i)
            .collect();
        if c.is_empty() {
            return None;
        }
        candidates.push(c);
    }

    let mut chosen = vec![usize::MAX; groups.len()];
    let mut used = vec![false; actors.len()];
    let steps = bind(0, &candidates, &mut chosen, &mut used, &mut |chosen| {
        let bound: BTreeMap<&str, &ActorRecord> = groups
            .iter()
            .zip(chosen)
            .map(|(g, &i)| (g.id.as_str(), actors[i].record))
            .collect();
        assign_steps(category, scenario, &bound)
    })?;

    let mut binding = BTreeMap::new();
    for (g, &i) in groups.iter().zip(&chosen) {
        let actor = &actors[i];
        binding.insert(g.id.clone(), actor.record.id.clone());
        for req in &g.requirements {
            let t = satisfied_by(req, &actor.all).expect("candidate filter checked this");
            satisfied.insert(
                Site::Group(g.id.clone(), req.clone()),
                Satisfaction {
                    holder: Holder::Actor(actor.record.id.clone()),
                    tag: t.clone(),
                },
            );
        }
    }
    for (i, (snap, &step)) in category.sequence.iter().zip(&steps).enumerate() {
        for (subject, req) in &snap.entries {
            let sat = match subject {
                Subject::Group(g) => {
                    let actor = scenario.actor(&binding[g]).expect("bound actor exists");
                    let active = actor.tags_active_at(step);
                    Satisfaction {
                        holder: Holder::Actor(actor.id.clone()),
                        tag: satisfied_by(req, &active)
                            .expect("step assignment checked this")
                            .clone(),
                    }
                }
                Subject::Static => static_satisfaction(req, scenario).expect("step assignment checked this"),
            };
            satisfied.insert(Site::Step(i, subject.clone(), req.clone()), sat);
        }
    }

    Some(MatchWitness {
        binding,
        snapshot_steps: steps,
        satisfied_by: satisfied,
    })
}

fn static_satisfaction(req: &TagPath, scenario: &ScenarioRecord) -> Option<Satisfaction> {
    if let Some(t) = satisfied_by(req, &scenario.static_tags) {
        return Some(Satisfaction {
            holder: Holder::Static,
            tag: t.clone(),
        });
    }
    satisfied_by(req, &scenario.condition_tags).map(|t| Satisfaction {
        holder: Holder::Condition,
        tag: t.clone(),
    })
}

/// Backtracking over injective group-to-actor assignments. `accept` is called
/// on each complete assignment and may reject it.
fn bind<T>(
    depth: usize,
    candidates: &[Vec<usize>],
    chosen: &mut [usize],
    used: &mut [bool],
    accept: &mut dyn FnMut(&[usize]) -> Option<T>,
) -> Option<T> {
    if depth == candidates.len() {
        return accept(chosen);
    }
    for &a in &candidates[depth] {
        if used[a] {
            continue;
        }
        used[a] = true;
        chosen[depth] = a;
        if let Some(found) = bind(depth + 1, candidates, chosen, used, accept) {
            return Some(found);
        }
        used[a] = false;
    }
    None
}

fn snapshot_holds_at(
    snap: &crate::category::Snapshot,
    scenario: &ScenarioRecord,
    bound: &BTreeMap<&str, &ActorRecord>,
    step: u32,
) -> bool {
    snap.entries.iter().all(|(subject, req)| match subject {
        Subject::Group(g) => {
            let active = bound[g.as_str()].tags_active_at(step);
            satisfied_by(req, &active).is_some()
        }
        Subject::Static => static_satisfaction(req, scenario).is_some(),
    })
}

/// Greedy earliest-step embedding of the snapshot sequence. Taking the
/// earliest feasible step for each snapshot never rules out a later one, so
/// this finds an assignment whenever one exists.
fn assign_steps(
    category: &ScenarioCategory,
    scenario: &ScenarioRecord,
    bound: &BTreeMap<&str, &ActorRecord>,
) -> Option<Vec<u32>> {
    let mut out = Vec::with_capacity(category.sequence.len());
    let mut lower = 0u32;
    for snap in &category.sequence {
        // Active tags only change at phase starts, so the earliest feasible
        // step is `lower` or one of the involved actors' phase starts.
        let mut points: BTreeSet<u32> = BTreeSet::from([lower]);
        for (subject, _) in &snap.entries {
            if let Subject::Group(g) = subject {
                points.extend(bound[g.as_str()].phases.iter().map(|p| p.start).filter(|&s| s > lower));
            }
        }
        let step = points
            .into_iter()
            .find(|&t| snapshot_holds_at(snap, scenario, bound, t))?;
        out.push(step);
        lower = step + 1;
    }
    Some(out)
}

/// All categories that comprise `scenario`, in input order.
pub fn comprising_categories<'c>(
    registry: &Registry,
    categories: &'c [ScenarioCategory],
    scenario: &ScenarioRecord,
) -> Vec<(&'c str, MatchWitness)> {
    categories
        .iter()
        .filter_map(|c| comprises(registry, c, scenario).map(|w| (c.name.as_str(), w)))
        .collect()
}

/// Independently re-checks a witness against the comprise semantics.
pub fn verify_witness(
    category: &ScenarioCategory,
    scenario: &ScenarioRecord,
    witness: &MatchWitness,
) -> Result<(), String> {
    let mut seen_actors = BTreeSet::new();
    for g in category.groups.values() {
        let actor_id = witness
            .binding
            .get(&g.id)
            .ok_or_else(|| format!("group `{}` is not bound", g.id))?;
        let actor = scenario
            .actor(actor_id)
            .ok_or_else(|| format!("group `{}` bound to unknown actor `{actor_id}`", g.id))?;
        if actor.is_ego != g.is_ego {
            return Err(format!("group `{}` and actor `{actor_id}` disagree on ego", g.id));
        }
        if !seen_actors.insert(actor_id) {
            return Err(format!("actor `{actor_id}` bound twice"));
        }
    }
    if witness.binding.len() != category.groups.len() {
        return Err("binding mentions undeclared groups".into());
    }
    if witness.snapshot_steps.len() != category.sequence.len() {
        return Err("wrong number of snapshot steps".into());
    }
    if witness.snapshot_steps.windows(2).any(|w| w[0] >= w[1]) {
        return Err("snapshot steps are not strictly increasing".into());
    }

    let check = |site: Site, allowed: &dyn Fn(&Holder, &TagPath) -> bool| -> Result<(), String> {
        let sat = witness
            .satisfied_by
            .get(&site)
            .ok_or_else(|| format!("no satisfaction recorded for {site:?}"))?;
        if !site.requirement().subsumes(&sat.tag) {
            return Err(format!("`{}` does not subsume `{}`", site.requirement(), sat.tag));
        }
        if !allowed(&sat.holder, &sat.tag) {
            return Err(format!("{:?} does not carry `{}` for {site:?}", sat.holder, sat.tag));
        }
        Ok(())
    };
    let holder_has = |h: &Holder, t: &TagPath, step: Option<u32>| match h {
        Holder::Static => scenario.static_tags.contains(t),
        Holder::Condition => scenario.condition_tags.contains(t),
        Holder::Actor(id) => scenario.actor(id).is_some_and(|a| match step {
            Some(s) => a.tags_active_at(s).contains(t),
            None => a.all_tags().contains(t),
        }),
    };

    let mut expected = 0usize;
    for req in &category.ungrouped {
        expected += 1;
        check(Site::Ungrouped(req.clone()), &|h, t| holder_has(h, t, None))?;
    }
    for g in category.groups.values() {
        let bound = Holder::Actor(witness.binding[&g.id].clone());
        for req in &g.requirements {
            expected += 1;
            check(Site::Group(g.id.clone(), req.clone()), &|h, t| {
                *h == bound && holder_has(h, t, None)
            })?;
        }
    }
    for (i, snap) in category.sequence.iter().enumerate() {
        let step = witness.snapshot_steps[i];
        for (subject, req) in &snap.entries {
            expected += 1;
            let site = Site::Step(i, subject.clone(), req.clone());
            match subject {
                Subject::Group(g) => {
                    let bound = Holder::Actor(witness.binding[g].clone());
                    check(site, &|h, t| *h == bound && holder_has(h, t, Some(step)))?;
                }
                Subject::Static => check(site, &|h, t| {
                    matches!(h, Holder::Static | Holder::Condition) && holder_has(h, t, None)
                })?,
            }
        }
    }
    if expected != witness.satisfied_by.len() {
        return Err("witness records satisfactions for unknown requirements".into());
    }
    Ok(())
}

fn holder_text(h: &Holder) -> String {
    match h {
        Holder::Actor(a) => a.clone(),
        Holder::Static => "static".into(),
        Holder::Condition => "conditions".into(),
    }
}

/// Multi-line human-readable report.
pub fn render_witness(category: &ScenarioCategory, scenario: &ScenarioRecord, witness: &MatchWitness) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "MATCH {} comprises {}", quote(&category.name), quote(&scenario.id));
    out.push_str("binding:\n");
    if witness.binding.is_empty() {
        out.push_str("  (none)\n");
    }
    for (g, a) in &witness.binding {
        let _ = writeln!(out, "  {g} -> {a}");
    }
    let steps: Vec<String> = witness.snapshot_steps.iter().map(u32::to_string).collect();
    let _ = writeln!(out, "steps: [{}]", steps.join(", "));
    out.push_str("satisfied:\n");
    for (site, sat) in &witness.satisfied_by {
        let (place, step) = match site {
            Site::Ungrouped(_) => ("tags".to_string(), None),
            Site::Group(g, _) => (format!("actor {g}"), None),
            Site::Step(i, subject, _) => (format!("step {} {subject}", i + 1), Some(witness.snapshot_steps[*i])),
        };
        let at = match (step, &sat.holder) {
            (Some(s), Holder::Actor(_)) => format!("{}@{s}", holder_text(&sat.holder)),
            _ => holder_text(&sat.holder),
        };
        let _ = writeln!(out, "  {place}: {} <= {at} {}", site.requirement(), sat.tag);
    }
    out
}

/// Single-line form of a witness.
pub fn witness_line(category: &ScenarioCategory, scenario: &ScenarioRecord, witness: &MatchWitness) -> String {
    let binding: Vec<String> = witness.binding.iter().map(|(g, a)| format!("{g}={a}")).collect();
    let steps: Vec<String> = witness.snapshot_steps.iter().map(u32::to_string).collect();
    format!(
        "match {} {} binding {{ {} }} steps {{ {} }}",
        quote(&category.name),
        quote(&scenario.id),
        binding.join(" "),
        steps.join(" ")
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::category::parse_category;
    use crate::scenario::parse_scenario;

    fn reg() -> Registry {
        Registry::builtin()
    }

    fn cat(src: &str) -> ScenarioCategory {
        parse_category(&reg(), src).unwrap().remove(0)
    }

    fn scn(src: &str) -> ScenarioRecord {
        parse_scenario(&reg(), src).unwrap()
    }

    fn p(text: &str) -> TagPath {
        reg().resolve(text).unwrap()
    }

    #[test]
    fn requirement_direction() {
        let r = reg();
        assert_eq!(
            requirement_satisfied(&r, &p("actor_type:vehicle"), &[p("actor_type:vehicle/category_m")]),
            Some(p("actor_type:vehicle/category_m"))
        );
        assert_eq!(
            requirement_satisfied(
                &r,
                &p("lateral_activity:turning/left"),
                &[p("lateral_activity:turning")]
            ),
            None
        );
        assert_eq!(
            requirement_satisfied(&r, &p("weather:"), &[p("weather:rain/heavy")]),
            Some(p("weather:rain/heavy"))
        );
        let avail = [p("actor_type:vehicle/category_n"), p("actor_type:vehicle/category_l")];
        assert_eq!(
            requirement_satisfied(&r, &p("actor_type:vehicle"), &avail),
            Some(p("actor_type:vehicle/category_l"))
        );
    }

    const CUT_IN_CAT: &str = r#"category "cut-in" {
        actor ego { longitudinal_activity:driving_forward }
        actor other { lateral_activity:changing_lane }
        sequence { step { other: lead_vehicle:no_leader } step { other: lead_vehicle:leader } }
    }"#;

    const CUT_IN_SCN: &str = r#"scenario "cutin" {
        actor ego ego { phase 0 { longitudinal_activity:driving_forward } }
        actor v1 {
            phase 0 { lateral_activity:changing_lane lead_vehicle:no_leader }
            phase 1 { lead_vehicle:leader }
        }
    }"#;

    #[test]
    fn cut_in_witness() {
        let c = cat(CUT_IN_CAT);
        let s = scn(CUT_IN_SCN);
        let w = comprises(&reg(), &c, &s).unwrap();
        assert_eq!(w.snapshot_steps, vec![0, 1]);
        assert_eq!(w.binding["other"], "v1");
        assert_eq!(w.binding["ego"], "ego");
        verify_witness(&c, &s, &w).unwrap();
        let text = render_witness(&c, &s, &w);
        assert!(text.contains("steps: [0, 1]"));
        assert!(text.contains("step 2 other: lead_vehicle:leader <= v1@1 lead_vehicle:leader"));
    }

    #[test]
    fn cut_in_without_prior_no_leader() {
        let c = cat(CUT_IN_CAT);
        let s = scn(r#"scenario "s" {
                actor ego ego { phase 0 { longitudinal_activity:driving_forward } }
                actor v1 { phase 0 { lateral_activity:changing_lane lead_vehicle:leader } phase 4 { lead_vehicle:leader lateral_activity:going_straight } }
            }"#);
        assert_eq!(comprises(&reg(), &c, &s), None);
    }

    #[test]
    fn universal_comprises_everything() {
        let w = comprises(&reg(), &ScenarioCategory::universal("u"), &scn(CUT_IN_SCN)).unwrap();
        assert!(w.binding.is_empty());
        assert!(w.snapshot_steps.is_empty());
        let empty = scn(r#"scenario "e" {}"#);
        assert!(comprises(&reg(), &ScenarioCategory::universal("u"), &empty).is_some());
    }

    #[test]
    fn ego_group_needs_ego_actor() {
        let c = cat(r#"category "c" { actor ego { longitudinal_activity:driving_forward } }"#);
        let s = scn(r#"scenario "s" { actor a { phase 0 { longitudinal_activity:driving_forward } } }"#);
        assert!(comprises(&reg(), &c, &s).is_none());
    }

    #[test]
    fn binding_is_injective() {
        let c = cat(r#"category "c" { actor a { actor_type:vehicle } actor b { actor_type:vehicle } }"#);
        let one = scn(r#"scenario "s" { actor x { tags { actor_type:vehicle } phase 0 { lead_vehicle:leader } } }"#);
        assert!(comprises(&reg(), &c, &one).is_none());
        let flat = cat(r#"category "c" { tags { actor_type:vehicle lead_vehicle:leader } }"#);
        assert!(comprises(&reg(), &flat, &one).is_some());
    }

    #[test]
    fn backtracks_over_bindings() {
        // Group `a` alone could take either actor; the sequence forces y.
        let c = cat(r#"category "c" {
                actor a { actor_type:vehicle }
                sequence { step { a: lead_vehicle:no_leader } step { a: lead_vehicle:leader } }
            }"#);
        let s = scn(r#"scenario "s" {
                actor x { tags { actor_type:vehicle } phase 0 { lead_vehicle:leader } }
                actor y { tags { actor_type:vehicle } phase 0 { lead_vehicle:no_leader } phase 7 { lead_vehicle:leader } }
            }"#);
        let w = comprises(&reg(), &c, &s).unwrap();
        assert_eq!(w.binding["a"], "y");
        assert_eq!(w.snapshot_steps, vec![0, 7]);
        verify_witness(&c, &s, &w).unwrap();
    }

    #[test]
    fn static_entries_in_steps() {
        let c = cat(
            r#"category "c" { sequence { step { static: traffic_light:green } step { static: traffic_light:amber } } }"#,
        );
        let s = scn(r#"scenario "s" { static { traffic_light:green traffic_light:amber } }"#);
        let w = comprises(&reg(), &c, &s).unwrap();
        assert_eq!(w.snapshot_steps, vec![0, 1]);
        verify_witness(&c, &s, &w).unwrap();
    }

    #[test]
    fn verifier_rejects_tampering() {
        let c = cat(CUT_IN_CAT);
        let s = scn(CUT_IN_SCN);
        let w = comprises(&reg(), &c, &s).unwrap();
        let mut bad = w.clone();
        bad.snapshot_steps = vec![1, 1];
        assert!(verify_witness(&c, &s, &bad).is_err());
        let mut bad = w.clone();
        bad.binding.insert("other".into(), "ego".into());
        assert!(verify_witness(&c, &s, &bad).is_err());
        let mut bad = w;
        bad.snapshot_steps = vec![1, 2];
        assert!(verify_witness(&c, &s, &bad).is_err());
    }
}
