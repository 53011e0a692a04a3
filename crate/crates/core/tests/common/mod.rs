//! Seeded generators and a brute-force comprise oracle shared by the
//! integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use scentag::category::{ActorGroup, Snapshot, Subject};
use scentag::scenario::{ActorRecord, Phase};
use scentag::{Registry, ScenarioCategory, ScenarioRecord, Scope, TagPath};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn reg() -> Registry {
    Registry::builtin()
}

pub fn fixture(name: &str) -> String {
    let path = format!("{}/fixtures/{name}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"))
}

pub fn paths(registry: &Registry, texts: &[&str]) -> Vec<TagPath> {
    texts.iter().map(|t| registry.resolve(t).unwrap()).collect()
}

/// Tags to draw from, split by scope.
#[derive(Debug, Clone)]
pub struct Pool {
    pub actor: Vec<TagPath>,
    pub static_: Vec<TagPath>,
    pub condition: Vec<TagPath>,
}

impl Pool {
    /// A pool small enough that random categories and scenarios often share
    /// tags, with several ancestor/descendant pairs.
    pub fn mixed(registry: &Registry) -> Pool {
        Pool {
            actor: paths(
                registry,
                &[
                    "actor_type:vehicle",
                    "actor_type:vehicle/category_m",
                    "actor_type:vru/pedestrian",
                    "lateral_activity:",
                    "lateral_activity:turning",
                    "lateral_activity:turning/left",
                    "lateral_activity:turning/right",
                    "lateral_activity:going_straight",
                    "lead_vehicle:leader",
                    "lead_vehicle:no_leader",
                ],
            ),
            static_: paths(
                registry,
                &[
                    "road_layout:junction",
                    "road_layout:straight",
                    "traffic_light:",
                    "traffic_light:red",
                ],
            ),
            condition: paths(registry, &["weather:rain", "weather:rain/heavy", "lighting:day"]),
        }
    }

    /// Every tag of the built-in registry.
    pub fn full(registry: &Registry) -> Pool {
        let mut pool = Pool {
            actor: Vec::new(),
            static_: Vec::new(),
            condition: Vec::new(),
        };
        for p in registry.all_paths() {
            match registry.scope_of(&p).unwrap() {
                Scope::Actor => pool.actor.push(p),
                Scope::Static => pool.static_.push(p),
                Scope::Condition => pool.condition.push(p),
            }
        }
        pool
    }

    /// Two actor tags, one static and one condition tag, closed under the
    /// parents used by [`generalize`].
    pub fn tiny(registry: &Registry, variant: usize) -> Pool {
        if variant.is_multiple_of(2) {
            Pool {
                actor: paths(registry, &["lateral_activity:turning", "lateral_activity:turning/left"]),
                static_: paths(registry, &["road_layout:junction"]),
                condition: paths(registry, &["weather:rain"]),
            }
        } else {
            Pool {
                actor: paths(registry, &["lead_vehicle:", "lead_vehicle:leader"]),
                static_: paths(registry, &["traffic_light:red"]),
                condition: paths(registry, &["lighting:day"]),
            }
        }
    }

    pub fn all(&self) -> BTreeSet<TagPath> {
        self.actor
            .iter()
            .chain(&self.static_)
            .chain(&self.condition)
            .cloned()
            .collect()
    }

    fn env(&self) -> Vec<TagPath> {
        self.static_.iter().chain(&self.condition).cloned().collect()
    }
}

fn pick(rng: &mut ChaCha8Rng, from: &[TagPath], n: usize) -> BTreeSet<TagPath> {
    if from.is_empty() {
        return BTreeSet::new();
    }
    (0..n).map(|_| from.choose(rng).unwrap().clone()).collect()
}

/// Shape limits for generated values.
#[derive(Debug, Clone, Copy)]
pub struct Shape {
    pub max_actors: usize,
    pub max_phases: usize,
    pub max_start: u32,
    pub max_groups: usize,
    pub max_snapshots: usize,
}

impl Shape {
    pub const SMALL: Shape = Shape {
        max_actors: 3,
        max_phases: 3,
        max_start: 5,
        max_groups: 3,
        max_snapshots: 3,
    };
}

pub fn scenario(rng: &mut ChaCha8Rng, registry: &Registry, pool: &Pool, shape: Shape, id: &str) -> ScenarioRecord {
    let mut rec = ScenarioRecord::new(id);
    let n = rng.gen_range(0..=shape.max_actors);
    let ego_index = if rng.gen_bool(0.7) { Some(0) } else { None };
    for i in 0..n {
        let is_ego = ego_index == Some(i);
        let id = if is_ego { "ego".to_string() } else { format!("a{i}") };
        let phase_count = rng.gen_range(1..=shape.max_phases);
        let mut starts: BTreeSet<u32> = BTreeSet::new();
        starts.insert(if rng.gen_bool(0.7) {
            0
        } else {
            rng.gen_range(0..=shape.max_start)
        });
        while starts.len() < phase_count.min(shape.max_start as usize + 1) {
            starts.insert(rng.gen_range(0..=shape.max_start));
        }
        let phases = starts
            .into_iter()
            .map(|start| {
                let k = rng.gen_range(1..=3);
                Phase {
                    start,
                    tags: pick(rng, &pool.actor, k),
                }
            })
            .collect();
        let k = rng.gen_range(0..=2);
        rec.actors.push(ActorRecord {
            id,
            is_ego,
            persistent: pick(rng, &pool.actor, k),
            phases,
        });
    }
    rec.actors.shuffle(rng);
    let k = rng.gen_range(0..=2);
    rec.static_tags = pick(rng, &pool.static_, k);
    let k = rng.gen_range(0..=2);
    rec.condition_tags = pick(rng, &pool.condition, k);
    if rng.gen_bool(0.2) {
        rec.source = "generated \"record\"\nline two".into();
    }
    debug_assert!(rec.validate(registry).is_ok());
    rec
}

pub fn category(rng: &mut ChaCha8Rng, registry: &Registry, pool: &Pool, shape: Shape, name: &str) -> ScenarioCategory {
    let mut cat = ScenarioCategory::universal(name);
    let k = rng.gen_range(0..=2);
    let any: Vec<TagPath> = pool.all().into_iter().collect();
    cat.ungrouped = pick(rng, &any, k);
    let groups = rng.gen_range(0..=shape.max_groups);
    for i in 0..groups {
        let id = if i == 0 && rng.gen_bool(0.5) {
            "ego".to_string()
        } else {
            format!("g{i}")
        };
        let mut g = ActorGroup::new(&id);
        let k = rng.gen_range(0..=2);
        g.requirements = pick(rng, &pool.actor, k);
        cat.groups.insert(id, g);
    }
    let ids: Vec<String> = cat.groups.keys().cloned().collect();
    let snaps = rng.gen_range(0..=shape.max_snapshots);
    let env = pool.env();
    for _ in 0..snaps {
        let mut s = Snapshot::default();
        let k = rng.gen_range(1..=2);
        for _ in 0..k {
            if !ids.is_empty() && rng.gen_bool(0.8) {
                let g = ids.choose(rng).unwrap().clone();
                let t = pool.actor.choose(rng).unwrap().clone();
                s.entries.insert((Subject::Group(g), t));
            } else if !env.is_empty() {
                let t = env.choose(rng).unwrap().clone();
                s.entries.insert((Subject::Static, t));
            }
        }
        if !s.entries.is_empty() {
            cat.sequence.push(s);
        }
    }
    debug_assert!(cat.validate(registry).is_ok(), "{cat:?}");
    cat
}

/// Replaces one randomly chosen requirement by its parent, if any.
pub fn generalize(rng: &mut ChaCha8Rng, cat: &ScenarioCategory) -> ScenarioCategory {
    let mut out = cat.clone();
    let mut sites: Vec<usize> = Vec::new();
    let total = cat.ungrouped.len()
        + cat.groups.values().map(|g| g.requirements.len()).sum::<usize>()
        + cat.sequence.iter().map(|s| s.entries.len()).sum::<usize>();
    sites.extend(0..total);
    let Some(&chosen) = sites.choose(rng) else {
        return out;
    };
    let mut i = 0;
    let lift = |t: &TagPath| t.parent().unwrap_or_else(|| t.clone());
    if chosen < cat.ungrouped.len() {
        let t = cat.ungrouped.iter().nth(chosen).unwrap().clone();
        out.ungrouped.remove(&t);
        out.ungrouped.insert(lift(&t));
        return out;
    }
    i += cat.ungrouped.len();
    for (id, g) in &cat.groups {
        if chosen < i + g.requirements.len() {
            let t = g.requirements.iter().nth(chosen - i).unwrap().clone();
            let reqs = &mut out.groups.get_mut(id).unwrap().requirements;
            reqs.remove(&t);
            reqs.insert(lift(&t));
            return out;
        }
        i += g.requirements.len();
    }
    for (si, s) in cat.sequence.iter().enumerate() {
        if chosen < i + s.entries.len() {
            let (subj, t) = s.entries.iter().nth(chosen - i).unwrap().clone();
            let entries = &mut out.sequence[si].entries;
            entries.remove(&(subj.clone(), t.clone()));
            entries.insert((subj, lift(&t)));
            return out;
        }
        i += s.entries.len();
    }
    out
}

/// Drops random requirements, groups and snapshots and generalizes some of
/// the rest, producing a category that syntactically includes `cat` more
/// often than not.
pub fn weaken(rng: &mut ChaCha8Rng, cat: &ScenarioCategory, name: &str) -> ScenarioCategory {
    let mut out = cat.clone();
    out.name = name.to_string();
    out.ungrouped.retain(|_| rng.gen_bool(0.7));
    let used: BTreeSet<String> = out
        .sequence
        .iter()
        .flat_map(|s| s.entries.iter())
        .filter_map(|(s, _)| match s {
            Subject::Group(g) => Some(g.clone()),
            Subject::Static => None,
        })
        .collect();
    let droppable: Vec<String> = out.groups.keys().filter(|g| !used.contains(*g)).cloned().collect();
    for g in droppable {
        if rng.gen_bool(0.3) {
            out.groups.remove(&g);
        }
    }
    for g in out.groups.values_mut() {
        g.requirements.retain(|_| rng.gen_bool(0.7));
    }
    out.sequence.retain(|_| rng.gen_bool(0.7));
    for _ in 0..rng.gen_range(0..=2) {
        out = generalize(rng, &out);
    }
    out
}

// ---------------------------------------------------------------------------
// Brute-force oracle: the comprise definition transcribed directly, using
// string operations for subsumption and exhaustive search for bindings and
// steps.

pub fn oracle_subsumes(general: &str, specific: &str) -> bool {
    let (gt, gr) = general.split_once(':').unwrap();
    let (st, sr) = specific.split_once(':').unwrap();
    gt == st && (gr.is_empty() || gr == sr || sr.starts_with(&format!("{gr}/")))
}

fn any_subsumed(req: &TagPath, tags: &BTreeSet<TagPath>) -> bool {
    tags.iter().any(|t| oracle_subsumes(req.as_str(), t.as_str()))
}

fn active(actor: &ActorRecord, step: u32) -> BTreeSet<TagPath> {
    let mut out = actor.persistent.clone();
    let mut current: Option<&Phase> = None;
    for p in &actor.phases {
        if p.start <= step {
            current = Some(p);
        }
    }
    if let Some(p) = current {
        out.extend(p.tags.iter().cloned());
    }
    out
}

fn ever(actor: &ActorRecord) -> BTreeSet<TagPath> {
    let mut out = actor.persistent.clone();
    for p in &actor.phases {
        out.extend(p.tags.iter().cloned());
    }
    out
}

fn injective_maps(groups: &[&ActorGroup], actors: &[&ActorRecord]) -> Vec<BTreeMap<String, String>> {
    let mut out = Vec::new();
    fn rec(
        i: usize,
        groups: &[&ActorGroup],
        actors: &[&ActorRecord],
        used: &mut Vec<bool>,
        cur: &mut BTreeMap<String, String>,
        out: &mut Vec<BTreeMap<String, String>>,
    ) {
        if i == groups.len() {
            out.push(cur.clone());
            return;
        }
        for (j, a) in actors.iter().enumerate() {
            if used[j] || a.is_ego != groups[i].is_ego {
                continue;
            }
            used[j] = true;
            cur.insert(groups[i].id.clone(), a.id.clone());
            rec(i + 1, groups, actors, used, cur, out);
            cur.remove(&groups[i].id);
            used[j] = false;
        }
    }
    rec(
        0,
        groups,
        actors,
        &mut vec![false; actors.len()],
        &mut BTreeMap::new(),
        &mut out,
    );
    out
}

fn increasing_tuples(k: usize, upper: u32) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    fn rec(k: usize, from: u32, upper: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for t in from..=upper {
            cur.push(t);
            rec(k, t + 1, upper, cur, out);
            cur.pop();
        }
    }
    rec(k, 0, upper, &mut Vec::new(), &mut out);
    out
}

/// Exhaustive decision of the comprise relation.
pub fn oracle_comprises(cat: &ScenarioCategory, scn: &ScenarioRecord) -> bool {
    let env: BTreeSet<TagPath> = scn.static_tags.union(&scn.condition_tags).cloned().collect();
    for req in &cat.ungrouped {
        let found = any_subsumed(req, &env) || scn.actors.iter().any(|a| any_subsumed(req, &ever(a)));
        if !found {
            return false;
        }
    }
    let groups: Vec<&ActorGroup> = cat.groups.values().collect();
    let actors: Vec<&ActorRecord> = scn.actors.iter().collect();
    // Past the last phase start nothing changes, so steps beyond
    // max start + k cannot help.
    let max_start = scn
        .actors
        .iter()
        .flat_map(|a| a.phases.iter().map(|p| p.start))
        .max()
        .unwrap_or(0);
    let tuples = increasing_tuples(cat.sequence.len(), max_start + cat.sequence.len() as u32);
    for binding in injective_maps(&groups, &actors) {
        let actor = |g: &str| scn.actor(&binding[g]).unwrap();
        let groups_ok = groups
            .iter()
            .all(|g| g.requirements.iter().all(|r| any_subsumed(r, &ever(actor(&g.id)))));
        if !groups_ok {
            continue;
        }
        let steps_ok = tuples.iter().any(|steps| {
            cat.sequence.iter().zip(steps).all(|(snap, &t)| {
                snap.entries.iter().all(|(subject, req)| match subject {
                    Subject::Group(g) => any_subsumed(req, &active(actor(g), t)),
                    Subject::Static => any_subsumed(req, &env),
                })
            })
        });
        if steps_ok {
            return true;
        }
    }
    false
}
