//! Idle runs: word-neutral detours that slow an orbit down.
//!
//! Between two consecutive contacts `P`, `Q` of one compartment we may touch
//! further edges of the same compartment. No face is crossed, so the word is
//! unchanged. The inserted walk `G1 … Gj` must keep every contact balanced
//! and leave the forces on `P` and `Q` as they were: `G1` shares `Q`'s
//! coordinate along `P`, and `Gj` shares `P`'s coordinate along `Q`. Walks
//! that contain a triangle (three pairwise skew edges, one per axis) can be
//! lengthened by repeating it, which gives the bulk of the delay; a second,
//! short walk elsewhere fine-tunes the total time.

use super::minimize::{Chain, ContactParam, MinimizeError, MinimizeOptions};
use super::plan::{EdgePlan, NodeRole, PlanError, PlanNode};
use super::{minimize_arclength, AdmissibleOrbit};
use crate::geometry::{cell_edges, Edge};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum IdleError {
    #[error("target speed must be positive, got {0}")]
    NonPositiveTarget(f64),
    #[error("target speed {target} exceeds the current speed {speed}")]
    AboveCurrent { target: f64, speed: f64 },
    #[error("idle runs apply to open orbits only")]
    Periodic,
    #[error("no pair of consecutive contacts in one compartment")]
    NoInsertionPoint,
    #[error("could not reach speed {target} (closest {best})")]
    Unreachable { target: f64, best: f64 },
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Minimize(#[from] MinimizeError),
}

/// Relative speed tolerance.
pub const SPEED_TOL: f64 = 0.02;
const MAX_WALK: usize = 7;
const MAX_TRIALS: usize = 40;
const FINE_ROUNDS: usize = 4;
const FINE_BASES: usize = 3;

fn balanced(e: &Edge, prev: &Edge, next: &Edge) -> bool {
    prev.fixed(e.axis()) != next.fixed(e.axis())
}

/// All admissible detours of exactly `len` contacts between `p` and `q`
/// inside `cell`.
pub fn idle_walks(cell: [i64; 3], p: &Edge, q: &Edge, len: usize) -> Vec<Vec<Edge>> {
    let edges = cell_edges(cell);
    let mut out = Vec::new();
    let mut walk: Vec<Edge> = Vec::with_capacity(len);
    fn rec(
        edges: &[Edge; 12],
        p: &Edge,
        q: &Edge,
        len: usize,
        walk: &mut Vec<Edge>,
        out: &mut Vec<Vec<Edge>>,
    ) {
        let prev = *walk.last().unwrap_or(p);
        for e in edges {
            if !prev.is_skew(e) {
                continue;
            }
            if walk.is_empty() {
                if e.fixed(p.axis()) != q.fixed(p.axis()) {
                    continue;
                }
            } else {
                let before = if walk.len() >= 2 { walk[walk.len() - 2] } else { *p };
                if !balanced(&prev, &before, e) {
                    continue;
                }
            }
            walk.push(*e);
            if walk.len() == len {
                let last = walk[len - 1];
                let before = if len >= 2 { walk[len - 2] } else { *p };
                if last.is_skew(q) && last.fixed(q.axis()) == p.fixed(q.axis()) && balanced(&last, &before, q) {
                    out.push(walk.clone());
                }
            } else {
                rec(edges, p, q, len, walk, out);
            }
            walk.pop();
        }
    }
    if len > 0 {
        rec(&edges, p, q, len, &mut walk, &mut out);
    }
    out
}

/// First index `i` where `walk[i..i+3]` can be repeated in place.
pub fn repeatable_triangle(walk: &[Edge]) -> Option<usize> {
    (0..walk.len().saturating_sub(2)).find(|&i| {
        let (a, b, c) = (walk[i], walk[i + 1], walk[i + 2]);
        c.is_skew(&a) && balanced(&a, &c, &b) && balanced(&c, &b, &a)
    })
}

/// `walk` with its triangle at `at` repeated `extra` more times.
pub fn expand_walk(walk: &[Edge], at: usize, extra: usize) -> Vec<Edge> {
    let mut out = walk[..at + 3].to_vec();
    for _ in 0..extra {
        out.extend_from_slice(&walk[at..at + 3]);
    }
    out.extend_from_slice(&walk[at + 3..]);
    out
}

/// Inserts `walk` between nodes `at` and `at + 1`.
pub fn insert_walk(plan: &EdgePlan, at: usize, walk: &[Edge]) -> Result<EdgePlan, PlanError> {
    let k = walk.len();
    let mut out = plan.clone();
    let new_nodes = walk.iter().map(|&edge| PlanNode { edge, force: None, role: NodeRole::Idle });
    out.nodes.splice(at + 1..at + 1, new_nodes);
    for v in &mut out.visits {
        if v.first > at {
            v.first += k;
        }
        if v.last > at {
            v.last += k;
        }
    }
    out.assign_forces();
    out.check()?;
    Ok(out)
}

/// Consecutive node pairs lying in one compartment, at most one of them an
/// anchor, with that compartment.
pub fn insertion_sites(plan: &EdgePlan) -> Vec<(usize, [i64; 3])> {
    let mut out = Vec::new();
    for v in &plan.visits {
        for i in v.first..v.last {
            if i + 1 < plan.nodes.len() && !(plan.nodes[i].is_anchor() && plan.nodes[i + 1].is_anchor()) {
                out.push((i, v.cell));
            }
        }
    }
    out
}

/// Change in length from inserting `walk` at `at`, re-optimizing only a few
/// neighbouring contacts.
fn local_gain(orbit: &AdmissibleOrbit, at: usize, walk: &[Edge]) -> Option<f64> {
    let plan = &orbit.plan;
    let n = plan.nodes.len();
    // window of free nodes around the insertion point
    let lo = if plan.nodes[at].is_anchor() {
        at + 1
    } else {
        let mut lo = at;
        while lo > 0 && at - lo < 2 && !plan.nodes[lo - 1].is_anchor() {
            lo -= 1;
        }
        lo
    };
    let hi = if plan.nodes[at + 1].is_anchor() {
        at
    } else {
        let mut hi = at + 1;
        while hi + 1 < n && hi - (at + 1) < 2 && !plan.nodes[hi + 1].is_anchor() {
            hi += 1;
        }
        hi
    };
    let head = orbit.points[lo.checked_sub(1)?];
    let tail = *orbit.points.get(hi + 1)?;
    let old: f64 = (lo - 1..=hi).map(|i| (orbit.points[i + 1] - orbit.points[i]).norm()).sum();
    let mut edges: Vec<Edge> = (lo..=at).map(|i| plan.nodes[i].edge).collect();
    edges.extend_from_slice(walk);
    edges.extend((at + 1..=hi).map(|i| plan.nodes[i].edge));
    let chain = Chain { head: Some(head), tail: Some(tail), edges, period: None, r0: orbit.r0 };
    let sol = chain.solve(&MinimizeOptions::default()).ok()?;
    if sol.params.iter().any(|p: &ContactParam| p.t.min(1.0 - p.t) < 1e-6) {
        return None;
    }
    Some(sol.length - old)
}

fn within(speed: f64, target: f64) -> bool {
    (speed - target).abs() <= SPEED_TOL * target
}

/// Slows `orbit` down to `target_speed` (within 2%) by splicing idle runs
/// into its plan; the word is unchanged.
pub fn insert_idle_runs(orbit: &AdmissibleOrbit, target_speed: f64) -> Result<AdmissibleOrbit, IdleError> {
    if !(target_speed > 0.0) {
        return Err(IdleError::NonPositiveTarget(target_speed));
    }
    if orbit.plan.is_periodic() {
        return Err(IdleError::Periodic);
    }
    let speed = orbit.speed();
    if target_speed > speed * (1.0 + 1e-12) {
        return Err(IdleError::AboveCurrent { target: target_speed, speed });
    }
    if within(speed, target_speed) {
        return Ok(orbit.clone());
    }
    let n_letters = orbit.plan.word.len() as f64;
    let t_target = n_letters / target_speed;
    let r0 = orbit.r0;

    let sites = insertion_sites(&orbit.plan);
    if sites.is_empty() {
        return Err(IdleError::NoInsertionPoint);
    }
    let mid = orbit.plan.nodes.len() / 2;
    let mut by_middle = sites.clone();
    by_middle.sort_by_key(|&(i, _)| i.abs_diff(mid));

    let mut best: Option<AdmissibleOrbit> = None;
    let consider = |cand: &AdmissibleOrbit, best: &mut Option<AdmissibleOrbit>| {
        let err = (cand.speed() - target_speed).abs();
        if best.as_ref().map_or(true, |b| err < (b.speed() - target_speed).abs()) {
            *best = Some(cand.clone());
        }
    };

    // Bulk: a repeated triangle at the site nearest the middle that admits one.
    let mut bases: Vec<AdmissibleOrbit> = vec![orbit.clone()];
    'bulk: for &(at, cell) in &by_middle {
        let (p, q) = (orbit.plan.nodes[at].edge, orbit.plan.nodes[at + 1].edge);
        for len in 3..=MAX_WALK {
            let Some((walk, tri)) =
                idle_walks(cell, &p, &q, len).into_iter().find_map(|w| repeatable_triangle(&w).map(|t| (w, t)))
            else {
                continue;
            };
            let Ok(plan0) = insert_walk(&orbit.plan, at, &walk) else { continue };
            let Ok(plan1) = insert_walk(&orbit.plan, at, &expand_walk(&walk, tri, 1)) else { continue };
            let (Ok(o0), Ok(o1)) = (minimize_arclength(&plan0, r0), minimize_arclength(&plan1, r0)) else {
                continue;
            };
            let loop_len = o1.length - o0.length;
            if !(loop_len > 0.0) {
                continue;
            }
            consider(&o0, &mut best);
            consider(&o1, &mut best);
            if o0.length >= t_target {
                break 'bulk;
            }
            let m = ((t_target - o0.length) / loop_len).floor() as usize;
            bases.clear();
            for extra in [m.saturating_sub(1), m] {
                let plan = insert_walk(&orbit.plan, at, &expand_walk(&walk, tri, extra))?;
                let o = minimize_arclength(&plan, r0)?;
                consider(&o, &mut best);
                if within(o.speed(), target_speed) {
                    return Ok(o);
                }
                if o.length < t_target {
                    bases.push(o);
                }
            }
            if bases.is_empty() {
                bases.push(o0);
            }
            break 'bulk;
        }
    }

    // Fine tuning: short walks at other sites, ranked by a local estimate.
    // Candidates still short of the target time seed the next round.
    for _ in 0..FINE_ROUNDS {
        let mut trials: Vec<(f64, usize, usize, Vec<Edge>)> = Vec::new();
        for (bi, base) in bases.iter().enumerate() {
            let need = t_target - base.length;
            for (at, cell) in insertion_sites(&base.plan) {
                let (p, q) = (base.plan.nodes[at].edge, base.plan.nodes[at + 1].edge);
                if base.plan.nodes[at].role == NodeRole::Idle && base.plan.nodes[at + 1].role == NodeRole::Idle {
                    continue;
                }
                for len in 3..=MAX_WALK {
                    for walk in idle_walks(cell, &p, &q, len) {
                        if let Some(gain) = local_gain(base, at, &walk) {
                            trials.push(((gain - need).abs(), bi, at, walk));
                        }
                    }
                }
            }
        }
        trials.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut short: Vec<AdmissibleOrbit> = Vec::new();
        for (_, bi, at, walk) in trials.into_iter().take(MAX_TRIALS) {
            let Ok(plan) = insert_walk(&bases[bi].plan, at, &walk) else { continue };
            let Ok(o) = minimize_arclength(&plan, r0) else { continue };
            consider(&o, &mut best);
            if within(o.speed(), target_speed) {
                return Ok(o);
            }
            if o.length < t_target {
                short.push(o);
            }
        }
        if short.is_empty() {
            break;
        }
        short.sort_by(|a, b| b.length.total_cmp(&a.length));
        short.truncate(FINE_BASES);
        bases = short;
    }
    Err(IdleError::Unreachable { target: target_speed, best: best.map_or(speed, |b| b.speed()) })
}

/// Number of idle contacts in a plan.
pub fn idle_count(plan: &EdgePlan) -> usize {
    plan.nodes.iter().filter(|n| n.role == NodeRole::Idle).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::admissible::cases::cube_edge;
    use crate::admissible::{plan_word, PlanOptions};
    use crate::freegroup::ReducedWord;

    #[test]
    fn walks_respect_constraints() {
        let p = cube_edge(2, [0, 1, 0]);
        let q = cube_edge(0, [0, 0, 1]);
        for len in 3..=6 {
            let walks = idle_walks([0, 0, 0], &p, &q, len);
            assert!(!walks.is_empty(), "no walk of length {len}");
            for w in walks {
                assert!(p.is_skew(&w[0]) && w[len - 1].is_skew(&q));
            }
        }
    }

    #[test]
    fn triangle_repeats() {
        let tri = [cube_edge(0, [0, 0, 0]), cube_edge(1, [0, 0, 1]), cube_edge(2, [1, 1, 0])];
        assert_eq!(repeatable_triangle(&tri), Some(0));
        assert_eq!(expand_walk(&tri, 0, 2).len(), 9);
    }

    #[test]
    fn slows_down_keeping_the_word() {
        let w: ReducedWord = "abcaBCab".parse().unwrap();
        let orbit = minimize_arclength(&plan_word(&w, PlanOptions::default()).unwrap(), 0.0).unwrap();
        let target = orbit.speed() * 0.5;
        let slow = insert_idle_runs(&orbit, target).unwrap();
        assert!(within(slow.speed(), target));
        assert_eq!(slow.plan.word, w);
        assert!(idle_count(&slow.plan) > 0);
    }

    #[test]
    fn target_checks() {
        let w: ReducedWord = "abc".parse().unwrap();
        let orbit = minimize_arclength(&plan_word(&w, PlanOptions::default()).unwrap(), 0.0).unwrap();
        assert!(matches!(insert_idle_runs(&orbit, 0.0), Err(IdleError::NonPositiveTarget(_))));
        assert!(matches!(insert_idle_runs(&orbit, orbit.speed() * 1.1), Err(IdleError::AboveCurrent { .. })));
        assert_eq!(insert_idle_runs(&orbit, orbit.speed()).unwrap(), orbit);
    }
}
