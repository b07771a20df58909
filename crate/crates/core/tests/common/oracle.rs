//! Brute-force reference for the zero-radius arc-length minimizer.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use torus_billiard::admissible::cases::{entry_face, face_edges};
use torus_billiard::admissible::minimize::{Chain, ContactParam};
use torus_billiard::admissible::{plan_word_from, EdgePlan, EntryState, ForceSign, PlanOptions};
use torus_billiard::freegroup::Letter;
use torus_billiard::geometry::{cylinder_normal, Cylinder, Edge, Vec3};

pub const GRID_RESOLUTION: f64 = 1e-4;

/// Polyline length through `edges` at parameters `t`, between fixed ends.
pub fn chain_length(head: Vec3, tail: Vec3, edges: &[Edge], t: &[f64]) -> f64 {
    let mut prev = head;
    let mut total = 0.0;
    for (e, &s) in edges.iter().zip(t) {
        let p = e.point(s);
        total += (p - prev).norm();
        prev = p;
    }
    total + (tail - prev).norm()
}

/// Grid search over `[0,1]^n`, refined around the best point by factors of
/// ten until the spacing is [`GRID_RESOLUTION`].
pub fn grid_minimize(head: Vec3, tail: Vec3, edges: &[Edge]) -> (Vec<f64>, f64) {
    let n = edges.len();
    let mut lo = vec![0.0f64; n];
    let mut hi = vec![1.0f64; n];
    let mut step = 0.01f64;
    let mut best = (vec![0.5; n], f64::INFINITY);
    loop {
        let counts: Vec<usize> = (0..n).map(|i| ((hi[i] - lo[i]) / step).round() as usize + 1).collect();
        let total: usize = counts.iter().product();
        let mut t = vec![0.0; n];
        for code in 0..total {
            let mut c = code;
            for i in 0..n {
                t[i] = (lo[i] + (c % counts[i]) as f64 * step).min(1.0);
                c /= counts[i];
            }
            let l = chain_length(head, tail, edges, &t);
            if l < best.1 {
                best = (t.clone(), l);
            }
        }
        if step <= GRID_RESOLUTION * 1.000001 {
            return best;
        }
        for i in 0..n {
            lo[i] = (best.0[i] - 5.0 * step).max(0.0);
            hi[i] = (best.0[i] + 5.0 * step).min(1.0);
        }
        step /= 10.0;
        for i in 0..n {
            // keep the grid aligned with the previous best point
            lo[i] = best.0[i] - ((best.0[i] - lo[i]) / step).floor() * step;
        }
    }
}

/// Plans of short words from random entry states, `count` with exactly
/// `free` free contacts.
pub fn random_plans(seed: u64, free: usize, count: usize) -> Vec<EdgePlan> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for _ in 0..100_000 {
        if out.len() == count {
            break;
        }
        let len = rng.random_range(1..=3);
        let mut letters: Vec<Letter> = Vec::new();
        while letters.len() < len {
            let l = Letter::ALL[rng.random_range(0..6)];
            if letters.last().is_some_and(|p| p.cancels(l)) {
                continue;
            }
            letters.push(l);
        }
        let edges = face_edges(entry_face(letters[0]));
        let edge = edges[rng.random_range(0..edges.len())];
        let force = if rng.random_bool(0.5) { ForceSign::Plus } else { ForceSign::Minus };
        let alt = rng.random_bool(0.5);
        let Ok(plan) = plan_word_from(&letters, EntryState { edge, force }, PlanOptions { alt_cross_exit: alt }) else {
            continue;
        };
        if plan.free_indices().len() == free {
            out.push(plan);
        }
    }
    assert_eq!(out.len(), count, "not enough plans with {free} free contacts");
    out
}

/// Free edges and anchor points of an open plan.
pub fn chain_of(plan: &EdgePlan) -> (Vec3, Vec3, Vec<Edge>) {
    let (head, tail) = plan.anchor_points().expect("open plan");
    let edges = plan.free_indices().into_iter().map(|i| plan.nodes[i].edge).collect();
    (head, tail, edges)
}

/// Chains from random plans with the end points moved to random positions
/// along the anchor edges; midpoint anchors make the optimum symmetric.
pub fn random_chains(seed: u64, free: usize, count: usize, r0: f64) -> Vec<Chain> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    random_plans(seed, free, count)
        .iter()
        .map(|plan| {
            let (_, _, edges) = chain_of(plan);
            let head = plan.nodes[0].edge.point(rng.random_range(0.05..0.95));
            let tail = plan.nodes[plan.nodes.len() - 1].edge.point(rng.random_range(0.05..0.95));
            Chain { head: Some(head), tail: Some(tail), edges, period: None, r0 }
        })
        .collect()
}

/// Largest deviation from the specular law at the contacts of an open chain.
pub fn reflection_residual(chain: &Chain, params: &[ContactParam]) -> f64 {
    let pts = chain.points(params);
    let mut all = vec![chain.head.expect("open")];
    all.extend(&pts);
    all.push(chain.tail.expect("open"));
    let mut worst: f64 = 0.0;
    for (i, e) in chain.edges.iter().enumerate() {
        let (prev, p, next) = (all[i], all[i + 1], all[i + 2]);
        let u_in = (p - prev).normalized();
        let u_out = (next - p).normalized();
        let n = cylinder_normal(p, &Cylinder { line: e.line, radius: chain.r0 }).expect("on surface");
        worst = worst.max((u_in - n * (2.0 * u_in.dot(n)) - u_out).norm());
    }
    worst
}

/// Objective history never increases beyond rounding.
pub fn monotone(history: &[f64]) -> bool {
    history.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-14))
}
