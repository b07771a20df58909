//! Periodic admissible orbits.
//!
//! Running the turn table once around a cyclically reduced word `w` maps the
//! entry state of the first compartment (entry edge and past force) to the
//! entry state one period later. That map acts on the eight states of one
//! face, so from any start it reaches a cycle of length `k ≤ 8`; planning
//! `w^k` from a state on the cycle gives a plan whose last exit is the first
//! entry translated by `k·disp(w)`, with matching forces. Minimizing with the
//! first and last contact identified closes the orbit.

use super::cases::EntryState;
use super::plan::{check_letters, default_entry, thread_turns, CellVisit, EdgePlan, NodeRole, PlanError, PlanNode, PlanOptions};
use super::{minimize_arclength, AdmissibleError, AdmissibleOrbit};
use crate::freegroup::{Letter, ReducedWord};

fn cyclic_letters(w: &[Letter], k: usize) -> Vec<Letter> {
    let mut u: Vec<Letter> = w.iter().copied().cycle().take(w.len() * k).collect();
    u.push(w[0]);
    u
}

/// Entry state after one pass around `w`.
pub fn return_state(w: &[Letter], state: EntryState, opts: PlanOptions) -> Result<EntryState, PlanError> {
    let mut nodes = vec![PlanNode { edge: state.edge, force: Some(state.force), role: NodeRole::Contact }];
    let mut visits = Vec::new();
    thread_turns(&cyclic_letters(w, 1), [0; 3], state, opts, 0, &mut nodes, &mut visits)
}

/// A state on the cycle of the return map reached from the default entry,
/// and the cycle length.
pub fn periodic_state(w: &[Letter], opts: PlanOptions) -> Result<(EntryState, usize), PlanError> {
    let mut seen = vec![default_entry(w[0])];
    loop {
        let next = return_state(w, *seen.last().expect("non-empty"), opts)?;
        if let Some(i) = seen.iter().position(|s| *s == next) {
            return Ok((next, seen.len() - i));
        }
        seen.push(next);
    }
}

/// Plan for the periodic orbit of `w`; its word is `w^k`.
pub fn plan_periodic(w: &ReducedWord, opts: PlanOptions) -> Result<EdgePlan, PlanError> {
    let letters = w.letters();
    check_letters(letters)?;
    if !w.is_cyclically_reduced() {
        return Err(PlanError::NotCyclicallyReduced);
    }
    let (state, k) = periodic_state(letters, opts)?;
    let u = cyclic_letters(letters, k);
    let mut nodes = vec![PlanNode { edge: state.edge, force: Some(state.force), role: NodeRole::Contact }];
    let mut visits: Vec<CellVisit> = Vec::new();
    let end = thread_turns(&u, [0; 3], state, opts, 0, &mut nodes, &mut visits)?;
    debug_assert_eq!(end, state);
    let disp = w.displacement();
    let v = [disp[0] * k as i64, disp[1] * k as i64, disp[2] * k as i64];
    let closure = nodes.pop().expect("closing contact");
    if closure.edge != nodes[0].edge.translated(v) {
        return Err(PlanError::Invariant("periodic closure edge".into()));
    }
    let mut compartments = vec![[0i64; 3]];
    for l in &u[1..u.len() - 1] {
        let c = *compartments.last().expect("non-empty");
        let s = l.step();
        compartments.push([c[0] + s[0], c[1] + s[1], c[2] + s[2]]);
    }
    let mut plan = EdgePlan { word: w.power(k), compartments, nodes, visits, period: Some(v) };
    plan.assign_forces();
    plan.check()?;
    Ok(plan)
}

/// Periodic admissible orbit whose word per period is a power of `w`,
/// minimized at radius `r0` and, for `r0 > 0`, validated over three periods.
pub fn close_periodic(w: &ReducedWord, r0: f64, opts: PlanOptions) -> Result<AdmissibleOrbit, AdmissibleError> {
    let plan = plan_periodic(w, opts)?;
    let mut orbit = minimize_arclength(&plan, r0)?;
    if r0 > 0.0 {
        orbit.validate()?;
    }
    Ok(orbit)
}
