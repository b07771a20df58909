//! Replaying constructed orbits through the flow simulator.
//!
//! Errors grow by roughly `2ℓ/r0` per reflection, so a single launch cannot
//! follow a long orbit. [`validate_orbit`] restarts the integrator at every
//! planned contact with the planned outgoing direction and checks each leg:
//! the next collision is with the planned scatterer, at the planned point,
//! and reflects into the planned direction. [`shoot_orbit`] is the single
//! launch, usable for short orbits.

use super::AdmissibleOrbit;
use crate::flow::{word_of, EventKind, FlowError, Integrator, OrbitEvent, OrbitRecord, PhasePoint, Step, Termination};
use crate::freegroup::ReducedWord;
use crate::geometry::{LatticeLine, Vec3};

/// Allowed distance between a simulated and a planned contact.
pub const POSITION_TOL: f64 = 1e-6;
/// Allowed deviation of the simulated outgoing direction.
pub const REFLECTION_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ValidationError {
    #[error("orbit was minimized at r0 = {orbit}, validation requested at {requested}")]
    WrongRadius { orbit: f64, requested: f64 },
    #[error("contact {index}: hit {found:?} instead of {expected:?} at t = {time}")]
    UnexpectedScatterer { index: usize, expected: LatticeLine, found: LatticeLine, time: f64 },
    #[error("segment after contact {index}: stray collision with {found:?} at t = {time}")]
    StrayCollision { index: usize, found: LatticeLine, time: f64 },
    #[error("contact {index}: no collision with {expected:?}")]
    MissedScatterer { index: usize, expected: LatticeLine },
    #[error("contact {index}: simulated point {distance} away from the planned one")]
    PositionMismatch { index: usize, distance: f64 },
    #[error("contact {index}: outgoing direction off by {deviation}")]
    ReflectionMismatch { index: usize, deviation: f64 },
    #[error("contact {index}: singular collision at t = {time}")]
    Singular { index: usize, time: f64 },
    #[error("simulated word {found} differs from planned {expected}")]
    WordMismatch { expected: ReducedWord, found: ReducedWord },
    #[error(transparent)]
    Flow(#[from] FlowError),
}

/// Point where the first segment leaves the initial anchor cylinder.
fn launch_point(orbit: &AdmissibleOrbit) -> Vec3 {
    let p0 = orbit.points[0];
    let d = orbit.direction(0);
    let line = orbit.plan.nodes[0].edge.line;
    let mut perp = d;
    perp[line.axis] = 0.0;
    p0 + d * (orbit.r0 / perp.norm())
}

/// Distance along the first segment of a periodic orbit to a point off all
/// face planes; contacts of symmetric orbits can sit exactly on a face.
fn periodic_offset(orbit: &AdmissibleOrbit) -> f64 {
    let p0 = orbit.points[0];
    let d = orbit.direction(0);
    let len = (orbit.point_at(1) - p0).norm();
    let off_faces = |q: Vec3| (0..3).all(|i| (q[i] - q[i].round()).abs() > 1e-6);
    [0.5, 0.37, 0.63, 0.21, 0.79]
        .into_iter()
        .map(|s| s * len)
        .find(|&s| off_faces(p0 + d * s))
        .unwrap_or(0.5 * len)
}

fn start_point(orbit: &AdmissibleOrbit) -> (PhasePoint, f64) {
    let d = orbit.direction(0);
    if orbit.plan.is_periodic() {
        let s = periodic_offset(orbit);
        (PhasePoint::new(orbit.points[0] + d * s, d), s)
    } else {
        (PhasePoint::new(launch_point(orbit), d), 0.0)
    }
}

/// Runs on for `extra` time after the last contact, which must be free flight.
fn finish_segment(
    flow: &mut Integrator,
    extra: f64,
    index: usize,
    events: &mut Vec<OrbitEvent>,
) -> Result<(), ValidationError> {
    let end = flow.state().t + extra;
    loop {
        match flow.step(end) {
            Step::Event(ev) => {
                if let EventKind::Collision { line, .. } = ev.kind {
                    return Err(ValidationError::StrayCollision { index, found: line, time: ev.time });
                }
                events.push(ev);
            }
            Step::Reached => return Ok(()),
            Step::Singular { time, .. } => return Err(ValidationError::Singular { index, time }),
        }
    }
}

struct Planned {
    line: LatticeLine,
    point: Vec3,
    /// Outgoing direction, absent at the terminal anchor.
    out: Option<Vec3>,
}

/// Expected contacts after the launch: open orbits run to the terminal
/// anchor, periodic ones for `periods` periods.
fn planned_contacts(orbit: &AdmissibleOrbit, periods: usize) -> Vec<Planned> {
    let n = orbit.points.len();
    match orbit.plan.period {
        None => (1..n)
            .map(|i| Planned {
                line: orbit.plan.nodes[i].edge.line,
                point: orbit.points[i],
                out: (i + 1 < n).then(|| orbit.direction(i)),
            })
            .collect(),
        Some(v) => {
            let mut out = Vec::with_capacity(n * periods);
            for k in 0..periods {
                let shift = [v[0] * k as i64, v[1] * k as i64, v[2] * k as i64];
                for i in 0..n {
                    let (j, extra) = if i + 1 == n { (0, 1) } else { (i + 1, 0) };
                    let s = [shift[0] + v[0] * extra, shift[1] + v[1] * extra, shift[2] + v[2] * extra];
                    out.push(Planned {
                        line: orbit.plan.nodes[j].edge.translated(s).line,
                        point: orbit.points[j] + Vec3::from_lattice(s),
                        out: Some(orbit.direction(j)),
                    });
                }
            }
            out
        }
    }
}

fn record_from(orbit: &AdmissibleOrbit, initial: PhasePoint, events: Vec<OrbitEvent>, last: PhasePoint) -> OrbitRecord {
    let mut crossings = [0u64; 3];
    for e in &events {
        if let EventKind::FaceCrossing { axis, .. } = e.kind {
            crossings[axis] += 1;
        }
    }
    OrbitRecord { r0: orbit.r0, initial, events, final_state: last, crossings, termination: Termination::Completed }
}

fn expected_word(orbit: &AdmissibleOrbit, periods: usize) -> ReducedWord {
    if orbit.plan.is_periodic() {
        orbit.plan.word.power(periods)
    } else {
        orbit.plan.word.clone()
    }
}

/// Advances until the next collision, collecting face crossings.
fn next_collision(
    flow: &mut Integrator,
    index: usize,
    expected: LatticeLine,
    events: &mut Vec<OrbitEvent>,
) -> Result<OrbitEvent, ValidationError> {
    let horizon = flow.state().t + 8.0;
    loop {
        match flow.step(horizon) {
            Step::Event(ev) => {
                if ev.is_collision() {
                    return Ok(ev);
                }
                events.push(ev);
            }
            Step::Reached => return Err(ValidationError::MissedScatterer { index, expected }),
            Step::Singular { time, .. } => return Err(ValidationError::Singular { index, time }),
        }
    }
}

/// Multiple-shooting replay of an orbit minimized at `r0 > 0`. Periodic
/// orbits are replayed for three periods, from a point on the first segment
/// to its translate.
pub fn validate_orbit(orbit: &AdmissibleOrbit, r0: f64) -> Result<OrbitRecord, ValidationError> {
    validate_periods(orbit, r0, 3)
}

pub fn validate_periods(orbit: &AdmissibleOrbit, r0: f64, periods: usize) -> Result<OrbitRecord, ValidationError> {
    if orbit.r0 != r0 || !(r0 > 0.0) {
        return Err(ValidationError::WrongRadius { orbit: orbit.r0, requested: r0 });
    }
    let (initial, offset) = start_point(orbit);
    let mut flow = Integrator::new(initial, r0)?;
    let mut events = Vec::new();
    let planned = planned_contacts(orbit, periods);
    for (index, want) in planned.iter().enumerate() {
        let ev = next_collision(&mut flow, index, want.line, &mut events)?;
        let EventKind::Collision { line, .. } = ev.kind else { unreachable!("collision event") };
        if line != want.line {
            return Err(ValidationError::UnexpectedScatterer { index, expected: want.line, found: line, time: ev.time });
        }
        events.push(ev);
        let Some(out) = want.out else {
            break;
        };
        let distance = (ev.q - want.point).norm();
        if distance > POSITION_TOL {
            return Err(ValidationError::PositionMismatch { index, distance });
        }
        let deviation = (ev.v - out).norm();
        if deviation > REFLECTION_TOL {
            return Err(ValidationError::ReflectionMismatch { index, deviation });
        }
        let restart = PhasePoint { q: want.point, v: out, t: ev.time };
        flow = Integrator::with_cell(restart, r0, flow.cell())?;
    }
    if offset > 0.0 {
        finish_segment(&mut flow, offset, planned.len(), &mut events)?;
    }
    let record = record_from(orbit, initial, events, flow.state());
    let found = word_of(&record);
    let expected = expected_word(orbit, periods);
    if !word_matches(orbit, &expected, &found) {
        return Err(ValidationError::WordMismatch { expected, found });
    }
    Ok(record)
}

/// Equality for open orbits; periodic replays start inside the first
/// segment, so their word may be any cyclic rotation of the planned one.
fn word_matches(orbit: &AdmissibleOrbit, expected: &ReducedWord, found: &ReducedWord) -> bool {
    if !orbit.plan.is_periodic() {
        return expected == found;
    }
    let (e, f) = (expected.letters(), found.letters());
    e.len() == f.len() && (e.is_empty() || (0..e.len()).any(|r| e[r..].iter().chain(&e[..r]).eq(f.iter())))
}

/// Single launch from the start of the orbit, checking only the sequence of
/// scatterers and the word.
pub fn shoot_orbit(orbit: &AdmissibleOrbit, r0: f64) -> Result<OrbitRecord, ValidationError> {
    if orbit.r0 != r0 || !(r0 > 0.0) {
        return Err(ValidationError::WrongRadius { orbit: orbit.r0, requested: r0 });
    }
    let (initial, offset) = start_point(orbit);
    let mut flow = Integrator::new(initial, r0)?;
    let mut events = Vec::new();
    let planned = planned_contacts(orbit, 1);
    for (index, want) in planned.iter().enumerate() {
        let ev = next_collision(&mut flow, index, want.line, &mut events)?;
        let EventKind::Collision { line, .. } = ev.kind else { unreachable!("collision event") };
        if line != want.line {
            return Err(ValidationError::UnexpectedScatterer { index, expected: want.line, found: line, time: ev.time });
        }
        events.push(ev);
    }
    if offset > 0.0 {
        finish_segment(&mut flow, offset, planned.len(), &mut events)?;
    }
    let record = record_from(orbit, initial, events, flow.state());
    let found = word_of(&record);
    let expected = expected_word(orbit, 1);
    if !word_matches(orbit, &expected, &found) {
        return Err(ValidationError::WordMismatch { expected, found });
    }
    Ok(record)
}

impl AdmissibleOrbit {
    /// Runs [`validate_orbit`] at the orbit's own radius and records success.
    pub fn validate(&mut self) -> Result<OrbitRecord, ValidationError> {
        let rec = validate_orbit(self, self.r0)?;
        self.validated = true;
        Ok(rec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::admissible::{minimize_arclength, plan_word, PlanOptions};

    #[test]
    fn ab_reproduced_by_single_launch() {
        let w: ReducedWord = "ab".parse().unwrap();
        let orbit = minimize_arclength(&plan_word(&w, PlanOptions::default()).unwrap(), 0.05).unwrap();
        let rec = shoot_orbit(&orbit, 0.05).unwrap();
        assert_eq!(word_of(&rec), w);
        let rec = validate_orbit(&orbit, 0.05).unwrap();
        assert_eq!(word_of(&rec), w);
    }

    #[test]
    fn radius_must_match() {
        let w: ReducedWord = "ab".parse().unwrap();
        let orbit = minimize_arclength(&plan_word(&w, PlanOptions::default()).unwrap(), 0.05).unwrap();
        assert!(matches!(validate_orbit(&orbit, 0.1), Err(ValidationError::WrongRadius { .. })));
    }
}
