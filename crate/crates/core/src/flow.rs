//! Event-driven billiard flow on the lifted table.
//!
//! The particle is tracked in ℝ³ together with the integer cell it occupies.
//! Inside a cell only the cell's twelve edge cylinders can be hit (r₀ < 1/2),
//! so each step compares the next face crossing with those twelve quadratics.

use std::io::{self, BufRead, Write};

use rand::Rng;
use rand_distr::{Distribution, UnitSphere};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::freegroup::{reduce, Letter, ReducedWord};
use crate::geometry::{
    cell_edges, cylinder_normal, ray_cylinder_hit, reflect, Cylinder, GeometryError, LatticeLine,
    Vec3,
};

/// Collision and crossing within this time window are ordered collision-first.
pub const TIE_TOL: f64 = 1e-12;
/// A contact this close to a second cylinder is a corner hit.
pub const CORNER_TOL: f64 = 1e-9;
pub const DEFAULT_EVENT_BUDGET: u64 = 10_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("start point lies inside cylinder {0:?} (gap {1:e})")]
    InsideScatterer(LatticeLine, f64),
    #[error("velocity norm {0} is not 1")]
    NotUnitSpeed(f64),
    #[error("non-finite start state")]
    NonFinite,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub q: Vec3,
    pub v: Vec3,
    pub t: f64,
}

impl PhasePoint {
    pub fn new(q: Vec3, v: Vec3) -> Self {
        PhasePoint { q, v, t: 0.0 }
    }

    /// Same configuration point, velocity reversed.
    pub fn reversed(&self) -> Self {
        PhasePoint { q: self.q, v: -self.v, t: self.t }
    }

    pub fn check(&self, r0: f64) -> Result<(), FlowError> {
        if !self.q.is_finite() || !self.v.is_finite() || !self.t.is_finite() {
            return Err(FlowError::NonFinite);
        }
        let n = self.v.norm();
        if (n - 1.0).abs() > 1e-12 {
            return Err(FlowError::NotUnitSpeed(n));
        }
        for e in cell_edges(self.q.floor()) {
            let gap = e.line.distance(self.q) - r0;
            if gap < -1e-9 {
                return Err(FlowError::InsideScatterer(e.line, gap));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EventKind {
    Collision { line: LatticeLine, v_in: Vec3 },
    FaceCrossing { axis: usize, positive: bool, plane: i64 },
}

/// An event with the phase point right after it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitEvent {
    pub time: f64,
    pub q: Vec3,
    pub v: Vec3,
    pub kind: EventKind,
}

impl OrbitEvent {
    pub fn letter(&self) -> Option<Letter> {
        match self.kind {
            EventKind::FaceCrossing { axis, positive, .. } => Some(Letter::new(axis, positive).unwrap()),
            EventKind::Collision { .. } => None,
        }
    }

    pub fn is_collision(&self) -> bool {
        matches!(self.kind, EventKind::Collision { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Termination {
    Completed,
    /// Contact within [`CORNER_TOL`] of the intersection of two cylinders.
    Singular { time: f64, point: Vec3 },
    EventBudget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitRecord {
    pub r0: f64,
    pub initial: PhasePoint,
    pub events: Vec<OrbitEvent>,
    pub final_state: PhasePoint,
    /// Face crossings per axis: n_x, n_y, n_z.
    pub crossings: [u64; 3],
    pub termination: Termination,
}

/// Outcome of one integrator step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Step {
    Event(OrbitEvent),
    /// The time limit was reached before any further event.
    Reached,
    Singular { time: f64, point: Vec3 },
}

/// Stepping integrator; `simulate` drives it to a fixed horizon, the orbit
/// validator drives it one collision at a time.
#[derive(Debug, Clone)]
pub struct Integrator {
    r0: f64,
    state: PhasePoint,
    cell: [i64; 3],
}

impl Integrator {
    pub fn new(start: PhasePoint, r0: f64) -> Result<Self, FlowError> {
        start.check(r0)?;
        Ok(Integrator { r0, state: start, cell: start.q.floor() })
    }

    /// Starts with an explicitly tracked compartment, for restarts from points
    /// that lie on a face within rounding.
    pub fn with_cell(start: PhasePoint, r0: f64, cell: [i64; 3]) -> Result<Self, FlowError> {
        start.check(r0)?;
        Ok(Integrator { r0, state: start, cell })
    }

    pub fn state(&self) -> PhasePoint {
        self.state
    }

    pub fn cell(&self) -> [i64; 3] {
        self.cell
    }

    pub fn radius(&self) -> f64 {
        self.r0
    }

    /// Advances to the next event, or to absolute time `t_limit` if that comes first.
    pub fn step(&mut self, t_limit: f64) -> Step {
        let PhasePoint { q, v, t } = self.state;
        let mut t_face = f64::INFINITY;
        let mut face_axis = 0;
        for i in 0..3 {
            let dt = if v[i] > 0.0 {
                ((self.cell[i] + 1) as f64 - q[i]) / v[i]
            } else if v[i] < 0.0 {
                (self.cell[i] as f64 - q[i]) / v[i]
            } else {
                f64::INFINITY
            };
            let dt = dt.max(0.0);
            if dt < t_face {
                t_face = dt;
                face_axis = i;
            }
        }

        let mut best: Option<(f64, Vec3, LatticeLine)> = None;
        for e in cell_edges(self.cell) {
            let cyl = Cylinder { line: e.line, radius: self.r0 };
            if let Some(h) = ray_cylinder_hit(q, v, &cyl) {
                if h.grazing || h.time > t_face + TIE_TOL {
                    continue;
                }
                if best.map_or(true, |(bt, _, _)| h.time < bt) {
                    best = Some((h.time, h.point, e.line));
                }
            }
        }

        let remaining = t_limit - t;
        let next = best.map_or(t_face, |(bt, _, _)| bt);
        if next > remaining {
            self.state = PhasePoint { q: q + v * remaining, v, t: t_limit };
            return Step::Reached;
        }

        if let Some((dt, point, line)) = best {
            let time = t + dt;
            let cyl = Cylinder { line, radius: self.r0 };
            for other in cell_edges(self.cell) {
                if other.line.axis != line.axis && other.line.distance(point) - self.r0 < CORNER_TOL {
                    self.state = PhasePoint { q: point, v, t: time };
                    return Step::Singular { time, point };
                }
            }
            let n = match cylinder_normal(point, &cyl) {
                Ok(n) => n,
                Err(_) => return Step::Singular { time, point },
            };
            let v_out = match reflect(v, n) {
                Ok(w) => w,
                Err(_) => return Step::Singular { time, point },
            };
            self.state = PhasePoint { q: point, v: v_out, t: time };
            return Step::Event(OrbitEvent {
                time,
                q: point,
                v: v_out,
                kind: EventKind::Collision { line, v_in: v },
            });
        }

        let i = face_axis;
        let positive = v[i] > 0.0;
        let plane = if positive { self.cell[i] + 1 } else { self.cell[i] };
        let mut p = q + v * t_face;
        p[i] = plane as f64;
        self.cell[i] += if positive { 1 } else { -1 };
        let time = t + t_face;
        self.state = PhasePoint { q: p, v, t: time };
        Step::Event(OrbitEvent { time, q: p, v, kind: EventKind::FaceCrossing { axis: i, positive, plane } })
    }
}

/// Runs the flow for time `duration` from `start`.
pub fn simulate(start: PhasePoint, duration: f64, r0: f64) -> Result<OrbitRecord, FlowError> {
    simulate_with_budget(start, duration, r0, DEFAULT_EVENT_BUDGET)
}

pub fn simulate_with_budget(
    start: PhasePoint,
    duration: f64,
    r0: f64,
    budget: u64,
) -> Result<OrbitRecord, FlowError> {
    let mut flow = Integrator::new(start, r0)?;
    let t_end = start.t + duration;
    let mut events = Vec::new();
    let mut crossings = [0u64; 3];
    let termination = loop {
        if events.len() as u64 >= budget {
            break Termination::EventBudget;
        }
        match flow.step(t_end) {
            Step::Event(ev) => {
                if let EventKind::FaceCrossing { axis, .. } = ev.kind {
                    crossings[axis] += 1;
                }
                events.push(ev);
            }
            Step::Reached => break Termination::Completed,
            Step::Singular { time, point } => break Termination::Singular { time, point },
        }
    };
    Ok(OrbitRecord { r0, initial: start, events, final_state: flow.state(), crossings, termination })
}

/// g_T: face crossings in time order, freely reduced.
pub fn word_of(record: &OrbitRecord) -> ReducedWord {
    reduce(record.events.iter().filter_map(|e| e.letter()))
}

impl OrbitRecord {
    pub fn duration(&self) -> f64 {
        self.final_state.t - self.initial.t
    }

    pub fn total_crossings(&self) -> u64 {
        self.crossings.iter().sum()
    }

    pub fn collisions(&self) -> impl Iterator<Item = &OrbitEvent> {
        self.events.iter().filter(|e| e.is_collision())
    }

    pub fn is_singular(&self) -> bool {
        !matches!(self.termination, Termination::Completed)
    }

    /// Phase point at absolute time `t` by linear motion from the last event.
    pub fn state_at(&self, t: f64) -> PhasePoint {
        let idx = self.events.partition_point(|e| e.time <= t);
        let (q, v, t0) = if idx == 0 {
            (self.initial.q, self.initial.v, self.initial.t)
        } else {
            let e = &self.events[idx - 1];
            (e.q, e.v, e.time)
        };
        PhasePoint { q: q + v * (t - t0), v, t }
    }

    /// The record cut at absolute time `t`.
    pub fn truncated(&self, t: f64) -> OrbitRecord {
        let idx = self.events.partition_point(|e| e.time <= t);
        let events = self.events[..idx].to_vec();
        let mut crossings = [0u64; 3];
        for e in &events {
            if let EventKind::FaceCrossing { axis, .. } = e.kind {
                crossings[axis] += 1;
            }
        }
        OrbitRecord {
            r0: self.r0,
            initial: self.initial,
            final_state: self.state_at(t.min(self.final_state.t)),
            events,
            crossings,
            termination: Termination::Completed,
        }
    }

    /// One JSON object per event.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> io::Result<()> {
        for e in &self.events {
            serde_json::to_writer(&mut w, &EventLine::from(e))?;
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Wire form of one event: `{t, kind, axis, sign, q, v}` plus the crossing
/// plane or the scatterer line base. Axes are 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventLine {
    pub t: f64,
    pub kind: String,
    pub axis: usize,
    pub sign: Option<i32>,
    pub q: [f64; 3],
    pub v: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plane: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<[i64; 2]>,
}

impl From<&OrbitEvent> for EventLine {
    fn from(e: &OrbitEvent) -> Self {
        match e.kind {
            EventKind::Collision { line, .. } => EventLine {
                t: e.time,
                kind: "collision".into(),
                axis: line.axis + 1,
                sign: None,
                q: e.q.0,
                v: e.v.0,
                plane: None,
                base: Some(line.base),
            },
            EventKind::FaceCrossing { axis, positive, plane } => EventLine {
                t: e.time,
                kind: "crossing".into(),
                axis: axis + 1,
                sign: Some(if positive { 1 } else { -1 }),
                q: e.q.0,
                v: e.v.0,
                plane: Some(plane),
                base: None,
            },
        }
    }
}

pub fn read_jsonl<R: BufRead>(r: R) -> io::Result<Vec<EventLine>> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(io::Error::other)?);
    }
    Ok(out)
}

pub const SUMMARY_HEADER: &str = "seed,T,r0,n_x,n_y,n_z,word_length,word_prefix,singular";

/// Summary CSV row; the word prefix is cut at 64 letters.
pub fn summary_row(seed: u64, record: &OrbitRecord) -> String {
    let word = word_of(record);
    let prefix = word.prefix(64);
    format!(
        "{},{},{},{},{},{},{},{},{}",
        seed,
        record.duration(),
        record.r0,
        record.crossings[0],
        record.crossings[1],
        record.crossings[2],
        word.len(),
        prefix,
        u8::from(record.is_singular())
    )
}

/// Uniform position in the table (rejection from the unit cube) and uniform
/// direction on the sphere.
pub fn random_phase_point<R: Rng + ?Sized>(rng: &mut R, r0: f64) -> PhasePoint {
    let q = loop {
        let q = Vec3::new(rng.random(), rng.random(), rng.random());
        if cell_edges([0, 0, 0]).iter().all(|e| e.line.distance(q) > r0 + 1e-9) {
            break q;
        }
    };
    let v: [f64; 3] = UnitSphere.sample(rng);
    PhasePoint::new(q, Vec3(v).normalized())
}
