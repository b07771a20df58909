//! Construction of admissible orbits with a prescribed symbolic itinerary.
//!
//! A reduced word is turned into an [`EdgePlan`] by the turn table, the plan
//! is realized by minimizing arc length over the contact parameters, and the
//! result is checked against the flow simulator. Idle runs slow an orbit down
//! without changing its word; periodic closure produces orbits whose word is
//! a power of the input.

pub mod cases;
pub mod idle;
pub mod minimize;
pub mod periodic;
pub mod plan;
pub mod validate;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

pub use cases::{EntryState, ForceSign, TurnCase};
pub use idle::{insert_idle_runs, IdleError};
pub use minimize::{ContactParam, MinimizeError, MinimizeOptions};
pub use periodic::close_periodic;
pub use plan::{plan_word, plan_word_from, EdgePlan, NodeRole, PlanError, PlanNode, PlanOptions};
pub use validate::{shoot_orbit, validate_orbit, ValidationError};

use crate::geometry::{cylinder_normal, transverse, Cylinder, Vec3};
use minimize::{interior_margin, Chain};

/// Largest radius the constructor accepts.
pub const MAX_RADIUS: f64 = 0.2;

#[derive(Debug, thiserror::Error)]
pub enum AdmissibleError {
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Minimize(#[from] MinimizeError),
    #[error(transparent)]
    Validation(#[from] ValidationError),
    #[error(transparent)]
    Idle(#[from] IdleError),
}

/// A minimized realization of an edge plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibleOrbit {
    pub plan: EdgePlan,
    pub r0: f64,
    /// Per node; anchors sit at `t = 1/2` on their axis.
    pub params: Vec<ContactParam>,
    pub points: Vec<Vec3>,
    /// Total polyline length, i.e. travel time at unit speed.
    pub length: f64,
    /// Time spent in each compartment visit.
    pub cell_times: Vec<f64>,
    /// Smallest distance of a contact parameter from its edge ends.
    pub margin: f64,
    pub iterations: usize,
    pub grad_norm: f64,
    pub validated: bool,
}

fn chain_for(plan: &EdgePlan, r0: f64) -> Chain {
    let free: Vec<_> = plan.free_indices().into_iter().map(|i| plan.nodes[i].edge).collect();
    let (head, tail) = match plan.anchor_points() {
        Some((h, t)) => (Some(h), Some(t)),
        None => (None, None),
    };
    Chain { head, tail, edges: free, period: plan.period.map(Vec3::from_lattice), r0 }
}

/// Minimal-length polyline through the plan's contact sets at radius `r0`.
pub fn minimize_arclength(plan: &EdgePlan, r0: f64) -> Result<AdmissibleOrbit, MinimizeError> {
    minimize_arclength_with(plan, r0, &MinimizeOptions::default())
}

pub fn minimize_arclength_with(
    plan: &EdgePlan,
    r0: f64,
    opts: &MinimizeOptions,
) -> Result<AdmissibleOrbit, MinimizeError> {
    if !(0.0..=MAX_RADIUS).contains(&r0) {
        return Err(MinimizeError::BadRadius(r0));
    }
    let chain = chain_for(plan, r0);
    let sol = chain.solve(opts)?;
    let free = plan.free_indices();
    for (k, p) in sol.params.iter().enumerate() {
        if p.t.min(1.0 - p.t) < opts.margin_tol {
            return Err(MinimizeError::BalanceViolation { node: free[k], t: p.t });
        }
    }
    let mut params = vec![ContactParam { t: 0.5, theta: 0.0 }; plan.nodes.len()];
    for (k, &i) in free.iter().enumerate() {
        params[i] = sol.params[k];
    }
    let points: Vec<Vec3> = plan
        .nodes
        .iter()
        .zip(&params)
        .map(|(n, p)| if n.is_anchor() { n.edge.midpoint() } else { minimize::contact_point(&n.edge, r0, *p) })
        .collect();
    let mut orbit = AdmissibleOrbit {
        plan: plan.clone(),
        r0,
        params,
        points,
        length: sol.length,
        cell_times: vec![],
        margin: interior_margin(&sol.params),
        iterations: sol.iterations,
        grad_norm: sol.grad_norm,
        validated: false,
    };
    orbit.cell_times = plan
        .visits
        .iter()
        .map(|v| (v.first..v.last).map(|i| (orbit.point_at(i + 1) - orbit.point_at(i)).norm()).sum())
        .collect();
    Ok(orbit)
}

impl AdmissibleOrbit {
    /// Node position, with index `nodes.len()` wrapping around a period.
    pub fn point_at(&self, i: usize) -> Vec3 {
        match self.plan.period {
            Some(v) if i == self.points.len() => self.points[0] + Vec3::from_lattice(v),
            _ => self.points[i],
        }
    }

    /// Number of polyline vertices including the periodic closure.
    pub fn vertex_count(&self) -> usize {
        self.points.len() + usize::from(self.plan.is_periodic())
    }

    /// `|w| / T`.
    pub fn speed(&self) -> f64 {
        self.plan.word.len() as f64 / self.length
    }

    /// Unit direction of the segment leaving vertex `i`.
    pub fn direction(&self, i: usize) -> Vec3 {
        (self.point_at(i + 1) - self.point_at(i)).normalized()
    }

    /// Largest deviation from the reflection law `u_out = u_in − 2(u_in·n)n`
    /// over the free contacts (zero for `r0 = 0`, where there is no normal).
    pub fn fermat_residual(&self) -> f64 {
        if self.r0 == 0.0 {
            return 0.0;
        }
        let n = self.points.len();
        let mut worst = 0.0f64;
        for i in 0..n {
            let node = &self.plan.nodes[i];
            if node.is_anchor() {
                continue;
            }
            let prev = if i == 0 {
                self.point_at(n - 1) - Vec3::from_lattice(self.plan.period.expect("closed"))
            } else {
                self.points[i - 1]
            };
            let p = self.points[i];
            let u_in = (p - prev).normalized();
            let u_out = self.direction(i);
            let cyl = Cylinder { line: node.edge.line, radius: self.r0 };
            let Ok(normal) = cylinder_normal(p, &cyl) else {
                return f64::INFINITY;
            };
            let refl = u_in - normal * (2.0 * u_in.dot(normal));
            worst = worst.max((refl - u_out).norm());
        }
        worst
    }

    /// Largest per-compartment time over visits with a turn case.
    pub fn max_cell_time(&self) -> f64 {
        self.plan
            .visits
            .iter()
            .zip(&self.cell_times)
            .filter(|(v, _)| v.case.is_some())
            .map(|(_, &t)| t)
            .fold(0.0, f64::max)
    }

    pub const CONTACT_HEADER: &'static str =
        "index,cell_x,cell_y,cell_z,axis,edge_x,edge_y,edge_z,t,theta,force,role,q_x,q_y,q_z";

    /// Contact table, one row per node, axes 1-based.
    pub fn contact_csv(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{}", Self::CONTACT_HEADER).expect("string write");
        for (i, cell, node) in self.plan.contact_rows() {
            let o = node.edge.origin();
            let p = self.params[i];
            let q = self.points[i];
            let force = node.force.map(|f| f.to_string()).unwrap_or_default();
            let role = match node.role {
                NodeRole::Anchor => "anchor",
                NodeRole::Contact => "contact",
                NodeRole::Idle => "idle",
            };
            writeln!(
                out,
                "{i},{},{},{},{},{},{},{},{},{},{force},{role},{},{},{}",
                cell[0],
                cell[1],
                cell[2],
                node.edge.axis() + 1,
                o[0],
                o[1],
                o[2],
                p.t,
                p.theta,
                q[0],
                q[1],
                q[2]
            )
            .expect("string write");
        }
        out
    }

    /// JSON description of the plan and the realized contacts.
    pub fn plan_json(&self) -> serde_json::Value {
        let contacts: Vec<serde_json::Value> = self
            .plan
            .nodes
            .iter()
            .zip(&self.params)
            .zip(&self.points)
            .map(|((n, p), q)| {
                let [j, k] = transverse(n.edge.axis());
                serde_json::json!({
                    "axis": n.edge.axis() + 1,
                    "fixed": { (j + 1).to_string(): n.edge.line.base[0], (k + 1).to_string(): n.edge.line.base[1] },
                    "start": n.edge.start,
                    "force": n.force.map(|f| f.to_string()),
                    "role": n.role,
                    "t": p.t,
                    "theta": p.theta,
                    "point": q.0,
                })
            })
            .collect();
        serde_json::json!({
            "word": self.plan.word.to_string(),
            "r0": self.r0,
            "compartments": self.plan.compartments,
            "period": self.plan.period,
            "contacts": contacts,
            "cases": self.plan.visits.iter().map(|v| v.case.map(|c| c.name())).collect::<Vec<_>>(),
            "cell_times": self.cell_times,
            "length": self.length,
            "speed": self.speed(),
            "margin": self.margin,
            "validated": self.validated,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::freegroup::ReducedWord;

    #[test]
    fn ab_orbit_at_zero_radius() {
        let w: ReducedWord = "ab".parse().unwrap();
        let plan = plan_word(&w, PlanOptions::default()).unwrap();
        let orbit = minimize_arclength(&plan, 0.0).unwrap();
        assert!(orbit.grad_norm < 1e-10);
        assert!(orbit.margin > 0.0);
        assert!(orbit.max_cell_time() <= 3.0);
    }

    #[test]
    fn fermat_at_positive_radius() {
        let w: ReducedWord = "abcAb".parse().unwrap();
        let plan = plan_word(&w, PlanOptions::default()).unwrap();
        let orbit = minimize_arclength(&plan, 0.05).unwrap();
        assert!(orbit.grad_norm < 1e-10);
        assert!(orbit.fermat_residual() < 1e-8, "{}", orbit.fermat_residual());
    }

    #[test]
    fn rejects_large_radius() {
        let w: ReducedWord = "a".parse().unwrap();
        let plan = plan_word(&w, PlanOptions::default()).unwrap();
        assert!(matches!(minimize_arclength(&plan, 0.3), Err(MinimizeError::BadRadius(_))));
    }
}
