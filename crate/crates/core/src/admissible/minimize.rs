//! Arc-length minimization over contact parameters.
//!
//! A contact on edge `e` is `e.point(t)` at `r0 = 0` and
//! `e.point(t) + r0·(cos θ·e_j + sin θ·e_k)` on the swollen cylinder. The
//! objective is the length of the polyline through the contacts; we run a
//! damped Newton iteration with exact derivatives, box constraints on `t`
//! and a monotone line search.

use serde::{Deserialize, Serialize};

use crate::geometry::{transverse, Edge, Vec3};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MinimizeError {
    #[error("contact {node} left the interior of its edge (t = {t})")]
    BalanceViolation { node: usize, t: f64 },
    #[error("no convergence after {iterations} iterations (gradient {grad})")]
    NonConvergence { iterations: usize, grad: f64 },
    #[error("radius {0} outside [0, 0.2]")]
    BadRadius(f64),
    #[error("degenerate segment of zero length")]
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactParam {
    pub t: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinimizeOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Contacts closer than this to an edge end count as having left the edge.
    pub margin_tol: f64,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        MinimizeOptions { tol: 1e-11, max_iter: 100_000, margin_tol: 1e-6 }
    }
}

/// Polyline through contact sets, pinned at the ends or closed by a translation.
#[derive(Debug, Clone)]
pub struct Chain {
    pub head: Option<Vec3>,
    pub tail: Option<Vec3>,
    pub edges: Vec<Edge>,
    pub period: Option<Vec3>,
    pub r0: f64,
}

#[derive(Debug, Clone)]
pub struct ChainSolution {
    pub params: Vec<ContactParam>,
    pub length: f64,
    pub iterations: usize,
    pub grad_norm: f64,
    /// Objective after each accepted step.
    pub history: Vec<f64>,
}

/// Position of a contact with parameters `p`.
pub fn contact_point(e: &Edge, r0: f64, p: ContactParam) -> Vec3 {
    let [j, k] = transverse(e.axis());
    let mut q = e.point(p.t);
    if r0 > 0.0 {
        q[j] += r0 * p.theta.cos();
        q[k] += r0 * p.theta.sin();
    }
    q
}

/// Symmetric band matrix, lower part stored row-wise.
struct Band {
    n: usize,
    b: usize,
    data: Vec<f64>,
}

impl Band {
    fn new(n: usize, b: usize) -> Self {
        Band { n, b, data: vec![0.0; n * (b + 1)] }
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.b);
        i * (self.b + 1) + (i - j)
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.b {
            0.0
        } else {
            self.data[self.idx(i, j)]
        }
    }

    /// Adds to the symmetric entry (i, j) once.
    fn add(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    /// In-place Cholesky; false if not positive definite.
    fn cholesky(&mut self) -> bool {
        let (n, b) = (self.n, self.b);
        for i in 0..n {
            let lo = i.saturating_sub(b);
            for j in lo..=i {
                let klo = lo.max(j.saturating_sub(b));
                let mut s = self.data[self.idx(i, j)];
                for k in klo..j {
                    s -= self.data[self.idx(i, k)] * self.data[self.idx(j, k)];
                }
                if i == j {
                    if !(s > 0.0) || !s.is_finite() {
                        return false;
                    }
                    let k = self.idx(i, i);
                    self.data[k] = s.sqrt();
                } else {
                    let d = self.data[self.idx(j, j)];
                    let k = self.idx(i, j);
                    self.data[k] = s / d;
                }
            }
        }
        true
    }

    fn solve(&self, rhs: &mut [f64]) {
        let (n, b) = (self.n, self.b);
        for i in 0..n {
            let mut s = rhs[i];
            for k in i.saturating_sub(b)..i {
                s -= self.data[self.idx(i, k)] * rhs[k];
            }
            rhs[i] = s / self.data[self.idx(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = rhs[i];
            for k in i + 1..n.min(i + b + 1) {
                s -= self.data[self.idx(k, i)] * rhs[k];
            }
            rhs[i] = s / self.data[self.idx(i, i)];
        }
    }
}

#[derive(Clone, Copy)]
enum Slot {
    Fixed(Vec3),
    Contact(usize),
    /// Contact 0 shifted by the period.
    Closure,
}

impl Chain {
    fn dim(&self) -> usize {
        if self.r0 > 0.0 {
            2
        } else {
            1
        }
    }

    fn slots(&self) -> Vec<Slot> {
        let mut s = Vec::with_capacity(self.edges.len() + 2);
        if let Some(h) = self.head {
            s.push(Slot::Fixed(h));
        }
        s.extend((0..self.edges.len()).map(Slot::Contact));
        if let Some(t) = self.tail {
            s.push(Slot::Fixed(t));
        }
        if self.period.is_some() {
            s.push(Slot::Closure);
        }
        s
    }

    fn params(&self, x: &[f64]) -> Vec<ContactParam> {
        let d = self.dim();
        (0..self.edges.len())
            .map(|c| ContactParam { t: x[c * d], theta: if d == 2 { x[c * d + 1] } else { 0.0 } })
            .collect()
    }

    fn point(&self, slot: Slot, x: &[f64]) -> Vec3 {
        let d = self.dim();
        let at = |c: usize| {
            let p = ContactParam { t: x[c * d], theta: if d == 2 { x[c * d + 1] } else { 0.0 } };
            contact_point(&self.edges[c], self.r0, p)
        };
        match slot {
            Slot::Fixed(p) => p,
            Slot::Contact(c) => at(c),
            Slot::Closure => at(0) + self.period.expect("closure needs a period"),
        }
    }

    fn contact_of(slot: Slot) -> Option<usize> {
        match slot {
            Slot::Fixed(_) => None,
            Slot::Contact(c) => Some(c),
            Slot::Closure => Some(0),
        }
    }

    pub fn length(&self, x: &[f64]) -> f64 {
        let slots = self.slots();
        let pts: Vec<Vec3> = slots.iter().map(|&s| self.point(s, x)).collect();
        pts.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
    }

    /// Jacobian columns of contact `c` (t, then θ).
    fn jac(&self, c: usize, x: &[f64]) -> [Vec3; 2] {
        let e = &self.edges[c];
        let axis = e.axis();
        let [j, k] = transverse(axis);
        let mut jt = Vec3::ZERO;
        jt[axis] = 1.0;
        let mut jth = Vec3::ZERO;
        if self.dim() == 2 {
            let th = x[c * 2 + 1];
            jth[j] = -self.r0 * th.sin();
            jth[k] = self.r0 * th.cos();
        }
        [jt, jth]
    }

    fn curvature(&self, c: usize, x: &[f64]) -> Vec3 {
        let [j, k] = transverse(self.edges[c].axis());
        let th = x[c * 2 + 1];
        let mut v = Vec3::ZERO;
        v[j] = -self.r0 * th.cos();
        v[k] = -self.r0 * th.sin();
        v
    }

    /// Length, gradient and Hessian.
    fn evaluate(&self, x: &[f64]) -> Result<(f64, Vec<f64>, Band), MinimizeError> {
        let d = self.dim();
        let m = self.edges.len();
        let n = m * d;
        let b = if self.period.is_some() { n.saturating_sub(1) } else { 2 * d - 1 };
        let mut hess = Band::new(n, b.min(n.saturating_sub(1)));
        let slots = self.slots();
        let pts: Vec<Vec3> = slots.iter().map(|&s| self.point(s, x)).collect();
        let jacs: Vec<[Vec3; 2]> = (0..m).map(|c| self.jac(c, x)).collect();
        let mut gp = vec![Vec3::ZERO; m];
        let mut len = 0.0;
        let add_block = |hess: &mut Band, c1: usize, c2: usize, mat: &[[f64; 3]; 3], scale: f64| {
            for a in 0..d {
                let ja = jacs[c1][a];
                for bb in 0..d {
                    let jb = jacs[c2][bb];
                    let mut v = 0.0;
                    for r in 0..3 {
                        for s in 0..3 {
                            v += ja[r] * mat[r][s] * jb[s];
                        }
                    }
                    let (i, j) = (c1 * d + a, c2 * d + bb);
                    if c1 == c2 {
                        if i >= j {
                            hess.add(i, j, v * scale);
                        }
                    } else {
                        hess.add(i, j, v * scale);
                    }
                }
            }
        };
        for w in 0..slots.len() - 1 {
            let s = pts[w + 1] - pts[w];
            let l = s.norm();
            if !(l > 1e-300) {
                return Err(MinimizeError::Degenerate);
            }
            len += l;
            let u = s * (1.0 / l);
            let mut h = [[0.0; 3]; 3];
            for (r, row) in h.iter_mut().enumerate() {
                for (c, val) in row.iter_mut().enumerate() {
                    *val = (f64::from(u8::from(r == c)) - u[r] * u[c]) / l;
                }
            }
            let ca = Self::contact_of(slots[w]);
            let cb = Self::contact_of(slots[w + 1]);
            if let Some(a) = ca {
                gp[a] = gp[a] - u;
                add_block(&mut hess, a, a, &h, 1.0);
            }
            if let Some(bc) = cb {
                gp[bc] += u;
                add_block(&mut hess, bc, bc, &h, 1.0);
            }
            if let (Some(a), Some(bc)) = (ca, cb) {
                if a == bc {
                    add_block(&mut hess, a, a, &h, -2.0);
                } else {
                    add_block(&mut hess, a, bc, &h, -1.0);
                }
            }
        }
        let mut grad = vec![0.0; n];
        for c in 0..m {
            for a in 0..d {
                grad[c * d + a] = jacs[c][a].dot(gp[c]);
            }
            if d == 2 {
                let i = c * 2 + 1;
                hess.add(i, i, gp[c].dot(self.curvature(c, x)));
            }
        }
        Ok((len, grad, hess))
    }

    fn project(&self, x: &mut [f64]) {
        let d = self.dim();
        for c in 0..self.edges.len() {
            x[c * d] = x[c * d].clamp(0.0, 1.0);
        }
    }

    fn projected_grad(&self, x: &[f64], g: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let mut pg = g.to_vec();
        for c in 0..self.edges.len() {
            let i = c * d;
            if (x[i] <= 0.0 && g[i] > 0.0) || (x[i] >= 1.0 && g[i] < 0.0) {
                pg[i] = 0.0;
            }
        }
        pg
    }

    /// Minimizes from `start`.
    pub fn minimize(&self, start: &[ContactParam], opts: &MinimizeOptions) -> Result<ChainSolution, MinimizeError> {
        let d = self.dim();
        let n = self.edges.len() * d;
        let mut x = vec![0.0; n];
        for (c, p) in start.iter().enumerate() {
            x[c * d] = p.t;
            if d == 2 {
                x[c * d + 1] = p.theta;
            }
        }
        self.project(&mut x);
        if n == 0 {
            let len = self.length(&x);
            return Ok(ChainSolution { params: vec![], length: len, iterations: 0, grad_norm: 0.0, history: vec![len] });
        }
        let (mut f, mut g, mut h) = self.evaluate(&x)?;
        let mut history = vec![f];
        let mut lambda = 0.0f64;
        let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
        for iter in 0..opts.max_iter {
            let pg = self.projected_grad(&x, &g);
            let gn = norm(&pg);
            if gn < opts.tol {
                return Ok(ChainSolution { params: self.params(&x), length: f, iterations: iter, grad_norm: gn, history });
            }
            let active: Vec<bool> = (0..n).map(|i| i % d == 0 && pg[i] == 0.0 && g[i] != 0.0).collect();
            let scale = (0..n).map(|i| h.get(i, i).abs()).fold(1e-12, f64::max);
            let mut step = None;
            for _ in 0..40 {
                let mut a = Band::new(n, h.b);
                a.data.copy_from_slice(&h.data);
                for i in 0..n {
                    if active[i] {
                        for j in i.saturating_sub(h.b)..=(i + h.b).min(n - 1) {
                            if j <= i {
                                let k = a.idx(i, j);
                                a.data[k] = 0.0;
                            } else {
                                let k = a.idx(j, i);
                                a.data[k] = 0.0;
                            }
                        }
                        let k = a.idx(i, i);
                        a.data[k] = 1.0;
                    } else if lambda > 0.0 {
                        let k = a.idx(i, i);
                        a.data[k] += lambda * scale;
                    }
                }
                if a.cholesky() {
                    let mut rhs: Vec<f64> = (0..n).map(|i| if active[i] { 0.0 } else { -g[i] }).collect();
                    a.solve(&mut rhs);
                    step = Some(rhs);
                    break;
                }
                lambda = if lambda == 0.0 { 1e-10 } else { lambda * 10.0 };
            }
            let Some(dir) = step else {
                return Err(MinimizeError::NonConvergence { iterations: iter, grad: gn });
            };
            let mut alpha = 1.0;
            let mut accepted = false;
            let slack = 1e-14 * f.abs().max(1.0);
            for _ in 0..60 {
                let mut xn: Vec<f64> = x.iter().zip(&dir).map(|(a, b)| a + alpha * b).collect();
                self.project(&mut xn);
                let fl = self.length(&xn);
                if fl < f {
                    let (fe, ge, he) = self.evaluate(&xn)?;
                    x = xn;
                    f = fe;
                    g = ge;
                    h = he;
                    accepted = true;
                    break;
                }
                if fl <= f + slack {
                    // Rounding-level change: accept only if the gradient shrinks.
                    let (fe, ge, he) = self.evaluate(&xn)?;
                    if norm(&self.projected_grad(&xn, &ge)) < gn {
                        x = xn;
                        f = fe.min(f);
                        g = ge;
                        h = he;
                        accepted = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if accepted {
                history.push(f);
                lambda = if lambda < 1e-10 { 0.0 } else { lambda * 0.1 };
            } else {
                if lambda > 1e12 {
                    return Err(MinimizeError::NonConvergence { iterations: iter, grad: gn });
                }
                lambda = if lambda == 0.0 { 1e-8 } else { lambda * 100.0 };
            }
        }
        let pg = self.projected_grad(&x, &g);
        Err(MinimizeError::NonConvergence { iterations: opts.max_iter, grad: norm(&pg) })
    }

    pub fn points(&self, params: &[ContactParam]) -> Vec<Vec3> {
        params.iter().zip(&self.edges).map(|(p, e)| contact_point(e, self.r0, *p)).collect()
    }

    /// Outward bisector angles for the contacts at `r0 = 0` positions.
    pub fn bisector_angles(&self, zero_points: &[Vec3]) -> Vec<f64> {
        let m = self.edges.len();
        (0..m)
            .map(|c| {
                let prev = if c == 0 {
                    self.head.unwrap_or_else(|| zero_points[m - 1] - self.period.expect("closed"))
                } else {
                    zero_points[c - 1]
                };
                let next = if c + 1 == m {
                    self.tail.unwrap_or_else(|| zero_points[0] + self.period.expect("closed"))
                } else {
                    zero_points[c + 1]
                };
                let p = zero_points[c];
                let a = (prev - p).normalized() + (next - p).normalized();
                let [j, k] = transverse(self.edges[c].axis());
                if a[j].abs() + a[k].abs() < 1e-14 {
                    let r = (prev - p).normalized();
                    r[k].atan2(r[j])
                } else {
                    a[k].atan2(a[j])
                }
            })
            .collect()
    }

    /// Two-stage solve: the degenerate problem from the edge midpoints, then
    /// (if `r0 > 0`) the swollen one from the bisector directions.
    pub fn solve(&self, opts: &MinimizeOptions) -> Result<ChainSolution, MinimizeError> {
        let zero = Chain { r0: 0.0, ..self.clone() };
        let start = vec![ContactParam { t: 0.5, theta: 0.0 }; self.edges.len()];
        let base = zero.minimize(&start, opts)?;
        if self.r0 == 0.0 {
            return Ok(base);
        }
        let pts = zero.points(&base.params);
        let angles = self.bisector_angles(&pts);
        let start: Vec<ContactParam> =
            base.params.iter().zip(angles).map(|(p, th)| ContactParam { t: p.t, theta: th }).collect();
        match self.minimize(&start, opts) {
            Ok(sol) => Ok(sol),
            Err(_) => {
                // Continuation in the radius.
                let mut params = start;
                let mut last = None;
                for s in 1..=8 {
                    let stage = Chain { r0: self.r0 * s as f64 / 8.0, ..self.clone() };
                    let sol = stage.minimize(&params, opts)?;
                    params = sol.params.clone();
                    last = Some(sol);
                }
                Ok(last.expect("eight stages"))
            }
        }
    }
}

/// Smallest distance of any edge parameter from the edge ends.
pub fn interior_margin(params: &[ContactParam]) -> f64 {
    params.iter().map(|p| p.t.min(1.0 - p.t)).fold(f64::INFINITY, f64::min)
}
