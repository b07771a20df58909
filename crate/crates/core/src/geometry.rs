//! Lattice geometry of the lifted table: cylinders around the integer lines
//! parallel to the coordinate axes, ray intersection and specular reflection.

use std::collections::BTreeSet;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Discriminant threshold below which a hit is reported as grazing.
pub const GRAZING_TOL: f64 = 1e-12;
/// Allowed distance of a point from a cylinder surface when computing normals.
pub const SURFACE_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("velocity is not incoming (v·n = {0})")]
    OutgoingNormal(f64),
    #[error("point is {0:e} away from the cylinder surface")]
    OffSurface(f64),
    #[error("radius {0} outside (0, 1/2)")]
    BadRadius(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3(pub [f64; 3]);

impl Vec3 {
    pub const ZERO: Vec3 = Vec3([0.0; 3]);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3([x, y, z])
    }

    pub fn unit(axis: usize) -> Self {
        let mut v = [0.0; 3];
        v[axis] = 1.0;
        Vec3(v)
    }

    pub fn from_lattice(p: [i64; 3]) -> Self {
        Vec3([p[0] as f64, p[1] as f64, p[2] as f64])
    }

    #[inline]
    pub fn dot(self, o: Vec3) -> f64 {
        self.0[0] * o.0[0] + self.0[1] * o.0[1] + self.0[2] * o.0[2]
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn normalized(self) -> Vec3 {
        self * (1.0 / self.norm())
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        let [a, b, c] = self.0;
        let [x, y, z] = o.0;
        Vec3([b * z - c * y, c * x - a * z, a * y - b * x])
    }

    pub fn is_finite(self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    pub fn floor(self) -> [i64; 3] {
        [self.0[0].floor() as i64, self.0[1].floor() as i64, self.0[2].floor() as i64]
    }

    pub fn max_abs_diff(self, o: Vec3) -> f64 {
        (self - o).0.iter().fold(0.0f64, |m, c| m.max(c.abs()))
    }
}

impl Index<usize> for Vec3 {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for Vec3 {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2]])
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3([self.0[0] - o.0[0], self.0[1] - o.0[1], self.0[2] - o.0[2]])
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3([self.0[0] * s, self.0[1] * s, self.0[2] * s])
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3([-self.0[0], -self.0[1], -self.0[2]])
    }
}

/// The two axes transverse to `axis`, in increasing order.
#[inline]
pub fn transverse(axis: usize) -> [usize; 2] {
    match axis {
        0 => [1, 2],
        1 => [0, 2],
        _ => [0, 1],
    }
}

/// A lattice line parallel to a coordinate axis:
/// `{x_j = base[0], x_k = base[1]}` with `[j, k] = transverse(axis)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LatticeLine {
    pub axis: usize,
    pub base: [i64; 2],
}

impl LatticeLine {
    pub fn new(axis: usize, base: [i64; 2]) -> Self {
        assert!(axis < 3, "axis out of range");
        LatticeLine { axis, base }
    }

    /// The line through lattice point `p` parallel to `axis`.
    pub fn through(axis: usize, p: [i64; 3]) -> Self {
        let [j, k] = transverse(axis);
        LatticeLine { axis, base: [p[j], p[k]] }
    }

    /// Value of the fixed coordinate `coord` (must differ from `axis`).
    pub fn fixed(&self, coord: usize) -> i64 {
        let [j, k] = transverse(self.axis);
        if coord == j {
            self.base[0]
        } else if coord == k {
            self.base[1]
        } else {
            panic!("coordinate {coord} runs along the line")
        }
    }

    /// Transverse offset of `p` from the line, as a vector with zero axial component.
    pub fn radial(&self, p: Vec3) -> Vec3 {
        let [j, k] = transverse(self.axis);
        let mut r = Vec3::ZERO;
        r[j] = p[j] - self.base[0] as f64;
        r[k] = p[k] - self.base[1] as f64;
        r
    }

    pub fn distance(&self, p: Vec3) -> f64 {
        self.radial(p).norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cylinder {
    pub line: LatticeLine,
    pub radius: f64,
}

impl Cylinder {
    pub fn new(line: LatticeLine, radius: f64) -> Result<Self, GeometryError> {
        if !(radius > 0.0 && radius < 0.5) {
            return Err(GeometryError::BadRadius(radius));
        }
        Ok(Cylinder { line, radius })
    }

    /// Signed distance from the surface (negative inside).
    pub fn gap(&self, p: Vec3) -> f64 {
        self.line.distance(p) - self.radius
    }
}

/// An edge of a unit compartment: the unit segment of `line` starting at
/// axial coordinate `start`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    pub line: LatticeLine,
    pub start: i64,
}

impl Edge {
    /// Point at parameter `t ∈ [0, 1]` along the edge.
    pub fn point(&self, t: f64) -> Vec3 {
        let [j, k] = transverse(self.line.axis);
        let mut p = Vec3::ZERO;
        p[self.line.axis] = self.start as f64 + t;
        p[j] = self.line.base[0] as f64;
        p[k] = self.line.base[1] as f64;
        p
    }

    pub fn midpoint(&self) -> Vec3 {
        self.point(0.5)
    }

    pub fn axis(&self) -> usize {
        self.line.axis
    }

    /// Lowest-coordinate lattice point of the edge.
    pub fn origin(&self) -> [i64; 3] {
        let [j, k] = transverse(self.line.axis);
        let mut p = [0; 3];
        p[self.line.axis] = self.start;
        p[j] = self.line.base[0];
        p[k] = self.line.base[1];
        p
    }

    /// Coordinate `coord` of the edge, which must be one of its fixed ones.
    pub fn fixed(&self, coord: usize) -> i64 {
        self.line.fixed(coord)
    }

    pub fn translated(&self, by: [i64; 3]) -> Edge {
        let [j, k] = transverse(self.line.axis);
        Edge {
            line: LatticeLine {
                axis: self.line.axis,
                base: [self.line.base[0] + by[j], self.line.base[1] + by[k]],
            },
            start: self.start + by[self.line.axis],
        }
    }

    /// True if the edge bounds the unit cell with lowest corner `cell`.
    pub fn bounds_cell(&self, cell: [i64; 3]) -> bool {
        let [j, k] = transverse(self.line.axis);
        self.start == cell[self.line.axis]
            && (self.line.base[0] - cell[j]) as u64 <= 1
            && (self.line.base[1] - cell[k]) as u64 <= 1
    }

    /// Skew edges are non-parallel and disjoint (consecutive contacts must be).
    pub fn is_skew(&self, other: &Edge) -> bool {
        if self.axis() == other.axis() {
            return false;
        }
        let third = 3 - self.axis() - other.axis();
        self.fixed(third) != other.fixed(third)
    }
}

/// The twelve edges of the unit cell with lowest corner `cell`.
pub fn cell_edges(cell: [i64; 3]) -> [Edge; 12] {
    let mut out = [Edge { line: LatticeLine { axis: 0, base: [0, 0] }, start: 0 }; 12];
    let mut n = 0;
    for axis in 0..3 {
        let [j, k] = transverse(axis);
        for dj in 0..2 {
            for dk in 0..2 {
                out[n] = Edge {
                    line: LatticeLine { axis, base: [cell[j] + dj, cell[k] + dk] },
                    start: cell[axis],
                };
                n += 1;
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CylinderHit {
    pub time: f64,
    pub point: Vec3,
    /// Discriminant below [`GRAZING_TOL`]: a tangency, not a reflection.
    pub grazing: bool,
}

/// First time the ray `p + t·v` enters the cylinder, if any.
pub fn ray_cylinder_hit(p: Vec3, v: Vec3, cyl: &Cylinder) -> Option<CylinderHit> {
    let [j, k] = transverse(cyl.line.axis);
    let wx = p[j] - cyl.line.base[0] as f64;
    let wy = p[k] - cyl.line.base[1] as f64;
    let (ux, uy) = (v[j], v[k]);
    let a = ux * ux + uy * uy;
    if a < 1e-300 {
        return None;
    }
    let b = wx * ux + wy * uy;
    if b >= 0.0 {
        // receding (or moving parallel) in the transverse plane
        return None;
    }
    let c = wx * wx + wy * wy - cyl.radius * cyl.radius;
    let disc = b * b - a * c;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    // stable smaller root: c / (−b + √disc)
    let t = c / (-b + sq);
    if t < 0.0 {
        return None;
    }
    let raw = p + v * t;
    let point = project_to_surface(raw, cyl);
    Some(CylinderHit { time: t, point, grazing: disc < GRAZING_TOL })
}

fn project_to_surface(p: Vec3, cyl: &Cylinder) -> Vec3 {
    let r = cyl.line.radial(p);
    let n = r.norm();
    if n == 0.0 {
        return p;
    }
    p - r + r * (cyl.radius / n)
}

/// Specular reflection of an incoming velocity about the unit normal `n`.
pub fn reflect(v: Vec3, n: Vec3) -> Result<Vec3, GeometryError> {
    let vn = v.dot(n);
    if vn >= 0.0 {
        return Err(GeometryError::OutgoingNormal(vn));
    }
    Ok((v - n * (2.0 * vn)).normalized())
}

/// Outward unit normal at a surface point.
pub fn cylinder_normal(point: Vec3, cyl: &Cylinder) -> Result<Vec3, GeometryError> {
    let r = cyl.line.radial(point);
    let d = r.norm();
    if (d - cyl.radius).abs() > SURFACE_TOL {
        return Err(GeometryError::OffSurface(d - cyl.radius));
    }
    Ok(r * (1.0 / d))
}

/// Unit cells met by the segment `[p, p + horizon·v]`, in traversal order.
pub fn cells_along(p: Vec3, v: Vec3, horizon: f64) -> Vec<[i64; 3]> {
    let mut cell = p.floor();
    let mut t_next = [f64::INFINITY; 3];
    let mut dt = [f64::INFINITY; 3];
    let mut step = [0i64; 3];
    for i in 0..3 {
        if v[i] > 0.0 {
            step[i] = 1;
            dt[i] = 1.0 / v[i];
            t_next[i] = ((cell[i] + 1) as f64 - p[i]) / v[i];
        } else if v[i] < 0.0 {
            step[i] = -1;
            dt[i] = -1.0 / v[i];
            t_next[i] = (cell[i] as f64 - p[i]) / v[i];
        }
    }
    let mut cells = vec![cell];
    loop {
        let i = (0..3).min_by(|&a, &b| t_next[a].total_cmp(&t_next[b])).unwrap();
        if t_next[i] > horizon {
            break;
        }
        cell[i] += step[i];
        t_next[i] += dt[i];
        cells.push(cell);
    }
    cells
}

/// Every cylinder whose line comes within `r0` of the segment
/// `[p, p + horizon·v]`. Lines are gathered from the edges of the cells the
/// segment crosses, which is complete for `r0 < 1/2`.
pub fn candidate_cylinders(p: Vec3, v: Vec3, horizon: f64, r0: f64) -> Vec<Cylinder> {
    let q = p + v * horizon;
    let mut lines = BTreeSet::new();
    for cell in cells_along(p, v, horizon) {
        for e in cell_edges(cell) {
            lines.insert(e.line);
        }
    }
    lines
        .into_iter()
        .filter(|line| line_segment_distance(line, p, q) <= r0)
        .map(|line| Cylinder { line, radius: r0 })
        .collect()
}

/// Distance from a lattice line to the segment `[p, q]`.
pub fn line_segment_distance(line: &LatticeLine, p: Vec3, q: Vec3) -> f64 {
    let a = line.radial(p);
    let d = line.radial(q) - a;
    let dd = d.dot(d);
    let s = if dd > 0.0 { (-a.dot(d) / dd).clamp(0.0, 1.0) } else { 0.0 };
    (a + d * s).norm()
}
