//! The 48 signed permutations of the coordinate axes.
//!
//! A symmetry moves coordinate `i` to slot `perm[i]`, negating it when
//! `flip[i]` is set. It acts linearly on ℝ³ (fixing the origin and the lattice
//! of scatterer lines) and affinely on the unit cube `[0,1]³`, where a flip is
//! `x ↦ 1 − x`.

use crate::freegroup::{Letter, ReducedWord};
use crate::geometry::{transverse, Edge, LatticeLine, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Symmetry {
    pub perm: [usize; 3],
    pub flip: [bool; 3],
}

const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

impl Symmetry {
    pub const IDENTITY: Symmetry = Symmetry { perm: [0, 1, 2], flip: [false; 3] };

    /// All 48 elements, in a fixed order starting with the identity.
    pub fn all() -> Vec<Symmetry> {
        let mut out = Vec::with_capacity(48);
        for perm in PERMS {
            for bits in 0..8u8 {
                let flip = [bits & 1 != 0, bits & 2 != 0, bits & 4 != 0];
                out.push(Symmetry { perm, flip });
            }
        }
        out
    }

    /// `self ∘ other` (apply `other` first).
    pub fn compose(&self, other: &Symmetry) -> Symmetry {
        let mut perm = [0; 3];
        let mut flip = [false; 3];
        for i in 0..3 {
            let mid = other.perm[i];
            perm[i] = self.perm[mid];
            flip[i] = other.flip[i] ^ self.flip[mid];
        }
        Symmetry { perm, flip }
    }

    pub fn inverse(&self) -> Symmetry {
        let mut perm = [0; 3];
        let mut flip = [false; 3];
        for i in 0..3 {
            perm[self.perm[i]] = i;
            flip[self.perm[i]] = self.flip[i];
        }
        Symmetry { perm, flip }
    }

    /// Linear action on ℝ³ (positions about the origin and velocities).
    pub fn apply_vec(&self, v: Vec3) -> Vec3 {
        let mut out = Vec3::ZERO;
        for i in 0..3 {
            out[self.perm[i]] = if self.flip[i] { -v[i] } else { v[i] };
        }
        out
    }

    /// Affine action fixing the unit cube `[0,1]³`.
    pub fn apply_cube_point(&self, p: Vec3) -> Vec3 {
        let mut out = Vec3::ZERO;
        for i in 0..3 {
            out[self.perm[i]] = if self.flip[i] { 1.0 - p[i] } else { p[i] };
        }
        out
    }

    /// Affine action on integer points, fixing the unit cube.
    pub fn apply_cube_lattice(&self, p: [i64; 3]) -> [i64; 3] {
        let mut out = [0; 3];
        for i in 0..3 {
            out[self.perm[i]] = if self.flip[i] { 1 - p[i] } else { p[i] };
        }
        out
    }

    pub fn apply_letter(&self, l: Letter) -> Letter {
        Letter::new(self.perm[l.axis()], l.is_positive() ^ self.flip[l.axis()]).unwrap()
    }

    pub fn apply_word(&self, w: &ReducedWord) -> ReducedWord {
        ReducedWord::from_reduced(w.letters().iter().map(|&l| self.apply_letter(l)).collect())
            .expect("symmetries preserve reducedness")
    }

    /// Linear action on lattice lines.
    pub fn apply_line(&self, line: &LatticeLine) -> LatticeLine {
        let [j, k] = transverse(line.axis);
        let mut p = [0i64; 3];
        p[j] = line.base[0];
        p[k] = line.base[1];
        let mut q = [0i64; 3];
        for i in 0..3 {
            q[self.perm[i]] = if self.flip[i] { -p[i] } else { p[i] };
        }
        LatticeLine::through(self.perm[line.axis], q)
    }

    /// Affine action on edges of cells, fixing the unit cube.
    pub fn apply_cube_edge(&self, e: &Edge) -> Edge {
        let a = self.apply_cube_lattice(e.origin());
        let mut o = e.origin();
        o[e.axis()] += 1;
        let b = self.apply_cube_lattice(o);
        let axis = self.perm[e.axis()];
        let start = a[axis].min(b[axis]);
        let mut origin = a;
        origin[axis] = start;
        Edge { line: LatticeLine::through(axis, origin), start }
    }

    /// Sign change of the axial coordinate of an edge along `axis`.
    pub fn flips_axis(&self, axis: usize) -> bool {
        self.flip[axis]
    }
}
