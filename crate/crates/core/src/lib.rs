//! Billiard flow on the unit 3-torus with three mutually orthogonal
//! cylindrical scatterers around the coordinate axes.
//!
//! The fundamental group of the table is the free group F₃ = ⟨a, b, c⟩, and
//! orbits are tracked through the face crossings of their lift to ℝ³. The
//! crate provides the free-group algebra, an event-driven simulator,
//! homotopical rotation vectors, a constructive engine for orbits with a
//! prescribed itinerary (arc-length minimization over scatterer edges), and
//! itinerary counting for topological-entropy bounds.

pub mod admissible;
pub mod entropy;
pub mod flow;
pub mod freegroup;
pub mod geometry;
pub mod rotation;
pub mod symmetry;

pub use freegroup::{Letter, ReducedWord};
pub use geometry::Vec3;
