//! Engine for the real-world three-dimensional bin packing problem.
//!
//! The crate compiles packing instances into an explicit constrained
//! quadratic model (binary and bounded continuous variables, big-M
//! non-overlap constraints, affinity, overweight, load-bearing and
//! load-balancing extensions), solves them with classical backends and
//! checks every answer with an independent geometric validator.
//!
//! Module map:
//!
//! - [`domain`]: items, bins, orientations, relative positions, placements.
//! - [`model`]: model compilation, closed-form size counting, exact
//!   evaluation, solution encoding and LP export.
//! - [`solver`]: heuristic search, penalty annealer and exhaustive oracle,
//!   plus run statistics.
//! - [`validate`]: feasibility checking and objective evaluation by direct
//!   geometry.
//! - [`datagen`]: reproducible benchmark instance generation.

pub mod datagen;
pub mod domain;
pub mod model;
pub mod solver;
pub mod validate;

/// Exact rational number used for model coefficients and objective values.
pub type Rational = num_rational::Ratio<i128>;

pub use domain::{
    effective_dims, kappa, nonredundant_orientations, Affinities, BinSpec, CategoryPair,
    ComTarget, Instance, InstanceError, InstanceParts, Item, Objectives, Orientation,
    PackingSolution, Placement, RelPos, Weights,
};
