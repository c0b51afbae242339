//! Isotonic regression on multi-dimensional lattices, random designs in the
//! unit cube, and directed acyclic graphs.
//!
//! The crate provides:
//!
//! - block max-min / min-max / mid estimators on lattices, arbitrary query
//!   points under random design, and general DAGs ([`block`], [`graph`]);
//! - the least-squares isotonic estimator via alternating cone projections
//!   built from pool-adjacent-violators sweeps, with optimality certificates
//!   ([`solver`]);
//! - evaluators for the minimax lower-bound and estimator risk-rate formulas,
//!   plus a worst-case instance generator ([`rates`]);
//! - a Monte Carlo harness that runs the bundled experiment suite and paired
//!   loss comparisons ([`sim`]);
//! - text formats for fields, point clouds and graphs ([`io`]).

pub mod block;
pub mod error;
pub mod graph;
pub mod io;
pub mod lattice;
pub mod rates;
pub mod rng;
pub mod sim;
pub mod solver;
pub mod stats;

pub use block::EstimatorKind;
pub use error::{IsoError, Result};
pub use lattice::{CompressedGrid, Field, LatticeShape, PointCloud, PrefixTable};
