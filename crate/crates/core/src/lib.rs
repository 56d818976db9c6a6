//! Markov jump processes on weighted finite graphs: simulation, path
//! functionals (local times, crossings, last-exit trees), closed-form joint
//! densities built from modified Bessel functions, and a Monte Carlo harness
//! that checks the densities against simulated paths.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod density;
pub mod graph;
pub mod io;
pub mod quadrature;
pub mod simulate;
pub mod special_fn;
pub mod statistics;
pub mod trees_cycles;
pub mod verify;
pub mod wilson;

pub use graph::{GraphError, VertexId, WeightedGraph};
pub use simulate::{JumpPath, RngStream, StoppingRule};
pub use statistics::{CrossingCounts, Current, LocalTimes, OrientedTree};
