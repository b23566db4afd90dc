//! Long-range percolation on Z^d.
//!
//! Edges `{x, y}` open independently with probability `1 − exp(−β J(x − y))`
//! for a symmetric integrable kernel `J`. The crate samples finite-volume
//! configurations from a deterministic coupling, analyses their clusters and
//! chemical distances, estimates critical parameters, and runs the
//! renormalization and random-walk probes used to study supercritical
//! long-range models.

pub mod cluster;
pub mod coupling;
pub mod error;
pub mod estimators;
pub mod kernel;
pub mod lattice;
pub mod metric;
pub mod renorm;
pub mod sampler;
pub mod stats;
pub mod walk;
pub mod cli;

pub use coupling::{union_field, CouplingField};
pub use error::{Error, Result};
pub use kernel::{make_counterexample_1d, Kernel, ShortEdgeFunction, ShortRule};
pub use lattice::{LatticeBox, Point, VertexSet};
pub use sampler::{sample_box, sample_box_pf, BoxConfig, EdgeModel, SamplePlan};
