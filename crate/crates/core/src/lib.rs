//! Heterogeneous label propagation over drug/disease/target networks.
//!
//! The crate builds a three-concept network from six matrices, runs two
//! superstep-based label propagation algorithms (`dhlp1`, `dhlp2`) on a
//! partitioned concurrent engine, checks the results against a sequential
//! matrix oracle, and evaluates predictions with cross-validation and
//! removal experiments.
//!
//! All numeric kernels are generic over [`scalar::Scalar`] (`f32` or `f64`);
//! the aliases below fix `f64` as the default used by the file formats and
//! the CLI.

pub mod scalar;
pub mod matrix;
pub mod hetnet;
pub mod ingest;
pub mod engine;
pub mod dhlp;
pub mod oracle;
pub mod netgen;
pub mod eval;

pub use scalar::Scalar;

/// Default scalar for file interchange and the CLI.
pub type Weight = f64;

/// Default-precision network.
pub type Network = hetnet::HeterogeneousNetwork<Weight>;

/// Single-precision network, for memory-constrained experiments.
pub type Network32 = hetnet::HeterogeneousNetwork<f32>;
