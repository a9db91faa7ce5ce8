//! Random bistochastic chains `P = M Q`, where `M` is a uniform random
//! permutation matrix and `Q` a fixed bistochastic matrix.
//!
//! The crate builds the models, computes the norms the spectral-gap bound is
//! phrased in, estimates `|lambda_2|` densely or by restarted Arnoldi,
//! certifies tangle-freeness and checks the path-sum identities exactly at
//! small scale, and drives the Monte Carlo experiments.

pub mod chain;
pub mod error;
pub mod experiments;
pub mod generators;
pub mod io;
pub mod norms;
pub mod permutation;
pub mod rng;
pub mod sparse;
pub mod spectral;
pub mod tangle;

pub use chain::{compose, ComposedChain};
pub use error::{Error, Result};
pub use generators::{Model, ModelSpec};
pub use norms::NormReport;
pub use permutation::Permutation;
pub use sparse::{validate_bistochastic, CsrMatrix, SparseBistochastic, ValidationReport};
pub use spectral::{KrylovOptions, Method, MixingTrace, SpectralReport};

/// Version string written into every report.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
