//! Eigenvalues, singular values and mixing rates.

mod dense;
mod krylov;
mod mixing;
pub mod schur;

use num_complex::Complex64;
use serde::{Deserialize, Serialize, Serializer};

use crate::chain::ComposedChain;
use crate::error::Result;

pub use dense::{
    dense_eigenvalues, full_spectrum, full_spectrum_dense, lambda2_from_spectrum, singular_values,
};
pub use krylov::{krylov_lambda2, KrylovOptions};
pub use mixing::{mixing_trace, MixingTrace};

/// Largest dimension handled by dense solvers.
pub const DEFAULT_DENSE_CAP: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Dense,
    Krylov,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Dense => "dense",
            Method::Krylov => "krylov",
        })
    }
}

/// Eigenvalues (dense only) or a `|lambda_2|` estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralReport {
    pub method: Method,
    pub eigenvalues: Option<Vec<Complex64>>,
    pub lambda2_modulus: f64,
    /// Dense: `||A Z - Z T|| / ||A||` of the Schur form. Krylov: Ritz residual
    /// of the dominant pair.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl Serialize for SpectralReport {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Out {
            method: Method,
            lambda2: f64,
            residual: f64,
            iterations: usize,
            converged: bool,
        }
        Out {
            method: self.method,
            lambda2: self.lambda2_modulus,
            residual: self.residual,
            iterations: self.iterations,
            converged: self.converged,
        }
        .serialize(s)
    }
}

/// `|lambda_2|` of `P` by the chosen method. `dense_cap` only applies to
/// [`Method::Dense`].
pub fn lambda2_modulus(
    chain: &ComposedChain,
    method: Method,
    opts: &KrylovOptions,
    dense_cap: usize,
) -> Result<SpectralReport> {
    match method {
        Method::Dense => full_spectrum(chain.p(), dense_cap),
        Method::Krylov => krylov_lambda2(chain, opts),
    }
}
