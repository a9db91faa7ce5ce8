//! The composed chain `P = M Q` and its matrix-free actions.

use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};
use crate::permutation::Permutation;
use crate::sparse::{check_len, SparseBistochastic};

/// `P = M Q` with `P[x][y] = Q[sigma(x)][y]`.
///
/// `q` is shared so that many trials can reuse one model without copying it;
/// `p` is materialized on first request by relabeling rows of `q`.
#[derive(Debug, Clone)]
pub struct ComposedChain {
    sigma: Permutation,
    q: Arc<SparseBistochastic>,
    p: OnceLock<SparseBistochastic>,
}

/// Builds `P = M Q`. No floating-point arithmetic is performed.
pub fn compose(sigma: Permutation, q: impl Into<Arc<SparseBistochastic>>) -> Result<ComposedChain> {
    let q = q.into();
    if sigma.len() != q.n() {
        return Err(Error::DimensionMismatch {
            expected: q.n(),
            got: sigma.len(),
        });
    }
    Ok(ComposedChain {
        sigma,
        q,
        p: OnceLock::new(),
    })
}

impl ComposedChain {
    #[inline]
    pub fn n(&self) -> usize {
        self.q.n()
    }

    pub fn sigma(&self) -> &Permutation {
        &self.sigma
    }

    pub fn q(&self) -> &SparseBistochastic {
        &self.q
    }

    pub fn q_shared(&self) -> Arc<SparseBistochastic> {
        Arc::clone(&self.q)
    }

    /// The materialized `P`.
    pub fn p(&self) -> &SparseBistochastic {
        self.p
            .get_or_init(|| self.q.permute_rows(self.sigma.as_slice()))
    }

    /// `out = P v`, read as `(Q v)[sigma(x)]`. `scratch` receives `Q v`.
    pub fn apply_into(&self, v: &[f64], scratch: &mut [f64], out: &mut [f64]) {
        self.q.mul_vec_into(v, scratch);
        for (x, o) in out.iter_mut().enumerate() {
            *o = scratch[self.sigma.apply(x)];
        }
    }

    /// `out = (M - (1/n) 1 1^T) Q v = P v - (<1, Q v>/n) 1`.
    ///
    /// The image is orthogonal to `1` up to rounding.
    pub fn deflated_apply_into(&self, v: &[f64], scratch: &mut [f64], out: &mut [f64]) {
        self.apply_into(v, scratch, out);
        let mean = scratch.iter().sum::<f64>() / self.n() as f64;
        out.iter_mut().for_each(|o| *o -= mean);
    }

    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check(v)?;
        let mut scratch = vec![0.0; self.n()];
        let mut out = vec![0.0; self.n()];
        self.apply_into(v, &mut scratch, &mut out);
        Ok(out)
    }

    pub fn deflated_apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check(v)?;
        let mut scratch = vec![0.0; self.n()];
        let mut out = vec![0.0; self.n()];
        self.deflated_apply_into(v, &mut scratch, &mut out);
        Ok(out)
    }

    fn check(&self, v: &[f64]) -> Result<()> {
        check_len(self.n(), v.len())?;
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument(
                "vector has non-finite entries".into(),
            ));
        }
        Ok(())
    }
}
