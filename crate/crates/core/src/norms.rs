//! Scalar norms of a bistochastic `Q`: normalized Hilbert–Schmidt, entrywise
//! max, the relaxed max with an exceptional column set, the Gram sparsity
//! degree `d`, and `rho`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// `sqrt((1/n) sum_{x,y} a_xy^2)`.
///
/// Squares are summed in ascending order, so the result depends only on the
/// multiset of entries: permuting rows or columns leaves it bit-identical.
pub fn hs_norm(a: &CsrMatrix) -> f64 {
    let mut sq: Vec<f64> = a.values().iter().map(|w| w * w).collect();
    sq.sort_unstable_by(f64::total_cmp);
    (sq.iter().sum::<f64>() / a.n() as f64).sqrt()
}

/// `max_{x,y} |a_xy|`.
pub fn linf_norm(a: &CsrMatrix) -> f64 {
    a.values().iter().fold(0.0, |m, w| m.max(w.abs()))
}

/// Largest admissible size of the exceptional set: the largest integer
/// `k >= 0` with `k < n^(1 - delta)`.
pub fn exceptional_budget(n: usize, delta: f64) -> usize {
    let bound = (n as f64).powf(1.0 - delta);
    // n^(1-delta) is often an integer in exact arithmetic (n = 4, delta = 1/2);
    // snap so that powf rounding cannot move the strict inequality.
    let rounded = bound.round();
    let bound = if (bound - rounded).abs() <= 1e-9 * rounded.max(1.0) {
        rounded
    } else {
        bound
    };
    (bound.ceil() as usize).saturating_sub(1)
}

/// Value and witness of the relaxed norm.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaNorm {
    pub value: f64,
    /// Removed columns, ascending.
    pub witness: Vec<usize>,
}

/// `inf_{|E| < n^(1-delta)} max_{x notin E, y} |a_yx|`.
///
/// Removing the columns with the largest maxima is optimal, since the
/// objective only sees the largest surviving column maximum. Ties go to the
/// lower column index.
pub fn delta_norm(a: &CsrMatrix, delta: f64) -> Result<DeltaNorm> {
    check_delta(delta)?;
    let n = a.n();
    let mut col_max = vec![0.0f64; n];
    for (_, y, w) in a.entries() {
        col_max[y] = col_max[y].max(w.abs());
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| col_max[j].total_cmp(&col_max[i]).then(i.cmp(&j)));
    let k = exceptional_budget(n, delta).min(n);
    let mut witness = order[..k].to_vec();
    witness.sort_unstable();
    let value = order.get(k).map_or(0.0, |&c| col_max[c]);
    Ok(DeltaNorm { value, witness })
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "delta must lie in (0, 1], got {delta}"
        )))
    }
}

/// `d = ||Q^T Q||_{1->0}`: the largest number of columns sharing a row with a
/// given column. Computed by unioning row supports, without forming `Q^T Q`.
pub fn gram_support_degree(q: &CsrMatrix) -> usize {
    gram_neighbourhoods(q)
        .iter()
        .map(Vec::len)
        .max()
        .unwrap_or(0)
}

/// Support of each row of `Q^T Q`: for column `x`, every `x'` with a common
/// row `y` (`Q_yx > 0` and `Q_yx' > 0`). Ascending, and contains `x` itself
/// whenever column `x` is nonempty.
pub fn gram_neighbourhoods(q: &CsrMatrix) -> Vec<Vec<usize>> {
    let n = q.n();
    let cols = q.column_supports();
    let mut stamp = vec![usize::MAX; n];
    (0..n)
        .map(|x| {
            let mut out = Vec::new();
            for &y in &cols[x] {
                for &x2 in q.row(y).0 {
                    if stamp[x2] != x {
                        stamp[x2] = x;
                        out.push(x2);
                    }
                }
            }
            out.sort_unstable();
            out
        })
        .collect()
}

/// Every scalar the tail bound is phrased in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub hs: f64,
    pub linf: f64,
    pub delta: f64,
    pub delta_norm: f64,
    #[serde(rename = "witness_E")]
    pub witness_e: Vec<usize>,
    pub d: usize,
    pub rho: f64,
}

/// Assembles the [`NormReport`]; `rho = max(hs, delta_norm)`.
pub fn rho(q: &CsrMatrix, delta: f64) -> Result<NormReport> {
    let dn = delta_norm(q, delta)?;
    let hs = hs_norm(q);
    Ok(NormReport {
        hs,
        linf: linf_norm(q),
        delta,
        delta_norm: dn.value,
        witness_e: dn.witness,
        d: gram_support_degree(q),
        rho: hs.max(dn.value),
    })
}
