use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::{pair_tangle_free, Checker, Tally, TangleParams, TangledWitness};
use crate::error::{Error, Result};
use crate::permutation::Permutation;
use crate::sparse::{check_len, CsrMatrix};

/// Largest `n` for exact path sums.
pub const MAX_N: usize = 12;
/// Largest path length for exact path sums.
pub const MAX_ELL: usize = 4;
/// Largest row support of `Q` for exact path sums. The centred sums range
/// over every `y_t`, so the enumeration grows like `n (n s)^ell`.
pub const MAX_ROW_SUPPORT: usize = 4;

/// Path sums over tangle-free paths, indexed by length.
#[derive(Debug, Clone, PartialEq)]
pub struct PathMatrices {
    pub ell: usize,
    /// `P^(k)` for `k = 0..=ell`, weights `M Q`.
    pub free: Vec<DMatrix<f64>>,
    /// Centred `P^(k)` for `k = 0..=ell`, weights `(M - 1/n) Q`.
    pub centred: Vec<DMatrix<f64>>,
    /// Remainders `R_k` for `k = 1..=ell` (index `k - 1`).
    pub remainders: Vec<DMatrix<f64>>,
}

/// Exact path sums by enumerating every path of length at most `ell`.
pub fn path_sum_matrices(
    sigma: &Permutation,
    q: &CsrMatrix,
    ell: usize,
    params: &TangleParams,
) -> Result<PathMatrices> {
    let n = q.n();
    check_len(n, sigma.len())?;
    if n > MAX_N || ell > MAX_ELL || q.max_row_support() > MAX_ROW_SUPPORT {
        return Err(Error::ScaleGuard(format!(
            "exact path sums need n <= {MAX_N}, ell <= {MAX_ELL} and row support <= {MAX_ROW_SUPPORT}; \
             got n = {n}, ell = {ell}, row support = {}",
            q.max_row_support()
        )));
    }
    if ell == 0 {
        return Err(Error::InvalidArgument("ell must be at least 1".into()));
    }
    let checker = Checker::new(q, params)?;

    let mut e = Enumerator {
        sigma,
        q,
        checker: &checker,
        ell,
        inv_n: 1.0 / n as f64,
        xs: Vec::with_capacity(ell + 1),
        ys: Vec::with_capacity(ell),
        qs: Vec::with_capacity(ell),
        centred_w: vec![1.0; ell + 1],
        free_w: vec![1.0; ell + 1],
        is_free: vec![true; ell + 1],
        tallies: vec![Tally::default(); ell + 1],
        out: PathMatrices {
            ell,
            free: vec![DMatrix::zeros(n, n); ell + 1],
            centred: vec![DMatrix::zeros(n, n); ell + 1],
            remainders: vec![DMatrix::zeros(n, n); ell],
        },
    };
    e.out.free[0] = DMatrix::identity(n, n);
    e.out.centred[0] = DMatrix::identity(n, n);
    for x in 0..n {
        e.xs.clear();
        e.xs.push(x);
        e.dfs(0);
    }
    Ok(e.out)
}

struct Enumerator<'a> {
    sigma: &'a Permutation,
    q: &'a CsrMatrix,
    checker: &'a Checker,
    ell: usize,
    inv_n: f64,
    xs: Vec<usize>,
    ys: Vec<usize>,
    /// `Q[y_t][x_{t+1}]` along the path.
    qs: Vec<f64>,
    /// Weight of the first `t` steps under `(M - 1/n) Q` and `M Q`.
    centred_w: Vec<f64>,
    free_w: Vec<f64>,
    /// Whether the first `t` steps form a tangle-free path.
    is_free: Vec<bool>,
    tallies: Vec<Tally>,
    out: PathMatrices,
}

impl Enumerator<'_> {
    fn m(&self, x: usize, y: usize) -> f64 {
        if self.sigma.apply(x) == y {
            1.0
        } else {
            0.0
        }
    }

    fn dfs(&mut self, t: usize) {
        let (x0, xt) = (self.xs[0], self.xs[t]);
        if t > 0 && self.is_free[t] {
            self.out.centred[t][(x0, xt)] += self.centred_w[t];
            self.out.free[t][(x0, xt)] += self.free_w[t];
        }
        if t == self.ell {
            if !self.is_free[t] {
                self.remainder_terms();
            }
            return;
        }
        let n = self.q.n();
        // Once the prefix is tangled only remainders with k <= t can still
        // receive weight, and they need M[x_s][y_s] = 1 for every later step.
        let ys: Vec<usize> = if self.is_free[t] {
            (0..n).collect()
        } else {
            vec![self.sigma.apply(xt)]
        };
        for y in ys {
            let m = self.m(xt, y);
            let (cols, vals) = self.q.row(y);
            for (&x2, &qv) in cols.iter().zip(vals) {
                self.xs.push(x2);
                self.ys.push(y);
                self.qs.push(qv);
                self.centred_w[t + 1] = self.centred_w[t] * (m - self.inv_n) * qv;
                self.free_w[t + 1] = self.free_w[t] * m * qv;
                if self.is_free[t] {
                    let (head, tail) = self.tallies.split_at_mut(t + 1);
                    tail[0].clone_from(&head[t]);
                    self.checker.absorb(&self.xs, &self.ys, t, &mut tail[0]);
                    self.is_free[t + 1] = !tail[0].tangled();
                } else {
                    self.is_free[t + 1] = false;
                }
                self.dfs(t + 1);
                self.xs.pop();
                self.ys.pop();
                self.qs.pop();
            }
        }
    }

    /// Adds the current tangled path of full length to every `R_k` whose
    /// prefix and suffix conditions it meets.
    #[allow(clippy::needless_range_loop)]
    fn remainder_terms(&mut self) {
        let ell = self.ell;
        let (x0, xl) = (self.xs[0], self.xs[ell]);
        // suffix[k] = prod_{s >= k} M[x_s][y_s] Q[y_s][x_{s+1}].
        let mut suffix = vec![1.0; ell + 1];
        for s in (0..ell).rev() {
            suffix[s] = suffix[s + 1] * self.m(self.xs[s], self.ys[s]) * self.qs[s];
        }
        for k in 1..=ell {
            if !self.is_free[k - 1] || suffix[k] == 0.0 {
                continue;
            }
            if !self
                .checker
                .status(&self.xs[k..], &self.ys[k..])
                .tangle_free
            {
                continue;
            }
            self.out.remainders[k - 1][(x0, xl)] +=
                self.centred_w[k - 1] * self.qs[k - 1] * suffix[k];
        }
    }
}

/// Numerical check of the path-sum decomposition for one pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecompositionReport {
    pub n: usize,
    pub ell: usize,
    pub h: usize,
    #[serde(rename = "E")]
    pub e: Vec<usize>,
    pub tangle_free: bool,
    pub witness: Option<TangledWitness>,
    /// Largest entry of `|P^(ell) - (centred + rank-one terms - remainders)|`.
    pub telescoping_residual: f64,
    /// Largest entry of `|P^k - P^(k)|` over `k <= ell`; only for tangle-free
    /// pairs, where the two agree.
    pub power_residual: Option<f64>,
    pub centred_norm: f64,
    pub remainder_norms: Vec<f64>,
    /// `||centred P^(ell)|| + (1/n) sum_k ||R_k||`.
    pub bound: f64,
    /// `||P^ell (I - 11^T/n)||`.
    pub restricted_norm: f64,
    /// `bound - restricted_norm`; the bound is only claimed for tangle-free
    /// pairs.
    pub slack: f64,
}

/// Builds the path sums and checks the telescoping identity, the agreement of
/// path sums with matrix powers, and the operator-norm bound.
pub fn verify_decomposition(
    sigma: &Permutation,
    q: &CsrMatrix,
    ell: usize,
    params: &TangleParams,
) -> Result<DecompositionReport> {
    let pm = path_sum_matrices(sigma, q, ell, params)?;
    let cert = pair_tangle_free(sigma, q, ell, params)?;
    let n = q.n();
    let inv_n = 1.0 / n as f64;

    let ones = DVector::from_element(n, 1.0);
    let mut rhs = pm.centred[ell].clone();
    for k in 1..=ell {
        let left = &pm.centred[k - 1] * &ones;
        let right = pm.free[ell - k].transpose() * &ones;
        rhs += (left * right.transpose()) * inv_n;
        rhs -= &pm.remainders[k - 1] * inv_n;
    }
    let telescoping_residual = max_abs_diff(&pm.free[ell], &rhs);

    let mut p = DMatrix::zeros(n, n);
    for x in 0..n {
        let (cols, vals) = q.row(sigma.apply(x));
        for (&y, &v) in cols.iter().zip(vals) {
            p[(x, y)] = v;
        }
    }
    let mut powers = vec![DMatrix::identity(n, n)];
    for k in 1..=ell {
        powers.push(&powers[k - 1] * &p);
    }
    let power_residual = cert.tangle_free.then(|| {
        (1..=ell)
            .map(|k| max_abs_diff(&powers[k], &pm.free[k]))
            .fold(0.0, f64::max)
    });

    let centred_norm = op_norm(&pm.centred[ell]);
    let remainder_norms: Vec<f64> = pm.remainders.iter().map(op_norm).collect();
    let bound = centred_norm + inv_n * remainder_norms.iter().sum::<f64>();
    let projector = DMatrix::identity(n, n) - DMatrix::from_element(n, n, inv_n);
    let restricted_norm = op_norm(&(&powers[ell] * projector));

    Ok(DecompositionReport {
        n,
        ell,
        h: params.h,
        e: params.e.clone(),
        tangle_free: cert.tangle_free,
        witness: cert.witness,
        telescoping_residual,
        power_residual,
        centred_norm,
        remainder_norms,
        bound,
        restricted_norm,
        slack: bound - restricted_norm,
    })
}

fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(u, v)| (u - v).abs())
        .fold(0.0, f64::max)
}

fn op_norm(a: &DMatrix<f64>) -> f64 {
    a.clone().singular_values().max()
}
