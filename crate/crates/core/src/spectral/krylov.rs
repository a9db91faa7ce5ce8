//! `|lambda_2|` by thick-restart Arnoldi on the deflated operator.
//!
//! The Krylov basis lives in `1^perp`: the start vector is projected there and
//! every new direction is re-projected, so the Perron eigenvalue never enters.
//! After each cycle the `keep` dominant Ritz vectors (completed to whole
//! conjugate pairs) are kept as a real orthonormal basis and the expansion
//! resumes from the old residual direction. That leaves a Krylov
//! decomposition `A V = V G + f e^T` whose `G` is Hessenberg except for one
//! full row under the kept block.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::dense::dense_eigenvalues;
use super::{Method, SpectralReport};
use crate::chain::ComposedChain;
use crate::error::Result;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KrylovOptions {
    /// Basis size per cycle.
    pub subspace: usize,
    pub restarts: usize,
    /// Absolute tolerance on the dominant Ritz residual.
    pub tol: f64,
    /// Ritz vectors retained across a restart.
    pub keep: usize,
    /// Seed of the start vector.
    pub seed: u64,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        Self {
            subspace: 40,
            restarts: 20,
            tol: 1e-8,
            keep: 5,
            seed: rng::DEFAULT_SEED,
        }
    }
}

/// Norms below this mark an invariant Krylov subspace. `P` is bistochastic,
/// so the operator has 2-norm at most 1 and an absolute threshold is fine.
const BREAKDOWN: f64 = 1e-12;

fn project_out_ones(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= mean);
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn krylov_lambda2(chain: &ComposedChain, opts: &KrylovOptions) -> Result<SpectralReport> {
    let n = chain.n();
    if n == 1 {
        return Ok(SpectralReport {
            method: Method::Krylov,
            eigenvalues: None,
            lambda2_modulus: 0.0,
            residual: 0.0,
            iterations: 0,
            converged: true,
        });
    }
    let m = opts.subspace.max(2).min(n - 1);
    let keep = opts.keep.clamp(1, m.saturating_sub(1).max(1));

    let mut basis = DMatrix::<f64>::zeros(n, m + 1);
    let mut g = DMatrix::<f64>::zeros(m + 1, m);
    let mut scratch = vec![0.0; n];
    let mut w = vec![0.0; n];

    let mut rng = rng::seeded(opts.seed);
    let mut v0: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    project_out_ones(&mut v0);
    let s = norm(&v0);
    if s == 0.0 {
        v0 = (0..n).map(|i| if i == 0 { 1.0 } else { 0.0 }).collect();
        project_out_ones(&mut v0);
    }
    let s = norm(&v0);
    basis
        .column_mut(0)
        .copy_from_slice(&v0.iter().map(|x| x / s).collect::<Vec<_>>());

    let mut kept = 0;
    let mut cycle = 0;
    loop {
        cycle += 1;
        // Expand the basis from `kept` to `m` columns.
        let mut size = m;
        let mut breakdown = false;
        for j in kept..m {
            chain.deflated_apply_into(basis.column(j).as_slice(), &mut scratch, &mut w);
            project_out_ones(&mut w);
            // Classical Gram-Schmidt, applied twice.
            for _ in 0..2 {
                let coeffs = basis
                    .columns(0, j + 1)
                    .tr_mul(&DVector::from_column_slice(&w));
                for (i, c) in coeffs.iter().enumerate() {
                    g[(i, j)] += c;
                    let col = basis.column(i);
                    w.iter_mut().zip(col.iter()).for_each(|(x, b)| *x -= c * b);
                }
            }
            let beta = norm(&w);
            if beta < BREAKDOWN {
                size = j + 1;
                breakdown = true;
                break;
            }
            g[(j + 1, j)] = beta;
            let mut next = basis.column_mut(j + 1);
            next.iter_mut().zip(&w).for_each(|(b, x)| *b = x / beta);
        }

        let gm = g.view((0, 0), (size, size)).into_owned();
        let beta = if breakdown { 0.0 } else { g[(m, m - 1)] };
        let mut theta = dense_eigenvalues(gm.clone())?;
        theta.sort_by(|a, b| {
            b.norm()
                .total_cmp(&a.norm())
                .then(b.re.total_cmp(&a.re))
                .then(b.im.total_cmp(&a.im))
        });
        let s0 = ritz_vector(&gm, theta[0]);
        let residual = beta * s0[size - 1].norm();
        // A basis spanning all of 1^perp is exact whatever the computed residual.
        let done = breakdown || size == n - 1 || residual <= opts.tol;
        if done || cycle > opts.restarts {
            return Ok(SpectralReport {
                method: Method::Krylov,
                eigenvalues: None,
                lambda2_modulus: theta[0].norm(),
                residual,
                iterations: cycle,
                converged: done,
            });
        }

        // Thick restart: keep whole conjugate pairs among the dominant Ritz values.
        let mut wanted = keep.min(size - 1);
        if wanted < size && is_pair(theta[wanted - 1], theta[wanted]) {
            wanted += 1;
            if wanted >= size {
                wanted -= 2;
            }
        }
        let wanted = wanted.max(1);
        let mut cols: Vec<DVector<f64>> = Vec::with_capacity(wanted);
        let mut i = 0;
        while i < wanted {
            let s = ritz_vector(&gm, theta[i]);
            if theta[i].im.abs() > 1e-14 * theta[i].norm().max(1e-300) && i + 1 < wanted {
                cols.push(s.map(|z| z.re));
                cols.push(s.map(|z| z.im));
                i += 2;
            } else {
                let (idx, _) = s.iter().enumerate().fold((0, 0.0), |best, (j, z)| {
                    if z.norm() > best.1 {
                        (j, z.norm())
                    } else {
                        best
                    }
                });
                let phase = s[idx].conj() / s[idx].norm();
                cols.push(s.map(|z| (z * phase).re));
                i += 1;
            }
        }
        let w_basis = orthonormalize(cols);
        let k = w_basis.ncols();

        let new_v = basis.columns(0, size) * &w_basis;
        let new_g = w_basis.transpose() * &gm * &w_basis;
        let resid_dir = basis.column(m).into_owned();
        let tail = w_basis.row(size - 1).into_owned();

        g.fill(0.0);
        g.view_mut((0, 0), (k, k)).copy_from(&new_g);
        for c in 0..k {
            g[(k, c)] = beta * tail[c];
        }
        basis.fill(0.0);
        basis.columns_mut(0, k).copy_from(&new_v);
        basis.column_mut(k).copy_from(&resid_dir);
        kept = k;
    }
}

fn is_pair(a: Complex64, b: Complex64) -> bool {
    a.im != 0.0 && (a - b.conj()).norm() <= 1e-10 * a.norm().max(1e-300)
}

/// Unit eigenvector of `h` for the eigenvalue `theta`, by inverse iteration
/// with a slightly perturbed shift.
fn ritz_vector(h: &DMatrix<f64>, theta: Complex64) -> DVector<Complex64> {
    let k = h.nrows();
    let scale = h.norm().max(1e-300);
    let mut shift = theta + Complex64::new(1e-10 * scale, 0.0);
    let mut x = DVector::from_element(k, Complex64::new(1.0, 0.0));
    for _ in 0..3 {
        let mut a = h.map(|v| Complex64::new(v, 0.0));
        for i in 0..k {
            a[(i, i)] -= shift;
        }
        match a.lu().solve(&x) {
            Some(y) if y.iter().all(|z| z.re.is_finite() && z.im.is_finite()) => {
                let s = y.norm();
                x = y / Complex64::new(s, 0.0);
            }
            _ => shift += Complex64::new(1e-8 * scale, 0.0),
        }
    }
    let s = x.norm();
    x / Complex64::new(s, 0.0)
}

/// Modified Gram-Schmidt, twice, dropping dependent columns.
fn orthonormalize(cols: Vec<DVector<f64>>) -> DMatrix<f64> {
    let mut out: Vec<DVector<f64>> = Vec::with_capacity(cols.len());
    for mut c in cols {
        let before = c.norm();
        for _ in 0..2 {
            for q in &out {
                let d = q.dot(&c);
                c.axpy(-d, q, 1.0);
            }
        }
        let after = c.norm();
        if after > 1e-8 * before.max(1e-300) {
            out.push(c / after);
        }
    }
    DMatrix::from_columns(&out)
}
