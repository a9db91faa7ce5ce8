use nalgebra::linalg::Hessenberg;
use nalgebra::DMatrix;
use num_complex::Complex64;

use super::schur::hessenberg_qr;
use super::{Method, SpectralReport};
use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

fn check_cap(n: usize, cap: usize) -> Result<()> {
    if n > cap {
        Err(Error::DenseCapExceeded { n, cap })
    } else {
        Ok(())
    }
}

/// All eigenvalues of `a`, unordered. No Schur vectors are formed, so this is
/// the cheap path for sweeps that only need moduli.
pub fn dense_eigenvalues(a: DMatrix<f64>) -> Result<Vec<Complex64>> {
    let mut h = Hessenberg::new(a).unpack_h();
    Ok(hessenberg_qr(&mut h, None)?.0)
}

/// Full spectrum with the backward error of the computed Schur form.
pub fn full_spectrum_dense(a: &DMatrix<f64>) -> Result<SpectralReport> {
    let (mut z, mut t) = Hessenberg::new(a.clone()).unpack();
    let (eigenvalues, sweeps) = hessenberg_qr(&mut t, Some(&mut z))?;
    let scale = a.norm();
    let residual = if scale > 0.0 {
        (a * &z - &z * &t).norm() / scale
    } else {
        0.0
    };
    Ok(SpectralReport {
        method: Method::Dense,
        lambda2_modulus: lambda2_from_spectrum(&eigenvalues),
        eigenvalues: Some(eigenvalues),
        residual,
        iterations: sweeps,
        converged: true,
    })
}

/// Dense spectrum of a sparse matrix of dimension at most `cap`.
pub fn full_spectrum(a: &CsrMatrix, cap: usize) -> Result<SpectralReport> {
    check_cap(a.n(), cap)?;
    full_spectrum_dense(&a.to_dense())
}

/// Second largest modulus counting multiplicity, after removing the single
/// eigenvalue closest to 1.
pub fn lambda2_from_spectrum(eigenvalues: &[Complex64]) -> f64 {
    let one = Complex64::new(1.0, 0.0);
    let perron = eigenvalues
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| (*a - one).norm().total_cmp(&(*b - one).norm()))
        .map(|(i, _)| i);
    eigenvalues
        .iter()
        .enumerate()
        .filter(|&(i, _)| Some(i) != perron)
        .map(|(_, z)| z.norm())
        .fold(0.0, f64::max)
}

/// Singular values, non-increasing.
pub fn singular_values(a: &CsrMatrix, cap: usize) -> Result<Vec<f64>> {
    check_cap(a.n(), cap)?;
    let mut s: Vec<f64> = a.to_dense().singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(s)
}
