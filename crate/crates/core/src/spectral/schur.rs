//! Real Schur form by Francis double-shift QR on an upper Hessenberg matrix.
//!
//! Follows the EISPACK `hqr`/`hqr2` iteration with exceptional shifts. The
//! exceptional shifts matter here: permutation matrices are the textbook case
//! where the plain Francis shift stalls, and they show up constantly in this
//! crate (`Q = I`, cycle chains, exhaustive sweeps over the symmetric group).

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Iterations allowed per eigenvalue before giving up.
const MAX_ITER_PER_EIGENVALUE: usize = 300;

/// Reduces the upper Hessenberg `h` in place to real quasi-triangular Schur
/// form and returns its eigenvalues (diagonal order, conjugate pairs adjacent)
/// together with the number of QR sweeps performed.
///
/// When `z` is given, the orthogonal similarity transforms are accumulated into
/// it (`z <- z * Q`), so passing the Hessenberg reduction's `Q` yields
/// `A = z h z^T` on return.
pub fn hessenberg_qr(
    h: &mut DMatrix<f64>,
    mut z: Option<&mut DMatrix<f64>>,
) -> Result<(Vec<Complex64>, usize)> {
    let nn = h.nrows();
    assert_eq!(nn, h.ncols(), "square matrix expected");
    let mut eig = vec![Complex64::new(0.0, 0.0); nn];
    if nn == 0 {
        return Ok((eig, 0));
    }
    for j in 0..nn {
        for i in (j + 2)..nn {
            h[(i, j)] = 0.0;
        }
    }
    let full = z.is_some();
    let eps = f64::EPSILON;
    let norm: f64 = (0..nn)
        .map(|i| {
            (i.saturating_sub(1)..nn)
                .map(|j| h[(i, j)].abs())
                .sum::<f64>()
        })
        .sum();

    let mut n = nn as isize - 1;
    let mut exshift = 0.0;
    let mut iter = 0usize;
    let mut sweeps = 0usize;
    let (mut p, mut q, mut r, mut s, mut w, mut x, mut y, mut zz);

    while n >= 0 {
        let nu = n as usize;
        // Find a negligible subdiagonal entry.
        let mut l = nu;
        while l > 0 {
            s = h[(l - 1, l - 1)].abs() + h[(l, l)].abs();
            if s == 0.0 {
                s = norm;
            }
            if h[(l, l - 1)].abs() < eps * s {
                break;
            }
            l -= 1;
        }

        if l == nu {
            // One root.
            h[(nu, nu)] += exshift;
            eig[nu] = Complex64::new(h[(nu, nu)], 0.0);
            n -= 1;
            iter = 0;
        } else if l == nu - 1 {
            // Two roots.
            w = h[(nu, nu - 1)] * h[(nu - 1, nu)];
            p = (h[(nu - 1, nu - 1)] - h[(nu, nu)]) / 2.0;
            q = p * p + w;
            zz = q.abs().sqrt();
            h[(nu, nu)] += exshift;
            h[(nu - 1, nu - 1)] += exshift;
            x = h[(nu, nu)];
            if q >= 0.0 {
                zz = if p >= 0.0 { p + zz } else { p - zz };
                let hi = x + zz;
                let lo = if zz != 0.0 { x - w / zz } else { hi };
                eig[nu - 1] = Complex64::new(hi, 0.0);
                eig[nu] = Complex64::new(lo, 0.0);
                if full {
                    // Triangularize the real 2x2 block.
                    x = h[(nu, nu - 1)];
                    s = x.abs() + zz.abs();
                    p = x / s;
                    q = zz / s;
                    r = (p * p + q * q).sqrt();
                    p /= r;
                    q /= r;
                    for j in (nu - 1)..nn {
                        let t = h[(nu - 1, j)];
                        h[(nu - 1, j)] = q * t + p * h[(nu, j)];
                        h[(nu, j)] = q * h[(nu, j)] - p * t;
                    }
                    for i in 0..=nu {
                        let t = h[(i, nu - 1)];
                        h[(i, nu - 1)] = q * t + p * h[(i, nu)];
                        h[(i, nu)] = q * h[(i, nu)] - p * t;
                    }
                    if let Some(z) = z.as_deref_mut() {
                        for i in 0..nn {
                            let t = z[(i, nu - 1)];
                            z[(i, nu - 1)] = q * t + p * z[(i, nu)];
                            z[(i, nu)] = q * z[(i, nu)] - p * t;
                        }
                    }
                    h[(nu, nu - 1)] = 0.0;
                }
            } else {
                eig[nu - 1] = Complex64::new(x + p, zz);
                eig[nu] = Complex64::new(x + p, -zz);
            }
            n -= 2;
            iter = 0;
        } else {
            // No convergence yet: double-shift QR sweep on rows l..=nu.
            x = h[(nu, nu)];
            y = h[(nu - 1, nu - 1)];
            w = h[(nu, nu - 1)] * h[(nu - 1, nu)];

            if iter > 0 && iter % 10 == 0 {
                if iter % 30 == 0 {
                    // MATLAB-style ad hoc shift.
                    s = (y - x) / 2.0;
                    s = s * s + w;
                    if s > 0.0 {
                        s = s.sqrt();
                        if y < x {
                            s = -s;
                        }
                        s = x - w / ((y - x) / 2.0 + s);
                        for i in 0..=nu {
                            h[(i, i)] -= s;
                        }
                        exshift += s;
                        x = 0.964;
                        y = x;
                        w = x;
                    }
                } else {
                    // Wilkinson's ad hoc shift.
                    exshift += x;
                    for i in 0..=nu {
                        h[(i, i)] -= x;
                    }
                    s = h[(nu, nu - 1)].abs() + h[(nu - 1, nu.saturating_sub(2))].abs();
                    x = 0.75 * s;
                    y = x;
                    w = -0.4375 * s * s;
                }
            }
            iter += 1;
            sweeps += 1;
            if iter > MAX_ITER_PER_EIGENVALUE {
                return Err(Error::NoConvergence);
            }

            // Look for two consecutive small subdiagonal entries.
            let mut m = nu - 2;
            loop {
                zz = h[(m, m)];
                r = x - zz;
                s = y - zz;
                p = (r * s - w) / h[(m + 1, m)] + h[(m, m + 1)];
                q = h[(m + 1, m + 1)] - zz - r - s;
                r = h[(m + 2, m + 1)];
                s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                if h[(m, m - 1)].abs() * (q.abs() + r.abs())
                    < eps
                        * (p.abs() * (h[(m - 1, m - 1)].abs() + zz.abs() + h[(m + 1, m + 1)].abs()))
                {
                    break;
                }
                m -= 1;
            }
            for i in (m + 2)..=nu {
                h[(i, i - 2)] = 0.0;
                if i > m + 2 {
                    h[(i, i - 3)] = 0.0;
                }
            }

            let (col_lo, row_hi) = if full { (0, nn) } else { (l, nu + 1) };
            let mut k = m;
            while k < nu {
                let notlast = k != nu - 1;
                if k != m {
                    p = h[(k, k - 1)];
                    q = h[(k + 1, k - 1)];
                    r = if notlast { h[(k + 2, k - 1)] } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x == 0.0 {
                        k += 1;
                        continue;
                    }
                    p /= x;
                    q /= x;
                    r /= x;
                }
                s = (p * p + q * q + r * r).sqrt();
                if p < 0.0 {
                    s = -s;
                }
                if s != 0.0 {
                    if k != m {
                        h[(k, k - 1)] = -s * x;
                    } else if l != m {
                        h[(k, k - 1)] = -h[(k, k - 1)];
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    zz = r / s;
                    q /= p;
                    r /= p;

                    for j in k..row_hi {
                        let mut t = h[(k, j)] + q * h[(k + 1, j)];
                        if notlast {
                            t += r * h[(k + 2, j)];
                            h[(k + 2, j)] -= t * zz;
                        }
                        h[(k, j)] -= t * x;
                        h[(k + 1, j)] -= t * y;
                    }
                    for i in col_lo..=nu.min(k + 3) {
                        let mut t = x * h[(i, k)] + y * h[(i, k + 1)];
                        if notlast {
                            t += zz * h[(i, k + 2)];
                            h[(i, k + 2)] -= t * r;
                        }
                        h[(i, k)] -= t;
                        h[(i, k + 1)] -= t * q;
                    }
                    if let Some(z) = z.as_deref_mut() {
                        for i in 0..nn {
                            let mut t = x * z[(i, k)] + y * z[(i, k + 1)];
                            if notlast {
                                t += zz * z[(i, k + 2)];
                                z[(i, k + 2)] -= t * r;
                            }
                            z[(i, k)] -= t;
                            z[(i, k + 1)] -= t * q;
                        }
                    }
                }
                k += 1;
            }
        }
    }
    // Sweeps leave stale bulge entries below the subdiagonal that are zero in
    // exact arithmetic.
    for j in 0..nn {
        for i in (j + 2)..nn {
            h[(i, j)] = 0.0;
        }
    }
    Ok((eig, sweeps))
}
