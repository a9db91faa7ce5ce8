use serde::Serialize;

use crate::chain::ComposedChain;
use crate::error::{Error, Result};
use crate::sparse::check_len;

/// Total-variation distances at or below this are treated as rounding noise
/// and excluded from the rate fit.
const TV_FLOOR: f64 = 1e-12;

/// `||pi0 P^t - 1/n||_TV` for `t = 1..=t_max` and the fitted geometric rate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixingTrace {
    pub t_values: Vec<usize>,
    pub tv_distances: Vec<f64>,
    pub fitted_rate: f64,
    /// Inclusive range of `t` used by the fit; `None` when the chain hit the
    /// floor immediately (rate reported as 0).
    pub fit_window: Option<(usize, usize)>,
}

/// Evolves `pi0` and fits `log TV` against `t` by least squares.
///
/// The fit uses the second half of the stretch of the trace that stays above
/// [`TV_FLOOR`]; past that point the distances are rounding noise and would
/// flatten the slope.
pub fn mixing_trace(chain: &ComposedChain, pi0: &[f64], t_max: usize) -> Result<MixingTrace> {
    let n = chain.n();
    check_len(n, pi0.len())?;
    if t_max < 4 {
        return Err(Error::InvalidArgument(format!(
            "t_max must be at least 4, got {t_max}"
        )));
    }
    if pi0.iter().any(|&p| !(p >= 0.0 && p.is_finite()))
        || (pi0.iter().sum::<f64>() - 1.0).abs() > 1e-9
    {
        return Err(Error::InvalidArgument(
            "pi0 must be a probability vector".into(),
        ));
    }

    let inv = chain.sigma().inverse();
    let uniform = 1.0 / n as f64;
    let mut pi = pi0.to_vec();
    let mut relabeled = vec![0.0; n];
    let mut tv = Vec::with_capacity(t_max);
    for _ in 0..t_max {
        // (pi P)[y] = sum_x pi[x] Q[sigma(x)][y] = sum_z pi[sigma^{-1}(z)] Q[z][y].
        for (z, r) in relabeled.iter_mut().enumerate() {
            *r = pi[inv.apply(z)];
        }
        chain.q().left_mul_vec_into(&relabeled, &mut pi);
        tv.push(0.5 * pi.iter().map(|p| (p - uniform).abs()).sum::<f64>());
    }

    let above = tv.iter().take_while(|&&d| d > TV_FLOOR).count();
    let (fitted_rate, fit_window) = if above == 0 {
        (0.0, None)
    } else {
        let lo = if above >= 4 { above / 2 } else { 0 };
        let pts: Vec<(f64, f64)> = (lo..above).map(|i| ((i + 1) as f64, tv[i].ln())).collect();
        let rate = if pts.len() < 2 {
            // One point above the floor: the chain collapsed after one step.
            tv[0]
        } else {
            least_squares_slope(&pts).exp()
        };
        (rate, Some((lo + 1, above)))
    };

    Ok(MixingTrace {
        t_values: (1..=t_max).collect(),
        tv_distances: tv,
        fitted_rate,
        fit_window,
    })
}

fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::compose;
    use crate::generators::gen_figure1;
    use crate::permutation::Permutation;
    use crate::rng;
    use crate::sparse::{CsrMatrix, SparseBistochastic};
    use crate::spectral::full_spectrum;

    fn point_mass(n: usize) -> Vec<f64> {
        let mut v = vec![0.0; n];
        v[0] = 1.0;
        v
    }

    #[test]
    fn uniform_chain_mixes_in_one_step() {
        let c = compose(
            Permutation::cycle(20),
            SparseBistochastic::uniform(20).unwrap(),
        )
        .unwrap();
        let tr = mixing_trace(&c, &point_mass(20), 10).unwrap();
        assert!(tr.tv_distances.iter().all(|&d| d < 1e-15));
        assert_eq!(tr.fitted_rate, 0.0);
        assert_eq!(tr.t_values, (1..=10).collect::<Vec<_>>());
    }

    #[test]
    fn reducible_chain_plateaus() {
        // Two uniform 3-blocks: mass started in one block never leaves it.
        let rows = (0..6)
            .map(|x| {
                let b = 3 * (x / 3);
                (b..b + 3).map(|y| (y, 1.0 / 3.0)).collect()
            })
            .collect();
        let q = SparseBistochastic::new(CsrMatrix::from_rows(6, rows).unwrap()).unwrap();
        let c = compose(Permutation::identity(6), q).unwrap();
        let tr = mixing_trace(&c, &point_mass(6), 20).unwrap();
        assert!(tr.tv_distances.iter().all(|&d| (d - 0.5).abs() < 1e-12));
        assert!((tr.fitted_rate - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_short_horizon_and_bad_measures() {
        let c = compose(
            Permutation::identity(4),
            SparseBistochastic::identity(4).unwrap(),
        )
        .unwrap();
        assert!(mixing_trace(&c, &point_mass(4), 3).is_err());
        assert!(mixing_trace(&c, &[0.5, 0.5, 0.5, 0.0], 10).is_err());
        assert!(mixing_trace(&c, &[1.0], 10).is_err());
    }

    #[test]
    fn matches_transposed_dense_power() {
        let n = 30;
        let c = compose(
            Permutation::sample(n, &mut rng::seeded(1)).unwrap(),
            gen_figure1(n, 0.4).unwrap(),
        )
        .unwrap();
        let tr = mixing_trace(&c, &point_mass(n), 5).unwrap();
        let p = c.p().to_dense();
        let mut pi = nalgebra::RowDVector::from_row_slice(&point_mass(n));
        for t in 0..5 {
            pi = &pi * &p;
            let tv = 0.5 * pi.iter().map(|v| (v - 1.0 / n as f64).abs()).sum::<f64>();
            assert!((tv - tr.tv_distances[t]).abs() < 1e-14);
        }
    }

    #[test]
    fn rate_tracks_lambda2_on_figure1() {
        let n = 500;
        let c = compose(
            Permutation::sample(n, &mut rng::seeded(21)).unwrap(),
            gen_figure1(n, 0.5).unwrap(),
        )
        .unwrap();
        let l2 = full_spectrum(c.p(), 2000).unwrap().lambda2_modulus;
        let tr = mixing_trace(&c, &point_mass(n), 200).unwrap();
        assert!(
            (tr.fitted_rate - l2).abs() <= 0.05 * l2,
            "rate {} vs {l2}",
            tr.fitted_rate
        );
    }
}
