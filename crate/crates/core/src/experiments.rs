//! Monte Carlo and exhaustive experiments around the tail bound for
//! `|lambda_2|`, the shuffle-fold maps and the 2x2-block model.

use std::path::Path;
use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF};

use crate::chain::compose;
use crate::error::{Error, Result};
use crate::generators::{gen_figure1, gen_shuffle_fold, Model, ModelSpec};
use crate::io::eigenvalue_csv;
use crate::norms::{gram_support_degree, rho, NormReport};
use crate::permutation::{all_permutations, Permutation};
use crate::rng;
use crate::sparse::CsrMatrix;
use crate::spectral::{
    dense_eigenvalues, full_spectrum, lambda2_from_spectrum, lambda2_modulus, KrylovOptions,
    Method, DEFAULT_DENSE_CAP,
};
use crate::tangle::{pair_tangle_free, TangleParams};
use crate::VERSION;

/// Largest `n` for sweeps over the whole symmetric group.
pub const EXACT_MAX_N: usize = 7;

/// Slack applied to every `value >= threshold` comparison, so that values
/// equal to the threshold in exact arithmetic are counted.
pub const THRESHOLD_SLACK: f64 = 1e-9;

/// Provenance attached to every written report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Meta<C> {
    pub version: &'static str,
    pub seed: u64,
    pub config: C,
}

impl<C> Meta<C> {
    pub fn new(seed: u64, config: C) -> Self {
        Self {
            version: VERSION,
            seed,
            config,
        }
    }
}

/// `c1 ln d / sqrt(ln n)`.
pub fn theorem_epsilon(n: usize, d: f64, c1: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "n must be at least 2, got {n}"
        )));
    }
    if d.is_nan() || d < 2.0 {
        return Err(Error::InvalidArgument(format!(
            "d must be at least 2, got {d}"
        )));
    }
    Ok(c1 * d.ln() / (n as f64).ln().sqrt())
}

fn default_seed() -> u64 {
    rng::DEFAULT_SEED
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub trials: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub delta: f64,
    pub c0: f64,
    pub c1: f64,
    /// When set, each trial also reports `||P^ell (I - 11^T/n)||` and
    /// `e^{c1 sqrt(ln n)} rho^ell`.
    #[serde(default)]
    pub ell: Option<usize>,
    #[serde(default)]
    pub dense_cap: Option<usize>,
    /// Dense up to the cap, Krylov beyond it, unless set.
    #[serde(default)]
    pub method: Option<Method>,
    #[serde(default)]
    pub krylov: KrylovOptions,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidArgument("trials must be positive".into()));
        }
        if !(0.0 < self.c0 && self.c0 < self.delta && self.delta <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "need 0 < c0 < delta <= 1, got c0 = {}, delta = {}",
                self.c0, self.delta
            )));
        }
        if !(self.c1 > 0.0 && self.c1.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "c1 must be positive, got {}",
                self.c1
            )));
        }
        if self.ell == Some(0) {
            return Err(Error::InvalidArgument("ell must be at least 1".into()));
        }
        Ok(())
    }

    pub fn dense_cap(&self) -> usize {
        self.dense_cap.unwrap_or(DEFAULT_DENSE_CAP)
    }

    fn method_for(&self, n: usize) -> Method {
        self.method.unwrap_or(if n <= self.dense_cap() {
            Method::Dense
        } else {
            Method::Krylov
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialReport {
    pub trial: usize,
    /// Random stream the permutation was drawn from.
    pub stream: u64,
    pub lambda2: f64,
    pub rho: f64,
    pub d: usize,
    pub ratio: f64,
    /// `|lambda_2| >= (1 + epsilon) rho`; absent when `d < 2` leaves epsilon
    /// undefined.
    pub exceeded: Option<bool>,
    pub converged: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub power_norm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub power_bound: Option<f64>,
    /// Wall-clock time; left out of JSON so reruns are byte-identical.
    #[serde(skip)]
    pub runtime_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRun {
    pub meta: Meta<ExperimentConfig>,
    pub n: usize,
    pub method: Method,
    pub norms: NormReport,
    pub epsilon: Option<f64>,
    pub trials: Vec<TrialReport>,
}

/// Draws `config.trials` permutations and records `|lambda_2|` against `rho`.
///
/// `Q` and its norms are computed once. Trial `i` samples from stream `i`
/// of the seed and trials run in parallel; the output is ordered by trial
/// and does not depend on the number of threads. A solver that fails to
/// converge marks its trial rather than aborting the run.
pub fn run_trials(config: &ExperimentConfig) -> Result<TrialRun> {
    config.validate()?;
    let model = config.model.build(config.seed)?;
    let n = model.q.n();
    let norms = rho(&model.q, config.delta)?;
    let epsilon = theorem_epsilon(n, norms.d as f64, config.c1).ok();
    let method = config.method_for(n);
    if method == Method::Dense && n > config.dense_cap() {
        return Err(Error::DenseCapExceeded {
            n,
            cap: config.dense_cap(),
        });
    }

    let trials = (0..config.trials)
        .into_par_iter()
        .map(|i| run_one(config, &model, &norms, epsilon, method, i))
        .collect::<Result<Vec<_>>>()?;

    Ok(TrialRun {
        meta: Meta::new(config.seed, config.clone()),
        n,
        method,
        norms,
        epsilon,
        trials,
    })
}

fn run_one(
    config: &ExperimentConfig,
    model: &Model,
    norms: &NormReport,
    epsilon: Option<f64>,
    method: Method,
    i: usize,
) -> Result<TrialReport> {
    let start = Instant::now();
    let n = model.q.n();
    let sigma = Permutation::sample(n, &mut rng::stream(config.seed, i as u64))?;
    let chain = compose(sigma, model.q.clone())?;
    let (lambda2, converged) =
        match lambda2_modulus(&chain, method, &config.krylov, config.dense_cap()) {
            Ok(rep) => (rep.lambda2_modulus, rep.converged),
            Err(Error::NoConvergence) => (f64::NAN, false),
            Err(e) => return Err(e),
        };
    let (power_norm, power_bound) = match config.ell {
        Some(ell) if n <= config.dense_cap() => {
            let p = chain.p().to_dense();
            let mut pw = DMatrix::identity(n, n) - DMatrix::from_element(n, n, 1.0 / n as f64);
            for _ in 0..ell {
                pw = &p * pw;
            }
            let bound = (config.c1 * (n as f64).ln().sqrt()).exp() * norms.rho.powi(ell as i32);
            (Some(pw.singular_values().max()), Some(bound))
        }
        _ => (None, None),
    };
    Ok(TrialReport {
        trial: i,
        stream: i as u64,
        lambda2,
        rho: norms.rho,
        d: norms.d,
        ratio: lambda2 / norms.rho,
        exceeded: epsilon.map(|e| lambda2 >= (1.0 + e) * norms.rho),
        converged,
        power_norm,
        power_bound,
        runtime_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

/// Fraction of a sample at or above a threshold, with a 95% Clopper-Pearson
/// interval.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailEstimate {
    pub threshold: f64,
    pub hits: usize,
    pub trials: usize,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// `n^{-c0}`, when compared against.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<f64>,
    /// Whether the interval reaches down to the target.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub consistent_with_target: Option<bool>,
}

/// Exact binomial interval at level `1 - alpha`.
pub fn clopper_pearson(hits: usize, trials: usize, alpha: f64) -> (f64, f64) {
    let (k, t) = (hits as f64, trials as f64);
    let lo = if hits == 0 {
        0.0
    } else {
        Beta::new(k, t - k + 1.0)
            .expect("positive shapes")
            .inverse_cdf(alpha / 2.0)
    };
    let hi = if hits == trials {
        1.0
    } else {
        Beta::new(k + 1.0, t - k)
            .expect("positive shapes")
            .inverse_cdf(1.0 - alpha / 2.0)
    };
    (lo, hi)
}

/// Fraction of `values` that are `>= threshold` (up to [`THRESHOLD_SLACK`]).
/// NaN values count as misses.
pub fn threshold_tail(values: &[f64], threshold: f64) -> Result<TailEstimate> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("no values".into()));
    }
    let hits = values
        .iter()
        .filter(|&&v| v >= threshold - THRESHOLD_SLACK)
        .count();
    let (ci_low, ci_high) = clopper_pearson(hits, values.len(), 0.05);
    Ok(TailEstimate {
        threshold,
        hits,
        trials: values.len(),
        estimate: hits as f64 / values.len() as f64,
        ci_low,
        ci_high,
        target: None,
        consistent_with_target: None,
    })
}

/// `P(ratio >= 1 + epsilon)` from trial reports, compared with `n^{-c0}`.
pub fn tail_probability(
    reports: &[TrialReport],
    epsilon: f64,
    n: usize,
    c0: f64,
) -> Result<TailEstimate> {
    let ratios: Vec<f64> = reports.iter().map(|r| r.ratio).collect();
    let mut est = threshold_tail(&ratios, 1.0 + epsilon)?;
    let target = (n as f64).powf(-c0);
    est.target = Some(target);
    est.consistent_with_target = Some(est.ci_low <= target);
    Ok(est)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExactTail {
    pub hits: u64,
    pub total: u64,
}

impl ExactTail {
    pub fn probability(&self) -> f64 {
        self.hits as f64 / self.total as f64
    }
}

/// `#{sigma : |lambda_2(M_sigma Q)| >= threshold} / n!` over all of `S_n`.
pub fn exact_tail(q: &CsrMatrix, threshold: f64) -> Result<ExactTail> {
    let n = q.n();
    if n > EXACT_MAX_N {
        return Err(Error::ScaleGuard(format!(
            "exact enumeration needs n <= {EXACT_MAX_N}, got {n}"
        )));
    }
    let dq = q.to_dense();
    let mut hits = 0;
    let mut total = 0;
    for sigma in all_permutations(n) {
        let l2 = lambda2_from_spectrum(&dense_eigenvalues(sigma.to_dense() * &dq)?);
        hits += (l2 >= threshold - THRESHOLD_SLACK) as u64;
        total += 1;
    }
    Ok(ExactTail { hits, total })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum FoldMode {
    Exhaustive,
    Sampled { trials: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldStudy {
    pub n: usize,
    pub r: usize,
    pub mode: FoldMode,
    pub count: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub argmin: Vec<usize>,
    pub argmax: Vec<usize>,
    pub identity_tau: f64,
    pub coprime: bool,
    /// `sin(r pi / n) / (r sin(pi / n))`; only when `gcd(n, r) = 1`.
    pub closed_form_max: Option<f64>,
    pub inv_sqrt_r: f64,
    pub mean_over_inv_sqrt_r: f64,
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn fold_tau(n: usize, r: usize, sigma: &Permutation) -> Result<f64> {
    let q = gen_shuffle_fold(n, r, sigma)?;
    Ok(lambda2_from_spectrum(&dense_eigenvalues(q.to_dense())?))
}

/// `tau(sigma) = |lambda_2|` of the shuffle-fold chain over all of `S_n` or
/// a uniform sample.
pub fn shuffle_fold_study(n: usize, r: usize, mode: FoldMode) -> Result<FoldStudy> {
    let sigmas: Vec<Permutation> = match mode {
        FoldMode::Exhaustive => {
            if n > EXACT_MAX_N {
                return Err(Error::ScaleGuard(format!(
                    "exhaustive sweep needs n <= {EXACT_MAX_N}, got {n}"
                )));
            }
            all_permutations(n).collect()
        }
        FoldMode::Sampled { trials, seed } => {
            if trials == 0 {
                return Err(Error::InvalidArgument("trials must be positive".into()));
            }
            (0..trials)
                .map(|i| Permutation::sample(n, &mut rng::stream(seed, i as u64)))
                .collect::<Result<_>>()?
        }
    };
    let taus = sigmas
        .par_iter()
        .map(|s| fold_tau(n, r, s))
        .collect::<Result<Vec<f64>>>()?;

    // First index wins ties, so the sweep order decides argmin/argmax.
    let (mut imin, mut imax) = (0, 0);
    for (i, &t) in taus.iter().enumerate() {
        if t < taus[imin] {
            imin = i;
        }
        if t > taus[imax] {
            imax = i;
        }
    }
    let mean = taus.iter().sum::<f64>() / taus.len() as f64;
    let coprime = gcd(n, r) == 1;
    let pi = std::f64::consts::PI;
    let inv_sqrt_r = 1.0 / (r as f64).sqrt();
    Ok(FoldStudy {
        n,
        r,
        mode,
        count: taus.len(),
        min: taus[imin],
        max: taus[imax],
        mean,
        argmin: sigmas[imin].as_slice().to_vec(),
        argmax: sigmas[imax].as_slice().to_vec(),
        identity_tau: fold_tau(n, r, &Permutation::identity(n))?,
        coprime,
        closed_form_max: coprime
            .then(|| (r as f64 * pi / n as f64).sin() / (r as f64 * (pi / n as f64).sin())),
        inv_sqrt_r,
        mean_over_inv_sqrt_r: mean / inv_sqrt_r,
    })
}

/// The probability bound for tangle-freeness with its unknown constant set
/// to 1.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TangleBound {
    pub d: usize,
    pub h: usize,
    pub ell: usize,
    pub delta: f64,
    /// `ell d^(ell + 2h) n^(-delta)`.
    pub failure_term: f64,
    /// `1 - failure_term`.
    pub lower_bound: f64,
    /// The bound says nothing when the failure term is at least 1.
    pub vacuous: bool,
}

impl TangleBound {
    pub fn new(n: usize, d: usize, ell: usize, params: &TangleParams) -> Self {
        let failure_term = ell as f64
            * (d as f64).powf((ell + 2 * params.h) as f64)
            * (n as f64).powf(-params.delta);
        Self {
            d,
            h: params.h,
            ell,
            delta: params.delta,
            failure_term,
            lower_bound: 1.0 - failure_term,
            vacuous: failure_term >= 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TangleFrequency {
    pub trials: usize,
    pub tangle_free: usize,
    pub frequency: f64,
    /// Binomial standard error of the frequency.
    pub std_error: f64,
    pub bound: TangleBound,
}

/// Fraction of uniform permutations whose pair with `q` is `ell`-tangle-free.
pub fn tangle_frequency(
    q: &CsrMatrix,
    ell: usize,
    params: &TangleParams,
    trials: usize,
    seed: u64,
) -> Result<TangleFrequency> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be positive".into()));
    }
    let n = q.n();
    let free = (0..trials)
        .into_par_iter()
        .map(|i| {
            let sigma = Permutation::sample(n, &mut rng::stream(seed, i as u64))?;
            Ok(pair_tangle_free(&sigma, q, ell, params)?.tangle_free)
        })
        .collect::<Result<Vec<bool>>>()?;
    let tangle_free = free.iter().filter(|&&b| b).count();
    let f = tangle_free as f64 / trials as f64;
    Ok(TangleFrequency {
        trials,
        tangle_free,
        frequency: f,
        std_error: (f * (1.0 - f) / trials as f64).sqrt(),
        bound: TangleBound::new(n, gram_support_degree(q), ell, params),
    })
}

/// Tangle-free permutations counted over all of `S_n`.
pub fn exact_tangle_frequency(
    q: &CsrMatrix,
    ell: usize,
    params: &TangleParams,
) -> Result<ExactTail> {
    let n = q.n();
    if n > 8 {
        return Err(Error::ScaleGuard(format!(
            "exact enumeration needs n <= 8, got {n}"
        )));
    }
    let all: Vec<Permutation> = all_permutations(n).collect();
    let free = all
        .par_iter()
        .map(|s| Ok(pair_tangle_free(s, q, ell, params)?.tangle_free))
        .collect::<Result<Vec<bool>>>()?;
    Ok(ExactTail {
        hits: free.iter().filter(|&&b| b).count() as u64,
        total: all.len() as u64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Figure1Config {
    pub n: usize,
    pub p: f64,
}

/// Sidecar of the block-model eigenvalue plot.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Figure1Sidecar {
    pub meta: Meta<Figure1Config>,
    /// `sqrt(p^2 + (1-p)^2)`.
    pub radius: f64,
    pub lambda2: f64,
    pub eigenvalue_count: usize,
    pub norms: NormReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Figure1Result {
    pub eigenvalues: Vec<Complex64>,
    pub sidecar: Figure1Sidecar,
}

/// Spectrum of one block-model chain, with the permutation drawn from the root
/// stream of `seed`.
pub fn figure1_run(n: usize, p: f64, seed: u64) -> Result<Figure1Result> {
    let q = gen_figure1(n, p)?;
    let norms = rho(&q, 1.0)?;
    let sigma = Permutation::sample(n, &mut rng::seeded(seed))?;
    let chain = compose(sigma, q)?;
    let rep = full_spectrum(chain.p(), DEFAULT_DENSE_CAP)?;
    let eigenvalues = rep.eigenvalues.expect("dense spectra carry eigenvalues");
    Ok(Figure1Result {
        sidecar: Figure1Sidecar {
            meta: Meta::new(seed, Figure1Config { n, p }),
            radius: (p * p + (1.0 - p) * (1.0 - p)).sqrt(),
            lambda2: rep.lambda2_modulus,
            eigenvalue_count: eigenvalues.len(),
            norms,
        },
        eigenvalues,
    })
}

/// Writes `out` with extension `csv` (eigenvalues) and `json` (sidecar).
pub fn figure1_experiment(n: usize, p: f64, seed: u64, out: &Path) -> Result<Figure1Sidecar> {
    let res = figure1_run(n, p, seed)?;
    let csv = out.with_extension("csv");
    let json = out.with_extension("json");
    std::fs::write(&csv, eigenvalue_csv(&res.eigenvalues)).map_err(|e| Error::io(&csv, e))?;
    let mut text = serde_json::to_string_pretty(&res.sidecar)?;
    text.push('\n');
    std::fs::write(&json, text).map_err(|e| Error::io(&json, e))?;
    Ok(res.sidecar)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::SparseBistochastic;

    fn config(model: ModelSpec, trials: usize) -> ExperimentConfig {
        ExperimentConfig {
            model,
            trials,
            seed: 11,
            delta: 0.5,
            c0: 0.25,
            c1: 1.0,
            ell: None,
            dense_cap: None,
            method: None,
            krylov: KrylovOptions::default(),
        }
    }

    #[test]
    fn epsilon_values() {
        let e = theorem_epsilon(500, 2.0, 1.0).unwrap();
        assert!((e - 2f64.ln() / 500f64.ln().sqrt()).abs() < 1e-15);
        assert!((e - 0.27805).abs() < 1e-4);
        assert_eq!(theorem_epsilon(500, 3.0, 0.0).unwrap(), 0.0);
        let e = theorem_epsilon(4f64.exp().round() as usize, 2f64.exp(), 1.0).unwrap();
        // n = round(e^4) = 55 is not exact; use the formula at the same n.
        assert!((e - 2.0 / 55f64.ln().sqrt()).abs() < 1e-12);
        assert!(theorem_epsilon(500, 1.0, 1.0).is_err());
        assert!(theorem_epsilon(1, 2.0, 1.0).is_err());
    }

    #[test]
    fn config_validation() {
        let good = config(ModelSpec::Figure1 { n: 4, p: 0.5 }, 3);
        assert!(good.validate().is_ok());
        for f in [
            |c: &mut ExperimentConfig| c.trials = 0,
            |c: &mut ExperimentConfig| c.c0 = 0.5,
            |c: &mut ExperimentConfig| c.c0 = 0.0,
            |c: &mut ExperimentConfig| c.delta = 1.5,
            |c: &mut ExperimentConfig| c.c1 = 0.0,
            |c: &mut ExperimentConfig| c.ell = Some(0),
        ] {
            let mut c = good.clone();
            f(&mut c);
            assert!(c.validate().is_err());
        }
    }

    #[test]
    fn config_json_defaults() {
        let c: ExperimentConfig = serde_json::from_str(
            r#"{"model": {"model": "fig1", "n": 6, "p": 0.5}, "trials": 2, "delta": 1.0, "c0": 0.5, "c1": 1.0}"#,
        )
        .unwrap();
        assert_eq!(c.seed, rng::DEFAULT_SEED);
        assert_eq!(c.krylov, KrylovOptions::default());
        assert_eq!(c.method, None);
    }

    #[test]
    fn uniform_model_ratios_vanish() {
        let n = 6;
        let entries = (0..n)
            .flat_map(|x| (0..n).map(move |y| (x, y, 1.0 / n as f64)))
            .collect();
        let run = run_trials(&config(ModelSpec::Custom { n, entries }, 5)).unwrap();
        assert_eq!(run.trials.len(), 5);
        for t in &run.trials {
            assert!(t.ratio.abs() < 1e-10, "{t:?}");
            assert_eq!(t.exceeded, Some(false));
        }
    }

    #[test]
    fn trials_are_reproducible_and_ordered() {
        let mut c = config(ModelSpec::Figure1 { n: 40, p: 0.3 }, 12);
        c.ell = Some(2);
        let a = run_trials(&c).unwrap();
        let b = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| run_trials(&c).unwrap());
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
        for (i, t) in a.trials.iter().enumerate() {
            assert_eq!(t.trial, i);
            assert!(t.lambda2 <= 1.0 + 1e-9 && t.ratio <= 1.0 / t.rho + 1e-9);
            assert!(t.power_norm.unwrap() <= 1.0 + 1e-9);
        }
        // Different trials see different permutations.
        assert!(a.trials.windows(2).any(|w| w[0].lambda2 != w[1].lambda2));
    }

    #[test]
    fn krylov_trials_match_dense() {
        let mut c = config(ModelSpec::Figure1 { n: 200, p: 0.5 }, 4);
        let dense = run_trials(&c).unwrap();
        c.method = Some(Method::Krylov);
        let kry = run_trials(&c).unwrap();
        assert_eq!(kry.method, Method::Krylov);
        for (a, b) in dense.trials.iter().zip(&kry.trials) {
            assert!((a.lambda2 - b.lambda2).abs() < 1e-6);
        }
    }

    #[test]
    fn dense_cap_is_enforced() {
        let mut c = config(ModelSpec::Figure1 { n: 20, p: 0.5 }, 1);
        c.dense_cap = Some(10);
        c.method = Some(Method::Dense);
        assert!(matches!(
            run_trials(&c),
            Err(Error::DenseCapExceeded { n: 20, cap: 10 })
        ));
    }

    #[test]
    fn clopper_pearson_edges() {
        let t = 50;
        let (lo, hi) = clopper_pearson(0, t, 0.05);
        assert_eq!(lo, 0.0);
        assert!((hi - (1.0 - 0.025f64.powf(1.0 / t as f64))).abs() < 1e-9);
        let (lo, hi) = clopper_pearson(t, t, 0.05);
        assert_eq!(hi, 1.0);
        assert!((lo - 0.025f64.powf(1.0 / t as f64)).abs() < 1e-9);
        let (lo, hi) = clopper_pearson(20, 100, 0.05);
        assert!(lo < 0.2 && 0.2 < hi);
        // Symmetric under hits <-> misses.
        let (lo2, hi2) = clopper_pearson(80, 100, 0.05);
        assert!((lo - (1.0 - hi2)).abs() < 1e-9 && (hi - (1.0 - lo2)).abs() < 1e-9);
    }

    #[test]
    fn tail_trivial_cases() {
        let reports: Vec<TrialReport> = (0..4)
            .map(|i| TrialReport {
                trial: i,
                stream: i as u64,
                lambda2: 0.0,
                rho: 0.5,
                d: 2,
                ratio: 0.0,
                exceeded: Some(false),
                converged: true,
                power_norm: None,
                power_bound: None,
                runtime_ms: 0.0,
            })
            .collect();
        assert_eq!(
            tail_probability(&reports, 0.3, 100, 0.5).unwrap().estimate,
            0.0
        );
        assert_eq!(
            tail_probability(&reports, -1.0, 100, 0.5).unwrap().estimate,
            1.0
        );
        assert!(tail_probability(&[], 0.3, 100, 0.5).is_err());
    }

    #[test]
    fn exact_tail_trivial_cases() {
        let id = CsrMatrix::identity(5).unwrap();
        let t = exact_tail(&id, 1.0).unwrap();
        assert_eq!((t.hits, t.total), (120, 120));
        let u = CsrMatrix::uniform(5).unwrap();
        assert_eq!(exact_tail(&u, 0.5).unwrap().hits, 0);
        assert!(exact_tail(&CsrMatrix::identity(8).unwrap(), 0.5).is_err());
    }

    /// Counts with nalgebra's own eigenvalue routine.
    fn brute_force_tail(q: &SparseBistochastic, thr: f64) -> u64 {
        let mut hits = 0;
        for s in all_permutations(q.n()) {
            let p = compose(s, q.clone()).unwrap();
            let eig = p.p().to_dense().complex_eigenvalues();
            let mut mods: Vec<f64> = eig.iter().map(|z| z.norm()).collect();
            mods.sort_by(|a, b| b.total_cmp(a));
            hits += (mods[1] >= thr - 1e-9) as u64;
        }
        hits
    }

    #[test]
    fn exact_tail_figure1_matches_brute_force() {
        let thr = 0.5f64.sqrt();
        for n in [4, 6] {
            let q = gen_figure1(n, 0.5).unwrap();
            assert_eq!(exact_tail(&q, thr).unwrap().hits, brute_force_tail(&q, thr));
        }
        let t = exact_tail(&gen_figure1(6, 0.5).unwrap(), thr).unwrap();
        assert_eq!((t.hits, t.total), (144, 720));
    }

    #[test]
    fn shuffle_fold_n5_r3() {
        let st = shuffle_fold_study(5, 3, FoldMode::Exhaustive).unwrap();
        assert_eq!(st.count, 120);
        assert!(st.coprime);
        let cf = st.closed_form_max.unwrap();
        assert!((cf - 0.5393446629166321).abs() < 1e-12);
        assert!((st.max - cf).abs() < 1e-8, "{st:?}");
        assert!((st.identity_tau - st.min).abs() < 1e-12);
        assert!((st.min - 1.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn shuffle_fold_gcd_violation_is_report_only() {
        let st = shuffle_fold_study(6, 3, FoldMode::Exhaustive).unwrap();
        assert!(!st.coprime);
        assert!(st.closed_form_max.is_none());
        assert!(shuffle_fold_study(8, 3, FoldMode::Exhaustive).is_err());
    }

    #[test]
    fn shuffle_fold_sampled_is_reproducible() {
        let mode = FoldMode::Sampled {
            trials: 30,
            seed: 4,
        };
        let a = shuffle_fold_study(20, 3, mode).unwrap();
        let b = shuffle_fold_study(20, 3, mode).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.count, 30);
    }

    #[test]
    fn tangle_frequency_trivial_and_exact() {
        let q = gen_figure1(8, 0.5).unwrap();
        let params = TangleParams {
            h: 2,
            e: vec![],
            delta: 0.5,
        };
        let f = tangle_frequency(&q, 1, &params, 50, 3).unwrap();
        assert_eq!(f.frequency, 1.0);

        // Uniform Q: every occurring path of length two is tangled.
        let u = CsrMatrix::uniform(8).unwrap();
        let p1 = TangleParams {
            h: 1,
            ..params.clone()
        };
        let exact = exact_tangle_frequency(&u, 3, &p1).unwrap();
        let mc = tangle_frequency(&u, 3, &p1, 200, 5).unwrap();
        let pe = exact.probability();
        assert!((mc.frequency - pe).abs() <= 3.0 * (pe * (1.0 - pe) / 200.0).sqrt() + 1e-12);
        assert!(mc.bound.vacuous);
    }

    #[test]
    fn tangle_frequency_is_reproducible() {
        let q = gen_figure1(100, 0.5).unwrap();
        let params = TangleParams {
            h: 2,
            e: vec![],
            delta: 0.5,
        };
        let a = tangle_frequency(&q, 2, &params, 20, 9).unwrap();
        let b = tangle_frequency(&q, 2, &params, 20, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.bound.d, 2);
        assert!((a.bound.failure_term - 2.0 * 2f64.powi(6) / 10.0).abs() < 1e-12);
    }

    #[test]
    fn figure1_files() {
        let dir = tempfile::tempdir().unwrap();
        let side = figure1_experiment(4, 0.5, 1, &dir.path().join("fig")).unwrap();
        let csv = std::fs::read_to_string(dir.path().join("fig.csv")).unwrap();
        assert_eq!(csv.lines().count(), 5);
        assert_eq!(csv.lines().next(), Some("re,im"));
        let json: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("fig.json")).unwrap())
                .unwrap();
        assert_eq!(json["radius"].as_f64().unwrap(), side.radius);
        assert!((side.radius - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(json["meta"]["seed"], 1);
        assert_eq!(json["meta"]["version"], VERSION);
        assert!(json["norms"]["rho"].is_number());

        let third = figure1_run(10, 1.0 / 3.0, 2).unwrap();
        assert!((third.sidecar.radius - 5f64.sqrt() / 3.0).abs() < 1e-15);
        let bad = figure1_experiment(4, 0.5, 1, &dir.path().join("missing").join("fig"));
        assert!(matches!(bad, Err(Error::Io { .. })));
    }

    #[test]
    fn figure1_spectrum_is_inside_the_circle_mostly() {
        // A smaller version of the n = 500 picture.
        let mut inside = 0;
        for seed in 0..10 {
            let r = figure1_run(200, 0.5, seed).unwrap();
            inside += (r.sidecar.lambda2 <= r.sidecar.radius + 0.08) as usize;
        }
        assert!(inside >= 8, "{inside}");
    }
}
