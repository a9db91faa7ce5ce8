//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//!
//! Each check compares against an oracle written here, independently of the
//! library code it checks, with the tolerance pinned next to it.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;

use permgap::experiments::{
    exact_tail, figure1_run, run_trials, shuffle_fold_study, threshold_tail, ExperimentConfig,
    FoldMode,
};
use permgap::generators::{
    gen_birkhoff, gen_figure1, gen_regular_digraph, gen_shuffle_fold, sample_uniform_regular,
};
use permgap::norms::{delta_norm, gram_support_degree, hs_norm, rho};
use permgap::spectral::{full_spectrum, krylov_lambda2, mixing_trace, singular_values};
use permgap::tangle::{pair_tangle_free, verify_decomposition, DecompositionReport, TangleParams};
use permgap::{
    compose, rng, validate_bistochastic, CsrMatrix, KrylovOptions, Method, ModelSpec, Permutation,
    SparseBistochastic,
};

type Check = (bool, String);

fn random_perm<R: Rng>(n: usize, rng: &mut R) -> Permutation {
    Permutation::sample(n, rng).unwrap()
}

fn random_weights<R: Rng>(r: usize, rng: &mut R) -> Vec<f64> {
    let w: Vec<f64> = (0..r).map(|_| rng.random_range(0.05..1.0)).collect();
    let s: f64 = w.iter().sum();
    let mut p: Vec<f64> = w.iter().map(|v| v / s).collect();
    // Exact unit sum for the generator's check.
    let head: f64 = p[..r - 1].iter().sum();
    p[r - 1] = 1.0 - head;
    p
}

/// A random model from one of five families, `n <= 200`.
fn random_model<R: Rng>(i: usize, rng: &mut R) -> SparseBistochastic {
    match i % 5 {
        0 => gen_figure1(2 * rng.random_range(1..=100), rng.random_range(0.01..0.99)).unwrap(),
        1 => sample_uniform_regular(rng.random_range(10..=200), rng.random_range(2..=4), rng)
            .unwrap(),
        2 => {
            let n = rng.random_range(2..=200);
            let r = rng.random_range(2..=4);
            let sigmas: Vec<Permutation> = (0..r).map(|_| random_perm(n, rng)).collect();
            gen_birkhoff(&random_weights(r, rng), &sigmas).unwrap().q
        }
        3 => {
            let r = rng.random_range(2..=4);
            let n = rng.random_range(r.max(5)..=200);
            gen_shuffle_fold(n, r, &random_perm(n, rng)).unwrap()
        }
        _ => {
            let n = rng.random_range(4..=200);
            let r = rng.random_range(2..=3.min(n));
            let adj: Vec<Vec<usize>> = (0..n)
                .map(|x| (0..r).map(|k| (x + k) % n).collect())
                .collect();
            gen_regular_digraph(&adj, r).unwrap()
        }
    }
}

fn ac1() -> Check {
    let mut rng = rng::seeded(101);
    let models: Vec<(SparseBistochastic, Permutation)> = (0..50)
        .map(|i| {
            let q = random_model(i, &mut rng);
            let s = random_perm(q.n(), &mut rng);
            (q, s)
        })
        .collect();
    let results: Vec<(f64, bool)> = models
        .into_par_iter()
        .map(|(q, sigma)| {
            let sq = singular_values(&q, 2000).unwrap();
            let chain = compose(sigma, q.clone()).unwrap();
            let sp = singular_values(chain.p(), 2000).unwrap();
            let scale = sq[0];
            let err = sq
                .iter()
                .zip(&sp)
                .map(|(a, b)| (a - b).abs() / scale)
                .fold(0.0, f64::max);
            let same = rho(&q, 0.5).unwrap() == rho(chain.p(), 0.5).unwrap()
                && rho(&q, 1.0).unwrap() == rho(chain.p(), 1.0).unwrap();
            (err, same)
        })
        .collect();
    let worst = results.iter().map(|r| r.0).fold(0.0, f64::max);
    let identical = results.iter().filter(|r| r.1).count();
    (
        worst <= 1e-9 && identical == 50,
        format!("50 models: max relative singular-value gap {worst:.1e} (tol 1e-9), identical norm reports {identical}/50"),
    )
}

/// `max{k : k < n^(1-delta)}` in integer arithmetic; `delta = a/10`.
fn budget_exact(n: usize, tenths: u32) -> usize {
    // k < n^((10 - a)/10)  <=>  k^10 < n^(10 - a).
    let rhs = (n as u128).pow(10 - tenths);
    (0..=n)
        .filter(|&k| (k as u128).pow(10) < rhs)
        .max()
        .unwrap_or(0)
}

fn ac2() -> Check {
    let mut rng = rng::seeded(202);
    let deltas = [(0.3, 3), (0.5, 5), (0.9, 9), (1.0, 10)];
    let mut mismatches = 0;
    let mut total = 0;
    for i in 0..200 {
        let n = rng.random_range(1..=12);
        let density = rng.random_range(0.1..0.9);
        let mut dense = vec![vec![0.0; n]; n];
        let mut trip = vec![];
        for (x, row) in dense.iter_mut().enumerate() {
            for (y, v) in row.iter_mut().enumerate() {
                if rng.random_bool(density) {
                    // Coarse values make ties common.
                    *v = if i % 2 == 0 {
                        rng.random_range(1..=5) as f64 / 10.0
                    } else {
                        rng.random_range(0.0..1.0)
                    };
                    trip.push((x, y, *v));
                }
            }
        }
        let a = CsrMatrix::from_triplets(n, trip).unwrap();
        let col_max: Vec<f64> = (0..n)
            .map(|y| (0..n).map(|x| dense[x][y]).fold(0.0, f64::max))
            .collect();
        for &(delta, tenths) in &deltas {
            let k = budget_exact(n, tenths);
            let mut best = f64::INFINITY;
            for mask in 0u32..(1 << n) {
                if mask.count_ones() as usize > k {
                    continue;
                }
                let v = (0..n)
                    .filter(|y| mask & (1 << y) == 0)
                    .map(|y| col_max[y])
                    .fold(0.0, f64::max);
                best = best.min(v);
            }
            total += 1;
            if delta_norm(&a, delta).unwrap().value != best {
                mismatches += 1;
            }
        }
    }
    (
        mismatches == 0,
        format!("200 matrices x 4 deltas: {mismatches}/{total} differ from exhaustive search (exact equality)"),
    )
}

/// Small bistochastic matrices with row support at most 3.
fn desk_q<R: Rng>(n: usize, rng: &mut R) -> SparseBistochastic {
    match rng.random_range(0..4) {
        0 => SparseBistochastic::new(
            CsrMatrix::from_triplets(
                n,
                random_perm(n, rng)
                    .as_slice()
                    .iter()
                    .enumerate()
                    .map(|(x, &y)| (x, y, 1.0)),
            )
            .unwrap(),
        )
        .unwrap(),
        1 | 2 => {
            let r = rng.random_range(2..=3);
            let sigmas: Vec<Permutation> = (0..r).map(|_| random_perm(n, rng)).collect();
            gen_birkhoff(&random_weights(r, rng), &sigmas).unwrap().q
        }
        _ => {
            // One 2x2 mixing block, identity elsewhere, relabelled.
            let p = rng.random_range(0.1..0.9);
            let mut trip = vec![(0, 0, p), (0, 1, 1.0 - p), (1, 0, 1.0 - p), (1, 1, p)];
            trip.extend((2..n).map(|x| (x, x, 1.0)));
            let s = random_perm(n, rng);
            SparseBistochastic::new(
                CsrMatrix::from_triplets(n, trip.into_iter().map(|(x, y, w)| (s.apply(x), y, w)))
                    .unwrap(),
            )
            .unwrap()
        }
    }
}

struct Fixture {
    sigma: Permutation,
    q: SparseBistochastic,
    ell: usize,
    params: TangleParams,
}

fn desk_fixture<R: Rng>(max_n: usize, rng: &mut R) -> Fixture {
    let n = rng.random_range(4..=max_n);
    let q = desk_q(n, rng);
    let e = if rng.random_bool(0.5) {
        vec![]
    } else {
        vec![rng.random_range(0..n)]
    };
    Fixture {
        sigma: random_perm(n, rng),
        q,
        ell: rng.random_range(1..=3),
        params: TangleParams {
            h: rng.random_range(1..=2),
            e,
            delta: 0.5,
        },
    }
}

/// Fixtures for the path-sum checks: 100 certified tangle-free pairs plus up
/// to 100 tangled ones.
fn decomposition_fixtures() -> (Vec<DecompositionReport>, Vec<DecompositionReport>, usize) {
    let mut rng = rng::seeded(303);
    let mut candidates = vec![];
    let (mut free, mut tangled) = (0, 0);
    let mut with_e = 0;
    while free < 100 || tangled < 100 {
        let f = desk_fixture(10, &mut rng);
        let cert = pair_tangle_free(&f.sigma, &f.q, f.ell, &f.params).unwrap();
        let slot = if cert.tangle_free {
            &mut free
        } else {
            &mut tangled
        };
        if *slot < 100 {
            *slot += 1;
            if cert.tangle_free && !f.params.e.is_empty() {
                with_e += 1;
            }
            candidates.push(f);
        }
    }
    let reports: Vec<DecompositionReport> = candidates
        .par_iter()
        .map(|f| verify_decomposition(&f.sigma, &f.q, f.ell, &f.params).unwrap())
        .collect();
    let (free, tangled): (Vec<_>, Vec<_>) = reports.into_iter().partition(|r| r.tangle_free);
    (free, tangled, with_e)
}

fn ac3(free: &[DecompositionReport], with_e: usize) -> Check {
    let worst = free
        .iter()
        .map(|r| r.power_residual.unwrap())
        .fold(0.0, f64::max);
    (
        free.len() == 100 && worst <= 1e-10,
        format!(
            "{} tangle-free pairs ({} with E nonempty): max |P^l - P^(l)| = {worst:.1e} (tol 1e-10)",
            free.len(),
            with_e
        ),
    )
}

fn ac4(free: &[DecompositionReport], tangled: &[DecompositionReport]) -> Check {
    let worst = free
        .iter()
        .chain(tangled)
        .map(|r| r.telescoping_residual)
        .fold(0.0, f64::max);
    let min_slack = free.iter().map(|r| r.slack).fold(f64::INFINITY, f64::min);
    (
        worst <= 1e-10 && min_slack >= -1e-10,
        format!(
            "{} pairs ({} tangled): telescoping residual {worst:.1e} (tol 1e-10); min norm-bound slack on tangle-free {min_slack:.3e} (tol -1e-10)",
            free.len() + tangled.len(),
            tangled.len()
        ),
    )
}

/// Tangle-freeness from the definitions, written without the library: all
/// subpaths as explicit step lists, reach by boolean powers of `Q^T Q`.
struct Oracle {
    reach: Vec<Vec<bool>>,
    in_e: Vec<bool>,
}

impl Oracle {
    fn new(q: &CsrMatrix, params: &TangleParams) -> Self {
        let n = q.n();
        let d = q.to_dense();
        let g: Vec<Vec<bool>> = (0..n)
            .map(|a| {
                (0..n)
                    .map(|b| (0..n).any(|y| d[(y, a)] > 0.0 && d[(y, b)] > 0.0))
                    .collect()
            })
            .collect();
        let mut reach = g.clone();
        for _ in 1..params.h {
            reach = (0..n)
                .map(|a| {
                    (0..n)
                        .map(|b| (0..n).any(|c| reach[a][c] && g[c][b]))
                        .collect()
                })
                .collect();
        }
        let mut in_e = vec![false; n];
        for &x in &params.e {
            in_e[x] = true;
        }
        Self { reach, in_e }
    }

    fn path_free(&self, xs: &[usize], ys: &[usize]) -> bool {
        let k = ys.len();
        let mut windows: BTreeSet<Vec<usize>> = BTreeSet::new();
        for s in 0..k {
            for t in s..k {
                windows.insert((s..=t).collect());
                for i in s..=t {
                    for j in i + 1..=t {
                        if xs[i] == xs[j] {
                            windows.insert((s..i).chain(j..=t).collect());
                        }
                    }
                }
            }
        }
        let mut coincidences: BTreeSet<BTreeSet<(usize, usize, usize)>> = BTreeSet::new();
        for w in &windows {
            let mut z = vec![xs[w[0]]];
            z.extend(w.iter().map(|&st| xs[st + 1]));
            let m = w.len();
            let distinct = z[..m].iter().collect::<BTreeSet<_>>().len() == m;
            if !distinct {
                continue;
            }
            if z[0] == z[m] && self.in_e[z[0]] {
                return false;
            }
            if self.reach[z[0]][z[m]] {
                coincidences.insert(w.iter().map(|&st| (xs[st], ys[st], xs[st + 1])).collect());
            }
        }
        coincidences.len() <= 1
    }

    fn pair_free(&self, sigma: &Permutation, q: &CsrMatrix, ell: usize) -> bool {
        let mut paths: Vec<(Vec<usize>, Vec<usize>)> =
            (0..q.n()).map(|x| (vec![x], vec![])).collect();
        for _ in 0..ell {
            let mut next = vec![];
            for (xs, ys) in &paths {
                let y = sigma.apply(*xs.last().unwrap());
                for (x2, _) in q.row_entries(y) {
                    let (mut a, mut b) = (xs.clone(), ys.clone());
                    a.push(x2);
                    b.push(y);
                    if !self.path_free(&a, &b) {
                        return false;
                    }
                    next.push((a, b));
                }
            }
            paths = next;
        }
        true
    }
}

fn ac5() -> Check {
    let mut rng = rng::seeded(505);
    let fixtures: Vec<Fixture> = (0..100).map(|_| desk_fixture(8, &mut rng)).collect();
    let agree: Vec<(bool, bool)> = fixtures
        .par_iter()
        .map(|f| {
            let lib = pair_tangle_free(&f.sigma, &f.q, f.ell, &f.params)
                .unwrap()
                .tangle_free;
            let oracle = Oracle::new(&f.q, &f.params).pair_free(&f.sigma, &f.q, f.ell);
            (lib == oracle, lib)
        })
        .collect();
    let ok = agree.iter().filter(|a| a.0).count();
    let free = agree.iter().filter(|a| a.1).count();
    (
        ok == 100,
        format!("100 fixtures ({free} tangle-free): {ok}/100 agree with brute-force enumeration"),
    )
}

fn ac6() -> Check {
    let q = gen_figure1(6, 0.5).unwrap();
    let thr = 0.5f64.sqrt();
    let exact = exact_tail(&q, thr).unwrap();
    let p = exact.probability();
    let config = ExperimentConfig {
        model: ModelSpec::Figure1 { n: 6, p: 0.5 },
        trials: 1000,
        seed: 606,
        delta: 1.0,
        c0: 0.5,
        c1: 1.0,
        ell: None,
        dense_cap: None,
        method: Some(Method::Dense),
        krylov: KrylovOptions::default(),
    };
    let run = run_trials(&config).unwrap();
    let l2: Vec<f64> = run.trials.iter().map(|t| t.lambda2).collect();
    let mc = threshold_tail(&l2, thr).unwrap();
    let sigma = (p * (1.0 - p) / 1000.0).sqrt();
    let dev = (mc.estimate - p).abs();
    (
        dev <= 3.0 * sigma,
        format!(
            "exact {}/{} = {p:.4}, Monte Carlo {}/1000 = {:.4}; |diff| {dev:.4} <= 3 sigma = {:.4}",
            exact.hits,
            exact.total,
            mc.hits,
            mc.estimate,
            3.0 * sigma
        ),
    )
}

fn ac7() -> Check {
    let mut lines = vec![];
    let mut pass = true;
    for p in [0.5, 1.0 / 3.0] {
        let inside: Vec<bool> = (0..20u64)
            .into_par_iter()
            .map(|seed| {
                let r = figure1_run(500, p, 7000 + seed).unwrap();
                assert_eq!(r.eigenvalues.len(), 500);
                r.sidecar.lambda2 <= r.sidecar.radius + 0.08
            })
            .collect();
        let k = inside.iter().filter(|&&b| b).count();
        pass &= k >= 18;
        lines.push(format!(
            "p = {p:.4}: {k}/20 inside radius {:.4} + 0.08",
            (p * p + (1.0 - p) * (1.0 - p)).sqrt()
        ));
    }
    (pass, format!("{} (need >= 18/20)", lines.join("; ")))
}

fn ac8() -> Check {
    let st = shuffle_fold_study(5, 3, FoldMode::Exhaustive).unwrap();
    let cf = (3.0 * PI / 5.0).sin() / (3.0 * (PI / 5.0).sin());
    let err = (st.max - cf).abs();
    let id_min = st.identity_tau <= st.min + 1e-12;
    (
        st.count == 120 && err <= 1e-8 && id_min,
        format!(
            "max over {} = {:.10}, closed form {cf:.10}, |diff| {err:.1e} (tol 1e-8); tau(id) = {:.6}, min = {:.6}",
            st.count, st.max, st.identity_tau, st.min
        ),
    )
}

fn ac9() -> Check {
    let n = 1000;
    let bound = 1.2 / 3f64.sqrt();
    let opts = KrylovOptions {
        subspace: 60,
        restarts: 40,
        ..KrylovOptions::default()
    };
    let results: Vec<(f64, bool)> = (0..20u64)
        .into_par_iter()
        .map(|i| {
            let spec = ModelSpec::Birkhoff {
                p: vec![1.0 / 3.0; 3],
                sigmas: None,
                n: Some(n),
            };
            let model = spec.build(9000 + i).unwrap();
            let chain = compose(Permutation::identity(n), model.q).unwrap();
            let rep = krylov_lambda2(&chain, &opts).unwrap();
            (rep.lambda2_modulus, rep.converged)
        })
        .collect();
    let ok = results.iter().filter(|(l, c)| *c && *l <= bound).count();
    let conv = results.iter().filter(|r| r.1).count();
    let worst = results.iter().map(|r| r.0).fold(0.0, f64::max);
    (
        ok >= 18,
        format!("{ok}/20 converged with |lambda_2| <= 1.2/sqrt(3) = {bound:.4} (need >= 18); converged {conv}/20, max {worst:.4}"),
    )
}

fn ac10() -> Check {
    let mut rng = rng::seeded(1010);
    let mut notes = vec![];

    // Generator outputs are bistochastic; 1/sqrt(d) <= ||Q||_HS.
    let mut valid = 0;
    let mut hs_ok = 0;
    let total = 200;
    for i in 0..total {
        let q = random_model(i, &mut rng);
        valid += validate_bistochastic(&q, 1e-12).passed as usize;
        hs_ok += (1.0 / (gram_support_degree(&q) as f64).sqrt() <= hs_norm(&q) + 1e-15) as usize;
    }
    notes.push(format!(
        "bistochastic {valid}/{total}, HS lower bound {hs_ok}/{total}"
    ));
    let mut pass = valid == total && hs_ok == total;

    // Krylov against dense.
    let mut chains = vec![];
    for seed in 0..3 {
        for p in [0.5, 0.3] {
            chains.push(compose(random_perm(500, &mut rng), gen_figure1(500, p).unwrap()).unwrap());
        }
        chains.push(
            compose(
                random_perm(300, &mut rng),
                sample_uniform_regular(300, 3, &mut rng::seeded(seed)).unwrap(),
            )
            .unwrap(),
        );
        let sig: Vec<Permutation> = (0..2).map(|_| random_perm(400, &mut rng)).collect();
        chains.push(
            compose(
                random_perm(400, &mut rng),
                gen_birkhoff(&[0.7, 0.3], &sig).unwrap().q,
            )
            .unwrap(),
        );
    }
    let gaps: Vec<(f64, bool)> = chains
        .par_iter()
        .map(|c| {
            let d = full_spectrum(c.p(), 2000).unwrap().lambda2_modulus;
            let k = krylov_lambda2(c, &KrylovOptions::default()).unwrap();
            ((d - k.lambda2_modulus).abs(), k.converged)
        })
        .collect();
    let worst = gaps.iter().map(|g| g.0).fold(0.0, f64::max);
    let conv = gaps.iter().filter(|g| g.1).count();
    pass &= worst <= 1e-6 && conv == gaps.len();
    notes.push(format!(
        "Krylov vs dense on {} chains: max gap {worst:.1e} (tol 1e-6), converged {conv}/{}",
        gaps.len(),
        gaps.len()
    ));

    // Mixing rate against |lambda_2| on an aperiodic irreducible chain.
    let c = compose(
        Permutation::sample(500, &mut rng::seeded(21)).unwrap(),
        gen_figure1(500, 0.5).unwrap(),
    )
    .unwrap();
    let l2 = full_spectrum(c.p(), 2000).unwrap().lambda2_modulus;
    let mut pi0 = vec![0.0; 500];
    pi0[0] = 1.0;
    let tr = mixing_trace(&c, &pi0, 200).unwrap();
    let rel = (tr.fitted_rate - l2).abs() / l2;
    pass &= rel <= 0.05;
    notes.push(format!(
        "mixing rate {:.4} vs |lambda_2| {l2:.4}: {:.1}% (tol 5%)",
        tr.fitted_rate,
        100.0 * rel
    ));

    (pass, notes.join("; "))
}

fn main() {
    let started = Instant::now();
    let mut failures = 0;
    let mut report = |id: u32, budget_s: f64, f: &mut dyn FnMut() -> Check| {
        let t = Instant::now();
        let (ok, detail) = f();
        let secs = t.elapsed().as_secs_f64();
        let ok = ok && secs <= budget_s;
        failures += !ok as usize;
        println!(
            "AC{id:<2} {}  {detail} [{secs:.1}s, budget {budget_s:.0}s]",
            if ok { "PASS" } else { "FAIL" }
        );
    };

    report(1, 60.0, &mut ac1);
    report(2, 10.0, &mut ac2);
    let t = Instant::now();
    let (free, tangled, with_e) = decomposition_fixtures();
    let build = t.elapsed().as_secs_f64();
    report(3, 60.0, &mut || {
        let (ok, d) = ac3(&free, with_e);
        (
            ok && build <= 60.0,
            format!("{d}; fixtures built in {build:.1}s"),
        )
    });
    report(4, 60.0, &mut || ac4(&free, &tangled));
    report(5, 30.0, &mut ac5);
    report(6, 60.0, &mut ac6);
    report(7, 120.0, &mut ac7);
    report(8, 5.0, &mut ac8);
    report(9, 180.0, &mut ac9);
    report(10, 180.0, &mut ac10);

    println!(
        "acceptance: {} of 10 criteria passed in {:.1}s",
        10 - failures,
        started.elapsed().as_secs_f64()
    );
    if failures > 0 {
        std::process::exit(1);
    }
}
