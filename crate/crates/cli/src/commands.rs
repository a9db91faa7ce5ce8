use std::io::Write;
use std::path::Path;

use permgap::experiments::{
    figure1_experiment, run_trials, shuffle_fold_study, tail_probability, ExperimentConfig,
    FoldMode, TailEstimate, TrialRun,
};
use permgap::io::{
    eigenvalue_csv, matrix_market_string, parse_index_set, read_matrix_market, read_permutation,
};
use permgap::norms::rho;
use permgap::spectral::{full_spectrum, lambda2_modulus};
use permgap::tangle::{default_h, pair_tangle_free, verify_decomposition, TangleParams};
use permgap::{
    compose, rng, ComposedChain, Error, KrylovOptions, ModelSpec, Permutation, Result,
    SparseBistochastic,
};
use serde::Serialize;

use crate::{
    ChainArgs, Fig1Args, FoldModeName, FoldmixArgs, GenArgs, Lambda2Args, ModelName,
    MonteCarloArgs, NormsArgs, Outcome, SpectrumArgs, TangleArgs,
};

/// Every JSON output: provenance, the arguments, then the result's fields.
#[derive(Serialize)]
struct Envelope<'a, C: Serialize, R: Serialize> {
    version: &'static str,
    command: &'static str,
    config: &'a C,
    #[serde(flatten)]
    result: R,
}

fn write_text(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::io(path, e)),
        None => std::io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .map_err(|e| Error::io("<stdout>", e)),
    }
}

fn emit<C: Serialize, R: Serialize>(
    command: &'static str,
    config: &C,
    result: R,
    out: Option<&Path>,
) -> Result<()> {
    let env = Envelope {
        version: permgap::VERSION,
        command,
        config,
        result,
    };
    let mut text = serde_json::to_string_pretty(&env)?;
    text.push('\n');
    write_text(out, &text)
}

fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn load_q(path: &Path) -> Result<SparseBistochastic> {
    SparseBistochastic::new(read_matrix_market(path)?)
}

fn load_sigma(spec: &str, n: usize, seed: u64) -> Result<Permutation> {
    let sigma = match spec {
        "id" => Permutation::identity(n),
        "random" => Permutation::sample(n, &mut rng::seeded(seed))?,
        path => read_permutation(path)?,
    };
    if sigma.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: sigma.len(),
        });
    }
    Ok(sigma)
}

fn load_chain(a: &ChainArgs) -> Result<ComposedChain> {
    let q = load_q(&a.q)?;
    let sigma = load_sigma(&a.sigma, q.n(), a.seed)?;
    compose(sigma, q)
}

pub(crate) fn gen(a: &GenArgs) -> Result<Outcome> {
    let need = |v: Option<usize>, flag: &str| {
        v.ok_or_else(|| Error::InvalidArgument(format!("--{flag} is required")))
    };
    let spec: ModelSpec = match (&a.spec, a.model) {
        (Some(path), _) => serde_json::from_str(&read_to_string(path)?)?,
        (None, Some(ModelName::Fig1)) => ModelSpec::Figure1 {
            n: need(a.n, "n")?,
            p: a.p
                .ok_or_else(|| Error::InvalidArgument("--p is required".into()))?,
        },
        (None, Some(ModelName::UniformRegular)) => ModelSpec::UniformRegular {
            n: need(a.n, "n")?,
            r: need(a.r, "r")?,
        },
        (None, Some(ModelName::ShuffleFold)) => ModelSpec::ShuffleFold {
            n: need(a.n, "n")?,
            r: need(a.r, "r")?,
            sigma: None,
        },
        (None, None) => {
            return Err(Error::InvalidArgument(
                "--model or --spec is required".into(),
            ))
        }
    };
    let model = spec.build(a.seed)?;
    write_text(a.out.as_deref(), &matrix_market_string(&model.q))?;
    Ok(Outcome::Done)
}

pub(crate) fn norms(a: &NormsArgs) -> Result<Outcome> {
    let q = load_q(&a.q)?;
    emit("norms", a, rho(&q, a.delta)?, a.out.as_deref())?;
    Ok(Outcome::Done)
}

pub(crate) fn spectrum(a: &SpectrumArgs) -> Result<Outcome> {
    let q = load_q(&a.q)?;
    let rep = match &a.sigma {
        Some(s) => {
            let chain = compose(load_sigma(s, q.n(), a.seed)?, q)?;
            full_spectrum(chain.p(), a.dense_cap)?
        }
        None => full_spectrum(&q, a.dense_cap)?,
    };
    let values = rep.eigenvalues.unwrap_or_default();
    write_text(a.out.as_deref(), &eigenvalue_csv(&values))?;
    Ok(Outcome::Done)
}

pub(crate) fn lambda2(a: &Lambda2Args) -> Result<Outcome> {
    let chain = load_chain(&a.chain)?;
    let opts = KrylovOptions {
        subspace: a.subspace,
        restarts: a.restarts,
        tol: a.tol,
        seed: a.chain.seed,
        ..KrylovOptions::default()
    };
    let rep = lambda2_modulus(&chain, a.method, &opts, a.dense_cap)?;
    let converged = rep.converged;
    emit("lambda2", a, rep, a.out.as_deref())?;
    Ok(if converged {
        Outcome::Done
    } else {
        Outcome::NotConverged
    })
}

fn tangle_params(a: &TangleArgs, q: &SparseBistochastic) -> Result<TangleParams> {
    let mut params =
        TangleParams::for_matrix(q, a.delta)?.with_h(a.h.unwrap_or_else(|| default_h(q.n())));
    if let Some(path) = &a.e_file {
        params = params.with_e(parse_index_set(&read_to_string(path)?, q.n())?);
    }
    params.validate(q.n())?;
    Ok(params)
}

pub(crate) fn tangle(a: &TangleArgs) -> Result<Outcome> {
    #[derive(Serialize)]
    struct Out {
        params: TangleParams,
        certificate: permgap::tangle::PairCertificate,
    }
    let chain = load_chain(&a.chain)?;
    let params = tangle_params(a, chain.q())?;
    let certificate = pair_tangle_free(chain.sigma(), chain.q(), a.ell, &params)?;
    emit(
        "tangle",
        a,
        Out {
            params,
            certificate,
        },
        a.out.as_deref(),
    )?;
    Ok(Outcome::Done)
}

pub(crate) fn decompose(a: &TangleArgs) -> Result<Outcome> {
    let chain = load_chain(&a.chain)?;
    let params = tangle_params(a, chain.q())?;
    let rep = verify_decomposition(chain.sigma(), chain.q(), a.ell, &params)?;
    emit("decompose", a, rep, a.out.as_deref())?;
    Ok(Outcome::Done)
}

pub(crate) fn montecarlo(a: &MonteCarloArgs) -> Result<Outcome> {
    #[derive(Serialize)]
    struct Out {
        #[serde(flatten)]
        run: TrialRun,
        /// `P(ratio >= 1 + epsilon)`; absent when epsilon is undefined.
        tail: Option<TailEstimate>,
    }
    let config: ExperimentConfig = serde_json::from_str(&read_to_string(&a.config)?)?;
    let run = run_trials(&config)?;
    let tail = match run.epsilon {
        Some(eps) => Some(tail_probability(&run.trials, eps, run.n, config.c0)?),
        None => None,
    };
    let converged = run.trials.iter().all(|t| t.converged);
    emit("montecarlo", a, Out { run, tail }, a.out.as_deref())?;
    Ok(if converged {
        Outcome::Done
    } else {
        Outcome::NotConverged
    })
}

pub(crate) fn foldmix(a: &FoldmixArgs) -> Result<Outcome> {
    let mode = match a.mode {
        FoldModeName::Exhaustive => FoldMode::Exhaustive,
        FoldModeName::Sampled => FoldMode::Sampled {
            trials: a.trials,
            seed: a.seed,
        },
    };
    emit(
        "foldmix",
        a,
        shuffle_fold_study(a.n, a.r, mode)?,
        a.out.as_deref(),
    )?;
    Ok(Outcome::Done)
}

pub(crate) fn fig1(a: &Fig1Args) -> Result<Outcome> {
    figure1_experiment(a.n, a.p, a.seed, &a.out)?;
    Ok(Outcome::Done)
}
