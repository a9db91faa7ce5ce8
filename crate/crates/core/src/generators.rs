//! Constructors for every family of `Q` studied here.
//!
//! All generators return a [`SparseBistochastic`] validated at `1e-12`.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::permutation::Permutation;
use crate::rng;
use crate::sparse::{CsrMatrix, SparseBistochastic};

/// Attempts allowed to [`sample_uniform_regular`] before it gives up.
pub const DEFAULT_REJECTION_BUDGET: usize = 10_000;

/// `Q = p I_n + (1 - p) I_{n/2} (x) D` where `D` swaps the two coordinates:
/// diagonal `p`, and `1 - p` between the partners `2i` and `2i + 1`.
pub fn gen_figure1(n: usize, p: f64) -> Result<SparseBistochastic> {
    if n == 0 || n % 2 != 0 {
        return Err(Error::InvalidArgument(format!(
            "block model needs even n, got {n}"
        )));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "p must lie in (0, 1), got {p}"
        )));
    }
    let rows = (0..n)
        .map(|x| {
            if x % 2 == 0 {
                vec![(x, p), (x + 1, 1.0 - p)]
            } else {
                vec![(x - 1, 1.0 - p), (x, p)]
            }
        })
        .collect();
    SparseBistochastic::new(CsrMatrix::from_rows(n, rows)?)
}

/// Simple random walk on an `r`-regular digraph: `Q[x][y] = 1/r` for every arc.
///
/// `adjacency[x]` lists the out-neighbours of `x`.
pub fn gen_regular_digraph(adjacency: &[Vec<usize>], r: usize) -> Result<SparseBistochastic> {
    if r < 2 {
        return Err(Error::InvalidArgument(format!(
            "degree r must be at least 2, got {r}"
        )));
    }
    let n = adjacency.len();
    let mut indeg = vec![0usize; n];
    let mut rows = Vec::with_capacity(n);
    for (x, out) in adjacency.iter().enumerate() {
        let mut out = out.clone();
        out.sort_unstable();
        out.dedup();
        if out.len() != r {
            return Err(Error::DegreeViolation {
                vertex: x,
                kind: "out",
                found: out.len(),
                expected: r,
            });
        }
        if let Some(&y) = out.iter().find(|&&y| y >= n) {
            return Err(Error::InvalidArgument(format!(
                "arc ({x},{y}) leaves the vertex set"
            )));
        }
        for &y in &out {
            indeg[y] += 1;
        }
        rows.push(out.into_iter().map(|y| (y, 1.0 / r as f64)).collect());
    }
    if let Some((vertex, &found)) = indeg.iter().enumerate().find(|(_, &d)| d != r) {
        return Err(Error::DegreeViolation {
            vertex,
            kind: "in",
            found,
            expected: r,
        });
    }
    SparseBistochastic::new(CsrMatrix::from_rows(n, rows)?)
}

/// Output of [`gen_birkhoff`].
#[derive(Debug, Clone)]
pub struct BirkhoffMix {
    pub q: SparseBistochastic,
    /// True when no two of the permutations agree anywhere, i.e. the
    /// overlap set is empty and every weight lands in its own entry.
    pub disjoint_supports: bool,
}

/// `Q = sum_i p_i M_i`; weights landing on the same entry are added.
pub fn gen_birkhoff(p: &[f64], sigmas: &[Permutation]) -> Result<BirkhoffMix> {
    let r = p.len();
    if r < 2 || sigmas.len() != r {
        return Err(Error::InvalidArgument(format!(
            "need r >= 2 weights and as many permutations, got {} and {}",
            r,
            sigmas.len()
        )));
    }
    check_probability_vector(p)?;
    let n = sigmas[0].len();
    if let Some(s) = sigmas.iter().find(|s| s.len() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: s.len(),
        });
    }
    let triplets = sigmas
        .iter()
        .zip(p)
        .filter(|(_, &w)| w > 0.0)
        .flat_map(|(s, &w)| {
            s.as_slice()
                .iter()
                .enumerate()
                .map(move |(x, &y)| (x, y, w))
        });
    let q = SparseBistochastic::new(CsrMatrix::from_triplets(n, triplets)?)?;
    let disjoint_supports = overlap_set(sigmas).is_empty();
    Ok(BirkhoffMix {
        q,
        disjoint_supports,
    })
}

fn check_probability_vector(p: &[f64]) -> Result<()> {
    if p.iter().any(|&w| !(w.is_finite() && w >= 0.0)) {
        return Err(Error::InvalidArgument(
            "weights must be finite and nonnegative".into(),
        ));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "weights sum to {total}, not 1"
        )));
    }
    Ok(())
}

/// `{x : sigma_i(x) = sigma_j(x) for some i != j}`, ascending.
pub fn overlap_set(sigmas: &[Permutation]) -> Vec<usize> {
    let Some(n) = sigmas.first().map(Permutation::len) else {
        return Vec::new();
    };
    let mut images = Vec::with_capacity(sigmas.len());
    (0..n)
        .filter(|&x| {
            images.clear();
            images.extend(sigmas.iter().map(|s| s.apply(x)));
            images.sort_unstable();
            images.windows(2).any(|w| w[0] == w[1])
        })
        .collect()
}

/// Markov matrix of the shuffle-fold map `f o sigma_bar` on `n` equal cells,
/// with `f(x) = r x mod 1`.
///
/// Cells are `I_i = [i/n, (i+1)/n)` for `i` in `0..n`. `sigma_bar` translates
/// `I_i` onto `I_{sigma(i)}`, then `f` stretches that cell onto the `r`
/// consecutive cells starting at `r * sigma(i)` (mod `n`), each receiving `1/r`.
pub fn gen_shuffle_fold(n: usize, r: usize, sigma: &Permutation) -> Result<SparseBistochastic> {
    if r < 2 || n < r {
        return Err(Error::InvalidArgument(format!(
            "shuffle-fold needs n >= r >= 2, got n={n}, r={r}"
        )));
    }
    if sigma.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: sigma.len(),
        });
    }
    let w = 1.0 / r as f64;
    let rows = (0..n)
        .map(|i| {
            // Image of I_{sigma(i)} under f, in units of 1/n: [a, a + r).
            let a = r * sigma.apply(i);
            let mut cells: Vec<usize> = (a..a + r).map(|j| j % n).collect();
            cells.sort_unstable();
            cells.into_iter().map(|j| (j, w)).collect()
        })
        .collect();
    SparseBistochastic::new(CsrMatrix::from_rows(n, rows)?)
}

/// Superposes `r` uniform permutations, restarting whenever two of them share
/// an arc; the result has exactly `r` entries of `1/r` per row and column.
///
/// The law is uniform over such matrices weighted by their number of ordered
/// decompositions into `r` permutation matrices, not uniform over the
/// matrices themselves. It is invariant under left multiplication by a fixed
/// permutation matrix.
pub fn sample_uniform_regular<R: Rng + ?Sized>(
    n: usize,
    r: usize,
    rng: &mut R,
) -> Result<SparseBistochastic> {
    sample_uniform_regular_with_budget(n, r, rng, DEFAULT_REJECTION_BUDGET)
}

pub fn sample_uniform_regular_with_budget<R: Rng + ?Sized>(
    n: usize,
    r: usize,
    rng: &mut R,
    budget: usize,
) -> Result<SparseBistochastic> {
    if r < 2 || r > n {
        return Err(Error::InvalidArgument(format!(
            "need 2 <= r <= n, got r={r}, n={n}"
        )));
    }
    'attempt: for _ in 0..budget {
        let mut used: Vec<Vec<usize>> = vec![Vec::with_capacity(r); n];
        for _ in 0..r {
            let s = Permutation::sample(n, rng)?;
            for (x, targets) in used.iter_mut().enumerate() {
                let y = s.apply(x);
                if targets.contains(&y) {
                    continue 'attempt;
                }
                targets.push(y);
            }
        }
        let w = 1.0 / r as f64;
        let rows = used
            .into_iter()
            .map(|mut t| {
                t.sort_unstable();
                t.into_iter().map(|y| (y, w)).collect()
            })
            .collect();
        return SparseBistochastic::new(CsrMatrix::from_rows(n, rows)?);
    }
    Err(Error::RejectionBudget(budget))
}

/// Declarative description of a model, as read from JSON.
///
/// The `model` field selects the variant. All indices are 0-based.
///
/// ```json
/// {"model": "fig1", "n": 500, "p": 0.5}
/// {"model": "regular_digraph", "r": 2, "adjacency": [[1, 2], [2, 3], [3, 0], [0, 1]]}
/// {"model": "birkhoff", "p": [0.5, 0.5], "sigmas": [[0, 1], [1, 0]]}
/// {"model": "birkhoff", "p": [0.3333333333333333, 0.3333333333333333, 0.3333333333333334], "n": 1000}
/// {"model": "shuffle_fold", "n": 5, "r": 3, "sigma": [0, 1, 2, 3, 4]}
/// {"model": "uniform_regular", "n": 200, "r": 3}
/// {"model": "custom", "n": 2, "entries": [[0, 1, 1.0], [1, 0, 1.0]]}
/// ```
///
/// `birkhoff` without `sigmas` draws `len(p)` independent uniform
/// permutations of size `n`; `shuffle_fold` without `sigma` uses the
/// identity. Random pieces come from the root stream of the build seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelSpec {
    #[serde(rename = "fig1")]
    Figure1 {
        n: usize,
        p: f64,
    },
    RegularDigraph {
        adjacency: Vec<Vec<usize>>,
        r: usize,
    },
    Birkhoff {
        p: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sigmas: Option<Vec<Vec<usize>>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n: Option<usize>,
    },
    ShuffleFold {
        n: usize,
        r: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sigma: Option<Vec<usize>>,
    },
    UniformRegular {
        n: usize,
        r: usize,
    },
    Custom {
        n: usize,
        entries: Vec<(usize, usize, f64)>,
    },
}

/// A built model: `Q` plus what the experiments need to know about it.
#[derive(Debug, Clone)]
pub struct Model {
    pub spec: ModelSpec,
    pub q: Arc<SparseBistochastic>,
    /// Birkhoff mixtures only: whether the permutations had disjoint supports.
    pub disjoint_supports: Option<bool>,
}

impl ModelSpec {
    pub fn build(&self, seed: u64) -> Result<Model> {
        let mut rng = rng::seeded(seed);
        let mut disjoint_supports = None;
        let q = match self {
            ModelSpec::Figure1 { n, p } => gen_figure1(*n, *p)?,
            ModelSpec::RegularDigraph { adjacency, r } => gen_regular_digraph(adjacency, *r)?,
            ModelSpec::Birkhoff { p, sigmas, n } => {
                let sigmas = match (sigmas, n) {
                    (Some(s), _) => s
                        .iter()
                        .cloned()
                        .map(Permutation::new)
                        .collect::<Result<Vec<_>>>()?,
                    (None, Some(n)) => (0..p.len())
                        .map(|_| Permutation::sample(*n, &mut rng))
                        .collect::<Result<Vec<_>>>()?,
                    (None, None) => {
                        return Err(Error::InvalidArgument(
                            "birkhoff model needs `sigmas` or `n`".into(),
                        ))
                    }
                };
                let mix = gen_birkhoff(p, &sigmas)?;
                disjoint_supports = Some(mix.disjoint_supports);
                mix.q
            }
            ModelSpec::ShuffleFold { n, r, sigma } => {
                let sigma = match sigma {
                    Some(s) => Permutation::new(s.clone())?,
                    None => Permutation::identity(*n),
                };
                gen_shuffle_fold(*n, *r, &sigma)?
            }
            ModelSpec::UniformRegular { n, r } => sample_uniform_regular(*n, *r, &mut rng)?,
            ModelSpec::Custom { n, entries } => {
                SparseBistochastic::new(CsrMatrix::from_triplets(*n, entries.iter().copied())?)?
            }
        };
        Ok(Model {
            spec: self.clone(),
            q: Arc::new(q),
            disjoint_supports,
        })
    }
}
