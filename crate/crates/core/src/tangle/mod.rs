//! Coincidences, tangle-free paths and pairs, and exact path sums.
//!
//! A path of length `k` is `(x_1, y_1, ..., x_k, y_k, x_{k+1})` with
//! `Q[y_t][x_{t+1}] > 0`. Its subpaths are the contiguous windows and the
//! windows that skip one loop `x_i = x_j` (`s <= i < j <= t`). Two coincidences
//! are the same coincidence when they traverse the same set of steps
//! `(x, y, x')`, so that going around one cycle several times, or entering it
//! at another vertex, counts once. Raw window counts are reported alongside.

mod certify;
mod pathsum;

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::norms::{delta_norm, exceptional_budget, gram_neighbourhoods};
use crate::sparse::CsrMatrix;

pub use certify::{pair_tangle_free, PairCertificate};
pub use pathsum::{path_sum_matrices, verify_decomposition, DecompositionReport, PathMatrices};

/// `ceil(20 sqrt(ln n))`.
pub fn default_h(n: usize) -> usize {
    (20.0 * (n.max(1) as f64).ln().sqrt()).ceil().max(1.0) as usize
}

/// Parameters of the tangle definitions other than the path length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TangleParams {
    pub h: usize,
    /// Exceptional set, ascending.
    #[serde(rename = "E")]
    pub e: Vec<usize>,
    pub delta: f64,
}

impl TangleParams {
    /// Default `h` and `E` = the witness of the relaxed norm of `q`.
    pub fn for_matrix(q: &CsrMatrix, delta: f64) -> Result<Self> {
        Ok(Self {
            h: default_h(q.n()),
            e: delta_norm(q, delta)?.witness,
            delta,
        })
    }

    pub fn with_h(mut self, h: usize) -> Self {
        self.h = h;
        self
    }

    pub fn with_e(mut self, mut e: Vec<usize>) -> Self {
        e.sort_unstable();
        e.dedup();
        self.e = e;
        self
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.h == 0 {
            return Err(Error::InvalidArgument("h must be at least 1".into()));
        }
        if let Some(&x) = self.e.iter().find(|&&x| x >= n) {
            return Err(Error::InvalidArgument(format!(
                "E contains {x}, outside 0..{n}"
            )));
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "delta must lie in (0, 1], got {}",
                self.delta
            )));
        }
        let budget = exceptional_budget(n, self.delta);
        if self.e.len() > budget {
            return Err(Error::InvalidArgument(format!(
                "|E| = {} is not below n^(1-delta); at most {budget} allowed",
                self.e.len()
            )));
        }
        Ok(())
    }
}

/// `{x' : ((Q^T Q)^h)[x][x'] > 0}`, ascending: the ball of radius `h` around
/// `x` in the graph joining columns that share a row. `Q^T Q` has a positive
/// diagonal, so walks of length exactly `h` and of length at most `h` reach
/// the same set.
pub fn gram_reach(q: &CsrMatrix, x: usize, h: usize) -> Vec<usize> {
    bfs_ball(&gram_neighbourhoods(q), x, h)
}

fn bfs_ball(adj: &[Vec<usize>], x: usize, h: usize) -> Vec<usize> {
    let mut dist = vec![usize::MAX; adj.len()];
    let mut queue = VecDeque::from([x]);
    dist[x] = 0;
    let mut out = vec![x];
    while let Some(u) = queue.pop_front() {
        if dist[u] == h {
            continue;
        }
        for &v in &adj[u] {
            if dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                out.push(v);
                queue.push_back(v);
            }
        }
    }
    out.sort_unstable();
    out
}

/// `(x_1, y_1, ..., y_k, x_{k+1})`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Path {
    pub xs: Vec<usize>,
    pub ys: Vec<usize>,
}

impl Path {
    /// Checks lengths, ranges and `Q[y_t][x_{t+1}] > 0`.
    pub fn new(xs: Vec<usize>, ys: Vec<usize>, q: &CsrMatrix) -> Result<Self> {
        if xs.len() != ys.len() + 1 {
            return Err(Error::InvalidArgument(format!(
                "a path with {} y's needs {} x's, got {}",
                ys.len(),
                ys.len() + 1,
                xs.len()
            )));
        }
        let n = q.n();
        if let Some(&v) = xs.iter().chain(&ys).find(|&&v| v >= n) {
            return Err(Error::InvalidArgument(format!("index {v} outside 0..{n}")));
        }
        for (t, &y) in ys.iter().enumerate() {
            if q.get(y, xs[t + 1]) <= 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "step {t}: Q[{y}][{}] is zero",
                    xs[t + 1]
                )));
            }
        }
        Ok(Self { xs, ys })
    }

    pub fn len(&self) -> usize {
        self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ys.is_empty()
    }

    /// `[x_1, y_1, x_2, ..., y_k, x_{k+1}]`.
    pub fn alternating(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(2 * self.len() + 1);
        for (x, y) in self.xs.iter().zip(&self.ys) {
            out.push(*x);
            out.push(*y);
        }
        out.push(self.xs[self.len()]);
        out
    }
}

/// Which clause of the tangle-free definition a path violates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Clause {
    TwoCoincidences,
    ECoincidence,
}

/// A tangled path, serialized as alternating x/y indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TangledWitness {
    pub path: Vec<usize>,
    pub clause: Clause,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TangleStatus {
    pub tangle_free: bool,
    /// Distinct coincidences (by step set).
    pub coincidences: usize,
    /// Subpath windows that are coincidences.
    pub coincidence_windows: usize,
    /// Subpath windows that are E-coincidences.
    pub e_coincidences: usize,
}

impl TangleStatus {
    pub fn clause(&self) -> Option<Clause> {
        if self.e_coincidences > 0 {
            Some(Clause::ECoincidence)
        } else if self.coincidences > 1 {
            Some(Clause::TwoCoincidences)
        } else {
            None
        }
    }
}

/// Step of a path, identified by value.
type Step = (usize, usize, usize);

/// Precomputed reach sets and `E` membership for one `(Q, params)`.
pub(crate) struct Checker {
    reach: Vec<Vec<bool>>,
    in_e: Vec<bool>,
}

impl Checker {
    pub(crate) fn new(q: &CsrMatrix, params: &TangleParams) -> Result<Self> {
        let n = q.n();
        params.validate(n)?;
        let adj = gram_neighbourhoods(q);
        let reach = (0..n)
            .map(|x| {
                let mut row = vec![false; n];
                for v in bfs_ball(&adj, x, params.h) {
                    row[v] = true;
                }
                row
            })
            .collect();
        let mut in_e = vec![false; n];
        params.e.iter().for_each(|&x| in_e[x] = true);
        Ok(Self { reach, in_e })
    }

    /// Classifies the subpath with vertex sequence `z` as (coincidence,
    /// E-coincidence).
    fn classify(&self, z: &[usize]) -> (bool, bool) {
        let m = z.len() - 1;
        for a in 0..m {
            if z[a + 1..m].contains(&z[a]) {
                return (false, false);
            }
        }
        let coincidence = self.reach[z[0]][z[m]];
        let e = z[0] == z[m] && self.in_e[z[0]];
        (coincidence, e)
    }

    /// Every subpath of `(xs, ys)` whose last step is `t`, as step-index lists.
    fn subpaths_ending_at(xs: &[usize], t: usize, mut visit: impl FnMut(&[usize])) {
        let mut steps = Vec::with_capacity(t + 1);
        for s in 0..=t {
            steps.clear();
            steps.extend(s..=t);
            visit(&steps);
        }
        // Skip the loop x_i = x_j. With s = i the result equals the contiguous
        // window starting at j, so s < i.
        for j in 1..=t {
            for i in 0..j {
                if xs[i] != xs[j] {
                    continue;
                }
                for s in 0..i {
                    steps.clear();
                    steps.extend(s..i);
                    steps.extend(j..=t);
                    visit(&steps);
                }
            }
        }
    }

    /// Folds the subpaths ending at step `t` into `acc`.
    fn absorb(&self, xs: &[usize], ys: &[usize], t: usize, acc: &mut Tally) {
        let mut z = Vec::with_capacity(t + 2);
        Self::subpaths_ending_at(xs, t, |steps| {
            z.clear();
            z.push(xs[steps[0]]);
            z.extend(steps.iter().map(|&st| xs[st + 1]));
            let (c, e) = self.classify(&z);
            if e {
                acc.e_windows += 1;
            }
            if c {
                acc.windows += 1;
                let mut key: Vec<Step> = steps
                    .iter()
                    .map(|&st| (xs[st], ys[st], xs[st + 1]))
                    .collect();
                key.sort_unstable();
                if !acc.distinct.contains(&key) {
                    acc.distinct.push(key);
                }
            }
        });
    }

    pub(crate) fn status(&self, xs: &[usize], ys: &[usize]) -> TangleStatus {
        let mut acc = Tally::default();
        for t in 0..ys.len() {
            self.absorb(xs, ys, t, &mut acc);
        }
        acc.status()
    }
}

/// Running count of coincidences over the subpaths seen so far.
#[derive(Debug, Clone, Default)]
pub(crate) struct Tally {
    distinct: Vec<Vec<Step>>,
    windows: usize,
    e_windows: usize,
}

impl Tally {
    pub(crate) fn tangled(&self) -> bool {
        self.e_windows > 0 || self.distinct.len() > 1
    }

    fn status(&self) -> TangleStatus {
        TangleStatus {
            tangle_free: !self.tangled(),
            coincidences: self.distinct.len(),
            coincidence_windows: self.windows,
            e_coincidences: self.e_windows,
        }
    }
}

/// `x_1..x_t` pairwise distinct and `x_{t+1}` within Gram distance `h` of `x_1`.
pub fn is_coincidence(path: &Path, q: &CsrMatrix, params: &TangleParams) -> Result<bool> {
    if path.is_empty() {
        return Ok(false);
    }
    Ok(Checker::new(q, params)?.classify(&path.xs).0)
}

/// `x_1..x_t` pairwise distinct and `x_1 = x_{t+1}` in `E`.
pub fn is_e_coincidence(path: &Path, params: &TangleParams) -> bool {
    let k = path.len();
    if k == 0 {
        return false;
    }
    let xs = &path.xs;
    let distinct = (0..k).all(|a| !xs[a + 1..k].contains(&xs[a]));
    distinct && xs[0] == xs[k] && params.e.binary_search(&xs[0]).is_ok()
}

/// Tangle-free iff at most one distinct coincidence and no E-coincidence
/// among the subpaths.
pub fn is_tangle_free_path(
    path: &Path,
    q: &CsrMatrix,
    params: &TangleParams,
) -> Result<TangleStatus> {
    Ok(Checker::new(q, params)?.status(&path.xs, &path.ys))
}
