use serde::Serialize;

use super::{Checker, Clause, Path, Tally, TangleParams, TangledWitness};
use crate::error::Result;
use crate::permutation::Permutation;
use crate::sparse::{check_len, CsrMatrix};

/// Outcome of the pair check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairCertificate {
    pub tangle_free: bool,
    pub ell: usize,
    /// A shortest tangled path with `M[x_t][y_t] = 1` throughout.
    pub witness: Option<TangledWitness>,
    /// Occurring paths examined.
    pub paths_visited: u64,
}

/// Whether every occurring path (`y_t = sigma(x_t)`, `Q[y_t][x_{t+1}] > 0`) of
/// length at most `ell` is tangle-free.
///
/// Paths are explored by depth-first search, one length at a time, so a
/// returned witness has minimal length. Extensions of a tangled path are
/// tangled, so a search never continues past one.
pub fn pair_tangle_free(
    sigma: &Permutation,
    q: &CsrMatrix,
    ell: usize,
    params: &TangleParams,
) -> Result<PairCertificate> {
    check_len(q.n(), sigma.len())?;
    let checker = Checker::new(q, params)?;
    let mut search = Search {
        sigma,
        q,
        checker: &checker,
        xs: Vec::with_capacity(ell + 1),
        ys: Vec::with_capacity(ell),
        visited: 0,
    };
    for k in 1..=ell {
        for x in 0..q.n() {
            search.xs.clear();
            search.ys.clear();
            search.xs.push(x);
            if let Some(clause) = search.dfs(k, &Tally::default()) {
                let witness = Path {
                    xs: search.xs.clone(),
                    ys: search.ys.clone(),
                };
                return Ok(PairCertificate {
                    tangle_free: false,
                    ell,
                    witness: Some(TangledWitness {
                        path: witness.alternating(),
                        clause,
                    }),
                    paths_visited: search.visited,
                });
            }
        }
    }
    Ok(PairCertificate {
        tangle_free: true,
        ell,
        witness: None,
        paths_visited: search.visited,
    })
}

struct Search<'a> {
    sigma: &'a Permutation,
    q: &'a CsrMatrix,
    checker: &'a Checker,
    xs: Vec<usize>,
    ys: Vec<usize>,
    visited: u64,
}

impl Search<'_> {
    /// Extends the current tangle-free path up to `depth` steps. On finding a
    /// tangled path, leaves it in `xs`/`ys` and returns the clause.
    fn dfs(&mut self, depth: usize, tally: &Tally) -> Option<Clause> {
        let t = self.ys.len();
        let y = self.sigma.apply(self.xs[t]);
        let (cols, _) = self.q.row(y);
        for &x2 in cols {
            self.xs.push(x2);
            self.ys.push(y);
            self.visited += 1;
            let mut next = tally.clone();
            self.checker.absorb(&self.xs, &self.ys, t, &mut next);
            if next.tangled() {
                let st = next.status();
                return st.clause();
            }
            if t + 1 < depth {
                if let Some(c) = self.dfs(depth, &next) {
                    return Some(c);
                }
            }
            self.xs.pop();
            self.ys.pop();
        }
        None
    }
}
