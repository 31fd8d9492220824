//! Score-based DAG search: greedy hill climbing on a penalized Gaussian
//! likelihood, reported as the CPDAG of the local optimum.

use std::collections::HashMap;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;

use super::FeatureMatrix;
use crate::cpdag::{class_members, dag_to_cpdag, Cpdag, Dag};
use crate::error::{Error, Result};
use crate::selection::stream_rng;

pub const DEFAULT_PENALTY: f64 = 1.0;
/// Largest number of undirected edges for which a local optimum's class is
/// searched for hidden deletions.
pub const MAX_CLASS_SCAN_EDGES: usize = 12;

/// Gaussian linear-SEM score with per-node caching.
pub struct BicScore {
    cov: DMatrix<f64>,
    n: f64,
    penalty: f64,
    cache: HashMap<(usize, u64), f64>,
}

impl BicScore {
    pub fn new(data: &FeatureMatrix, penalty: f64) -> Result<Self> {
        let (n, d) = (data.n(), data.d());
        if d == 0 || n <= d {
            return Err(Error::Domain(format!("need n > d ≥ 1, got n = {n}, d = {d}")));
        }
        if !(penalty >= 0.0 && penalty.is_finite()) {
            return Err(Error::Domain(format!(
                "penalty multiplier must be nonnegative, got {penalty}"
            )));
        }
        let cov = data.covariance();
        if cov.clone().cholesky().is_none() {
            return Err(Error::Degenerate("sample covariance is singular".into()));
        }
        Ok(BicScore {
            cov,
            n: n as f64,
            penalty,
            cache: HashMap::new(),
        })
    }

    /// `−(n/2)·log(σ̂²) − penalty·(log n / 2)·(|parents| + 1)` for node `j`.
    pub fn local(&mut self, j: usize, parents: u64) -> f64 {
        if let Some(&s) = self.cache.get(&(j, parents)) {
            return s;
        }
        let idx: Vec<usize> = (0..self.cov.nrows()).filter(|&i| parents >> i & 1 == 1).collect();
        let mut resid = self.cov[(j, j)];
        if !idx.is_empty() {
            let sxx = DMatrix::from_fn(idx.len(), idx.len(), |a, b| self.cov[(idx[a], idx[b])]);
            let sxy = DMatrix::from_fn(idx.len(), 1, |a, _| self.cov[(idx[a], j)]);
            let chol = sxx
                .cholesky()
                .expect("principal submatrix of a positive definite matrix");
            let beta = chol.solve(&sxy);
            resid -= (sxy.transpose() * beta)[(0, 0)];
        }
        let resid = resid.max(f64::MIN_POSITIVE);
        let k = idx.len() as f64 + 1.0;
        let s = -0.5 * self.n * resid.ln() - self.penalty * 0.5 * self.n.ln() * k;
        self.cache.insert((j, parents), s);
        s
    }

    pub fn total(&mut self, g: &Dag) -> f64 {
        (0..g.p()).map(|j| self.local(j, g.parents(j))).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Move {
    Add(usize, usize),
    Delete(usize, usize),
    Reverse(usize, usize),
}

fn apply(parents: &[u64], m: Move) -> Vec<u64> {
    let mut pa = parents.to_vec();
    match m {
        Move::Add(i, j) => pa[j] |= 1 << i,
        Move::Delete(i, j) => pa[j] &= !(1 << i),
        Move::Reverse(i, j) => {
            pa[j] &= !(1 << i);
            pa[i] |= 1 << j;
        }
    }
    pa
}

fn reaches(parents: &[u64], from: usize, to: usize) -> bool {
    // Walk ancestors of `to` looking for `from`.
    let mut seen = 1u64 << to;
    let mut frontier = parents[to];
    while frontier != 0 {
        if frontier >> from & 1 == 1 {
            return true;
        }
        seen |= frontier;
        let mut next = 0;
        let mut f = frontier;
        while f != 0 {
            let k = f.trailing_zeros() as usize;
            f &= f - 1;
            next |= parents[k];
        }
        frontier = next & !seen;
    }
    false
}

/// Greedy add/delete/reverse search from the empty graph, taking the best
/// strictly improving move each round; at a local optimum, deletions from
/// the other DAGs of the same class are tried before stopping. The seed
/// fixes the order in which node pairs are scanned, which only matters for
/// exact ties.
pub fn bic_hillclimb_dag(data: &FeatureMatrix, penalty: f64, seed: u64) -> Result<Dag> {
    let p = data.d();
    if p > 64 {
        return Err(Error::TooLarge {
            what: format!("{p} variables"),
            limit: 64,
        });
    }
    let mut score = BicScore::new(data, penalty)?;
    let mut pairs: Vec<(usize, usize)> = (0..p)
        .flat_map(|i| (0..p).map(move |j| (i, j)))
        .filter(|(i, j)| i != j)
        .collect();
    pairs.shuffle(&mut stream_rng(seed, 0x4843));
    let mut parents = vec![0u64; p];
    loop {
        let mut best: Option<(f64, Move)> = None;
        for &(i, j) in &pairs {
            let has = parents[j] >> i & 1 == 1;
            let rev = parents[i] >> j & 1 == 1;
            let candidates: &[Move] = if has {
                &[Move::Delete(i, j), Move::Reverse(i, j)]
            } else if !rev {
                &[Move::Add(i, j)]
            } else {
                &[]
            };
            for &m in candidates {
                let ok = match m {
                    Move::Add(i, j) => !reaches(&parents, j, i),
                    Move::Delete(..) => true,
                    Move::Reverse(i, j) => !reaches(&apply(&parents, Move::Delete(i, j)), i, j),
                };
                if !ok {
                    continue;
                }
                let after = apply(&parents, m);
                let gain: f64 = [i, j]
                    .iter()
                    .map(|&k| score.local(k, after[k]) - score.local(k, parents[k]))
                    .sum();
                if gain > 1e-9 && best.is_none_or(|(g, _)| gain > g) {
                    best = Some((gain, m));
                }
            }
        }
        match best {
            Some((_, m)) => parents = apply(&parents, m),
            None => match improving_deletion_in_class(&mut score, &parents)? {
                Some(next) => parents = next,
                None => break,
            },
        }
    }
    Ok(Dag::from_parents(parents))
}

/// All members of an equivalence class score the same, so a local optimum
/// can hide a deletion that only improves from another member (a collider
/// climbed into a triangle, say). Looks for the best such deletion when the
/// class is small enough to list.
fn improving_deletion_in_class(score: &mut BicScore, parents: &[u64]) -> Result<Option<Vec<u64>>> {
    let class = dag_to_cpdag(&Dag::from_parents(parents.to_vec()))?;
    if class.undirected_edges().len() > MAX_CLASS_SCAN_EDGES {
        return Ok(None);
    }
    let mut best: Option<(f64, Vec<u64>)> = None;
    for member in class_members(&class)? {
        for (i, j) in member.edges() {
            let pa = member.parents(j);
            let gain = score.local(j, pa & !(1 << i)) - score.local(j, pa);
            if gain > 1e-9 && best.as_ref().is_none_or(|(g, _)| gain > *g) {
                let mut next: Vec<u64> = (0..member.p()).map(|k| member.parents(k)).collect();
                next[j] &= !(1 << i);
                best = Some((gain, next));
            }
        }
    }
    Ok(best.map(|b| b.1))
}

/// [`bic_hillclimb_dag`] reported as its equivalence class.
pub fn bic_hillclimb_cpdag(data: &FeatureMatrix, penalty: f64, seed: u64) -> Result<Cpdag> {
    dag_to_cpdag(&bic_hillclimb_dag(data, penalty, seed)?)
}

/// Gaussian log-likelihood of `test` under the linear SEM on `dag` whose
/// regressions are fitted on `train`.
pub fn holdout_log_likelihood(train: &FeatureMatrix, test: &FeatureMatrix, dag: &Dag) -> Result<f64> {
    if train.d() != dag.p() || test.d() != dag.p() {
        return Err(crate::error::mismatch(format!(
            "data with {} and {} columns for a graph on {} nodes",
            train.d(),
            test.d(),
            dag.p()
        )));
    }
    let cov = train.covariance();
    let mu = train.means();
    let mut total = 0.0;
    for j in 0..dag.p() {
        let idx: Vec<usize> = (0..dag.p()).filter(|&i| dag.parents(j) >> i & 1 == 1).collect();
        let mut beta = vec![0.0; idx.len()];
        let mut resid = cov[(j, j)];
        if !idx.is_empty() {
            let sxx = DMatrix::from_fn(idx.len(), idx.len(), |a, b| cov[(idx[a], idx[b])]);
            let sxy = DMatrix::from_fn(idx.len(), 1, |a, _| cov[(idx[a], j)]);
            let chol = sxx
                .cholesky()
                .ok_or_else(|| Error::Degenerate("singular training covariance".into()))?;
            let b = chol.solve(&sxy);
            resid -= (sxy.transpose() * &b)[(0, 0)];
            beta = b.iter().copied().collect();
        }
        if !(resid > 0.0) {
            return Err(Error::Degenerate(format!("zero residual variance at node {j}")));
        }
        let intercept = mu[j] - idx.iter().zip(&beta).map(|(&i, b)| b * mu[i]).sum::<f64>();
        for r in 0..test.n() {
            let x = test.row(r);
            let fit = intercept + idx.iter().zip(&beta).map(|(&i, b)| b * x[i]).sum::<f64>();
            total += -0.5 * (2.0 * std::f64::consts::PI * resid).ln() - (x[j] - fit).powi(2) / (2.0 * resid);
        }
    }
    Ok(total)
}
