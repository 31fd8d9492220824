//! Bradley–Terry maximum likelihood and greedy ranking paths from its weights.

use crate::error::{Error, Result};
use crate::families::partial_ranking::StrictPartialOrder;
use crate::families::total_ranking::{TotalRanking, TotalRankingPoset};
use crate::poset::GradedPoset;

pub const DEFAULT_EPSILON: f64 = 0.01;
pub const TOLERANCE: f64 = 1e-8;
pub const MAX_ITERATIONS: usize = 10_000;

/// Head-to-head results; `wins[i][j]` counts games `i` won against `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonData {
    wins: Vec<Vec<f64>>,
}

impl ComparisonData {
    pub fn new(p: usize) -> Self {
        ComparisonData {
            wins: vec![vec![0.0; p]; p],
        }
    }

    pub fn p(&self) -> usize {
        self.wins.len()
    }

    /// Records `wins_ij` wins of `i` over `j` and `wins_ji` the other way.
    pub fn add(&mut self, i: usize, j: usize, wins_ij: f64, wins_ji: f64) -> Result<()> {
        let p = self.p();
        if i >= p || j >= p || i == j {
            return Err(Error::Domain(format!("bad comparison between {i} and {j}")));
        }
        if !(wins_ij >= 0.0 && wins_ji >= 0.0 && wins_ij.is_finite() && wins_ji.is_finite()) {
            return Err(Error::Domain(format!(
                "negative or non-finite counts {wins_ij}, {wins_ji}"
            )));
        }
        self.wins[i][j] += wins_ij;
        self.wins[j][i] += wins_ji;
        Ok(())
    }

    pub fn wins(&self, i: usize, j: usize) -> f64 {
        self.wins[i][j]
    }

    /// Data restricted to the given games, each `(winner, loser)`.
    pub fn from_games(p: usize, games: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut d = ComparisonData::new(p);
        for (w, l) in games {
            d.add(w, l, 1.0, 0.0)?;
        }
        Ok(d)
    }

    pub fn total_games(&self) -> f64 {
        self.wins.iter().flatten().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BtWeights {
    /// Positive, summing to `p`.
    pub weights: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub log_likelihood: f64,
}

fn log_likelihood(wins: &[Vec<f64>], w: &[f64]) -> f64 {
    let p = w.len();
    let mut ll = 0.0;
    for i in 0..p {
        for j in 0..p {
            if wins[i][j] > 0.0 {
                ll += wins[i][j] * (w[i].ln() - (w[i] + w[j]).ln());
            }
        }
    }
    ll
}

/// Minorize–maximize fixed point of the Bradley–Terry likelihood, with
/// `epsilon` pseudo-wins added to every ordered pair.
///
/// # Panics
/// If an iteration lowers the likelihood, which the MM update rules out.
pub fn bradley_terry_mle(data: &ComparisonData, epsilon: f64) -> Result<BtWeights> {
    minorize_maximize(data, epsilon, |_| {})
}

/// [`bradley_terry_mle`] together with the log-likelihood before the first
/// step and after every step.
pub fn bradley_terry_mle_traced(data: &ComparisonData, epsilon: f64) -> Result<(BtWeights, Vec<f64>)> {
    let mut trace = Vec::new();
    let fit = minorize_maximize(data, epsilon, |ll| trace.push(ll))?;
    Ok((fit, trace))
}

fn minorize_maximize(data: &ComparisonData, epsilon: f64, mut on_step: impl FnMut(f64)) -> Result<BtWeights> {
    let p = data.p();
    if p < 2 {
        return Err(Error::Domain(format!("need at least two items, got {p}")));
    }
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::Domain(format!("smoothing must be nonnegative, got {epsilon}")));
    }
    let mut wins = data.wins.clone();
    for (i, row) in wins.iter_mut().enumerate() {
        for (j, x) in row.iter_mut().enumerate() {
            if i != j {
                *x += epsilon;
            }
        }
    }
    let won: Vec<f64> = wins.iter().map(|r| r.iter().sum()).collect();
    if let Some(i) = won.iter().position(|&x| x <= 0.0) {
        return Err(Error::Degenerate(format!(
            "item {i} never wins, so the maximum likelihood weight is zero; use positive smoothing"
        )));
    }
    let games = |i: usize, j: usize| wins[i][j] + wins[j][i];
    let mut w = vec![1.0; p];
    let mut ll = log_likelihood(&wins, &w);
    on_step(ll);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let mut next: Vec<f64> = (0..p)
            .map(|i| {
                let denom: f64 = (0..p).filter(|&j| j != i).map(|j| games(i, j) / (w[i] + w[j])).sum();
                won[i] / denom
            })
            .collect();
        let scale = p as f64 / next.iter().sum::<f64>();
        next.iter_mut().for_each(|x| *x *= scale);
        let next_ll = log_likelihood(&wins, &next);
        assert!(
            next_ll >= ll - 1e-9 * ll.abs().max(1.0),
            "likelihood decreased from {ll} to {next_ll} at iteration {iterations}"
        );
        let change = next.iter().zip(&w).map(|(a, b)| (a - b).abs() / b).fold(0.0, f64::max);
        w = next;
        ll = next_ll;
        on_step(ll);
        if change < TOLERANCE {
            converged = true;
            break;
        }
    }
    Ok(BtWeights {
        weights: w,
        iterations,
        converged,
        log_likelihood: ll,
    })
}

/// Greedy path from the null ranking: repeatedly swap the adjacent pair whose
/// upward-moving item beats the other by the largest weight gap, while that
/// gap exceeds `lambda`. Ties go to the first position.
pub fn total_ranking_path(poset: &TotalRankingPoset, weights: &[f64], lambda: f64) -> Result<TotalRanking> {
    if weights.len() != poset.p() {
        return Err(crate::error::mismatch(format!(
            "{} weights for {} items",
            weights.len(),
            poset.p()
        )));
    }
    let mut order = poset.null_order().to_vec();
    loop {
        let mut best: Option<(usize, f64)> = None;
        for k in 0..order.len().saturating_sub(1) {
            let (hi, lo) = (order[k], order[k + 1]);
            if poset.null_position(hi) > poset.null_position(lo) {
                continue;
            }
            let gap = weights[lo] - weights[hi];
            if gap > lambda && best.is_none_or(|(_, g)| gap > g) {
                best = Some((k, gap));
            }
        }
        match best {
            Some((k, _)) => order.swap(k, k + 1),
            None => return poset.ranking(order),
        }
    }
}

/// Greedy path over strict partial orders: add the pair `a` above `b` with
/// the largest `w[a] − w[b]` among pairs that keep the relation transitive,
/// while that gap exceeds `lambda`. Ties go to the lexicographically first pair.
pub fn partial_ranking_path(weights: &[f64], lambda: f64) -> StrictPartialOrder {
    let p = weights.len();
    let mut rel = StrictPartialOrder::empty(p);
    loop {
        let mut best: Option<(usize, usize, f64)> = None;
        for a in 0..p {
            for b in 0..p {
                let gap = weights[a] - weights[b];
                if gap > lambda && best.is_none_or(|(_, _, g)| gap > g) && rel.can_add(a, b) {
                    best = Some((a, b, gap));
                }
            }
        }
        match best {
            Some((a, b, _)) => rel = rel.with_pair(a, b),
            None => return rel,
        }
    }
}

/// [`total_ranking_path`] on a fitted weight vector.
pub fn ranking_path_estimate(poset: &TotalRankingPoset, fit: &BtWeights, lambda: f64) -> Result<TotalRanking> {
    let r = total_ranking_path(poset, &fit.weights, lambda)?;
    debug_assert!(poset.validate(&r).is_ok());
    Ok(r)
}
