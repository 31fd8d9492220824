//! Concrete discrete model families and their minimal covering sets.

pub(crate) mod bitmatrix;
pub mod boolean;
pub mod changepoint;
pub mod partial_ranking;
pub mod partition;
pub mod total_ranking;

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::poset::{CoveringPair, GradedPoset};

/// Largest minimal covering set that will be materialized explicitly.
pub const MAX_EXPLICIT_PAIRS: usize = 250_000;

/// Size of one rank stratum `S_k` of a minimal covering set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StratumCount {
    pub rank: usize,
    /// Number of distinct covering pairs in the stratum.
    pub enumerated: u128,
    /// Value of the published counting formula, when there is one.
    pub formula: Option<u128>,
    /// How many times the published construction lists each distinct pair.
    /// Used to reproduce the published arithmetic when counting on that basis.
    pub formula_multiplicity: u32,
}

impl StratumCount {
    pub(crate) fn exact(rank: usize, n: u128) -> Self {
        StratumCount {
            rank,
            enumerated: n,
            formula: Some(n),
            formula_multiplicity: 1,
        }
    }
}

/// Rank-stratified minimal covering pairs of a family instance.
#[derive(Debug, Clone)]
pub struct MinimalCoveringSet<E> {
    pub family: &'static str,
    pub strata: BTreeMap<usize, Vec<CoveringPair<E>>>,
    pub counts: Vec<StratumCount>,
}

impl<E> MinimalCoveringSet<E> {
    pub fn len(&self) -> usize {
        self.strata.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn pairs(&self) -> impl Iterator<Item = &CoveringPair<E>> {
        self.strata.values().flatten()
    }
}

/// Families whose minimal covering set is known in closed form.
pub trait MinimalSetFamily: GradedPoset {
    fn family_name(&self) -> &'static str;

    /// Stratum sizes, computed without building the pairs.
    fn stratum_counts(&self) -> Vec<StratumCount>;

    /// Builds the minimal covering set explicitly.
    fn minimal_covering_pairs(&self) -> Result<MinimalCoveringSet<Self::Elem>>;

    /// `Σ_{(u,v) ∈ S_k} [ρ(v,z) − ρ(u,z)] / c_L(u,v)` for every stratum `k`,
    /// indexed by `k` (index 0 is always empty).
    fn stratum_tallies(&self, z: &Self::Elem) -> Vec<Tally>;
}

/// An exact sum of fractions `numerator / normalizer`, kept per normalizer so
/// that different summation orders give bit-identical floating-point values.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Tally(BTreeMap<usize, u128>);

impl Tally {
    pub fn add(&mut self, numerator: u128, normalizer: usize) {
        if numerator > 0 {
            *self.0.entry(normalizer).or_insert(0) += numerator;
        }
    }

    pub fn merge(&mut self, other: &Tally) {
        for (&d, &n) in &other.0 {
            self.add(n, d);
        }
    }

    pub fn value(&self) -> f64 {
        self.0
            .iter()
            .map(|(&d, &n)| n as f64 / d as f64)
            .fold(0.0, |a, x| a + x)
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }
}

/// Tallies from integer increments with unit normalizer.
pub(crate) fn unit_tallies(counts: &[u128]) -> Vec<Tally> {
    counts
        .iter()
        .map(|&n| {
            let mut t = Tally::default();
            t.add(n, 1);
            t
        })
        .collect()
}

pub(crate) fn guard_explicit(counts: &[StratumCount]) -> Result<()> {
    let total: u128 = counts.iter().map(|c| c.enumerated).sum();
    if total > MAX_EXPLICIT_PAIRS as u128 {
        return Err(Error::TooLarge {
            what: format!("minimal covering set with {total} pairs"),
            limit: MAX_EXPLICIT_PAIRS,
        });
    }
    Ok(())
}

pub(crate) fn collect_strata<E: Ord>(
    family: &'static str,
    counts: Vec<StratumCount>,
    pairs: impl IntoIterator<Item = (usize, CoveringPair<E>)>,
) -> MinimalCoveringSet<E> {
    let mut strata: BTreeMap<usize, Vec<CoveringPair<E>>> = BTreeMap::new();
    for (k, pair) in pairs {
        strata.entry(k).or_default().push(pair);
    }
    for v in strata.values_mut() {
        v.sort();
    }
    MinimalCoveringSet { family, strata, counts }
}

pub(crate) fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::binomial;

    #[test]
    fn binomials() {
        assert_eq!(binomial(5, 2), 10);
        assert_eq!(binomial(12, 6), 924);
        assert_eq!(binomial(3, 4), 0);
        assert_eq!(binomial(0, 0), 1);
    }
}
