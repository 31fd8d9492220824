//! Multivariate changepoint times in `{0, …, T}^p`.
//!
//! Smaller times are more complex models: `x ⪯ y` when `x` is coordinatewise
//! no earlier than `y`, so the least element declares no change anywhere.

use crate::error::{mismatch, Error, Result};
use crate::families::{
    collect_strata, guard_explicit, unit_tallies, MinimalCoveringSet, MinimalSetFamily, StratumCount, Tally,
};
use crate::poset::{CoveringPair, GradedPoset, JoinSemilattice};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ChangepointVector {
    horizon: u32,
    times: Vec<u32>,
}

impl ChangepointVector {
    pub fn new(horizon: u32, times: Vec<u32>) -> Result<Self> {
        if let Some(t) = times.iter().find(|&&t| t > horizon) {
            return Err(Error::InvalidElement(format!("time {t} beyond horizon {horizon}")));
        }
        Ok(ChangepointVector { horizon, times })
    }

    pub fn horizon(&self) -> u32 {
        self.horizon
    }

    pub fn times(&self) -> &[u32] {
        &self.times
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChangepointPoset {
    p: usize,
    horizon: u32,
}

impl ChangepointPoset {
    pub fn new(p: usize, horizon: u32) -> Self {
        ChangepointPoset { p, horizon }
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn horizon(&self) -> u32 {
        self.horizon
    }

    fn total(&self) -> usize {
        self.p * self.horizon as usize
    }

    /// Coordinate and new time of the cover `u → v`.
    fn step(u: &ChangepointVector, v: &ChangepointVector) -> (usize, u32) {
        let i = (0..u.times.len())
            .find(|&i| u.times[i] != v.times[i])
            .expect("v covers u");
        (i, v.times[i])
    }
}

impl GradedPoset for ChangepointPoset {
    type Elem = ChangepointVector;

    fn least(&self) -> ChangepointVector {
        ChangepointVector {
            horizon: self.horizon,
            times: vec![self.horizon; self.p],
        }
    }

    fn rank(&self, x: &ChangepointVector) -> usize {
        self.total() - x.times.iter().map(|&t| t as usize).sum::<usize>()
    }

    fn precedes(&self, x: &ChangepointVector, y: &ChangepointVector) -> bool {
        x.times.iter().zip(&y.times).all(|(a, b)| a >= b)
    }

    fn similarity(&self, x: &ChangepointVector, y: &ChangepointVector) -> usize {
        let later: usize = x.times.iter().zip(&y.times).map(|(a, b)| *a.max(b) as usize).sum();
        self.total() - later
    }

    fn covers(&self, x: &ChangepointVector) -> Vec<ChangepointVector> {
        let mut out: Vec<ChangepointVector> = (0..self.p)
            .filter(|&i| x.times[i] > 0)
            .map(|i| {
                let mut times = x.times.clone();
                times[i] -= 1;
                ChangepointVector {
                    horizon: self.horizon,
                    times,
                }
            })
            .collect();
        out.sort();
        out
    }

    fn cover_normalizer(&self, _u: &ChangepointVector, _v: &ChangepointVector) -> usize {
        1
    }

    fn increment(&self, u: &ChangepointVector, v: &ChangepointVector, z: &ChangepointVector) -> usize {
        let (i, t) = Self::step(u, v);
        usize::from(z.times[i] <= t)
    }

    fn validate(&self, x: &ChangepointVector) -> Result<()> {
        if x.times.len() != self.p || x.horizon != self.horizon {
            return Err(mismatch(format!(
                "changepoint vector (p={}, T={}) in poset (p={}, T={})",
                x.times.len(),
                x.horizon,
                self.p,
                self.horizon
            )));
        }
        Ok(())
    }
}

impl JoinSemilattice for ChangepointPoset {
    fn join(&self, a: &ChangepointVector, b: &ChangepointVector) -> ChangepointVector {
        ChangepointVector {
            horizon: self.horizon,
            times: a.times.iter().zip(&b.times).map(|(x, y)| *x.min(y)).collect(),
        }
    }
}

impl MinimalSetFamily for ChangepointPoset {
    fn family_name(&self) -> &'static str {
        "changepoint"
    }

    /// Decrementing coordinate `i` to time `t` is matched by the pair that
    /// does only that, so stratum `k = T − t` holds one pair per coordinate.
    fn stratum_counts(&self) -> Vec<StratumCount> {
        (1..=self.horizon as usize)
            .map(|k| StratumCount {
                rank: k,
                enumerated: self.p as u128,
                formula: None,
                formula_multiplicity: 1,
            })
            .collect()
    }

    fn minimal_covering_pairs(&self) -> Result<MinimalCoveringSet<ChangepointVector>> {
        let counts = self.stratum_counts();
        guard_explicit(&counts)?;
        let mut pairs = Vec::new();
        for k in 1..=self.horizon {
            for i in 0..self.p {
                let mut lower = self.least();
                lower.times[i] = self.horizon - k + 1;
                let mut upper = lower.clone();
                upper.times[i] -= 1;
                pairs.push((k as usize, CoveringPair::new(lower, upper)));
            }
        }
        Ok(collect_strata(self.family_name(), counts, pairs))
    }

    fn stratum_tallies(&self, z: &ChangepointVector) -> Vec<Tally> {
        let h = self.horizon as usize;
        let mut counts = vec![0u128; h + 1];
        for &t in &z.times {
            // Stratum k moves a coordinate to time T − k; z supports it when z_i ≤ T − k.
            for c in counts.iter_mut().take(h - t as usize + 1).skip(1) {
                *c += 1;
            }
        }
        unit_tallies(&counts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cv(t: &[u32]) -> ChangepointVector {
        ChangepointVector::new(3, t.to_vec()).unwrap()
    }

    #[test]
    fn similarity_closed_form() {
        let c = ChangepointPoset::new(2, 3);
        assert_eq!(c.similarity(&cv(&[1, 3]), &cv(&[2, 2])), 1);
    }

    #[test]
    fn least_is_horizon_everywhere() {
        let c = ChangepointPoset::new(2, 3);
        assert_eq!(c.least(), cv(&[3, 3]));
        assert_eq!(c.rank(&cv(&[0, 0])), 6);
    }

    #[test]
    fn join_is_entrywise_min() {
        let c = ChangepointPoset::new(2, 3);
        assert_eq!(c.join(&cv(&[1, 3]), &cv(&[2, 2])), cv(&[1, 2]));
    }

    #[test]
    fn out_of_range_time_rejected() {
        assert!(ChangepointVector::new(3, vec![4]).is_err());
    }

    #[test]
    fn tallies_match_explicit_sum() {
        let c = ChangepointPoset::new(3, 3);
        let set = c.minimal_covering_pairs().unwrap();
        for z in [cv(&[0, 3, 1]), cv(&[3, 3, 3]), cv(&[2, 2, 0])] {
            let fast = c.stratum_tallies(&z);
            for (&k, pairs) in &set.strata {
                let n: usize = pairs.iter().map(|pr| c.increment(&pr.lower, &pr.upper, &z)).sum();
                assert_eq!(fast[k].value(), n as f64);
            }
        }
    }
}
