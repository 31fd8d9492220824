//! Expected false-discovery bounds for stability-based selection.
//!
//! The practitioner bound is `Σ_k q_k² / (|S_k| (1 − 2α))`, where `q_k` is
//! the average normalized similarity gain of the bag estimates over the
//! rank-`k` stratum of a minimal covering set. The oracle bound needs the
//! truth and is only usable in simulation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::families::{MinimalCoveringSet, MinimalSetFamily, StratumCount, Tally};
use crate::poset::GradedPoset;

/// Which stratum sizes the bound divides by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CountBasis {
    /// Distinct covering pairs as enumerated.
    #[default]
    Enumerated,
    /// Published counting formulas, with `q_k` scaled by how often the
    /// published construction lists each pair.
    Formula,
}

impl std::str::FromStr for CountBasis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "enumerated" => Ok(CountBasis::Enumerated),
            "formula" => Ok(CountBasis::Formula),
            other => Err(Error::Parse(format!("unknown count basis {other:?}"))),
        }
    }
}

/// One stratum's contribution to the bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StratumBound {
    pub rank: usize,
    pub q: f64,
    pub count_enumerated: u128,
    pub count_formula: Option<u128>,
    pub term: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FdBoundReport {
    pub alpha: f64,
    pub basis: CountBasis,
    pub strata: Vec<StratumBound>,
    pub bound: f64,
}

/// `q_k` indexed by `k` (entry 0 unused), as exact tallies.
pub fn estimate_q_tallies<P: MinimalSetFamily>(poset: &P, estimates: &[P::Elem]) -> Vec<Tally> {
    let mut acc: Vec<Tally> = Vec::new();
    for z in estimates {
        let t = poset.stratum_tallies(z);
        if acc.len() < t.len() {
            acc.resize(t.len(), Tally::default());
        }
        for (a, b) in acc.iter_mut().zip(&t) {
            a.merge(b);
        }
    }
    acc
}

fn finish(tallies: &[Tally], b: usize) -> Vec<f64> {
    tallies
        .iter()
        .map(|t| if b == 0 { 0.0 } else { t.value() / b as f64 })
        .collect()
}

/// `q_k = (1/B) Σ_ℓ Σ_{(u,v) ∈ S_k} [ρ(v, x̂ℓ) − ρ(u, x̂ℓ)] / c_L(u, v)`
/// using each family's stratum shortcut.
pub fn estimate_qk<P: MinimalSetFamily>(poset: &P, estimates: &[P::Elem]) -> Vec<f64> {
    finish(&estimate_q_tallies(poset, estimates), estimates.len())
}

/// The same quantity as [`estimate_qk`] summed pair by pair over an explicit set.
pub fn estimate_qk_explicit<P: GradedPoset>(
    poset: &P,
    set: &MinimalCoveringSet<P::Elem>,
    estimates: &[P::Elem],
) -> Vec<f64> {
    let top = set.strata.keys().max().copied().unwrap_or(0);
    let mut acc = vec![Tally::default(); top + 1];
    for z in estimates {
        for (&k, pairs) in &set.strata {
            for pr in pairs {
                let inc = poset.similarity(&pr.upper, z) as i64 - poset.similarity(&pr.lower, z) as i64;
                assert!(inc >= 0, "similarity decreased along a cover");
                acc[k].add(inc as u128, poset.cover_normalizer(&pr.lower, &pr.upper));
            }
        }
    }
    finish(&acc, estimates.len())
}

/// The bound from `q_k` and stratum sizes. Strata with no pairs are skipped.
pub fn refined_bound(q: &[f64], counts: &[StratumCount], alpha: f64, basis: CountBasis) -> Result<FdBoundReport> {
    if !(0.0..0.5).contains(&alpha) {
        return Err(Error::Domain(format!("alpha {alpha} must lie in [0, 1/2)")));
    }
    let denom = 1.0 - 2.0 * alpha;
    let mut strata = Vec::new();
    let mut bound = 0.0;
    for c in counts {
        let raw_q = q.get(c.rank).copied().unwrap_or(0.0);
        if raw_q < 0.0 || raw_q.is_nan() {
            return Err(Error::Domain(format!("q_{} = {raw_q} is negative", c.rank)));
        }
        let (qk, size) = match basis {
            CountBasis::Enumerated => (raw_q, c.enumerated),
            CountBasis::Formula => match c.formula {
                Some(f) => (raw_q * c.formula_multiplicity as f64, f),
                None => (raw_q, c.enumerated),
            },
        };
        if size == 0 {
            continue;
        }
        let term = qk * qk / (size as f64 * denom);
        bound += term;
        strata.push(StratumBound {
            rank: c.rank,
            q: qk,
            count_enumerated: c.enumerated,
            count_formula: c.formula,
            term,
        });
    }
    Ok(FdBoundReport {
        alpha,
        basis,
        strata,
        bound,
    })
}

/// Bag estimates to bound report in one call.
pub fn bound_report<P: MinimalSetFamily>(
    poset: &P,
    estimates: &[P::Elem],
    alpha: f64,
    basis: CountBasis,
) -> Result<FdBoundReport> {
    let q = estimate_qk(poset, estimates);
    refined_bound(&q, &poset.stratum_counts(), alpha, basis)
}

/// The truth-dependent bound `Σ_{(u,v) ∈ S ∩ T_null} E[ρ(v,x̂) − ρ(u,x̂)]² /
/// ((1 − 2α) c_L(u,v)²)`, with the expectation replaced by an average over
/// sampled subsample estimates.
pub fn oracle_bound_thm1<P: GradedPoset>(
    poset: &P,
    set: &MinimalCoveringSet<P::Elem>,
    truth: &P::Elem,
    samples: &[P::Elem],
    alpha: f64,
) -> Result<f64> {
    if !(0.0..0.5).contains(&alpha) {
        return Err(Error::Domain(format!("alpha {alpha} must lie in [0, 1/2)")));
    }
    if samples.is_empty() {
        return Err(Error::Degenerate("no subsample estimates".into()));
    }
    let n = samples.len() as f64;
    let mut total = 0.0;
    for pr in set.pairs() {
        if poset.increment(&pr.lower, &pr.upper, truth) != 0 {
            continue;
        }
        let mean = samples
            .iter()
            .map(|z| poset.increment(&pr.lower, &pr.upper, z) as f64)
            .sum::<f64>()
            / n;
        let c = poset.cover_normalizer(&pr.lower, &pr.upper) as f64;
        total += mean * mean / (c * c);
    }
    Ok(total / (1.0 - 2.0 * alpha))
}

/// Both sides of the estimator conditions behind the bound, for one stratum
/// of minimal covering pairs, measured against a known truth. A pair is null
/// when it adds no similarity to the truth.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionCheck {
    pub rank: usize,
    pub null_pairs: usize,
    pub non_null_pairs: usize,
    /// Mean over null pairs of the averaged normalized increment.
    pub null_mean: f64,
    pub non_null_mean: f64,
    /// Smallest and largest per-pair average among null pairs.
    pub null_min: f64,
    pub null_max: f64,
}

impl AssumptionCheck {
    /// Non-null pairs are selected at least as often as null pairs on average.
    /// Vacuous when either side is empty.
    pub fn dominance_holds(&self) -> bool {
        self.null_pairs == 0 || self.non_null_pairs == 0 || self.non_null_mean >= self.null_mean
    }

    /// Null pairs within the stratum share one selection rate, up to `tol`.
    pub fn exchangeable(&self, tol: f64) -> bool {
        self.null_pairs == 0 || self.null_max - self.null_min <= tol
    }
}

/// Per-stratum null and non-null selection rates of the subsample estimates.
pub fn assumption_checks<P: GradedPoset>(
    poset: &P,
    set: &MinimalCoveringSet<P::Elem>,
    truth: &P::Elem,
    samples: &[P::Elem],
) -> Result<Vec<AssumptionCheck>> {
    if samples.is_empty() {
        return Err(Error::Degenerate("no subsample estimates".into()));
    }
    let n = samples.len() as f64;
    let mut out = Vec::new();
    for (&rank, pairs) in &set.strata {
        let mut null = Vec::new();
        let mut non_null = Vec::new();
        for pr in pairs {
            let c = poset.cover_normalizer(&pr.lower, &pr.upper) as f64;
            let mean = samples
                .iter()
                .map(|z| poset.increment(&pr.lower, &pr.upper, z) as f64)
                .sum::<f64>()
                / (n * c);
            if poset.increment(&pr.lower, &pr.upper, truth) == 0 {
                null.push(mean);
            } else {
                non_null.push(mean);
            }
        }
        let avg = |v: &[f64]| {
            if v.is_empty() {
                0.0
            } else {
                v.iter().sum::<f64>() / v.len() as f64
            }
        };
        out.push(AssumptionCheck {
            rank,
            null_pairs: null.len(),
            non_null_pairs: non_null.len(),
            null_mean: avg(&null),
            non_null_mean: avg(&non_null),
            null_min: if null.is_empty() {
                0.0
            } else {
                null.iter().copied().fold(f64::INFINITY, f64::min)
            },
            null_max: null.iter().copied().fold(0.0, f64::max),
        });
    }
    Ok(out)
}

/// Outcome of scanning a complexity knob against a target bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TunedKnob<K> {
    pub index: usize,
    pub knob: K,
    pub report: FdBoundReport,
    /// Whether the chosen setting actually meets the target.
    pub meets_target: bool,
}

/// Scans `grid` (ordered from most to least conservative), refitting the bag
/// estimates at each setting, and returns the most complex setting whose
/// bound is at most `target`; the most conservative one if none qualifies.
pub fn tune_to_bound<P, K, F>(
    poset: &P,
    grid: &[K],
    target: f64,
    alpha: f64,
    basis: CountBasis,
    mut fit: F,
) -> Result<(TunedKnob<K>, Vec<P::Elem>)>
where
    P: MinimalSetFamily,
    K: Clone,
    F: FnMut(&K) -> Result<Vec<P::Elem>>,
{
    if grid.is_empty() {
        return Err(Error::Domain("empty knob grid".into()));
    }
    let counts = poset.stratum_counts();
    let mut best: Option<(TunedKnob<K>, Vec<P::Elem>)> = None;
    let mut first: Option<(TunedKnob<K>, Vec<P::Elem>)> = None;
    for (index, knob) in grid.iter().enumerate() {
        let estimates = fit(knob)?;
        let report = refined_bound(&estimate_qk(poset, &estimates), &counts, alpha, basis)?;
        let meets = report.bound <= target;
        let tuned = TunedKnob {
            index,
            knob: knob.clone(),
            report,
            meets_target: meets,
        };
        if meets {
            best = Some((tuned, estimates));
        } else if index == 0 {
            first = Some((tuned, estimates));
        }
    }
    Ok(best.or(first).expect("grid is nonempty"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::boolean::{BooleanPoset, VariableSubset};
    use crate::families::total_ranking::TotalRankingPoset;
    use crate::families::MinimalSetFamily;

    fn counts(sizes: &[u128]) -> Vec<StratumCount> {
        sizes
            .iter()
            .enumerate()
            .map(|(i, &n)| StratumCount::exact(i + 1, n))
            .collect()
    }

    #[test]
    fn worked_arithmetic() {
        let r = refined_bound(&[0.0, 2.0, 1.0], &counts(&[2, 1]), 0.3, CountBasis::Enumerated).unwrap();
        assert!((r.bound - 7.5).abs() < 1e-12);
    }

    #[test]
    fn alpha_domain() {
        assert!(refined_bound(&[0.0, 1.0], &counts(&[1]), 0.5, CountBasis::Enumerated).is_err());
        let lo = refined_bound(&[0.0, 1.0], &counts(&[1]), 0.1, CountBasis::Enumerated).unwrap();
        let hi = refined_bound(&[0.0, 1.0], &counts(&[1]), 0.49, CountBasis::Enumerated).unwrap();
        assert!(hi.bound > lo.bound);
    }

    #[test]
    fn reversal_q_values() {
        let t = TotalRankingPoset::identity(3);
        let rev = t.ranking(vec![2, 1, 0]).unwrap();
        assert_eq!(estimate_qk(&t, &[rev]), vec![0.0, 2.0, 1.0]);
    }

    #[test]
    fn least_estimates_give_zero() {
        let t = TotalRankingPoset::identity(4);
        let q = estimate_qk(&t, &[t.least(), t.least()]);
        assert!(q.iter().all(|&x| x == 0.0));
        let r = refined_bound(&q, &t.stratum_counts(), 0.3, CountBasis::Enumerated).unwrap();
        assert_eq!(r.bound, 0.0);
    }

    #[test]
    fn boolean_q_is_average_selection_size() {
        let b = BooleanPoset::new(4);
        let est = vec![
            VariableSubset::new(4, [0, 1]).unwrap(),
            VariableSubset::new(4, [2]).unwrap(),
        ];
        assert_eq!(estimate_qk(&b, &est)[1], 1.5);
    }

    #[test]
    fn oracle_bound_of_perfect_estimator_is_zero() {
        let b = BooleanPoset::new(4);
        let truth = VariableSubset::new(4, [1]).unwrap();
        let set = b.minimal_covering_pairs().unwrap();
        let v = oracle_bound_thm1(&b, &set, &truth, &[truth.clone(), truth.clone()], 0.3).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn assumption_checks_split_null_and_non_null_pairs() {
        let b = BooleanPoset::new(3);
        let truth = VariableSubset::new(3, [0]).unwrap();
        let set = b.minimal_covering_pairs().unwrap();
        let est = vec![
            VariableSubset::new(3, [0, 1]).unwrap(),
            VariableSubset::new(3, [0]).unwrap(),
        ];
        let c = &assumption_checks(&b, &set, &truth, &est).unwrap()[0];
        assert_eq!((c.rank, c.null_pairs, c.non_null_pairs), (1, 2, 1));
        assert_eq!((c.non_null_mean, c.null_mean), (1.0, 0.25));
        assert_eq!((c.null_min, c.null_max), (0.0, 0.5));
        assert!(c.dominance_holds());
        assert!(!c.exchangeable(0.1));
    }

    #[test]
    fn tuning_picks_most_complex_qualifying_setting() {
        let b = BooleanPoset::new(4);
        let grid: Vec<usize> = (0..=4).collect();
        let fit = |k: &usize| Ok(vec![VariableSubset::new(4, 0..*k).unwrap(); 2]);
        // Bound for k selected variables with |S_1| = 4 and α = 0.25 is k²/2.
        let (t, _) = tune_to_bound(&b, &grid, 2.0, 0.25, CountBasis::Enumerated, fit).unwrap();
        assert_eq!((t.knob, t.meets_target), (2, true));
        let (t, _) = tune_to_bound(&b, &grid, f64::INFINITY, 0.25, CountBasis::Enumerated, fit).unwrap();
        assert_eq!(t.knob, 4);
        let (t, _) = tune_to_bound(&b, &grid[1..], 0.1, 0.25, CountBasis::Enumerated, fit).unwrap();
        assert_eq!((t.knob, t.meets_target), (1, false));
        assert!(tune_to_bound(&b, &[] as &[usize], 1.0, 0.25, CountBasis::Enumerated, fit).is_err());
    }
}
