//! Greedy path selection with stability- and testing-based step criteria.
//!
//! Selection grows a chain of covers from the least element. At each step it
//! scores every cover of the current element with a criterion `Ψ` and takes
//! the smallest score, stopping once the smallest score exceeds `α`.

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::families::total_ranking::TotalRanking;
use crate::poset::{CoveringPair, GradedPoset, JoinSemilattice, PathCertificate};

/// SplitMix64 mixing of a master seed and a stream index.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A deterministic generator for stream `index` of a master seed.
pub fn stream_rng(master: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, index))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SelectionConfig {
    pub alpha: f64,
    /// Number of subsample bags `B` (even).
    pub bags: usize,
    pub seed: u64,
    /// Maximum number of steps; `None` walks until the criterion stops.
    pub step_cap: Option<usize>,
}

impl SelectionConfig {
    pub fn new(alpha: f64, bags: usize, seed: u64) -> Result<Self> {
        let c = SelectionConfig {
            alpha,
            bags,
            seed,
            step_cap: None,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn with_step_cap(mut self, cap: usize) -> Self {
        self.step_cap = Some(cap);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Domain(format!("alpha {} outside [0, 1]", self.alpha)));
        }
        if self.bags == 0 || self.bags % 2 == 1 {
            return Err(Error::Domain(format!("B = {} must be positive and even", self.bags)));
        }
        Ok(())
    }
}

/// `B/2` random splits of `0..n` into two halves; bags `2ℓ` and `2ℓ+1` are
/// complementary. For odd `n` the first bag of each pair gets `⌊n/2⌋` items.
pub fn make_complementary_bags(n: usize, b: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if b == 0 || b % 2 == 1 {
        return Err(Error::Domain(format!("B = {b} must be positive and even")));
    }
    if n < 2 {
        return Err(Error::Degenerate(format!("cannot split {n} observations into halves")));
    }
    let mut out = Vec::with_capacity(b);
    for l in 0..b / 2 {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut stream_rng(seed, l as u64));
        let (mut first, mut second) = (idx[..n / 2].to_vec(), idx[n / 2..].to_vec());
        first.sort_unstable();
        second.sort_unstable();
        out.push(first);
        out.push(second);
    }
    Ok(out)
}

/// A step criterion `Ψ(u, v)` over covering pairs.
pub trait StepCriterion<P: GradedPoset>: Sync {
    fn psi(&self, poset: &P, u: &P::Elem, v: &P::Elem) -> f64;

    /// Whether there is any data behind the criterion.
    fn has_data(&self) -> bool {
        true
    }
}

/// `Ψ_stable(u, v) = 1 − (1/B) Σ_ℓ [ρ(v, x̂ℓ) − ρ(u, x̂ℓ)] / c_L(u, v)`.
pub fn psi_stable<P: GradedPoset>(poset: &P, u: &P::Elem, v: &P::Elem, estimates: &[P::Elem]) -> f64 {
    if estimates.is_empty() {
        return 1.0;
    }
    let c = poset.cover_normalizer(u, v) as f64;
    let support: f64 = estimates.iter().map(|z| poset.increment(u, v, z) as f64 / c).sum();
    let psi = 1.0 - support / estimates.len() as f64;
    assert!(
        (-1e-12..=1.0 + 1e-12).contains(&psi),
        "Ψ_stable = {psi} outside [0, 1]: increment exceeded its normalizer"
    );
    psi.clamp(0.0, 1.0)
}

/// Stability criterion over fixed per-bag estimates.
#[derive(Debug, Clone)]
pub struct StableCriterion<E> {
    pub estimates: Vec<E>,
}

impl<P: GradedPoset> StepCriterion<P> for StableCriterion<P::Elem> {
    fn psi(&self, poset: &P, u: &P::Elem, v: &P::Elem) -> f64 {
        psi_stable(poset, u, v, &self.estimates)
    }

    fn has_data(&self) -> bool {
        !self.estimates.is_empty()
    }
}

/// A p-value for `H₀`: the cover `u → v` adds no discovery.
pub trait PValueProvider<E>: Sync {
    fn p_value(&self, u: &E, v: &E) -> f64;
}

impl<E, F: Fn(&E, &E) -> f64 + Sync> PValueProvider<E> for F {
    fn p_value(&self, u: &E, v: &E) -> f64 {
        self(u, v)
    }
}

/// `Ψ_test(u, v)`: the p-value of the step.
pub struct TestCriterion<Q> {
    pub provider: Q,
}

impl<P: GradedPoset, Q: PValueProvider<P::Elem>> StepCriterion<P> for TestCriterion<Q> {
    fn psi(&self, _poset: &P, u: &P::Elem, v: &P::Elem) -> f64 {
        self.provider.p_value(u, v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    ThresholdExceeded,
    NoCovers,
    StepCap,
    NoData,
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StopReason::ThresholdExceeded => "threshold-exceeded",
            StopReason::NoCovers => "no-covers",
            StopReason::StepCap => "step-cap",
            StopReason::NoData => "no-data",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep<E> {
    pub pair: CoveringPair<E>,
    pub psi: f64,
    pub candidates: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionTrace<E> {
    pub steps: Vec<TraceStep<E>>,
    pub final_element: E,
    pub stop: StopReason,
    /// Smallest `Ψ` among the covers of the final element, when evaluated.
    pub final_min_psi: Option<f64>,
}

impl<E: Clone + Eq + std::fmt::Debug> SelectionTrace<E> {
    pub fn path<P: GradedPoset<Elem = E>>(&self, poset: &P) -> Result<PathCertificate<E>> {
        let mut elements = vec![poset.least()];
        elements.extend(self.steps.iter().map(|s| s.pair.upper.clone()));
        PathCertificate::new(poset, elements)
    }
}

/// Greedy selection: from the least element, repeatedly move to the cover
/// with smallest `Ψ` while that value is at most `α`. Ties go to the cover
/// that comes first in canonical order.
pub fn greedy_select<P, C>(poset: &P, criterion: &C, config: &SelectionConfig) -> Result<SelectionTrace<P::Elem>>
where
    P: GradedPoset,
    C: StepCriterion<P>,
{
    config.validate()?;
    let mut current = poset.least();
    let mut steps = Vec::new();
    if !criterion.has_data() {
        return Ok(SelectionTrace {
            steps,
            final_element: current,
            stop: StopReason::NoData,
            final_min_psi: None,
        });
    }
    loop {
        if config.step_cap.is_some_and(|cap| steps.len() >= cap) {
            return Ok(SelectionTrace {
                steps,
                final_element: current,
                stop: StopReason::StepCap,
                final_min_psi: None,
            });
        }
        let covers = poset.covers(&current);
        if covers.is_empty() {
            return Ok(SelectionTrace {
                steps,
                final_element: current,
                stop: StopReason::NoCovers,
                final_min_psi: None,
            });
        }
        let psis: Vec<f64> = covers.par_iter().map(|v| criterion.psi(poset, &current, v)).collect();
        let mut best = 0;
        for (i, &s) in psis.iter().enumerate() {
            if s < psis[best] {
                best = i;
            }
        }
        let min_psi = psis[best];
        if min_psi > config.alpha || min_psi.is_nan() {
            return Ok(SelectionTrace {
                steps,
                final_element: current,
                stop: StopReason::ThresholdExceeded,
                final_min_psi: Some(min_psi),
            });
        }
        let n = covers.len();
        let next = covers.into_iter().nth(best).expect("index in range");
        steps.push(TraceStep {
            pair: CoveringPair::new(current.clone(), next.clone()),
            psi: min_psi,
            candidates: n,
        });
        current = next;
    }
}

/// Mean, variance and size of one group of observations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GroupStats {
    pub mean: f64,
    pub variance: f64,
    pub count: usize,
}

impl GroupStats {
    /// Sample mean and unbiased variance.
    pub fn from_samples(xs: &[f64]) -> Result<Self> {
        if xs.len() < 2 {
            return Err(Error::Degenerate(format!("group with {} observations", xs.len())));
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let variance = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Ok(GroupStats {
            mean,
            variance,
            count: xs.len(),
        })
    }
}

/// One-sided z-test p-value for "group `j` outranks group `i`":
/// `1 − Φ((m_j − m_i) / √(s_i²/n_i + s_j²/n_j))`.
pub fn gaussian_mean_pvalue(i: &GroupStats, j: &GroupStats) -> Result<f64> {
    if i.count < 2 || j.count < 2 {
        return Err(Error::Degenerate("groups need at least two observations".into()));
    }
    let se2 = i.variance / i.count as f64 + j.variance / j.count as f64;
    if se2 <= 0.0 || !se2.is_finite() {
        return Err(Error::Degenerate("zero pooled variance".into()));
    }
    let z = (j.mean - i.mean) / se2.sqrt();
    Ok(Normal::new(0.0, 1.0).expect("standard normal").sf(z))
}

/// P-values for total-ranking covers from per-item score groups: the cover
/// that lifts item `b` over item `a` gets the one-sided test of "`b`
/// outranks `a`".
#[derive(Debug, Clone, PartialEq)]
pub struct SwapPValues {
    pvalues: Vec<Vec<f64>>,
}

impl SwapPValues {
    pub fn from_groups(groups: &[GroupStats]) -> Result<Self> {
        let p = groups.len();
        let mut pvalues = vec![vec![1.0; p]; p];
        for a in 0..p {
            for b in 0..p {
                if a != b {
                    pvalues[a][b] = gaussian_mean_pvalue(&groups[a], &groups[b])?;
                }
            }
        }
        Ok(SwapPValues { pvalues })
    }

    /// `(a, b)` where `b` sits directly above `a` in `v` but below it in `u`.
    pub fn swapped_pair(u: &TotalRanking, v: &TotalRanking) -> Option<(usize, usize)> {
        let k = u.order().iter().zip(v.order()).position(|(x, y)| x != y)?;
        Some((u.order()[k], v.order()[k]))
    }
}

impl PValueProvider<TotalRanking> for SwapPValues {
    fn p_value(&self, u: &TotalRanking, v: &TotalRanking) -> f64 {
        match SwapPValues::swapped_pair(u, v) {
            Some((a, b)) => self.pvalues[a][b],
            None => 1.0,
        }
    }
}

/// Join of the final elements of several selection runs.
pub fn join_combine<P: JoinSemilattice>(poset: &P, traces: &[SelectionTrace<P::Elem>]) -> Result<P::Elem> {
    let finals: Vec<P::Elem> = traces.iter().map(|t| t.final_element.clone()).collect();
    crate::poset::join_all(poset, &finals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::boolean::{BooleanPoset, VariableSubset};
    use crate::families::partition::{ClusteringPoset, Partition};
    use std::collections::HashMap;

    fn s(m: &[usize]) -> VariableSubset {
        VariableSubset::new(3, m.iter().copied()).unwrap()
    }

    #[test]
    fn bags_are_complementary_halves() {
        let bags = make_complementary_bags(100, 100, 7).unwrap();
        assert_eq!(bags.len(), 100);
        for pair in bags.chunks(2) {
            assert_eq!((pair[0].len(), pair[1].len()), (50, 50));
            let mut all: Vec<usize> = pair.concat();
            all.sort_unstable();
            assert_eq!(all, (0..100).collect::<Vec<_>>());
        }
        assert_eq!(bags, make_complementary_bags(100, 100, 7).unwrap());
        assert_ne!(bags, make_complementary_bags(100, 100, 8).unwrap());
    }

    #[test]
    fn odd_sizes_and_bad_b() {
        let bags = make_complementary_bags(5, 2, 1).unwrap();
        assert_eq!((bags[0].len(), bags[1].len()), (2, 3));
        assert!(make_complementary_bags(4, 3, 1).is_err());
        assert!(make_complementary_bags(1, 2, 1).is_err());
    }

    #[test]
    fn four_items_two_bags() {
        let bags = make_complementary_bags(4, 2, 3).unwrap();
        assert_eq!(bags.len(), 2);
        assert!(bags[0].iter().all(|i| !bags[1].contains(i)));
    }

    struct Table(HashMap<(VariableSubset, VariableSubset), f64>);

    impl StepCriterion<BooleanPoset> for Table {
        fn psi(&self, _p: &BooleanPoset, u: &VariableSubset, v: &VariableSubset) -> f64 {
            *self.0.get(&(u.clone(), v.clone())).unwrap_or(&0.9)
        }
    }

    #[test]
    fn hand_built_table() {
        let b = BooleanPoset::new(3);
        let t = Table(HashMap::from([
            ((s(&[]), s(&[0])), 0.1),
            ((s(&[]), s(&[1])), 0.4),
            ((s(&[0]), s(&[0, 1])), 0.2),
        ]));
        let trace = greedy_select(&b, &t, &SelectionConfig::new(0.3, 2, 0).unwrap()).unwrap();
        assert_eq!(trace.final_element, s(&[0, 1]));
        assert_eq!(trace.steps.len(), 2);
        assert_eq!(trace.stop, StopReason::ThresholdExceeded);
        assert!(trace.path(&b).is_ok());
    }

    #[test]
    fn zero_alpha_stays_at_least() {
        let b = BooleanPoset::new(3);
        let t = Table(HashMap::new());
        let trace = greedy_select(&b, &t, &SelectionConfig::new(0.0, 2, 0).unwrap()).unwrap();
        assert_eq!(trace.final_element, s(&[]));
        assert!(trace.steps.is_empty());
    }

    #[test]
    fn step_cap_and_no_covers() {
        let b = BooleanPoset::new(3);
        let zero = TestCriterion {
            provider: |_: &VariableSubset, _: &VariableSubset| 0.0,
        };
        let cfg = SelectionConfig::new(0.5, 2, 0).unwrap();
        let full = greedy_select(&b, &zero, &cfg).unwrap();
        assert_eq!((full.stop, full.steps.len()), (StopReason::NoCovers, 3));
        let capped = greedy_select(&b, &zero, &cfg.with_step_cap(1)).unwrap();
        assert_eq!((capped.stop, capped.steps.len()), (StopReason::StepCap, 1));
    }

    #[test]
    fn no_bag_estimates_means_no_data() {
        let b = BooleanPoset::new(3);
        let c = StableCriterion { estimates: Vec::new() };
        let trace = greedy_select(&b, &c, &SelectionConfig::new(0.5, 2, 0).unwrap()).unwrap();
        assert_eq!((trace.stop, trace.final_element), (StopReason::NoData, s(&[])));
    }

    #[test]
    fn stable_support_fractions() {
        let b = BooleanPoset::new(3);
        let (u, v) = (s(&[]), s(&[0]));
        assert_eq!(psi_stable(&b, &u, &v, &[s(&[0]), s(&[0, 2])]), 0.0);
        assert_eq!(psi_stable(&b, &u, &v, &[s(&[1]), s(&[2])]), 1.0);
        assert_eq!(psi_stable(&b, &u, &v, &[s(&[0]), s(&[2])]), 0.5);
    }

    #[test]
    fn identical_bags_give_no_false_discoveries() {
        let b = BooleanPoset::new(3);
        let m = s(&[0, 2]);
        let c = StableCriterion {
            estimates: vec![m.clone(); 4],
        };
        let trace = greedy_select(&b, &c, &SelectionConfig::new(0.2, 4, 0).unwrap()).unwrap();
        assert_eq!(trace.final_element, m);
    }

    #[test]
    fn pvalues() {
        let g = GroupStats {
            mean: 1.0,
            variance: 1.0,
            count: 10,
        };
        assert!((gaussian_mean_pvalue(&g, &g).unwrap() - 0.5).abs() < 1e-12);
        let hi = GroupStats {
            mean: 1.0 + 1.645 * (0.2f64).sqrt(),
            ..g
        };
        assert!((gaussian_mean_pvalue(&g, &hi).unwrap() - 0.05).abs() < 1e-3);
        let tiny = GroupStats {
            mean: 0.0,
            variance: 1e-6,
            count: 10,
        };
        let big = GroupStats { mean: 5.0, ..tiny };
        assert!(gaussian_mean_pvalue(&tiny, &big).unwrap() < 1e-12);
        let flat = GroupStats { variance: 0.0, ..g };
        assert!(matches!(gaussian_mean_pvalue(&flat, &flat), Err(Error::Degenerate(_))));
    }

    fn trace_to<E: Clone>(e: E) -> SelectionTrace<E> {
        SelectionTrace {
            steps: Vec::new(),
            final_element: e,
            stop: StopReason::ThresholdExceeded,
            final_min_psi: None,
        }
    }

    #[test]
    fn joins_of_traces() {
        let b = BooleanPoset::new(3);
        let j = join_combine(&b, &[trace_to(s(&[0])), trace_to(s(&[1]))]).unwrap();
        assert_eq!(j, s(&[0, 1]));
        assert_eq!(
            join_combine(&b, &[trace_to(s(&[2])), trace_to(s(&[2]))]).unwrap(),
            s(&[2])
        );
        let c = ClusteringPoset::new(4);
        let x = Partition::from_blocks(4, &[vec![0, 1], vec![2], vec![3]]).unwrap();
        let y = Partition::from_blocks(4, &[vec![0], vec![1], vec![2, 3]]).unwrap();
        let j = join_combine(&c, &[trace_to(x), trace_to(y)]).unwrap();
        assert_eq!(j, Partition::from_blocks(4, &[vec![0, 1], vec![2, 3]]).unwrap());
        assert_eq!(c.rank(&j), 2);
    }
}
