//! Total rankings under the weak (inversion-set) order relative to a null ranking.
//!
//! Item identities are `0..p`. An inversion is a pair that the null ranking
//! places one way and the ranking places the other way; the rank of a
//! ranking is its Kendall tau distance to the null ranking.

use std::sync::Arc;

use crate::error::{mismatch, Error, Result};
use crate::families::bitmatrix::BitMatrix;
use crate::families::{
    collect_strata, guard_explicit, unit_tallies, MinimalCoveringSet, MinimalSetFamily, StratumCount, Tally,
};
use crate::poset::{CoveringPair, GradedPoset, JoinSemilattice};

#[derive(Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
struct NullRanking {
    order: Vec<usize>,
    pos: Vec<usize>,
}

fn positions(order: &[usize]) -> Result<Vec<usize>> {
    let p = order.len();
    let mut pos = vec![usize::MAX; p];
    for (k, &item) in order.iter().enumerate() {
        if item >= p || pos[item] != usize::MAX {
            return Err(Error::InvalidElement(format!(
                "{order:?} is not a permutation of 0..{p}"
            )));
        }
        pos[item] = k;
    }
    Ok(pos)
}

/// A ranking of `p` items together with the null ranking it is measured against.
///
/// The inversion set is indexed by null positions: bit `(a, b)` with `a < b`
/// is set when the item the null ranking puts at position `b` is ranked above
/// the item at position `a`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TotalRanking {
    null: Arc<NullRanking>,
    order: Vec<usize>,
    inv: BitMatrix,
}

impl TotalRanking {
    /// Items from best to worst.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn null_order(&self) -> &[usize] {
        &self.null.order
    }

    pub fn p(&self) -> usize {
        self.order.len()
    }

    /// Whether `(a, b)`, given as null positions with `a < b`, is inverted.
    pub fn inverted(&self, a: usize, b: usize) -> bool {
        self.inv.get(a, b)
    }

    /// Inverted pairs as null positions `(a, b)` with `a < b`.
    pub fn inversions(&self) -> Vec<(usize, usize)> {
        self.inv.ones().collect()
    }

    pub fn kendall_distance(&self) -> usize {
        self.inv.count()
    }

    fn build(null: Arc<NullRanking>, order: Vec<usize>) -> Self {
        let p = order.len();
        let mut inv = BitMatrix::new(p);
        for i in 0..p {
            for j in i + 1..p {
                // order[i] is ranked above order[j].
                let (a, b) = (null.pos[order[i]], null.pos[order[j]]);
                if a > b {
                    inv.set(b, a, true);
                }
            }
        }
        TotalRanking { null, order, inv }
    }
}

/// Checks whether a set of null-position pairs `(a, b)`, `a < b`, is the
/// inversion set of some ranking: both it and its complement must be transitive.
pub fn is_inversion_set(p: usize, pairs: &[(usize, usize)]) -> bool {
    let mut inv = BitMatrix::new(p);
    for &(a, b) in pairs {
        if a >= b || b >= p {
            return false;
        }
        inv.set(a, b, true);
    }
    let mut comp = BitMatrix::new(p);
    for a in 0..p {
        for b in a + 1..p {
            comp.set(a, b, !inv.get(a, b));
        }
    }
    inv.is_transitive() && comp.is_transitive()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TotalRankingPoset {
    null: Arc<NullRanking>,
}

impl TotalRankingPoset {
    /// `null_order` lists items `0..p` from best to worst.
    pub fn new(null_order: Vec<usize>) -> Result<Self> {
        let pos = positions(&null_order)?;
        Ok(TotalRankingPoset {
            null: Arc::new(NullRanking { order: null_order, pos }),
        })
    }

    pub fn identity(p: usize) -> Self {
        Self::new((0..p).collect()).expect("identity is a permutation")
    }

    pub fn p(&self) -> usize {
        self.null.order.len()
    }

    pub fn null_order(&self) -> &[usize] {
        &self.null.order
    }

    /// Null position of an item.
    pub fn null_position(&self, item: usize) -> usize {
        self.null.pos[item]
    }

    /// A ranking given as items from best to worst.
    pub fn ranking(&self, order: Vec<usize>) -> Result<TotalRanking> {
        if order.len() != self.p() {
            return Err(mismatch(format!(
                "ranking of {} items in a poset over {}",
                order.len(),
                self.p()
            )));
        }
        positions(&order)?;
        Ok(TotalRanking::build(self.null.clone(), order))
    }

    /// The ranking whose inversion set is exactly `inv` (null positions, `a < b`).
    fn from_inversions(&self, inv: &BitMatrix) -> Option<TotalRanking> {
        let p = self.p();
        let mut order = vec![usize::MAX; p];
        for a in 0..p {
            let ahead = (0..p)
                .filter(|&b| (b < a && !inv.get(b, a)) || (b > a && inv.get(a, b)))
                .count();
            if order[ahead] != usize::MAX {
                return None;
            }
            order[ahead] = self.null.order[a];
        }
        let r = TotalRanking::build(self.null.clone(), order);
        (r.inv == *inv).then_some(r)
    }

    /// Items swapped by the cover `u → v`, as null positions `(a, b)`, `a < b`.
    fn added(u: &TotalRanking, v: &TotalRanking) -> (usize, usize) {
        let k = (0..u.order.len())
            .find(|&k| u.order[k] != v.order[k])
            .expect("v covers u");
        let (x, y) = (u.null.pos[u.order[k]], u.null.pos[u.order[k + 1]]);
        (x.min(y), x.max(y))
    }
}

impl GradedPoset for TotalRankingPoset {
    type Elem = TotalRanking;

    fn least(&self) -> TotalRanking {
        TotalRanking::build(self.null.clone(), self.null.order.clone())
    }

    fn rank(&self, x: &TotalRanking) -> usize {
        x.inv.count()
    }

    fn precedes(&self, x: &TotalRanking, y: &TotalRanking) -> bool {
        x.inv.is_subset(&y.inv)
    }

    fn similarity(&self, x: &TotalRanking, y: &TotalRanking) -> usize {
        x.inv.and_count(&y.inv)
    }

    fn covers(&self, x: &TotalRanking) -> Vec<TotalRanking> {
        let mut out = Vec::new();
        for k in 0..x.order.len().saturating_sub(1) {
            let (a, b) = (self.null.pos[x.order[k]], self.null.pos[x.order[k + 1]]);
            if a < b {
                let mut order = x.order.clone();
                order.swap(k, k + 1);
                let mut inv = x.inv.clone();
                inv.set(a, b, true);
                out.push(TotalRanking {
                    null: x.null.clone(),
                    order,
                    inv,
                });
            }
        }
        out.sort();
        out
    }

    fn cover_normalizer(&self, _u: &TotalRanking, _v: &TotalRanking) -> usize {
        1
    }

    fn increment(&self, u: &TotalRanking, v: &TotalRanking, z: &TotalRanking) -> usize {
        let (a, b) = Self::added(u, v);
        usize::from(z.inv.get(a, b))
    }

    fn validate(&self, x: &TotalRanking) -> Result<()> {
        if x.null != self.null {
            return Err(mismatch("ranking measured against a different null ranking"));
        }
        Ok(())
    }
}

impl JoinSemilattice for TotalRankingPoset {
    /// The ranking whose inversion set is the transitive closure of the union.
    fn join(&self, a: &TotalRanking, b: &TotalRanking) -> TotalRanking {
        let mut inv = a.inv.clone();
        inv.union_with(&b.inv);
        inv.close_transitively();
        self.from_inversions(&inv)
            .expect("closure of two inversion sets is an inversion set")
    }
}

impl MinimalSetFamily for TotalRankingPoset {
    fn family_name(&self) -> &'static str {
        "total-ranking"
    }

    fn stratum_counts(&self) -> Vec<StratumCount> {
        let p = self.p();
        (1..p).map(|k| StratumCount::exact(k, (p - k) as u128)).collect()
    }

    /// For null positions `a < b` with gap `k`, the upper element moves the
    /// item at `b` to just ahead of the item at `a`; the lower one moves it
    /// to just behind.
    fn minimal_covering_pairs(&self) -> Result<MinimalCoveringSet<TotalRanking>> {
        let counts = self.stratum_counts();
        guard_explicit(&counts)?;
        let p = self.p();
        let null = &self.null.order;
        let mut pairs = Vec::new();
        for k in 1..p {
            for a in 0..p - k {
                let b = a + k;
                let mut upper: Vec<usize> = null.clone();
                let moved = upper.remove(b);
                let mut lower = upper.clone();
                upper.insert(a, moved);
                lower.insert(a + 1, moved);
                pairs.push((
                    k,
                    CoveringPair::new(
                        TotalRanking::build(self.null.clone(), lower),
                        TotalRanking::build(self.null.clone(), upper),
                    ),
                ));
            }
        }
        Ok(collect_strata(self.family_name(), counts, pairs))
    }

    fn stratum_tallies(&self, z: &TotalRanking) -> Vec<Tally> {
        let mut counts = vec![0u128; self.p().max(1)];
        for (a, b) in z.inv.ones() {
            counts[b - a] += 1;
        }
        unit_tallies(&counts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counterexample_pair_shares_one_inversion() {
        // Items a, b, c = 0, 1, 2 with null ranking a > b > c.
        let t = TotalRankingPoset::identity(3);
        let truth = t.ranking(vec![1, 2, 0]).unwrap();
        let estimate = t.ranking(vec![2, 0, 1]).unwrap();
        assert_eq!(truth.inversions(), vec![(0, 1), (0, 2)]);
        assert_eq!(estimate.inversions(), vec![(0, 2), (1, 2)]);
        let rep = crate::poset::discovery_report(&t, &estimate, &truth).unwrap();
        assert_eq!((rep.true_discoveries, rep.false_discoveries), (1, 1));
    }

    #[test]
    fn two_covers_from_null() {
        let t = TotalRankingPoset::identity(3);
        assert_eq!(t.covers(&t.least()).len(), 2);
    }

    #[test]
    fn join_of_the_two_atoms_is_the_reversal() {
        let t = TotalRankingPoset::identity(3);
        let c = t.covers(&t.least());
        let j = t.join(&c[0], &c[1]);
        assert_eq!(j.order(), &[2, 1, 0]);
        assert_eq!(t.rank(&j), 3);
    }

    #[test]
    fn non_identity_null() {
        let t = TotalRankingPoset::new(vec![2, 0, 1]).unwrap();
        assert_eq!(t.rank(&t.least()), 0);
        assert_eq!(t.rank(&t.ranking(vec![1, 0, 2]).unwrap()), 3);
    }

    #[test]
    fn minimal_set_shapes() {
        let t = TotalRankingPoset::identity(4);
        let set = t.minimal_covering_pairs().unwrap();
        let sizes: Vec<usize> = set.strata.values().map(Vec::len).collect();
        assert_eq!(sizes, vec![3, 2, 1]);
        for (&k, pairs) in &set.strata {
            for pr in pairs {
                assert_eq!(t.rank(&pr.upper), k);
                assert!(t.covers(&pr.lower).contains(&pr.upper));
            }
        }
    }

    #[test]
    fn reversal_tallies() {
        let t = TotalRankingPoset::identity(3);
        let rev = t.ranking(vec![2, 1, 0]).unwrap();
        let q: Vec<f64> = t.stratum_tallies(&rev).iter().map(Tally::value).collect();
        assert_eq!(q, vec![0.0, 2.0, 1.0]);
    }

    #[test]
    fn inversion_set_characterization() {
        assert!(is_inversion_set(3, &[(0, 1), (0, 2)]));
        assert!(!is_inversion_set(3, &[(0, 1), (1, 2)]));
        assert!(!is_inversion_set(3, &[(0, 2)]));
    }

    #[test]
    fn foreign_null_rejected() {
        let t = TotalRankingPoset::identity(3);
        let other = TotalRankingPoset::new(vec![1, 0, 2]).unwrap();
        assert!(t.validate(&other.least()).is_err());
    }
}
