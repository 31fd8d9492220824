//! Partial rankings: strict partial orders on `p` items ordered by inclusion.

use crate::error::{mismatch, Error, Result};
use crate::families::bitmatrix::BitMatrix;
use crate::families::{
    collect_strata, guard_explicit, unit_tallies, MinimalCoveringSet, MinimalSetFamily, StratumCount, Tally,
};
use crate::poset::{CoveringPair, GradedPoset};

/// A strict partial order; `(a, b)` in the relation means `a` is ranked above `b`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StrictPartialOrder {
    rel: BitMatrix,
}

impl StrictPartialOrder {
    pub fn empty(p: usize) -> Self {
        StrictPartialOrder { rel: BitMatrix::new(p) }
    }

    /// Builds the relation from `(above, below)` pairs, which must already be
    /// irreflexive, asymmetric and transitive.
    pub fn new(p: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut rel = BitMatrix::new(p);
        for (a, b) in pairs {
            if a >= p || b >= p {
                return Err(Error::InvalidElement(format!("pair ({a}, {b}) outside 0..{p}")));
            }
            if a == b {
                return Err(Error::InvalidElement(format!("reflexive pair ({a}, {a})")));
            }
            rel.set(a, b, true);
        }
        for (a, b) in rel.ones() {
            if rel.get(b, a) {
                return Err(Error::InvalidElement(format!("both ({a}, {b}) and ({b}, {a})")));
            }
        }
        if !rel.is_transitive() {
            return Err(Error::InvalidElement("relation is not transitive".into()));
        }
        Ok(StrictPartialOrder { rel })
    }

    pub fn p(&self) -> usize {
        self.rel.n()
    }

    pub fn above(&self, a: usize, b: usize) -> bool {
        self.rel.get(a, b)
    }

    pub fn len(&self) -> usize {
        self.rel.count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Pairs in lexicographic order.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        self.rel.ones().collect()
    }

    /// Whether adding `a` above `b` keeps the relation a strict partial
    /// order without any further pairs.
    pub fn can_add(&self, a: usize, b: usize) -> bool {
        let p = self.p();
        if a == b || self.rel.get(a, b) || self.rel.get(b, a) {
            return false;
        }
        (0..p).all(|c| (!self.rel.get(c, a) || self.rel.get(c, b)) && (!self.rel.get(b, c) || self.rel.get(a, c)))
    }

    pub fn with_pair(&self, a: usize, b: usize) -> Self {
        let mut rel = self.rel.clone();
        rel.set(a, b, true);
        StrictPartialOrder { rel }
    }

    #[cfg(test)]
    pub(crate) fn relation(&self) -> &BitMatrix {
        &self.rel
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PartialRankingPoset {
    p: usize,
}

impl PartialRankingPoset {
    pub fn new(p: usize) -> Self {
        PartialRankingPoset { p }
    }

    pub fn p(&self) -> usize {
        self.p
    }

    fn added(u: &StrictPartialOrder, v: &StrictPartialOrder) -> (usize, usize) {
        v.rel.ones().find(|&(a, b)| !u.rel.get(a, b)).expect("v covers u")
    }
}

impl GradedPoset for PartialRankingPoset {
    type Elem = StrictPartialOrder;

    fn least(&self) -> StrictPartialOrder {
        StrictPartialOrder::empty(self.p)
    }

    fn rank(&self, x: &StrictPartialOrder) -> usize {
        x.len()
    }

    fn precedes(&self, x: &StrictPartialOrder, y: &StrictPartialOrder) -> bool {
        x.rel.is_subset(&y.rel)
    }

    fn similarity(&self, x: &StrictPartialOrder, y: &StrictPartialOrder) -> usize {
        x.rel.and_count(&y.rel)
    }

    fn covers(&self, x: &StrictPartialOrder) -> Vec<StrictPartialOrder> {
        let mut out = Vec::new();
        for a in 0..self.p {
            for b in 0..self.p {
                if x.can_add(a, b) {
                    out.push(x.with_pair(a, b));
                }
            }
        }
        out.sort();
        out
    }

    fn cover_normalizer(&self, _u: &StrictPartialOrder, _v: &StrictPartialOrder) -> usize {
        1
    }

    fn increment(&self, u: &StrictPartialOrder, v: &StrictPartialOrder, z: &StrictPartialOrder) -> usize {
        let (a, b) = Self::added(u, v);
        usize::from(z.rel.get(a, b))
    }

    fn validate(&self, x: &StrictPartialOrder) -> Result<()> {
        if x.p() != self.p {
            return Err(mismatch(format!("order on {} items in a poset over {}", x.p(), self.p)));
        }
        Ok(())
    }
}

impl MinimalSetFamily for PartialRankingPoset {
    fn family_name(&self) -> &'static str {
        "partial-ranking"
    }

    fn stratum_counts(&self) -> Vec<StratumCount> {
        if self.p < 2 {
            return Vec::new();
        }
        vec![StratumCount::exact(1, (self.p * (self.p - 1)) as u128)]
    }

    fn minimal_covering_pairs(&self) -> Result<MinimalCoveringSet<StrictPartialOrder>> {
        let counts = self.stratum_counts();
        guard_explicit(&counts)?;
        let least = self.least();
        let mut pairs = Vec::new();
        for a in 0..self.p {
            for b in 0..self.p {
                if a != b {
                    pairs.push((1, CoveringPair::new(least.clone(), least.with_pair(a, b))));
                }
            }
        }
        Ok(collect_strata(self.family_name(), counts, pairs))
    }

    fn stratum_tallies(&self, z: &StrictPartialOrder) -> Vec<Tally> {
        unit_tallies(&[0, z.len() as u128])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_cycles_and_intransitive_relations() {
        assert!(StrictPartialOrder::new(3, [(0, 1), (1, 0)]).is_err());
        assert!(StrictPartialOrder::new(3, [(0, 1), (1, 2)]).is_err());
        assert!(StrictPartialOrder::new(3, [(0, 1), (1, 2), (0, 2)]).is_ok());
        assert!(StrictPartialOrder::new(3, [(1, 1)]).is_err());
    }

    #[test]
    fn covers_avoid_closure() {
        let pr = PartialRankingPoset::new(3);
        let x = StrictPartialOrder::new(3, [(0, 1)]).unwrap();
        let covers = pr.covers(&x);
        // (1,2) would force (0,2) and (2,0) would force (2,1); neither is a cover.
        assert!(!covers.contains(&x.with_pair(1, 2)));
        assert!(covers.contains(&x.with_pair(0, 2)));
        assert!(covers.iter().all(|c| c.relation().is_transitive()));
    }

    #[test]
    fn similarity_counts_common_pairs() {
        let pr = PartialRankingPoset::new(3);
        let a = StrictPartialOrder::new(3, [(0, 1), (0, 2)]).unwrap();
        let b = StrictPartialOrder::new(3, [(0, 2), (1, 2)]).unwrap();
        assert_eq!(pr.similarity(&a, &b), 1);
    }

    #[test]
    fn minimal_set_size() {
        assert_eq!(PartialRankingPoset::new(3).minimal_covering_pairs().unwrap().len(), 6);
    }
}
