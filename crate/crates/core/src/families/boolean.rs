//! Variable selection: subsets of `{0, …, p−1}` ordered by inclusion.

use crate::error::{mismatch, Error, Result};
use crate::families::{
    collect_strata, guard_explicit, unit_tallies, MinimalCoveringSet, MinimalSetFamily, StratumCount, Tally,
};
use crate::poset::{CoveringPair, GradedPoset, JoinSemilattice};

/// A set of selected variables out of `p`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VariableSubset {
    p: usize,
    members: Vec<usize>,
}

impl VariableSubset {
    pub fn new(p: usize, members: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut members: Vec<usize> = members.into_iter().collect();
        members.sort_unstable();
        members.dedup();
        if let Some(&m) = members.last() {
            if m >= p {
                return Err(Error::InvalidElement(format!("variable {m} outside 0..{p}")));
            }
        }
        Ok(VariableSubset { p, members })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn contains(&self, i: usize) -> bool {
        self.members.binary_search(&i).is_ok()
    }
}

fn intersection_size(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BooleanPoset {
    p: usize,
}

impl BooleanPoset {
    pub fn new(p: usize) -> Self {
        BooleanPoset { p }
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// The variable added by the cover `u → v`.
    fn added(u: &VariableSubset, v: &VariableSubset) -> usize {
        v.members.iter().copied().find(|i| !u.contains(*i)).expect("v covers u")
    }
}

impl GradedPoset for BooleanPoset {
    type Elem = VariableSubset;

    fn least(&self) -> VariableSubset {
        VariableSubset {
            p: self.p,
            members: Vec::new(),
        }
    }

    fn rank(&self, x: &VariableSubset) -> usize {
        x.members.len()
    }

    fn precedes(&self, x: &VariableSubset, y: &VariableSubset) -> bool {
        x.members.iter().all(|i| y.contains(*i))
    }

    fn similarity(&self, x: &VariableSubset, y: &VariableSubset) -> usize {
        intersection_size(&x.members, &y.members)
    }

    fn covers(&self, x: &VariableSubset) -> Vec<VariableSubset> {
        let mut out: Vec<VariableSubset> = (0..self.p)
            .filter(|i| !x.contains(*i))
            .map(|i| {
                let mut m = x.members.clone();
                m.push(i);
                m.sort_unstable();
                VariableSubset { p: self.p, members: m }
            })
            .collect();
        out.sort();
        out
    }

    fn cover_normalizer(&self, _u: &VariableSubset, _v: &VariableSubset) -> usize {
        1
    }

    fn increment(&self, u: &VariableSubset, v: &VariableSubset, z: &VariableSubset) -> usize {
        usize::from(z.contains(Self::added(u, v)))
    }

    fn validate(&self, x: &VariableSubset) -> Result<()> {
        if x.p != self.p {
            return Err(mismatch(format!(
                "subset of {} variables in a poset of {}",
                x.p, self.p
            )));
        }
        Ok(())
    }
}

impl JoinSemilattice for BooleanPoset {
    fn join(&self, a: &VariableSubset, b: &VariableSubset) -> VariableSubset {
        let mut m = a.members.clone();
        m.extend_from_slice(&b.members);
        m.sort_unstable();
        m.dedup();
        VariableSubset { p: self.p, members: m }
    }
}

impl MinimalSetFamily for BooleanPoset {
    fn family_name(&self) -> &'static str {
        "boolean"
    }

    fn stratum_counts(&self) -> Vec<StratumCount> {
        if self.p == 0 {
            return Vec::new();
        }
        vec![StratumCount::exact(1, self.p as u128)]
    }

    fn minimal_covering_pairs(&self) -> Result<MinimalCoveringSet<VariableSubset>> {
        let counts = self.stratum_counts();
        guard_explicit(&counts)?;
        let pairs = (0..self.p).map(|i| {
            (
                1,
                CoveringPair::new(
                    self.least(),
                    VariableSubset {
                        p: self.p,
                        members: vec![i],
                    },
                ),
            )
        });
        Ok(collect_strata(self.family_name(), counts, pairs))
    }

    fn stratum_tallies(&self, z: &VariableSubset) -> Vec<Tally> {
        unit_tallies(&[0, z.members.len() as u128])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(m: &[usize]) -> VariableSubset {
        VariableSubset::new(3, m.iter().copied()).unwrap()
    }

    #[test]
    fn similarity_is_intersection() {
        let b = BooleanPoset::new(3);
        assert_eq!(b.similarity(&s(&[0, 1]), &s(&[1, 2])), 1);
    }

    #[test]
    fn covers_add_one_variable() {
        let b = BooleanPoset::new(3);
        assert_eq!(b.covers(&s(&[0])), vec![s(&[0, 1]), s(&[0, 2])]);
        assert!(b.covers(&s(&[0, 1, 2])).is_empty());
    }

    #[test]
    fn join_is_union() {
        let b = BooleanPoset::new(3);
        assert_eq!(b.join(&s(&[0]), &s(&[1])), s(&[0, 1]));
    }

    #[test]
    fn out_of_range_member_rejected() {
        assert!(VariableSubset::new(2, [2]).is_err());
    }

    #[test]
    fn increment_shortcut_matches_similarity() {
        let b = BooleanPoset::new(3);
        let (u, v) = (s(&[0]), s(&[0, 2]));
        for z in [s(&[]), s(&[2]), s(&[0, 1]), s(&[0, 1, 2])] {
            assert_eq!(b.increment(&u, &v, &z), b.similarity(&v, &z) - b.similarity(&u, &z));
        }
    }
}
