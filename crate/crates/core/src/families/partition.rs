//! Set partitions of `{0, …, p−1}` under refinement, in both directions.
//!
//! [`ClusteringPoset`] starts from all singletons and merges blocks;
//! [`ReversePartitionPoset`] starts from a single block and splits them.

use std::sync::OnceLock;

use crate::error::{mismatch, Error, Result};
use crate::families::{
    binomial, collect_strata, guard_explicit, MinimalCoveringSet, MinimalSetFamily, StratumCount, Tally,
};
use crate::poset::{CoveringPair, GradedPoset, JoinSemilattice};

/// A set partition stored as a restricted growth string: element `i` sits in
/// block `labels[i]`, blocks numbered in order of their smallest element.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Partition {
    labels: Vec<u32>,
}

impl Partition {
    /// Canonicalizes an arbitrary block labelling.
    pub fn from_labels<L: Copy + Eq + std::hash::Hash>(labels: &[L]) -> Self {
        let mut seen: std::collections::HashMap<L, u32> = std::collections::HashMap::new();
        let labels = labels
            .iter()
            .map(|l| {
                let next = seen.len() as u32;
                *seen.entry(*l).or_insert(next)
            })
            .collect();
        Partition { labels }
    }

    fn from_raw(labels: Vec<u32>) -> Self {
        let mut map = vec![u32::MAX; labels.len()];
        let mut next = 0;
        let labels = labels
            .into_iter()
            .map(|l| {
                let slot = &mut map[l as usize];
                if *slot == u32::MAX {
                    *slot = next;
                    next += 1;
                }
                *slot
            })
            .collect();
        Partition { labels }
    }

    pub fn from_blocks(p: usize, blocks: &[Vec<usize>]) -> Result<Self> {
        let mut labels = vec![u32::MAX; p];
        for (b, block) in blocks.iter().enumerate() {
            if block.is_empty() {
                return Err(Error::InvalidElement("empty block".into()));
            }
            for &i in block {
                if i >= p || labels[i] != u32::MAX {
                    return Err(Error::InvalidElement(format!("element {i} out of range or repeated")));
                }
                labels[i] = b as u32;
            }
        }
        if labels.contains(&u32::MAX) {
            return Err(Error::InvalidElement("blocks do not cover the ground set".into()));
        }
        Ok(Partition::from_raw(labels))
    }

    pub fn singletons(p: usize) -> Self {
        Partition {
            labels: (0..p as u32).collect(),
        }
    }

    pub fn one_block(p: usize) -> Self {
        Partition { labels: vec![0; p] }
    }

    pub fn p(&self) -> usize {
        self.labels.len()
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i] as usize
    }

    pub fn num_blocks(&self) -> usize {
        self.labels.iter().max().map_or(0, |&m| m as usize + 1)
    }

    /// Blocks in canonical order, each sorted.
    pub fn blocks(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_blocks()];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l as usize].push(i);
        }
        out
    }

    /// True when every block of `self` lies inside a block of `other`.
    pub fn refines(&self, other: &Partition) -> bool {
        let mut image = vec![u32::MAX; self.num_blocks()];
        for (a, b) in self.labels.iter().zip(&other.labels) {
            let slot = &mut image[*a as usize];
            if *slot == u32::MAX {
                *slot = *b;
            } else if *slot != *b {
                return false;
            }
        }
        true
    }

    /// Coarsest common refinement: blocks are nonempty pairwise intersections.
    pub fn common_refinement(&self, other: &Partition) -> Partition {
        let nb = other.num_blocks() as u32;
        Partition::from_raw_pairs(self.labels.iter().zip(&other.labels).map(|(a, b)| a * nb + b))
    }

    fn from_raw_pairs(codes: impl Iterator<Item = u32>) -> Partition {
        let mut seen = std::collections::HashMap::new();
        let labels = codes
            .map(|c| {
                let next = seen.len() as u32;
                *seen.entry(c).or_insert(next)
            })
            .collect();
        Partition { labels }
    }

    /// Number of blocks of the coarsest common refinement.
    pub fn refinement_block_count(&self, other: &Partition) -> usize {
        let nb = other.num_blocks();
        let mut mark = vec![false; self.num_blocks() * nb];
        let mut n = 0;
        for (a, b) in self.labels.iter().zip(&other.labels) {
            let m = &mut mark[*a as usize * nb + *b as usize];
            if !*m {
                *m = true;
                n += 1;
            }
        }
        n
    }

    /// Finest common coarsening: the block-union closure of both partitions.
    pub fn common_coarsening(&self, other: &Partition) -> Partition {
        let p = self.p();
        let mut dsu = Dsu::new(p);
        let mut first_a = vec![usize::MAX; self.num_blocks()];
        let mut first_b = vec![usize::MAX; other.num_blocks()];
        for i in 0..p {
            for (labels, first) in [(&self.labels, &mut first_a), (&other.labels, &mut first_b)] {
                let f = &mut first[labels[i] as usize];
                if *f == usize::MAX {
                    *f = i;
                } else {
                    dsu.union(*f, i);
                }
            }
        }
        Partition::from_labels(&(0..p).map(|i| dsu.find(i)).collect::<Vec<_>>())
    }

    fn merge(&self, a: u32, b: u32) -> Partition {
        Partition::from_raw(self.labels.iter().map(|&l| if l == b { a } else { l }).collect())
    }

    fn block_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.num_blocks()];
        for &l in &self.labels {
            sizes[l as usize] += 1;
        }
        sizes
    }
}

struct Dsu(Vec<usize>);

impl Dsu {
    fn new(n: usize) -> Self {
        Dsu((0..n).collect())
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.0[i] != i {
            self.0[i] = self.0[self.0[i]];
            i = self.0[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

fn check_size(p: usize, x: &Partition) -> Result<()> {
    if x.p() != p {
        return Err(mismatch(format!("partition of {} elements in a poset over {p}", x.p())));
    }
    Ok(())
}

/// The two blocks of `u` (as labels) merged by the cover `u → v`.
fn merged_blocks(u: &Partition, v: &Partition) -> (u32, u32) {
    let mut first = vec![u32::MAX; v.num_blocks()];
    for (a, b) in u.labels.iter().zip(&v.labels) {
        let f = &mut first[*b as usize];
        if *f == u32::MAX {
            *f = *a;
        } else if *f != *a {
            return (*f, *a);
        }
    }
    panic!("v does not merge two blocks of u")
}

/// Clustering: partitions ordered by refinement, all singletons at the bottom.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClusteringPoset {
    p: usize,
}

impl ClusteringPoset {
    pub fn new(p: usize) -> Self {
        ClusteringPoset { p }
    }

    pub fn p(&self) -> usize {
        self.p
    }
}

impl GradedPoset for ClusteringPoset {
    type Elem = Partition;

    fn least(&self) -> Partition {
        Partition::singletons(self.p)
    }

    fn rank(&self, x: &Partition) -> usize {
        self.p - x.num_blocks()
    }

    fn precedes(&self, x: &Partition, y: &Partition) -> bool {
        x.refines(y)
    }

    fn similarity(&self, x: &Partition, y: &Partition) -> usize {
        self.p - x.refinement_block_count(y)
    }

    fn covers(&self, x: &Partition) -> Vec<Partition> {
        let nb = x.num_blocks() as u32;
        let mut out = Vec::new();
        for a in 0..nb {
            for b in a + 1..nb {
                out.push(x.merge(a, b));
            }
        }
        out.sort();
        out
    }

    fn cover_normalizer(&self, u: &Partition, v: &Partition) -> usize {
        let (a, b) = merged_blocks(u, v);
        let sizes = u.block_sizes();
        sizes[a as usize].min(sizes[b as usize])
    }

    /// Number of blocks of `z` that meet both merged blocks.
    fn increment(&self, u: &Partition, v: &Partition, z: &Partition) -> usize {
        let (a, b) = merged_blocks(u, v);
        let mut in_a = vec![false; z.num_blocks()];
        for (l, zl) in u.labels.iter().zip(&z.labels) {
            if *l == a {
                in_a[*zl as usize] = true;
            }
        }
        let mut n = 0;
        for (l, zl) in u.labels.iter().zip(&z.labels) {
            if *l == b && in_a[*zl as usize] {
                in_a[*zl as usize] = false;
                n += 1;
            }
        }
        n
    }

    fn validate(&self, x: &Partition) -> Result<()> {
        check_size(self.p, x)
    }
}

impl JoinSemilattice for ClusteringPoset {
    fn join(&self, a: &Partition, b: &Partition) -> Partition {
        a.common_coarsening(b)
    }
}

impl MinimalSetFamily for ClusteringPoset {
    fn family_name(&self) -> &'static str {
        "clustering"
    }

    /// Stratum `k` holds one pair per subset `A` of size `k+1` and unordered
    /// split of `A` into two nonempty groups: `C(p,k+1)·(2^k − 1)` pairs. The
    /// published formula counts ordered splits, twice as many.
    fn stratum_counts(&self) -> Vec<StratumCount> {
        (1..self.p)
            .map(|k| {
                let sets = binomial(self.p, k + 1);
                StratumCount {
                    rank: k,
                    enumerated: sets * ((1u128 << k) - 1),
                    formula: Some(sets * (1..=k).map(|l| binomial(k + 1, l)).sum::<u128>()),
                    formula_multiplicity: 2,
                }
            })
            .collect()
    }

    fn minimal_covering_pairs(&self) -> Result<MinimalCoveringSet<Partition>> {
        let counts = self.stratum_counts();
        guard_explicit(&counts)?;
        let p = self.p;
        let mut pairs = Vec::new();
        for set in 0u64..(1u64 << p) {
            let m = set.count_ones() as usize;
            if m < 2 {
                continue;
            }
            let members: Vec<usize> = (0..p).filter(|i| set >> i & 1 == 1).collect();
            let mut upper: Vec<u32> = (0..p as u32).collect();
            for &i in &members {
                upper[i] = members[0] as u32;
            }
            let upper = Partition::from_raw(upper);
            // Splits are indexed by which of members[1..] join members[0].
            for mask in 0u64..(1u64 << (m - 1)) - 1 {
                let mut lower: Vec<u32> = (0..p as u32).collect();
                let other = members[1 + (0..m - 1).find(|j| mask >> j & 1 == 0).unwrap()];
                for (j, &i) in members.iter().enumerate() {
                    lower[i] = if j == 0 || mask >> (j - 1) & 1 == 1 {
                        members[0] as u32
                    } else {
                        other as u32
                    };
                }
                pairs.push((m - 1, CoveringPair::new(Partition::from_raw(lower), upper.clone())));
            }
        }
        Ok(collect_strata(self.family_name(), counts, pairs))
    }

    /// For each block `B` of `z` and each stratum, counts ordered group pairs
    /// `(G₁, G₂)` of the given sizes that both meet `B`, grouped by
    /// `min(|G₁|,|G₂|)`, then halves to undo the ordering.
    fn stratum_tallies(&self, z: &Partition) -> Vec<Tally> {
        let p = self.p;
        let mut tallies = vec![Tally::default(); p.max(1)];
        for b in z.block_sizes() {
            if b < 2 {
                continue;
            }
            let rest = p - b;
            for m in 2..=p {
                for a in 1..m {
                    let c = m - a;
                    let mut ordered: u128 = 0;
                    for i in 1..=a.min(b) {
                        for j in 1..=c.min(b - i) {
                            let outside_a = a - i;
                            let outside_c = c - j;
                            if outside_a + outside_c > rest {
                                continue;
                            }
                            ordered += binomial(b, i)
                                * binomial(b - i, j)
                                * binomial(rest, outside_a)
                                * binomial(rest - outside_a, outside_c);
                        }
                    }
                    tallies[m - 1].add(ordered, a.min(c));
                }
            }
        }
        for t in tallies.iter_mut() {
            let halved: Vec<(usize, u128)> = t.0.iter().map(|(&d, &n)| (d, n / 2)).collect();
            *t = Tally::default();
            for (d, n) in halved {
                t.add(n, d);
            }
        }
        tallies
    }
}

/// Default cap on the size of a block that may be split.
pub const DEFAULT_BLOCK_CAP: usize = 12;

/// Multisample testing: partitions ordered by reverse refinement, the single
/// block at the bottom.
#[derive(Debug)]
pub struct ReversePartitionPoset {
    p: usize,
    minimal: OnceLock<Result<MinimalCoveringSet<Partition>>>,
}

impl ReversePartitionPoset {
    /// Fails when `p` exceeds the split-enumeration cap.
    pub fn new(p: usize) -> Result<Self> {
        Self::with_block_cap(p, DEFAULT_BLOCK_CAP)
    }

    pub fn with_block_cap(p: usize, cap: usize) -> Result<Self> {
        if p > cap {
            return Err(Error::TooLarge {
                what: format!("block splits over {p} elements"),
                limit: cap,
            });
        }
        Ok(ReversePartitionPoset {
            p,
            minimal: OnceLock::new(),
        })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    fn minimal(&self) -> &Result<MinimalCoveringSet<Partition>> {
        self.minimal.get_or_init(|| {
            let universe = crate::oracle::enumerate_partitions(self.p)?;
            let mut set = crate::oracle::bruteforce_minimal_set(self, &universe);
            set.family = "reverse-partition";
            Ok(set)
        })
    }
}

impl GradedPoset for ReversePartitionPoset {
    type Elem = Partition;

    fn least(&self) -> Partition {
        Partition::one_block(self.p)
    }

    fn rank(&self, x: &Partition) -> usize {
        x.num_blocks().saturating_sub(1)
    }

    fn precedes(&self, x: &Partition, y: &Partition) -> bool {
        y.refines(x)
    }

    fn similarity(&self, x: &Partition, y: &Partition) -> usize {
        x.common_coarsening(y).num_blocks().saturating_sub(1)
    }

    fn covers(&self, x: &Partition) -> Vec<Partition> {
        let mut out = Vec::new();
        let nb = x.num_blocks() as u32;
        for (bi, block) in x.blocks().into_iter().enumerate() {
            let m = block.len();
            // Subsets of block[1..] that stay with block[0]; the rest split off.
            for mask in 0u64..(1u64 << (m - 1)) - 1 {
                let mut labels = x.labels.clone();
                for (j, &i) in block.iter().enumerate().skip(1) {
                    if mask >> (j - 1) & 1 == 0 {
                        labels[i] = nb;
                    }
                }
                debug_assert!(labels.contains(&(bi as u32)));
                out.push(Partition::from_raw(labels));
            }
        }
        out.sort();
        out
    }

    /// Splitting one block adds at most one block to the common coarsening,
    /// so the gain never exceeds one; the brute-force maximum confirms it.
    fn cover_normalizer(&self, _u: &Partition, _v: &Partition) -> usize {
        1
    }

    fn validate(&self, x: &Partition) -> Result<()> {
        check_size(self.p, x)
    }
}

impl JoinSemilattice for ReversePartitionPoset {
    fn join(&self, a: &Partition, b: &Partition) -> Partition {
        a.common_refinement(b)
    }
}

impl MinimalSetFamily for ReversePartitionPoset {
    fn family_name(&self) -> &'static str {
        "reverse-partition"
    }

    /// Built by brute force over all partitions, so only small `p` work;
    /// larger instances report no strata.
    fn stratum_counts(&self) -> Vec<StratumCount> {
        match self.minimal() {
            Ok(set) => set.counts.clone(),
            Err(_) => Vec::new(),
        }
    }

    fn minimal_covering_pairs(&self) -> Result<MinimalCoveringSet<Partition>> {
        self.minimal().clone()
    }

    fn stratum_tallies(&self, z: &Partition) -> Vec<Tally> {
        let Ok(set) = self.minimal() else {
            return Vec::new();
        };
        let top = set.strata.keys().max().copied().unwrap_or(0);
        let mut out = vec![Tally::default(); top + 1];
        for (&k, pairs) in &set.strata {
            for pair in pairs {
                let inc = self.increment(&pair.lower, &pair.upper, z);
                out[k].add(inc as u128, self.cover_normalizer(&pair.lower, &pair.upper));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn part(p: usize, blocks: &[&[usize]]) -> Partition {
        Partition::from_blocks(p, &blocks.iter().map(|b| b.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn canonical_form_ignores_block_order() {
        assert_eq!(part(4, &[&[2, 3], &[0, 1]]), part(4, &[&[1, 0], &[3, 2]]));
        assert_eq!(part(4, &[&[2, 3], &[0, 1]]).blocks(), vec![vec![0, 1], vec![2, 3]]);
    }

    #[test]
    fn crossing_partitions_have_zero_similarity() {
        let c = ClusteringPoset::new(4);
        assert_eq!(
            c.similarity(&part(4, &[&[0, 1], &[2, 3]]), &part(4, &[&[0, 2], &[1, 3]])),
            0
        );
    }

    #[test]
    fn one_cluster_against_partial_truth() {
        let c = ClusteringPoset::new(3);
        let rep = crate::poset::discovery_report(&c, &part(3, &[&[0, 1, 2]]), &part(3, &[&[0, 1], &[2]])).unwrap();
        assert_eq!((rep.rank, rep.false_discoveries), (2, 1));
    }

    #[test]
    fn least_element_has_one_cover_per_pair() {
        assert_eq!(ClusteringPoset::new(3).covers(&Partition::singletons(3)).len(), 3);
    }

    #[test]
    fn merge_normalizer_is_smaller_block() {
        let c = ClusteringPoset::new(5);
        let u = part(5, &[&[0, 1], &[2, 3, 4]]);
        assert_eq!(c.cover_normalizer(&u, &Partition::one_block(5)), 2);
    }

    #[test]
    fn clustering_join_is_block_union_closure() {
        let c = ClusteringPoset::new(4);
        let j = c.join(&part(4, &[&[0, 1], &[2], &[3]]), &part(4, &[&[0], &[1], &[2, 3]]));
        assert_eq!(j, part(4, &[&[0, 1], &[2, 3]]));
    }

    #[test]
    fn reverse_similarity_subtracts_one() {
        let r = ReversePartitionPoset::new(3).unwrap();
        let x = Partition::singletons(3);
        assert_eq!(r.similarity(&x, &x), r.rank(&x));
        assert_eq!(r.rank(&x), 2);
    }

    #[test]
    fn reverse_covers_split_one_block() {
        let r = ReversePartitionPoset::new(3).unwrap();
        let covers = r.covers(&r.least());
        assert_eq!(covers.len(), 3);
        assert!(covers.iter().all(|c| c.num_blocks() == 2));
    }

    #[test]
    fn reverse_cap_is_enforced() {
        assert!(ReversePartitionPoset::with_block_cap(5, 4).is_err());
    }

    #[test]
    fn clustering_counts_differ_from_formula_by_two() {
        let c = ClusteringPoset::new(3).stratum_counts();
        assert_eq!((c[0].enumerated, c[0].formula), (3, Some(6)));
        assert_eq!((c[1].enumerated, c[1].formula), (3, Some(6)));
    }

    #[test]
    fn explicit_clustering_set_matches_counts() {
        let c = ClusteringPoset::new(5);
        let set = c.minimal_covering_pairs().unwrap();
        for count in &set.counts {
            assert_eq!(set.strata[&count.rank].len() as u128, count.enumerated);
        }
    }

    #[test]
    fn clustering_tallies_match_explicit_sum() {
        let c = ClusteringPoset::new(6);
        let set = c.minimal_covering_pairs().unwrap();
        for z in [
            part(6, &[&[0, 1, 2], &[3, 4], &[5]]),
            Partition::one_block(6),
            Partition::singletons(6),
            part(6, &[&[0, 5], &[1, 4], &[2, 3]]),
        ] {
            let fast = c.stratum_tallies(&z);
            for (&k, pairs) in &set.strata {
                let mut slow = Tally::default();
                for pr in pairs {
                    slow.add(
                        c.increment(&pr.lower, &pr.upper, &z) as u128,
                        c.cover_normalizer(&pr.lower, &pr.upper),
                    );
                }
                assert_eq!(fast[k], slow, "stratum {k}");
            }
        }
    }
}
