//! Brute-force ground truth on small instances.
//!
//! Everything here enumerates the whole poset and checks definitions
//! directly, so it is slow by design and guarded by hard caps. The closed
//! forms in the family modules are tested against these functions.

pub mod suites;

use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cpdag::{dag_to_cpdag, Cpdag, CpdagPoset, Dag, RestrictedCpdagPoset, ReversedCpdagPoset};
use crate::error::{Error, Result};
use crate::families::boolean::{BooleanPoset, VariableSubset};
use crate::families::changepoint::{ChangepointPoset, ChangepointVector};
use crate::families::partial_ranking::{PartialRankingPoset, StrictPartialOrder};
use crate::families::partition::{ClusteringPoset, Partition, ReversePartitionPoset};
use crate::families::total_ranking::{TotalRanking, TotalRankingPoset};
use crate::families::{MinimalCoveringSet, StratumCount};
use crate::poset::{discovery_report, CoveringPair, DiscoveryReport, GradedPoset, JoinSemilattice, PathCertificate};

/// Largest `p` for subsets, partitions and permutations.
pub const MAX_SMALL_P: usize = 5;
/// Largest `p` for strict partial orders and CPDAG classes.
pub const MAX_RELATION_P: usize = 4;
/// Largest `p` for raw DAG enumeration.
pub const MAX_DAG_P: usize = 5;
/// Largest `p · (T+1)^p` for changepoint grids.
pub const MAX_CHANGEPOINT_CELLS: usize = 100_000;

fn cap(what: &str, value: usize, limit: usize) -> Result<()> {
    if value > limit {
        return Err(Error::TooLarge {
            what: format!("{what} = {value}"),
            limit,
        });
    }
    Ok(())
}

/// Posets whose elements can be listed exhaustively.
pub trait Enumerable: GradedPoset {
    fn enumerate(&self) -> Result<Vec<Self::Elem>>;
}

/// All restricted growth strings of length `p`.
pub fn enumerate_partitions(p: usize) -> Result<Vec<Partition>> {
    cap("partition size p", p, MAX_SMALL_P)?;
    let mut out = Vec::new();
    let mut labels = vec![0u32; p];
    fn rec(i: usize, max: u32, labels: &mut Vec<u32>, out: &mut Vec<Partition>) {
        if i == labels.len() {
            out.push(Partition::from_labels(labels));
            return;
        }
        for l in 0..=max + 1 {
            labels[i] = l;
            rec(i + 1, max.max(l), labels, out);
        }
    }
    if p == 0 {
        return Ok(vec![Partition::from_labels::<u32>(&[])]);
    }
    labels[0] = 0;
    rec(1, 0, &mut labels, &mut out);
    Ok(out)
}

/// All permutations of `0..p` in lexicographic order.
pub fn enumerate_permutations(p: usize) -> Result<Vec<Vec<usize>>> {
    cap("permutation size p", p, MAX_SMALL_P)?;
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..p).collect();
    loop {
        out.push(cur.clone());
        // Next lexicographic permutation.
        let Some(i) = (1..p).rev().find(|&i| cur[i - 1] < cur[i]) else {
            break;
        };
        let j = (i..p).rev().find(|&j| cur[j] > cur[i - 1]).expect("pivot exists");
        cur.swap(i - 1, j);
        cur[i..].reverse();
    }
    Ok(out)
}

/// All DAGs on `p` labelled nodes: every assignment of none / forward /
/// backward to each node pair, filtered for acyclicity.
pub fn enumerate_dags(p: usize) -> Result<Vec<Dag>> {
    cap("DAG size p", p, MAX_DAG_P)?;
    let pairs: Vec<(usize, usize)> = (0..p).flat_map(|i| (i + 1..p).map(move |j| (i, j))).collect();
    let total = 3usize.pow(pairs.len() as u32);
    let dags: Vec<Dag> = (0..total)
        .into_par_iter()
        .filter_map(|mut code| {
            let mut edges = Vec::new();
            for &(i, j) in &pairs {
                match code % 3 {
                    1 => edges.push((i, j)),
                    2 => edges.push((j, i)),
                    _ => {}
                }
                code /= 3;
            }
            Dag::new(p, &edges).ok()
        })
        .collect();
    Ok(dags)
}

/// DAGs grouped by Markov equivalence, using skeleton and v-structures only
/// (no CPDAG machinery), keyed by the class's CPDAG.
pub fn equivalence_classes(p: usize) -> Result<BTreeMap<Cpdag, Vec<Dag>>> {
    let dags = enumerate_dags(p)?;
    let mut by_key: HashMap<(Vec<u64>, Vec<(usize, usize, usize)>), Vec<Dag>> = HashMap::new();
    for d in dags {
        let skel: Vec<u64> = (0..p)
            .map(|i| {
                (0..p)
                    .filter(|&j| d.has_edge(i, j) || d.has_edge(j, i))
                    .fold(0, |m, j| m | 1 << j)
            })
            .collect();
        let mut vs = Vec::new();
        for c in 0..p {
            for a in 0..p {
                for b in a + 1..p {
                    if d.has_edge(a, c) && d.has_edge(b, c) && skel[a] >> b & 1 == 0 {
                        vs.push((a, b, c));
                    }
                }
            }
        }
        by_key.entry((skel, vs)).or_default().push(d);
    }
    let mut out = BTreeMap::new();
    for (_, mut members) in by_key {
        members.sort();
        let key = dag_to_cpdag(&members[0])?;
        out.insert(key, members);
    }
    Ok(out)
}

/// All CPDAGs on `p` nodes, sorted.
pub fn enumerate_cpdags(p: usize) -> Result<Vec<Cpdag>> {
    cap("CPDAG size p", p, MAX_RELATION_P)?;
    Ok(equivalence_classes(p)?.into_keys().collect())
}

/// Definitional `a ⪯ b`: some DAG of `a`'s class is a subgraph of some DAG
/// of `b`'s class.
pub fn precedes_by_enumeration(class_a: &[Dag], class_b: &[Dag]) -> bool {
    class_a.iter().any(|x| class_b.iter().any(|y| x.is_subgraph_of(y)))
}

/// The subgraph relation between classes closed under transitivity, from
/// DAG enumeration alone. `up[a]` is a bitset over class indices of
/// everything above class `a`, including `a`.
#[derive(Debug, Clone)]
pub struct SubgraphClosure {
    pub classes: Vec<Cpdag>,
    pub members: Vec<Vec<Dag>>,
    up: Vec<Vec<u64>>,
}

impl SubgraphClosure {
    pub fn new(p: usize) -> Result<Self> {
        let grouped = equivalence_classes(p)?;
        let (classes, members): (Vec<Cpdag>, Vec<Vec<Dag>>) = grouped.into_iter().unzip();
        let index: HashMap<&Dag, usize> = members
            .iter()
            .enumerate()
            .flat_map(|(k, ms)| ms.iter().map(move |d| (d, k)))
            .collect();
        // One step: add a single edge to some member.
        let succ: Vec<Vec<usize>> = members
            .iter()
            .map(|ms| {
                let mut next: Vec<usize> = ms
                    .iter()
                    .flat_map(|d| {
                        let edges = d.edges();
                        (0..p)
                            .flat_map(move |i| (0..p).map(move |j| (i, j)))
                            .filter(move |&(i, j)| i != j && !d.has_edge(i, j) && !d.has_edge(j, i))
                            .filter_map(move |(i, j)| {
                                let mut e = edges.clone();
                                e.push((i, j));
                                Dag::new(p, &e).ok()
                            })
                    })
                    .map(|d| index[&d])
                    .collect();
                next.sort_unstable();
                next.dedup();
                next
            })
            .collect();
        let n = classes.len();
        let words = n.div_ceil(64);
        let mut up = vec![vec![0u64; words]; n];
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|&k| std::cmp::Reverse(members[k][0].n_edges()));
        for k in order {
            let mut row = vec![0u64; words];
            row[k / 64] |= 1 << (k % 64);
            for &s in &succ[k] {
                for (w, x) in row.iter_mut().zip(&up[s]) {
                    *w |= x;
                }
            }
            up[k] = row;
        }
        Ok(SubgraphClosure { classes, members, up })
    }

    pub fn precedes(&self, a: usize, b: usize) -> bool {
        self.up[a][b / 64] >> (b % 64) & 1 == 1
    }

    /// Number of classes above `a`, itself included.
    pub fn up_set_size(&self, a: usize) -> usize {
        self.up[a].iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn up_set(&self, a: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.classes.len()).filter(move |&b| self.precedes(a, b))
    }
}

/// d-separation from its definition: every trail between `i` and `j` is
/// blocked by `s`. Exponential; for tiny graphs only.
pub fn d_separated_by_trails(g: &Dag, i: usize, j: usize, s: u64) -> bool {
    let p = g.p();
    let adjacent = |a: usize, b: usize| g.has_edge(a, b) || g.has_edge(b, a);
    let mut descendants = vec![0u64; p];
    for (a, d) in descendants.iter_mut().enumerate() {
        let mut stack = vec![a];
        while let Some(x) = stack.pop() {
            for y in 0..p {
                if g.has_edge(x, y) && *d >> y & 1 == 0 {
                    *d |= 1 << y;
                    stack.push(y);
                }
            }
        }
    }
    fn walk(
        path: &mut Vec<usize>,
        target: usize,
        g: &Dag,
        s: u64,
        descendants: &[u64],
        adjacent: &dyn Fn(usize, usize) -> bool,
    ) -> bool {
        let last = *path.last().expect("nonempty");
        if last == target {
            // Open trail: check every interior node.
            return path.windows(3).all(|w| {
                let (a, m, b) = (w[0], w[1], w[2]);
                let collider = g.has_edge(a, m) && g.has_edge(b, m);
                if collider {
                    s >> m & 1 == 1 || descendants[m] & s != 0
                } else {
                    s >> m & 1 == 0
                }
            });
        }
        for next in 0..g.p() {
            if adjacent(last, next) && !path.contains(&next) {
                path.push(next);
                if walk(path, target, g, s, descendants, adjacent) {
                    return true;
                }
                path.pop();
            }
        }
        false
    }
    !walk(&mut vec![i], j, g, s, &descendants, &adjacent)
}

/// `I(b) ⊆ I(a)` over all single-pair statements `i ⊥ j | S`.
pub fn markov_precedes_by_dseparation(a: &Dag, b: &Dag) -> bool {
    let p = a.p();
    (0..p).all(|i| {
        (i + 1..p).all(|j| {
            let others = ((1u64 << p) - 1) & !(1 << i) & !(1 << j);
            let mut s = others;
            loop {
                if d_separated_by_trails(b, i, j, s) && !d_separated_by_trails(a, i, j, s) {
                    return false;
                }
                if s == 0 {
                    return true;
                }
                s = (s - 1) & others;
            }
        })
    })
}

impl Enumerable for BooleanPoset {
    fn enumerate(&self) -> Result<Vec<VariableSubset>> {
        let p = self.p();
        cap("subset size p", p, MAX_SMALL_P)?;
        (0u32..1 << p)
            .map(|m| VariableSubset::new(p, (0..p).filter(|i| m >> i & 1 == 1)))
            .collect()
    }
}

impl Enumerable for ClusteringPoset {
    fn enumerate(&self) -> Result<Vec<Partition>> {
        cap("partition size p", self.p(), MAX_SMALL_P)?;
        enumerate_partitions(self.p())
    }
}

impl Enumerable for ReversePartitionPoset {
    fn enumerate(&self) -> Result<Vec<Partition>> {
        cap("partition size p", self.p(), MAX_SMALL_P)?;
        enumerate_partitions(self.p())
    }
}

impl Enumerable for ChangepointPoset {
    fn enumerate(&self) -> Result<Vec<ChangepointVector>> {
        let (p, t) = (self.p(), self.horizon() as usize);
        let cells = (t + 1)
            .checked_pow(p as u32)
            .and_then(|c| c.checked_mul(p))
            .unwrap_or(usize::MAX);
        cap("changepoint cells p·(T+1)^p", cells, MAX_CHANGEPOINT_CELLS)?;
        let mut out = Vec::new();
        for mut code in 0..(t + 1).pow(p as u32) {
            let mut times = Vec::with_capacity(p);
            for _ in 0..p {
                times.push((code % (t + 1)) as u32);
                code /= t + 1;
            }
            out.push(ChangepointVector::new(t as u32, times)?);
        }
        Ok(out)
    }
}

impl Enumerable for PartialRankingPoset {
    /// Closure-filtered subsets of the ordered pairs.
    fn enumerate(&self) -> Result<Vec<StrictPartialOrder>> {
        let p = self.p();
        cap("partial order size p", p, MAX_RELATION_P)?;
        let pairs: Vec<(usize, usize)> = (0..p)
            .flat_map(|a| (0..p).filter(move |&b| b != a).map(move |b| (a, b)))
            .collect();
        Ok((0u32..1 << pairs.len())
            .filter_map(|m| {
                let chosen = pairs
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| m >> k & 1 == 1)
                    .map(|(_, &pr)| pr);
                StrictPartialOrder::new(p, chosen).ok()
            })
            .collect())
    }
}

impl Enumerable for TotalRankingPoset {
    fn enumerate(&self) -> Result<Vec<TotalRanking>> {
        enumerate_permutations(self.p())?
            .into_iter()
            .map(|o| self.ranking(o))
            .collect()
    }
}

impl Enumerable for CpdagPoset {
    fn enumerate(&self) -> Result<Vec<Cpdag>> {
        enumerate_cpdags(self.p())
    }
}

impl Enumerable for RestrictedCpdagPoset {
    fn enumerate(&self) -> Result<Vec<Cpdag>> {
        Ok(enumerate_cpdags(self.p())?
            .into_iter()
            .filter(Cpdag::is_star_forest)
            .collect())
    }
}

impl Enumerable for ReversedCpdagPoset {
    fn enumerate(&self) -> Result<Vec<Cpdag>> {
        Ok(self.universe().to_vec())
    }
}

/// A complete element list with its cover relation.
#[derive(Debug, Clone)]
pub struct EnumeratedUniverse<E> {
    pub family: String,
    pub elements: Vec<E>,
    /// Index pairs `(i, j)` with `elements[j]` covering `elements[i]`.
    pub covers: Vec<(usize, usize)>,
}

impl<E: Clone> EnumeratedUniverse<E> {
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn covering_pairs(&self) -> Vec<CoveringPair<E>> {
        self.covers
            .iter()
            .map(|&(i, j)| CoveringPair::new(self.elements[i].clone(), self.elements[j].clone()))
            .collect()
    }
}

/// Enumerates a poset and derives its covers from rank and `⪯` alone.
pub fn enumerate_universe<P: Enumerable>(poset: &P, family: &str) -> Result<EnumeratedUniverse<P::Elem>> {
    let mut elements = poset.enumerate()?;
    elements.sort();
    elements.dedup();
    let ranks: Vec<usize> = elements.iter().map(|x| poset.rank(x)).collect();
    let n = elements.len();
    let covers: Vec<(usize, usize)> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let (elements, ranks) = (&elements, &ranks);
            (0..n)
                .filter(move |&j| ranks[j] == ranks[i] + 1 && poset.precedes(&elements[i], &elements[j]))
                .map(move |j| (i, j))
        })
        .collect();
    Ok(EnumeratedUniverse {
        family: family.to_string(),
        elements,
        covers,
    })
}

/// `ρ(v, z) − ρ(u, z)` for every `z` in the universe.
pub fn increment_profile<P: GradedPoset>(poset: &P, universe: &[P::Elem], u: &P::Elem, v: &P::Elem) -> Vec<i64> {
    universe
        .iter()
        .map(|z| poset.similarity(v, z) as i64 - poset.similarity(u, z) as i64)
        .collect()
}

/// Exact `c_L(u, v)`: the largest increment over the universe.
pub fn bruteforce_cover_normalizer<P: GradedPoset>(poset: &P, universe: &[P::Elem], u: &P::Elem, v: &P::Elem) -> i64 {
    increment_profile(poset, universe, u, v).into_iter().max().unwrap_or(0)
}

/// Minimal covering set straight from the definition: group covering pairs
/// by increment profile and keep, per profile, the pair of smallest rank
/// (ties broken by canonical order). Stratum `k` is the rank of the upper
/// element.
pub fn bruteforce_minimal_set<P: Enumerable>(poset: &P, universe: &[P::Elem]) -> MinimalCoveringSet<P::Elem> {
    let mut best: HashMap<Vec<i64>, (usize, CoveringPair<P::Elem>)> = HashMap::new();
    for u in universe {
        for v in poset.covers(u) {
            let prof = increment_profile(poset, universe, u, &v);
            let k = poset.rank(&v);
            let cand = (k, CoveringPair::new(u.clone(), v));
            match best.get(&prof) {
                Some(cur) if *cur <= cand => {}
                _ => {
                    best.insert(prof, cand);
                }
            }
        }
    }
    let mut per_rank: BTreeMap<usize, u128> = BTreeMap::new();
    for (k, _) in best.values() {
        *per_rank.entry(*k).or_default() += 1;
    }
    let counts = per_rank
        .into_iter()
        .map(|(rank, n)| StratumCount {
            rank,
            enumerated: n,
            formula: None,
            formula_multiplicity: 1,
        })
        .collect();
    crate::families::collect_strata("bruteforce", counts, best.into_values())
}

/// Outcome of checking a candidate minimal covering set by enumeration.
#[derive(Debug, Clone, Default, Serialize)]
pub struct MinimalSetReport {
    pub family: String,
    pub universe_pairs: usize,
    pub candidate_pairs: usize,
    /// Candidate members that are not covering pairs.
    pub not_covers: usize,
    /// Covering pairs with no representative of equal profile and no larger rank.
    pub bullet1_violations: usize,
    /// Candidate pairs sharing their profile with an earlier candidate.
    pub bullet2_violations: usize,
    pub counts: Vec<StratumCount>,
    /// Candidate pairs per stratum as actually enumerated.
    pub enumerated: BTreeMap<usize, usize>,
}

impl MinimalSetReport {
    pub fn passed(&self) -> bool {
        self.not_covers == 0 && self.bullet1_violations == 0 && self.bullet2_violations == 0
    }

    /// Strata where a published formula (scaled by its multiplicity) differs
    /// from the enumerated count. Informational.
    pub fn formula_discrepancies(&self) -> Vec<&StratumCount> {
        self.counts
            .iter()
            .filter(|c| c.formula.is_some_and(|f| f != c.enumerated))
            .collect()
    }
}

/// Checks both defining properties of a minimal covering set on a universe.
pub fn verify_minimal_set<P: GradedPoset>(
    poset: &P,
    universe: &EnumeratedUniverse<P::Elem>,
    candidate: &MinimalCoveringSet<P::Elem>,
) -> MinimalSetReport {
    let zs = &universe.elements;
    let mut report = MinimalSetReport {
        family: candidate.family.to_string(),
        counts: candidate.counts.clone(),
        ..Default::default()
    };
    let mut profiles: HashMap<Vec<i64>, usize> = HashMap::new();
    for (&k, pairs) in &candidate.strata {
        report.enumerated.insert(k, pairs.len());
        for pr in pairs {
            report.candidate_pairs += 1;
            if crate::poset::check_cover(poset, &pr.lower, &pr.upper).is_err() {
                report.not_covers += 1;
            }
            let prof = increment_profile(poset, zs, &pr.lower, &pr.upper);
            let rank = poset.rank(&pr.upper);
            match profiles.get_mut(&prof) {
                Some(r) => {
                    report.bullet2_violations += 1;
                    *r = (*r).min(rank);
                }
                None => {
                    profiles.insert(prof, rank);
                }
            }
        }
    }
    let all = universe.covering_pairs();
    report.universe_pairs = all.len();
    report.bullet1_violations = all
        .par_iter()
        .filter(|pr| {
            let prof = increment_profile(poset, zs, &pr.lower, &pr.upper);
            !matches!(profiles.get(&prof), Some(&r) if r <= poset.rank(&pr.upper))
        })
        .count();
    report
}

/// Closed-form `c_L` against the brute-force maximum on every covering pair.
#[derive(Debug, Clone, Default, Serialize)]
pub struct NormalizerReport {
    pub pairs_checked: usize,
    pub mismatches: usize,
    pub max_normalizer: usize,
}

impl NormalizerReport {
    pub fn passed(&self) -> bool {
        self.mismatches == 0
    }
}

pub fn verify_cover_normalizers<P: GradedPoset>(poset: &P, universe: &EnumeratedUniverse<P::Elem>) -> NormalizerReport {
    let pairs = universe.covering_pairs();
    let results: Vec<(usize, bool)> = pairs
        .par_iter()
        .map(|pr| {
            let closed = poset.cover_normalizer(&pr.lower, &pr.upper);
            let brute = bruteforce_cover_normalizer(poset, &universe.elements, &pr.lower, &pr.upper);
            (closed, closed as i64 == brute)
        })
        .collect();
    NormalizerReport {
        pairs_checked: results.len(),
        mismatches: results.iter().filter(|r| !r.1).count(),
        max_normalizer: results.iter().map(|r| r.0).max().unwrap_or(0),
    }
}

/// Closed-form similarity against `max{rank(z) : z ⪯ x, z ⪯ y}` on all pairs.
/// Returns the number of mismatching pairs.
pub fn count_meet_mismatches<P: GradedPoset>(poset: &P, universe: &[P::Elem]) -> usize {
    let n = universe.len();
    let ranks: Vec<usize> = universe.iter().map(|x| poset.rank(x)).collect();
    let pre: Vec<Vec<bool>> = universe
        .par_iter()
        .map(|a| universe.iter().map(|b| poset.precedes(a, b)).collect())
        .collect();
    (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .filter(|&j| {
                    let meet = (0..n)
                        .filter(|&z| pre[z][i] && pre[z][j])
                        .map(|z| ranks[z])
                        .max()
                        .unwrap_or(0);
                    poset.similarity(&universe[i], &universe[j]) != meet
                })
                .count()
        })
        .sum()
}

/// The least upper bound of `a` and `b` in the universe, if there is one.
pub fn bruteforce_join<P: GradedPoset>(poset: &P, universe: &[P::Elem], a: &P::Elem, b: &P::Elem) -> Option<P::Elem> {
    let ubs: Vec<&P::Elem> = universe
        .iter()
        .filter(|z| poset.precedes(a, z) && poset.precedes(b, z))
        .collect();
    ubs.iter()
        .find(|m| ubs.iter().all(|z| poset.precedes(m, z)))
        .map(|m| (*m).clone())
}

/// The greatest lower bound of `a` and `b` in the universe, if there is one.
pub fn bruteforce_meet<P: GradedPoset>(poset: &P, universe: &[P::Elem], a: &P::Elem, b: &P::Elem) -> Option<P::Elem> {
    let lbs: Vec<&P::Elem> = universe
        .iter()
        .filter(|z| poset.precedes(z, a) && poset.precedes(z, b))
        .collect();
    lbs.iter()
        .find(|m| lbs.iter().all(|z| poset.precedes(z, m)))
        .map(|m| (*m).clone())
}

/// Number of pairs whose computed join differs from the brute-force join.
pub fn count_join_mismatches<P: JoinSemilattice>(poset: &P, universe: &[P::Elem]) -> usize {
    universe
        .par_iter()
        .map(|a| {
            universe
                .iter()
                .filter(|b| bruteforce_join(poset, universe, a, b).as_ref() != Some(&poset.join(a, b)))
                .count()
        })
        .sum()
}

/// A uniformly random upward walk of random length from the least element.
pub fn random_path<P: GradedPoset, R: Rng>(poset: &P, max_len: usize, rng: &mut R) -> PathCertificate<P::Elem> {
    let len = rng.gen_range(0..=max_len);
    let mut elements = vec![poset.least()];
    for _ in 0..len {
        let covers = poset.covers(elements.last().expect("nonempty"));
        let Some(next) = covers.choose(rng) else { break };
        elements.push(next.clone());
    }
    PathCertificate::new(poset, elements).expect("walk follows covers")
}

/// Checks on every element that false discoveries never exceed the fewest
/// null steps (covers with no similarity gain against `truth`) over all
/// paths reaching it. Returns the number of violating elements.
pub fn count_null_step_violations<P: GradedPoset>(
    poset: &P,
    universe: &EnumeratedUniverse<P::Elem>,
    truth: &P::Elem,
) -> usize {
    let elems = &universe.elements;
    let mut order: Vec<usize> = (0..elems.len()).collect();
    order.sort_by_key(|&i| poset.rank(&elems[i]));
    let mut incoming: Vec<Vec<usize>> = vec![Vec::new(); elems.len()];
    for &(i, j) in &universe.covers {
        incoming[j].push(i);
    }
    let mut fewest = vec![usize::MAX; elems.len()];
    let mut violations = 0;
    for &j in &order {
        fewest[j] = if incoming[j].is_empty() {
            0
        } else {
            incoming[j]
                .iter()
                .map(|&i| fewest[i] + usize::from(poset.increment(&elems[i], &elems[j], truth) == 0))
                .min()
                .expect("nonempty")
        };
        let fd = poset.rank(&elems[j]) - poset.similarity(&elems[j], truth);
        if fd > fewest[j] {
            violations += 1;
        }
    }
    violations
}

/// Mean false discoveries and `P(FD > 0)` over independent simulated trials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonteCarloSummary {
    pub trials: usize,
    pub mean_fd: f64,
    pub stderr_fd: f64,
    pub p_any_fd: f64,
    pub stderr_any_fd: f64,
}

impl MonteCarloSummary {
    pub fn from_reports(reports: &[DiscoveryReport]) -> Self {
        let n = reports.len().max(1) as f64;
        let fds: Vec<f64> = reports.iter().map(|r| r.false_discoveries as f64).collect();
        let mean = fds.iter().sum::<f64>() / n;
        let var = if reports.len() > 1 {
            fds.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        let any = reports.iter().filter(|r| r.false_discoveries > 0).count() as f64 / n;
        MonteCarloSummary {
            trials: reports.len(),
            mean_fd: mean,
            stderr_fd: (var / n).sqrt(),
            p_any_fd: any,
            stderr_any_fd: (any * (1.0 - any) / n).sqrt(),
        }
    }
}

/// Runs `trial(seed)` for derived per-trial seeds in parallel and scores each
/// estimate against `truth`.
pub fn monte_carlo_fd<P, F>(poset: &P, truth: &P::Elem, trials: usize, seed: u64, trial: F) -> Result<MonteCarloSummary>
where
    P: GradedPoset,
    F: Fn(u64) -> Result<P::Elem> + Sync,
{
    let reports: Vec<DiscoveryReport> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let est = trial(crate::selection::derive_seed(seed, t as u64))?;
            discovery_report(poset, &est, truth)
        })
        .collect::<Result<_>>()?;
    Ok(MonteCarloSummary::from_reports(&reports))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bell_numbers() {
        let bell = [1, 1, 2, 5, 15, 52];
        for (p, &b) in bell.iter().enumerate() {
            assert_eq!(enumerate_partitions(p).unwrap().len(), b);
        }
    }

    #[test]
    fn dag_counts() {
        assert_eq!(enumerate_dags(3).unwrap().len(), 25);
        assert_eq!(enumerate_dags(4).unwrap().len(), 543);
    }

    #[test]
    fn equivalence_class_counts() {
        assert_eq!(enumerate_cpdags(3).unwrap().len(), 11);
        assert_eq!(enumerate_cpdags(4).unwrap().len(), 185);
    }

    #[test]
    fn factorials_and_caps() {
        assert_eq!(enumerate_permutations(4).unwrap().len(), 24);
        assert!(enumerate_permutations(6).is_err());
        assert!(enumerate_cpdags(5).is_err());
        assert!(ChangepointPoset::new(5, 9).enumerate().is_err());
    }

    #[test]
    fn weak_order_on_three_items() {
        let u = enumerate_universe(&TotalRankingPoset::identity(3), "total-ranking").unwrap();
        assert_eq!((u.len(), u.covers.len()), (6, 6));
    }

    #[test]
    fn strict_partial_orders_on_three_items() {
        assert_eq!(PartialRankingPoset::new(3).enumerate().unwrap().len(), 19);
        assert_eq!(PartialRankingPoset::new(4).enumerate().unwrap().len(), 219);
    }

    #[test]
    fn boolean_normalizer_is_one() {
        let b = BooleanPoset::new(3);
        let u = enumerate_universe(&b, "boolean").unwrap();
        let r = verify_cover_normalizers(&b, &u);
        assert!(r.passed());
        assert_eq!(r.max_normalizer, 1);
    }

    #[test]
    fn clustering_merge_of_two_and_three() {
        let c = ClusteringPoset::new(5);
        let u = Partition::from_blocks(5, &[vec![0, 1], vec![2, 3, 4]]).unwrap();
        let v = Partition::one_block(5);
        let all = enumerate_partitions(5).unwrap();
        assert_eq!(bruteforce_cover_normalizer(&c, &all, &u, &v), 2);
    }

    #[test]
    fn doubled_clustering_set_has_duplicate_profiles() {
        let c = ClusteringPoset::new(3);
        let u = enumerate_universe(&c, "clustering").unwrap();
        let mut set = crate::families::MinimalSetFamily::minimal_covering_pairs(&c).unwrap();
        for pairs in set.strata.values_mut() {
            let copy = pairs.clone();
            pairs.extend(copy);
        }
        let r = verify_minimal_set(&c, &u, &set);
        assert!(r.bullet2_violations > 0);
    }

    #[test]
    fn identical_estimates_have_zero_fd() {
        let b = BooleanPoset::new(4);
        let truth = VariableSubset::new(4, [1, 3]).unwrap();
        let s = monte_carlo_fd(&b, &truth, 20, 1, |_| Ok(truth.clone())).unwrap();
        assert_eq!((s.mean_fd, s.p_any_fd), (0.0, 0.0));
    }
}
