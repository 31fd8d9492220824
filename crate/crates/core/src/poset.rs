//! Graded posets, similarity valuations and discovery accounting.
//!
//! A model family is a graded poset: a least element of rank zero, upward
//! covers that raise the rank by exactly one, and a similarity valuation `ρ`
//! that measures how much two models agree. True discoveries of an estimate
//! are `ρ(estimate, truth)`; false discoveries are whatever rank is left over.

use std::fmt::Debug;
use std::hash::Hash;

use serde::Serialize;

use crate::error::{Error, Result};

/// A graded poset with an integer similarity valuation.
///
/// Implementations assume their inputs passed [`GradedPoset::validate`]; the
/// free functions in this module validate before doing any arithmetic.
pub trait GradedPoset: Sync {
    /// Model element. `Ord` is the canonical-encoding order used for tie-breaking.
    type Elem: Clone + Eq + Ord + Hash + Debug + Send + Sync;

    fn least(&self) -> Self::Elem;
    fn rank(&self, x: &Self::Elem) -> usize;
    /// `x ⪯ y`.
    fn precedes(&self, x: &Self::Elem, y: &Self::Elem) -> bool;
    fn similarity(&self, x: &Self::Elem, y: &Self::Elem) -> usize;
    /// Upward covers of `x`, sorted in canonical order. Empty for maximal elements.
    fn covers(&self, x: &Self::Elem) -> Vec<Self::Elem>;
    /// `c_L(u, v)`: the largest possible similarity gain of the cover `u → v`.
    fn cover_normalizer(&self, u: &Self::Elem, v: &Self::Elem) -> usize;

    /// `ρ(v, z) − ρ(u, z)` for a covering pair. Families override this with
    /// cheaper formulas; the default goes through `similarity`.
    fn increment(&self, u: &Self::Elem, v: &Self::Elem, z: &Self::Elem) -> usize {
        self.similarity(v, z).saturating_sub(self.similarity(u, z))
    }

    /// Checks that `x` belongs to this poset instance.
    fn validate(&self, x: &Self::Elem) -> Result<()>;
}

/// Posets in which every pair of elements has a least upper bound.
pub trait JoinSemilattice: GradedPoset {
    fn join(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
}

/// Join of a nonempty list of elements.
pub fn join_all<P: JoinSemilattice>(poset: &P, elements: &[P::Elem]) -> Result<P::Elem> {
    let (first, rest) = elements
        .split_first()
        .ok_or_else(|| Error::Domain("join of an empty list".into()))?;
    poset.validate(first)?;
    let mut acc = first.clone();
    for e in rest {
        poset.validate(e)?;
        acc = poset.join(&acc, e);
    }
    Ok(acc)
}

/// `(u, v)` with `v` covering `u`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CoveringPair<E> {
    pub lower: E,
    pub upper: E,
}

impl<E> CoveringPair<E> {
    pub fn new(lower: E, upper: E) -> Self {
        CoveringPair { lower, upper }
    }
}

/// Checks that `(u, v)` is a covering pair of `poset`.
pub fn check_cover<P: GradedPoset>(poset: &P, u: &P::Elem, v: &P::Elem) -> Result<()> {
    poset.validate(u)?;
    poset.validate(v)?;
    if poset.rank(v) != poset.rank(u) + 1 || !poset.precedes(u, v) {
        return Err(Error::BrokenPath(format!("{v:?} does not cover {u:?}")));
    }
    Ok(())
}

/// True and false discoveries of an estimate against a reference model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiscoveryReport {
    pub rank: usize,
    pub true_discoveries: usize,
    pub false_discoveries: usize,
    /// `FD / rank`, and zero for a rank-zero estimate.
    pub fdp: f64,
}

pub fn discovery_report<P: GradedPoset>(poset: &P, estimate: &P::Elem, truth: &P::Elem) -> Result<DiscoveryReport> {
    poset.validate(estimate)?;
    poset.validate(truth)?;
    let rank = poset.rank(estimate);
    let td = poset.similarity(estimate, truth);
    if td > rank {
        return Err(Error::InvalidElement(format!("similarity {td} exceeds rank {rank}")));
    }
    let fd = rank - td;
    let fdp = if rank == 0 { 0.0 } else { fd as f64 / rank as f64 };
    Ok(DiscoveryReport {
        rank,
        true_discoveries: td,
        false_discoveries: fd,
        fdp,
    })
}

/// A chain of covers starting at the least element.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathCertificate<E> {
    elements: Vec<E>,
}

impl<E: Clone + Debug> PathCertificate<E> {
    /// Validates that `elements` starts at the least element and that each
    /// element covers its predecessor.
    pub fn new<P: GradedPoset<Elem = E>>(poset: &P, elements: Vec<E>) -> Result<Self>
    where
        E: Eq,
    {
        let first = elements.first().ok_or_else(|| Error::BrokenPath("empty path".into()))?;
        poset.validate(first)?;
        if *first != poset.least() {
            return Err(Error::BrokenPath("path does not start at the least element".into()));
        }
        for w in elements.windows(2) {
            check_cover(poset, &w[0], &w[1])?;
        }
        Ok(PathCertificate { elements })
    }

    pub fn elements(&self) -> &[E] {
        &self.elements
    }

    pub fn last(&self) -> &E {
        self.elements.last().expect("nonempty by construction")
    }

    /// Number of covering steps, which equals the rank of the final element.
    pub fn len(&self) -> usize {
        self.elements.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn steps(&self) -> impl Iterator<Item = CoveringPair<E>> + '_ {
        self.elements
            .windows(2)
            .map(|w| CoveringPair::new(w[0].clone(), w[1].clone()))
    }
}

/// Per-step terms `1 − [ρ(xᵢ, truth) − ρ(xᵢ₋₁, truth)]` along a path.
///
/// The terms sum to the false discoveries of the final element. A single
/// term can be negative when a cover gains more than one unit of similarity
/// (a clustering merge that joins several truth blocks at once).
pub fn telescoping_decompose<P: GradedPoset>(
    poset: &P,
    path: &PathCertificate<P::Elem>,
    truth: &P::Elem,
) -> Result<Vec<i64>> {
    poset.validate(truth)?;
    let sims: Vec<i64> = path
        .elements()
        .iter()
        .map(|x| poset.similarity(x, truth) as i64)
        .collect();
    Ok(sims.windows(2).map(|w| 1 - (w[1] - w[0])).collect())
}

/// `max{rank(z) : z ⪯ x, z ⪯ y}` over an explicit universe.
pub fn meet_valuation_bruteforce<P: GradedPoset>(
    poset: &P,
    universe: &[P::Elem],
    x: &P::Elem,
    y: &P::Elem,
) -> Result<usize> {
    if universe.is_empty() {
        return Err(Error::Domain("empty universe".into()));
    }
    universe
        .iter()
        .filter(|z| poset.precedes(z, x) && poset.precedes(z, y))
        .map(|z| poset.rank(z))
        .max()
        .ok_or_else(|| Error::Domain("no common lower bound in universe".into()))
}

/// One failed axiom instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AxiomViolation {
    /// 1, 2 or 3 for the valuation axioms; 0 for symmetry.
    pub axiom: u8,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AxiomReport {
    pub elements: usize,
    pub pairs_checked: usize,
    pub violation_count: usize,
    /// The first few violations, for display.
    pub violations: Vec<AxiomViolation>,
}

impl AxiomReport {
    pub fn passed(&self) -> bool {
        self.violation_count == 0
    }

    fn record(&mut self, axiom: u8, detail: impl FnOnce() -> String) {
        self.violation_count += 1;
        if self.violations.len() < 16 {
            self.violations.push(AxiomViolation {
                axiom,
                detail: detail(),
            });
        }
    }
}

/// Exhaustively checks symmetry and the three valuation axioms:
/// `0 ≤ ρ(x,y) ≤ min rank`, monotonicity of `ρ(·,y)` along `⪯`, and
/// `ρ(x,y) = rank(x)` exactly when `x ⪯ y`.
pub fn verify_valuation_axioms<P: GradedPoset>(poset: &P, universe: &[P::Elem]) -> AxiomReport {
    let n = universe.len();
    let ranks: Vec<usize> = universe.iter().map(|x| poset.rank(x)).collect();
    let mut pre = vec![false; n * n];
    let mut rho = vec![0usize; n * n];
    for i in 0..n {
        for j in 0..n {
            pre[i * n + j] = poset.precedes(&universe[i], &universe[j]);
            rho[i * n + j] = poset.similarity(&universe[i], &universe[j]);
        }
    }
    let mut report = AxiomReport {
        elements: n,
        pairs_checked: n * n,
        ..Default::default()
    };
    for i in 0..n {
        for j in 0..n {
            let r = rho[i * n + j];
            if r != rho[j * n + i] {
                report.record(0, || format!("asymmetric at {:?}, {:?}", universe[i], universe[j]));
            }
            if r > ranks[i].min(ranks[j]) {
                report.record(1, || {
                    format!("ρ={r} exceeds min rank at {:?}, {:?}", universe[i], universe[j])
                });
            }
            if (r == ranks[i]) != pre[i * n + j] {
                report.record(3, || {
                    format!(
                        "ρ={r}, rank={}, precedes={} at {:?}, {:?}",
                        ranks[i],
                        pre[i * n + j],
                        universe[i],
                        universe[j]
                    )
                });
            }
        }
    }
    for x in 0..n {
        for z in 0..n {
            if !pre[x * n + z] {
                continue;
            }
            for y in 0..n {
                if rho[x * n + y] > rho[z * n + y] {
                    report.record(2, || {
                        format!(
                            "{:?} ⪯ {:?} but ρ drops against {:?}",
                            universe[x], universe[z], universe[y]
                        )
                    });
                }
            }
        }
    }
    report
}
