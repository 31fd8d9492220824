//! Named verification suites over every family, as run by `posetfd verify`
//! and by the acceptance tests.

use std::collections::HashMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::*;
use crate::cpdag::{cpdag_precedes, rho_cpdag, rho_cpdag_direct};
use crate::families::total_ranking::TotalRanking;
use crate::families::MinimalSetFamily;
use crate::poset::{telescoping_decompose, verify_valuation_axioms};
use crate::selection::stream_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Axioms,
    MinimalSets,
    Normalizers,
    Lemmas,
    All,
}

impl std::str::FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "axioms" => Ok(Suite::Axioms),
            "minimal-sets" => Ok(Suite::MinimalSets),
            "normalizers" => Ok(Suite::Normalizers),
            "lemmas" => Ok(Suite::Lemmas),
            "all" => Ok(Suite::All),
            other => Err(Error::Parse(format!("unknown suite {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SuiteOptions {
    pub seed: u64,
    /// Random cases per family for the sampled checks.
    pub cases: usize,
    /// Adds a family whose similarity is deliberately wrong, as a negative control.
    pub inject_fault: bool,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions {
            seed: 0,
            cases: 1000,
            inject_fault: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    /// Informational checks are reported but never fail a suite.
    pub informational: bool,
    pub detail: String,
}

impl CheckResult {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        CheckResult {
            name: name.into(),
            passed,
            informational: false,
            detail: detail.into(),
        }
    }

    fn info(name: impl Into<String>, detail: impl Into<String>) -> Self {
        CheckResult {
            name: name.into(),
            passed: true,
            informational: true,
            detail: detail.into(),
        }
    }

    fn from_error(name: impl Into<String>, e: Error) -> Self {
        CheckResult::new(name, false, e.to_string())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SuiteReport {
    pub checks: Vec<CheckResult>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed || c.informational)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed && !c.informational)
    }
}

pub fn run(suite: Suite, opts: &SuiteOptions) -> SuiteReport {
    let mut checks = Vec::new();
    if matches!(suite, Suite::Axioms | Suite::All) {
        checks.extend(axiom_checks(opts));
        checks.extend(meet_checks());
    }
    if matches!(suite, Suite::MinimalSets | Suite::All) {
        checks.extend(minimal_set_checks());
    }
    if matches!(suite, Suite::Normalizers | Suite::All) {
        checks.extend(normalizer_checks());
    }
    if matches!(suite, Suite::Lemmas | Suite::All) {
        checks.extend(telescoping_checks(opts));
        checks.extend(join_checks(opts));
        checks.extend(lemma_checks(opts));
        checks.extend(cpdag_checks(opts));
    }
    SuiteReport { checks }
}

/// A valuation that ignores its second argument's structure, used to make
/// sure the checks can fail.
struct Corrupted<P>(P);

impl<P: GradedPoset> GradedPoset for Corrupted<P> {
    type Elem = P::Elem;
    fn least(&self) -> P::Elem {
        self.0.least()
    }
    fn rank(&self, x: &P::Elem) -> usize {
        self.0.rank(x)
    }
    fn precedes(&self, x: &P::Elem, y: &P::Elem) -> bool {
        self.0.precedes(x, y)
    }
    fn similarity(&self, x: &P::Elem, y: &P::Elem) -> usize {
        self.0.rank(x).min(self.0.rank(y))
    }
    fn covers(&self, x: &P::Elem) -> Vec<P::Elem> {
        self.0.covers(x)
    }
    fn cover_normalizer(&self, u: &P::Elem, v: &P::Elem) -> usize {
        self.0.cover_normalizer(u, v)
    }
    fn validate(&self, x: &P::Elem) -> Result<()> {
        self.0.validate(x)
    }
}

impl<P: Enumerable> Enumerable for Corrupted<P> {
    fn enumerate(&self) -> Result<Vec<P::Elem>> {
        self.0.enumerate()
    }
}

fn axioms_on<P: Enumerable>(name: &str, poset: &P) -> CheckResult {
    match enumerate_universe(poset, name) {
        Ok(u) => {
            let r = verify_valuation_axioms(poset, &u.elements);
            let first = r
                .violations
                .first()
                .map(|v| format!("; first: axiom {} {}", v.axiom, v.detail));
            CheckResult::new(
                format!("axioms {name}"),
                r.passed(),
                format!(
                    "{} elements, {} violations{}",
                    r.elements,
                    r.violation_count,
                    first.unwrap_or_default()
                ),
            )
        }
        Err(e) => CheckResult::from_error(format!("axioms {name}"), e),
    }
}

/// Symmetry and the three valuation axioms on every enumerable family.
pub fn axiom_checks(opts: &SuiteOptions) -> Vec<CheckResult> {
    let mut out = Vec::new();
    for p in 1..=5 {
        out.push(axioms_on(&format!("boolean p={p}"), &BooleanPoset::new(p)));
        out.push(axioms_on(&format!("clustering p={p}"), &ClusteringPoset::new(p)));
        match ReversePartitionPoset::new(p) {
            Ok(r) => out.push(axioms_on(&format!("reverse-partition p={p}"), &r)),
            Err(e) => out.push(CheckResult::from_error("reverse-partition", e)),
        }
        out.push(axioms_on(
            &format!("total-ranking p={p}"),
            &TotalRankingPoset::identity(p),
        ));
    }
    out.push(axioms_on("changepoint p=2 T=3", &ChangepointPoset::new(2, 3)));
    for p in 1..=4 {
        out.push(axioms_on(
            &format!("partial-ranking p={p}"),
            &PartialRankingPoset::new(p),
        ));
    }
    for p in 1..=4 {
        out.push(axioms_on(&format!("cpdag p={p}"), &CpdagPoset::new(p).expect("small")));
        out.push(axioms_on(
            &format!("restricted-cpdag p={p}"),
            &RestrictedCpdagPoset::new(p).expect("small"),
        ));
    }
    for p in 2..=3 {
        match ReversedCpdagPoset::new(p) {
            Ok(r) => out.push(axioms_on(&format!("reversed-cpdag p={p}"), &r)),
            Err(e) => out.push(CheckResult::from_error("reversed-cpdag", e)),
        }
    }
    if opts.inject_fault {
        out.push(axioms_on(
            "boolean p=3 (corrupted similarity)",
            &Corrupted(BooleanPoset::new(3)),
        ));
    }
    out
}

fn meet_on<P: Enumerable>(name: &str, poset: &P) -> CheckResult {
    match enumerate_universe(poset, name) {
        Ok(u) => {
            let bad = count_meet_mismatches(poset, &u.elements);
            CheckResult::new(
                format!("closed-form similarity {name}"),
                bad == 0,
                format!(
                    "{} pairs, {bad} mismatches against max rank of common lower bounds",
                    u.len() * u.len()
                ),
            )
        }
        Err(e) => CheckResult::from_error(format!("closed-form similarity {name}"), e),
    }
}

/// Pairs `(a, b)` of items ranked one way by the null ranking and the other
/// way by both `x` and `y`, counted straight from positions.
pub fn common_reversals_from_positions(null: &[usize], x: &TotalRanking, y: &TotalRanking) -> usize {
    let pos = |order: &[usize], item: usize| order.iter().position(|&o| o == item).expect("item present");
    let p = null.len();
    let mut n = 0;
    for a in 0..p {
        for b in 0..p {
            let null_a_first = pos(null, a) < pos(null, b);
            if null_a_first && pos(x.order(), b) < pos(x.order(), a) && pos(y.order(), b) < pos(y.order(), a) {
                n += 1;
            }
        }
    }
    n
}

/// Closed-form similarities against the brute-force meet valuation; total
/// ranking against the common-inversion count instead, plus the example
/// where the two disagree.
pub fn meet_checks() -> Vec<CheckResult> {
    let mut out = Vec::new();
    for p in 1..=5 {
        out.push(meet_on(&format!("boolean p={p}"), &BooleanPoset::new(p)));
        out.push(meet_on(&format!("clustering p={p}"), &ClusteringPoset::new(p)));
        if let Ok(r) = ReversePartitionPoset::new(p) {
            out.push(meet_on(&format!("reverse-partition p={p}"), &r));
        }
    }
    out.push(meet_on("changepoint p=2 T=3", &ChangepointPoset::new(2, 3)));
    for p in 1..=4 {
        out.push(meet_on(&format!("partial-ranking p={p}"), &PartialRankingPoset::new(p)));
        out.push(meet_on(&format!("cpdag p={p}"), &CpdagPoset::new(p).expect("small")));
    }
    for p in 1..=5 {
        for null in [(0..p).collect::<Vec<_>>(), (0..p).rev().collect()] {
            let t = TotalRankingPoset::new(null.clone()).expect("permutation");
            let all = t.enumerate().expect("small");
            let bad = all
                .iter()
                .flat_map(|x| all.iter().map(move |y| (x, y)))
                .filter(|(x, y)| t.similarity(x, y) != common_reversals_from_positions(&null, x, y))
                .count();
            out.push(CheckResult::new(
                format!("total-ranking common inversions p={p} null={null:?}"),
                bad == 0,
                format!("{} pairs, {bad} mismatches", all.len() * all.len()),
            ));
        }
    }
    let t = TotalRankingPoset::identity(3);
    let all = t.enumerate().expect("small");
    let (x, y) = (t.ranking(vec![1, 2, 0]).unwrap(), t.ranking(vec![2, 0, 1]).unwrap());
    let meet = crate::poset::meet_valuation_bruteforce(&t, &all, &x, &y).unwrap_or(usize::MAX);
    let total = t.similarity(&x, &y);
    out.push(CheckResult::new(
        "total-ranking meet vs common inversions example",
        meet == 0 && total == 1,
        format!("rankings 1>2>0 and 2>0>1: meet valuation {meet}, common inversions {total}"),
    ));
    out
}

fn minimal_on<P: Enumerable + MinimalSetFamily>(name: &str, poset: &P) -> Vec<CheckResult> {
    let universe = match enumerate_universe(poset, name) {
        Ok(u) => u,
        Err(e) => return vec![CheckResult::from_error(format!("minimal set {name}"), e)],
    };
    let set = match poset.minimal_covering_pairs() {
        Ok(s) => s,
        Err(e) => return vec![CheckResult::from_error(format!("minimal set {name}"), e)],
    };
    let r = verify_minimal_set(poset, &universe, &set);
    let counts_agree = set
        .counts
        .iter()
        .all(|c| r.enumerated.get(&c.rank).copied().unwrap_or(0) as u128 == c.enumerated);
    let sizes: Vec<String> = set
        .counts
        .iter()
        .map(|c| format!("k={}: {}", c.rank, c.enumerated))
        .collect();
    let mut out = vec![CheckResult::new(
        format!("minimal set {name}"),
        r.passed() && counts_agree,
        format!(
            "{} pairs [{}]; {} covering pairs checked; bullet 1 violations {}, bullet 2 violations {}, non-covers {}",
            r.candidate_pairs,
            sizes.join(", "),
            r.universe_pairs,
            r.bullet1_violations,
            r.bullet2_violations,
            r.not_covers
        ),
    )];
    let disc: Vec<String> = r
        .formula_discrepancies()
        .iter()
        .map(|c| {
            format!(
                "k={}: enumerated {}, formula {}",
                c.rank,
                c.enumerated,
                c.formula.unwrap_or(0)
            )
        })
        .collect();
    if !disc.is_empty() {
        out.push(CheckResult::info(format!("count discrepancy {name}"), disc.join("; ")));
    }
    out
}

/// Both defining properties of every family's minimal covering set, with
/// closed-form counts checked against the enumeration.
pub fn minimal_set_checks() -> Vec<CheckResult> {
    let mut out = Vec::new();
    for p in 1..=5 {
        out.extend(minimal_on(&format!("boolean p={p}"), &BooleanPoset::new(p)));
        out.extend(minimal_on(&format!("clustering p={p}"), &ClusteringPoset::new(p)));
        out.extend(minimal_on(
            &format!("total-ranking p={p}"),
            &TotalRankingPoset::identity(p),
        ));
        if let Ok(r) = ReversePartitionPoset::new(p) {
            out.extend(minimal_on(&format!("reverse-partition p={p}"), &r));
        }
    }
    out.extend(minimal_on("changepoint p=2 T=3", &ChangepointPoset::new(2, 3)));
    for p in 1..=4 {
        out.extend(minimal_on(
            &format!("partial-ranking p={p}"),
            &PartialRankingPoset::new(p),
        ));
        out.extend(minimal_on(
            &format!("restricted-cpdag p={p}"),
            &RestrictedCpdagPoset::new(p).expect("small"),
        ));
    }
    // Published stratum sizes that must match exactly.
    for p in 2..=5 {
        let c = TotalRankingPoset::identity(p).stratum_counts();
        let ok = c.iter().all(|s| s.enumerated == (p - s.rank) as u128);
        out.push(CheckResult::new(
            format!("total-ranking |S_k| = p-k at p={p}"),
            ok,
            format!("{:?}", c.iter().map(|s| s.enumerated).collect::<Vec<_>>()),
        ));
    }
    for p in 2..=4 {
        let c = PartialRankingPoset::new(p).stratum_counts();
        let ok = c.len() == 1 && c[0].enumerated == (p * (p - 1)) as u128;
        out.push(CheckResult::new(
            format!("partial-ranking |S| = p(p-1) at p={p}"),
            ok,
            format!("{c:?}"),
        ));
    }
    out
}

fn normalizers_on<P: Enumerable>(name: &str, poset: &P) -> CheckResult {
    match enumerate_universe(poset, name) {
        Ok(u) => {
            let r = verify_cover_normalizers(poset, &u);
            CheckResult::new(
                format!("c_L {name}"),
                r.passed(),
                format!(
                    "{} covering pairs, {} mismatches, largest c_L {}",
                    r.pairs_checked, r.mismatches, r.max_normalizer
                ),
            )
        }
        Err(e) => CheckResult::from_error(format!("c_L {name}"), e),
    }
}

/// Closed-form `c_L` against brute-force maxima.
pub fn normalizer_checks() -> Vec<CheckResult> {
    let mut out = Vec::new();
    for p in 1..=5 {
        out.push(normalizers_on(&format!("boolean p={p}"), &BooleanPoset::new(p)));
        out.push(normalizers_on(&format!("clustering p={p}"), &ClusteringPoset::new(p)));
        out.push(normalizers_on(
            &format!("total-ranking p={p}"),
            &TotalRankingPoset::identity(p),
        ));
        if let Ok(r) = ReversePartitionPoset::new(p) {
            out.push(normalizers_on(&format!("reverse-partition p={p}"), &r));
        }
    }
    out.push(normalizers_on("changepoint p=2 T=3", &ChangepointPoset::new(2, 3)));
    for p in 1..=4 {
        out.push(normalizers_on(
            &format!("partial-ranking p={p}"),
            &PartialRankingPoset::new(p),
        ));
        out.push(normalizers_on(
            &format!("restricted-cpdag p={p}"),
            &RestrictedCpdagPoset::new(p).expect("small"),
        ));
    }
    out.extend(cpdag_normalizer_bound());
    out
}

/// The unrestricted causal poset has no closed-form `c_L`; its component
/// edge-count bound must dominate the brute-force maxima.
pub fn cpdag_normalizer_bound() -> Vec<CheckResult> {
    let mut out = Vec::new();
    for p in 2..=4 {
        let poset = CpdagPoset::new(p).expect("small");
        let u = match enumerate_universe(&poset, "cpdag") {
            Ok(u) => u,
            Err(e) => return vec![CheckResult::from_error("c_L bound cpdag", e)],
        };
        let pairs = u.covering_pairs();
        let rows: Vec<(i64, i64)> = pairs
            .par_iter()
            .map(|pr| {
                let brute = bruteforce_cover_normalizer(&poset, &u.elements, &pr.lower, &pr.upper);
                (brute, poset.cover_normalizer(&pr.lower, &pr.upper) as i64)
            })
            .collect();
        let under = rows.iter().filter(|(b, c)| c < b).count();
        let above_one = rows.iter().filter(|(b, _)| *b > 1).count();
        let max = rows.iter().map(|r| r.0).max().unwrap_or(0);
        out.push(CheckResult::new(
            format!("c_L bound cpdag p={p}"),
            under == 0,
            format!(
                "{} covering pairs, {under} where the bound is below the brute-force maximum; \
                 brute-force c_L exceeds 1 on {above_one} pairs (largest {max})",
                rows.len()
            ),
        ));
    }
    out
}

/// A random element reached by a walk of up to `max_len` covers.
fn random_element<P: GradedPoset>(poset: &P, max_len: usize, rng: &mut ChaCha8Rng) -> P::Elem {
    random_path(poset, max_len, rng).last().clone()
}

fn telescoping_on<P: GradedPoset>(
    name: &str,
    poset: &P,
    max_len: usize,
    opts: &SuiteOptions,
    truth: impl Fn(&mut ChaCha8Rng) -> P::Elem + Sync,
) -> CheckResult {
    let bad: usize = (0..opts.cases)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(opts.seed, i as u64);
            let path = random_path(poset, max_len, &mut rng);
            let t = truth(&mut rng);
            let terms = telescoping_decompose(poset, &path, &t).expect("valid elements");
            let fd = discovery_report(poset, path.last(), &t)
                .expect("valid")
                .false_discoveries as i64;
            usize::from(terms.iter().sum::<i64>() != fd)
        })
        .sum();
    CheckResult::new(
        format!("telescoping {name}"),
        bad == 0,
        format!("{} random (path, truth) pairs, {bad} mismatches", opts.cases),
    )
}

/// Per-step terms along random paths sum to the false discoveries.
pub fn telescoping_checks(opts: &SuiteOptions) -> Vec<CheckResult> {
    let b = BooleanPoset::new(8);
    let c = ClusteringPoset::new(7);
    let r = ReversePartitionPoset::new(6).expect("small");
    let cp = ChangepointPoset::new(4, 5);
    let pr = PartialRankingPoset::new(6);
    let t = TotalRankingPoset::new(vec![3, 0, 6, 1, 7, 2, 5, 4]).expect("permutation");
    let rc = RestrictedCpdagPoset::new(6).expect("small");
    let full = CpdagPoset::new(6).expect("small");
    vec![
        telescoping_on("boolean p=8", &b, 8, opts, |g| random_element(&b, 8, g)),
        telescoping_on("clustering p=7", &c, 6, opts, |g| random_element(&c, 6, g)),
        telescoping_on("reverse-partition p=6", &r, 5, opts, |g| random_element(&r, 5, g)),
        telescoping_on("changepoint p=4 T=5", &cp, 20, opts, |g| random_element(&cp, 20, g)),
        telescoping_on("partial-ranking p=6", &pr, 15, opts, |g| random_element(&pr, 15, g)),
        telescoping_on("total-ranking p=8", &t, 28, opts, |g| random_element(&t, 28, g)),
        telescoping_on("restricted-cpdag p=6 vs arbitrary truth", &rc, 5, opts, |g| {
            random_element(&full, 7, g)
        }),
    ]
}

/// A random element below `truth`, reached through covers that stay below it.
fn random_below<P: GradedPoset>(poset: &P, truth: &P::Elem, rng: &mut ChaCha8Rng) -> P::Elem {
    let mut x = poset.least();
    let steps = rng.gen_range(0..=poset.rank(truth));
    for _ in 0..steps {
        let ok: Vec<P::Elem> = poset
            .covers(&x)
            .into_iter()
            .filter(|v| poset.precedes(v, truth))
            .collect();
        if ok.is_empty() {
            break;
        }
        x = ok[rng.gen_range(0..ok.len())].clone();
    }
    x
}

fn join_property_on<P: JoinSemilattice>(name: &str, poset: &P, max_len: usize, opts: &SuiteOptions) -> CheckResult {
    let bad: usize = (0..opts.cases)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(opts.seed ^ 0x4a4f_494e, i as u64);
            let truth = random_element(poset, max_len, &mut rng);
            let m = rng.gen_range(2..=4);
            let parts: Vec<P::Elem> = (0..m).map(|_| random_below(poset, &truth, &mut rng)).collect();
            let j = crate::poset::join_all(poset, &parts).expect("nonempty");
            let fd = discovery_report(poset, &j, &truth).expect("valid").false_discoveries;
            let max_rank = parts.iter().map(|x| poset.rank(x)).max().unwrap_or(0);
            usize::from(fd != 0 || poset.rank(&j) < max_rank)
        })
        .sum();
    CheckResult::new(
        format!("join of zero-FD models {name}"),
        bad == 0,
        format!(
            "{} random tuples, {bad} with FD(join) > 0 or rank below a component",
            opts.cases
        ),
    )
}

fn join_exact_on<P: JoinSemilattice + Enumerable>(name: &str, poset: &P) -> CheckResult {
    match poset.enumerate() {
        Ok(u) => {
            let bad = count_join_mismatches(poset, &u);
            CheckResult::new(
                format!("join is least upper bound {name}"),
                bad == 0,
                format!("{} pairs, {bad} mismatches", u.len() * u.len()),
            )
        }
        Err(e) => CheckResult::from_error(format!("join {name}"), e),
    }
}

/// Joins are least upper bounds, and joining zero-FD models keeps FD at zero.
pub fn join_checks(opts: &SuiteOptions) -> Vec<CheckResult> {
    let mut out = vec![
        join_exact_on("boolean p=4", &BooleanPoset::new(4)),
        join_exact_on("clustering p=5", &ClusteringPoset::new(5)),
        join_exact_on("reverse-partition p=5", &ReversePartitionPoset::new(5).expect("small")),
        join_exact_on("changepoint p=2 T=3", &ChangepointPoset::new(2, 3)),
        join_exact_on("total-ranking p=4", &TotalRankingPoset::identity(4)),
        join_exact_on(
            "total-ranking p=4 reversed null",
            &TotalRankingPoset::new(vec![3, 1, 2, 0]).unwrap(),
        ),
    ];
    out.push(join_property_on("boolean p=8", &BooleanPoset::new(8), 8, opts));
    out.push(join_property_on("clustering p=7", &ClusteringPoset::new(7), 6, opts));
    out.push(join_property_on(
        "reverse-partition p=6",
        &ReversePartitionPoset::new(6).expect("small"),
        5,
        opts,
    ));
    out.push(join_property_on(
        "changepoint p=4 T=5",
        &ChangepointPoset::new(4, 5),
        20,
        opts,
    ));
    out.push(join_property_on(
        "total-ranking p=7",
        &TotalRankingPoset::identity(7),
        21,
        opts,
    ));
    out
}

fn null_steps_on<P: Enumerable>(name: &str, poset: &P, opts: &SuiteOptions) -> CheckResult {
    let u = match enumerate_universe(poset, name) {
        Ok(u) => u,
        Err(e) => return CheckResult::from_error(format!("null steps {name}"), e),
    };
    let mut rng = stream_rng(opts.seed ^ 0x4e55_4c4c, 0);
    let truths: Vec<usize> = (0..8.min(u.len())).map(|_| rng.gen_range(0..u.len())).collect();
    let bad: usize = truths
        .iter()
        .map(|&t| count_null_step_violations(poset, &u, &u.elements[t]))
        .sum();
    CheckResult::new(
        format!("FD at most null steps on every path {name}"),
        bad == 0,
        format!("{} truths x {} elements, {bad} violations", truths.len(), u.len()),
    )
}

fn distinct_profiles_on<P: Enumerable>(name: &str, poset: &P) -> CheckResult {
    let u = match enumerate_universe(poset, name) {
        Ok(u) => u,
        Err(e) => return CheckResult::from_error(format!("chained covers differ {name}"), e),
    };
    let pairs = u.covering_pairs();
    let profiles: Vec<Vec<i64>> = pairs
        .par_iter()
        .map(|pr| increment_profile(poset, &u.elements, &pr.lower, &pr.upper))
        .collect();
    let mut bad = 0;
    for (i, a) in pairs.iter().enumerate() {
        for (j, b) in pairs.iter().enumerate() {
            if poset.precedes(&a.upper, &b.lower) && profiles[i] == profiles[j] {
                bad += 1;
            }
        }
    }
    CheckResult::new(
        format!("chained covers differ {name}"),
        bad == 0,
        format!(
            "{} covering pairs, {bad} chained pairs with equal profiles",
            pairs.len()
        ),
    )
}

/// Path lemmas and the lattice facts for each family.
pub fn lemma_checks(opts: &SuiteOptions) -> Vec<CheckResult> {
    let mut out = vec![
        null_steps_on("boolean p=4", &BooleanPoset::new(4), opts),
        null_steps_on("clustering p=5", &ClusteringPoset::new(5), opts),
        null_steps_on(
            "reverse-partition p=5",
            &ReversePartitionPoset::new(5).expect("small"),
            opts,
        ),
        null_steps_on("changepoint p=2 T=3", &ChangepointPoset::new(2, 3), opts),
        null_steps_on("partial-ranking p=4", &PartialRankingPoset::new(4), opts),
        null_steps_on("total-ranking p=5", &TotalRankingPoset::identity(5), opts),
        null_steps_on("cpdag p=4", &CpdagPoset::new(4).expect("small"), opts),
        distinct_profiles_on("boolean p=4", &BooleanPoset::new(4)),
        distinct_profiles_on("clustering p=4", &ClusteringPoset::new(4)),
        distinct_profiles_on("reverse-partition p=4", &ReversePartitionPoset::new(4).expect("small")),
        distinct_profiles_on("changepoint p=2 T=3", &ChangepointPoset::new(2, 3)),
        distinct_profiles_on("partial-ranking p=3", &PartialRankingPoset::new(3)),
        distinct_profiles_on("total-ranking p=4", &TotalRankingPoset::identity(4)),
        distinct_profiles_on("cpdag p=3", &CpdagPoset::new(3).expect("small")),
    ];

    let pr = PartialRankingPoset::new(3);
    let all = pr.enumerate().expect("small");
    let a = StrictPartialOrder::new(3, [(0, 1)]).unwrap();
    let b = StrictPartialOrder::new(3, [(1, 0)]).unwrap();
    let j = bruteforce_join(&pr, &all, &a, &b);
    out.push(CheckResult::new(
        "partial-ranking has no join for opposite pairs",
        j.is_none(),
        format!("join of 0>1 and 1>0: {j:?}"),
    ));

    let cpdag = CpdagPoset::new(3).expect("small");
    let all = cpdag.enumerate().expect("small");
    let c1 = Cpdag::new(3, &[(1, 0), (2, 0)], &[]).unwrap();
    let c2 = Cpdag::new(3, &[], &[(0, 1), (0, 2)]).unwrap();
    let c3 = Cpdag::new(3, &[], &[(0, 1)]).unwrap();
    let c4 = Cpdag::new(3, &[], &[(0, 2)]).unwrap();
    let meet = bruteforce_meet(&cpdag, &all, &c1, &c2);
    let join = bruteforce_join(&cpdag, &all, &c3, &c4);
    out.push(CheckResult::new(
        "cpdag has no meet for collider and undirected path",
        meet.is_none(),
        format!("meet: {meet:?}"),
    ));
    out.push(CheckResult::new(
        "cpdag has no join for two single edges",
        join.is_none(),
        format!("join: {join:?}"),
    ));
    out
}

fn classing_checks(p: usize, closure: &SubgraphClosure) -> Vec<CheckResult> {
    let mut bad_const = 0;
    let mut bad_trip = 0;
    for (key, members) in closure.classes.iter().zip(&closure.members) {
        if members.iter().any(|d| dag_to_cpdag(d).as_ref() != Ok(key)) {
            bad_const += 1;
        }
        let rebuilt = Cpdag::new(p, &key.directed_edges(), &key.undirected_edges());
        if !key.round_trips() || rebuilt.as_ref() != Ok(key) {
            bad_trip += 1;
        }
        let members_ok = crate::cpdag::class_members(key).map(|mut m| {
            m.sort();
            m == *members
        });
        if members_ok != Ok(true) {
            bad_trip += 1;
        }
    }
    let dags: usize = closure.members.iter().map(Vec::len).sum();
    let distinct = closure.classes.iter().collect::<std::collections::HashSet<_>>().len();
    vec![
        CheckResult::new(
            format!("dag_to_cpdag constant and injective on classes p={p}"),
            bad_const == 0 && distinct == closure.classes.len(),
            format!(
                "{dags} DAGs in {} classes, {bad_const} classes split",
                closure.classes.len()
            ),
        ),
        CheckResult::new(
            format!("cpdag round trip and class members p={p}"),
            bad_trip == 0,
            format!("{} classes, {bad_trip} failures", closure.classes.len()),
        ),
    ]
}

/// Equivalence classing, round-trip validity, `⪯` against the transitive
/// closure of the DAG-subgraph relation and against d-separation, and
/// componentwise against whole-graph similarity.
pub fn cpdag_checks(opts: &SuiteOptions) -> Vec<CheckResult> {
    let mut out = Vec::new();
    for p in 1..=4 {
        let closure = match SubgraphClosure::new(p) {
            Ok(c) => c,
            Err(e) => {
                out.push(CheckResult::from_error("cpdag classes", e));
                continue;
            }
        };
        out.extend(classing_checks(p, &closure));
        let n = closure.classes.len();
        let (bad, bad_dsep, literal_gaps) = (0..n)
            .into_par_iter()
            .map(|a| {
                let mut r = (0, 0, 0);
                for b in 0..n {
                    let want = closure.precedes(a, b);
                    let (ca, cb) = (&closure.members[a], &closure.members[b]);
                    r.0 += usize::from(cpdag_precedes(&closure.classes[a], &closure.classes[b]) != want);
                    r.1 += usize::from(markov_precedes_by_dseparation(&ca[0], &cb[0]) != want);
                    r.2 += usize::from(precedes_by_enumeration(ca, cb) != want);
                }
                r
            })
            .reduce(|| (0, 0, 0), |x, y| (x.0 + y.0, x.1 + y.1, x.2 + y.2));
        out.push(CheckResult::new(
            format!("cpdag precedes vs closed DAG-subgraph enumeration p={p}"),
            bad == 0,
            format!("{} ordered pairs, {bad} disagreements", n * n),
        ));
        out.push(CheckResult::new(
            format!("closed DAG-subgraph relation vs d-separation inclusion p={p}"),
            bad_dsep == 0,
            format!("{} ordered pairs, {bad_dsep} disagreements", n * n),
        ));
        out.push(CheckResult::info(
            format!("unclosed DAG-subgraph relation p={p}"),
            format!("{literal_gaps} related pairs are only reached through an intermediate class"),
        ));
    }

    // The smallest witness that the bare subgraph relation is not transitive.
    let chain = Cpdag::new(4, &[], &[(1, 3), (2, 3)]).unwrap();
    let triangle = Cpdag::new(4, &[], &[(1, 2), (1, 3), (2, 3)]).unwrap();
    let fan = Cpdag::new(4, &[(0, 3), (1, 3), (2, 3)], &[(1, 2)]).unwrap();
    let members = |c: &Cpdag| crate::cpdag::class_members(c).expect("small");
    let (mc, mt, mf) = (members(&chain), members(&triangle), members(&fan));
    let steps = precedes_by_enumeration(&mc, &mt) && precedes_by_enumeration(&mt, &mf);
    let direct = precedes_by_enumeration(&mc, &mf);
    out.push(CheckResult::new(
        "bare subgraph relation is not transitive (1-3-2 below triangle below fan)",
        steps && !direct && cpdag_precedes(&chain, &fan),
        format!(
            "steps related: {steps}, direct subgraph: {direct}, closed order: {}",
            cpdag_precedes(&chain, &fan)
        ),
    ));

    match SubgraphClosure::new(5) {
        Ok(closure) => {
            out.extend(classing_checks(5, &closure));
            let n = closure.classes.len();
            // Every related pair exhaustively, unrelated ones by sampling.
            let bad_related: usize = (0..n)
                .into_par_iter()
                .map(|a| {
                    closure
                        .up_set(a)
                        .filter(|&b| !cpdag_precedes(&closure.classes[a], &closure.classes[b]))
                        .count()
                })
                .sum();
            let related: usize = (0..n).map(|a| closure.up_set_size(a)).sum();
            out.push(CheckResult::new(
                "cpdag precedes on every related pair p=5",
                bad_related == 0,
                format!("{related} related ordered pairs of {n} classes, {bad_related} missed"),
            ));
            let samples = opts.cases.max(1) * 20;
            let (bad, bad_dsep) = (0..samples)
                .into_par_iter()
                .map(|i| {
                    let mut rng = stream_rng(opts.seed ^ 0x5052_4543, i as u64);
                    let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
                    let want = closure.precedes(a, b);
                    let got = cpdag_precedes(&closure.classes[a], &closure.classes[b]);
                    let dsep = if i % 10 == 0 {
                        markov_precedes_by_dseparation(&closure.members[a][0], &closure.members[b][0])
                    } else {
                        want
                    };
                    (usize::from(got != want), usize::from(dsep != want))
                })
                .reduce(|| (0, 0), |x, y| (x.0 + y.0, x.1 + y.1));
            out.push(CheckResult::new(
                "cpdag precedes vs closed DAG-subgraph enumeration p=5 (sampled)",
                bad == 0,
                format!("{samples} random ordered pairs, {bad} disagreements"),
            ));
            out.push(CheckResult::new(
                "closed DAG-subgraph relation vs d-separation inclusion p=5 (sampled)",
                bad_dsep == 0,
                format!("{} random ordered pairs, {bad_dsep} disagreements", samples / 10),
            ));
            let bad_rho: usize = (0..opts.cases)
                .into_par_iter()
                .map(|i| {
                    let mut rng = stream_rng(opts.seed ^ 0x5248_4f00, i as u64);
                    let (a, b) = (
                        &closure.classes[rng.gen_range(0..n)],
                        &closure.classes[rng.gen_range(0..n)],
                    );
                    let r1 = rho_cpdag(a, b).ok();
                    usize::from(r1.is_none() || r1 != rho_cpdag_direct(a, b).ok())
                })
                .sum();
            out.push(CheckResult::new(
                "cpdag similarity componentwise vs whole graph p=5 (sampled)",
                bad_rho == 0,
                format!("{} pairs, {bad_rho} disagreements", opts.cases),
            ));
        }
        Err(e) => out.push(CheckResult::from_error("cpdag p=5", e)),
    }

    let r3 = RestrictedCpdagPoset::new(3).expect("small");
    let census: HashMap<usize, usize> = (0..3)
        .map(|center| {
            let leaves = (0..3u64).filter(|&l| l as usize != center).fold(0, |m, l| m | 1 << l);
            let classes = r3
                .enumerate()
                .expect("small")
                .into_iter()
                .filter(|c| c.n_edges() == 2 && c.adjacency(center) == leaves)
                .count();
            (center, classes)
        })
        .collect();
    out.push(CheckResult::new(
        "two-leaf star classes per center p=3",
        census.values().all(|&n| n == 2),
        format!("{census:?}"),
    ));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn injected_fault_fails_the_axiom_suite() {
        let opts = SuiteOptions {
            inject_fault: true,
            ..Default::default()
        };
        let checks = axiom_checks(&opts);
        let bad: Vec<_> = checks.iter().filter(|c| !c.passed).collect();
        assert_eq!(bad.len(), 1, "{bad:?}");
        assert!(bad[0].name.contains("corrupted"));
    }
}
