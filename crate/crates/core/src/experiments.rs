//! Synthetic designs with a known truth, and trial runners that score the
//! stability pipeline and a non-subsampled baseline against that truth.
//!
//! Every design has a full-scale preset and a smaller desk preset for quick
//! runs. A trial derives all of its randomness from one seed, so a single
//! row of a result table can be replayed from its `seed` column.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{tune_to_bound, CountBasis, FdBoundReport};
use crate::cpdag::{dag_to_cpdag, Cpdag, Dag, RestrictedCpdagPoset};
use crate::error::{Error, Result};
use crate::estimators::bradley_terry::{total_ranking_path, DEFAULT_EPSILON};
use crate::estimators::hillclimb::holdout_log_likelihood;
use crate::estimators::{
    bic_hillclimb_cpdag, bic_hillclimb_dag, bradley_terry_mle, kmeans_estimate, silhouette_select_k, BtWeights,
    ComparisonData, FeatureMatrix,
};
use crate::families::partition::{ClusteringPoset, Partition};
use crate::families::total_ranking::{TotalRanking, TotalRankingPoset};
use crate::families::MinimalSetFamily;
use crate::poset::{discovery_report, GradedPoset};
use crate::selection::{
    derive_seed, greedy_select, make_complementary_bags, stream_rng, GroupStats, SelectionConfig, StableCriterion,
    SwapPValues, TestCriterion,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    #[default]
    Desk,
    Full,
}

impl std::str::FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Profile::Desk),
            "full" => Ok(Profile::Full),
            other => Err(Error::Parse(format!("unknown profile {other:?}"))),
        }
    }
}

/// Bradley–Terry tournament: item `i` (one-based) has weight `τ^{i−1}`
/// before the listed positions exchange weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RankingDesign {
    pub p: usize,
    /// Games per unordered pair.
    pub n: usize,
    pub tau: f64,
    /// One-based positions whose weights are exchanged.
    pub swaps: Vec<(usize, usize)>,
}

impl RankingDesign {
    pub fn full() -> Self {
        RankingDesign {
            p: 30,
            n: 300,
            tau: 0.97,
            swaps: vec![(1, 3), (8, 10), (15, 17), (20, 22), (25, 27)],
        }
    }

    pub fn desk() -> Self {
        RankingDesign {
            p: 15,
            n: 300,
            tau: 0.97,
            swaps: vec![(1, 3), (8, 10)],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::Domain(format!("tau = {} outside (0, 1)", self.tau)));
        }
        if self.p < 2 || self.n == 0 {
            return Err(Error::Domain(format!(
                "need p ≥ 2 and n ≥ 1, got p = {}, n = {}",
                self.p, self.n
            )));
        }
        let mut seen = vec![false; self.p + 1];
        for &(a, b) in &self.swaps {
            for x in [a, b] {
                if x == 0 || x > self.p || std::mem::replace(&mut seen[x], true) {
                    return Err(Error::Domain(format!(
                        "swap ({a}, {b}) is out of range or reuses a position"
                    )));
                }
            }
        }
        Ok(())
    }

    /// The weights after the swaps, indexed by item.
    pub fn weights(&self) -> Vec<f64> {
        let mut w: Vec<f64> = (0..self.p).map(|i| self.tau.powi(i as i32)).collect();
        for &(a, b) in &self.swaps {
            w.swap(a - 1, b - 1);
        }
        w
    }

    pub fn setting(&self) -> String {
        format!("p={} tau={} n={}", self.p, self.tau, self.n)
    }
}

/// `p` two-dimensional Gaussian variables; cluster `i` (one-based) has mean
/// `(i/d, 0)` and every variable has covariance `I/4`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusteringDesign {
    pub p: usize,
    /// Cluster sizes, in order of their means.
    pub layout: Vec<usize>,
    pub d: f64,
    pub n: usize,
}

impl ClusteringDesign {
    pub fn full() -> Self {
        let mut layout = vec![5, 5];
        layout.extend([1; 10]);
        ClusteringDesign {
            p: 20,
            layout,
            d: 3.0,
            n: 90,
        }
    }

    pub fn desk() -> Self {
        ClusteringDesign {
            p: 12,
            layout: vec![4, 4, 1, 1, 1, 1],
            d: 3.0,
            n: 90,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layout.iter().sum::<usize>() != self.p || self.layout.contains(&0) {
            return Err(Error::Domain(format!(
                "layout {:?} does not split {} variables",
                self.layout, self.p
            )));
        }
        if self.p < 4 {
            return Err(Error::Domain(format!(
                "need p ≥ 4 for a silhouette grid, got {}",
                self.p
            )));
        }
        if !(self.d > 0.0 && self.d.is_finite()) {
            return Err(Error::Domain(format!("d = {} must be positive", self.d)));
        }
        if self.n < 2 {
            return Err(Error::Domain(format!("need n ≥ 2 rows, got {}", self.n)));
        }
        Ok(())
    }

    /// Zero-based cluster index of every variable.
    pub fn labels(&self) -> Vec<usize> {
        self.layout
            .iter()
            .enumerate()
            .flat_map(|(c, &size)| std::iter::repeat_n(c, size))
            .collect()
    }

    pub fn setting(&self) -> String {
        format!("p={} d={} n={}", self.p, self.d, self.n)
    }
}

/// Random linear Gaussian SEM: edges point down a random order with
/// probability `v`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CausalDesign {
    pub p: usize,
    pub v: f64,
    pub coef_low: f64,
    pub coef_high: f64,
    pub noise_var: f64,
    pub n: usize,
}

impl CausalDesign {
    pub fn full() -> Self {
        CausalDesign {
            p: 10,
            v: 0.13,
            coef_low: 0.5,
            coef_high: 0.7,
            noise_var: 0.25,
            n: 1400,
        }
    }

    pub fn desk() -> Self {
        CausalDesign {
            p: 8,
            ..CausalDesign::full()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.v) {
            return Err(Error::Domain(format!("edge probability {} outside [0, 1)", self.v)));
        }
        if !(self.coef_low <= self.coef_high && self.coef_low.is_finite() && self.coef_high.is_finite()) {
            return Err(Error::Domain(format!(
                "bad coefficient range [{}, {}]",
                self.coef_low, self.coef_high
            )));
        }
        if !(self.noise_var > 0.0 && self.noise_var.is_finite()) {
            return Err(Error::Domain(format!(
                "noise variance {} must be positive",
                self.noise_var
            )));
        }
        if self.p < 2 || self.p > 16 {
            return Err(Error::Domain(format!("p = {} outside 2..=16", self.p)));
        }
        if self.n < 4 * (self.p + 1) {
            return Err(Error::Domain(format!(
                "n = {} too small for bags of {} variables",
                self.n, self.p
            )));
        }
        Ok(())
    }

    pub fn setting(&self) -> String {
        format!("p={} v={} n={}", self.p, self.v, self.n)
    }
}

/// Total ranking under the global null: every item's scores come from the
/// same normal distribution, so every discovery is false.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GlobalNullDesign {
    pub p: usize,
    /// Scores per item.
    pub per_group: usize,
    /// Target probability of any false discovery.
    pub fwer: f64,
}

impl GlobalNullDesign {
    pub fn desk() -> Self {
        GlobalNullDesign {
            p: 8,
            per_group: 30,
            fwer: 0.05,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p < 2 || self.per_group < 2 {
            return Err(Error::Domain(format!(
                "need p ≥ 2 and two scores per item, got {self:?}"
            )));
        }
        if !(self.fwer > 0.0 && self.fwer < 1.0) {
            return Err(Error::Domain(format!("fwer {} outside (0, 1)", self.fwer)));
        }
        Ok(())
    }

    /// Per-test level `fwer / |S|` with `|S| = p(p−1)/2`.
    pub fn per_test_alpha(&self) -> f64 {
        self.fwer / (self.p * (self.p - 1) / 2) as f64
    }

    pub fn setting(&self) -> String {
        format!("p={} m={} fwer={}", self.p, self.per_group, self.fwer)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "design", rename_all = "kebab-case")]
pub enum Design {
    Ranking(RankingDesign),
    Clustering(ClusteringDesign),
    Causal(CausalDesign),
    GlobalNull(GlobalNullDesign),
}

impl Design {
    pub fn preset(name: &str, profile: Profile) -> Result<Self> {
        let desk = profile == Profile::Desk;
        Ok(match name {
            "ranking" if desk => Design::Ranking(RankingDesign::desk()),
            "ranking" => Design::Ranking(RankingDesign::full()),
            "clustering" if desk => Design::Clustering(ClusteringDesign::desk()),
            "clustering" => Design::Clustering(ClusteringDesign::full()),
            "causal" if desk => Design::Causal(CausalDesign::desk()),
            "causal" => Design::Causal(CausalDesign::full()),
            "global-null" => Design::GlobalNull(GlobalNullDesign::desk()),
            other => return Err(Error::Domain(format!("unknown design {other:?}"))),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Design::Ranking(_) => "ranking",
            Design::Clustering(_) => "clustering",
            Design::Causal(_) => "causal",
            Design::GlobalNull(_) => "global-null",
        }
    }

    pub fn setting(&self) -> String {
        match self {
            Design::Ranking(d) => d.setting(),
            Design::Clustering(d) => d.setting(),
            Design::Causal(d) => d.setting(),
            Design::GlobalNull(d) => d.setting(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Design::Ranking(d) => d.validate(),
            Design::Clustering(d) => d.validate(),
            Design::Causal(d) => d.validate(),
            Design::GlobalNull(d) => d.validate(),
        }
    }

    /// The method settings used for this design unless overridden.
    pub fn default_method(&self) -> MethodConfig {
        let base = MethodConfig {
            alpha: 0.3,
            bags: 100,
            target: 3.0,
            basis: CountBasis::Enumerated,
            grid: KnobGrid::None,
        };
        match self {
            Design::Ranking(_) => MethodConfig {
                grid: KnobGrid::Lambda(DEFAULT_LAMBDA_GRID.to_vec()),
                ..base
            },
            Design::Clustering(d) => MethodConfig {
                grid: KnobGrid::Clusters((1..=d.p).rev().collect()),
                ..base
            },
            Design::Causal(_) => MethodConfig {
                target: 2.0,
                grid: KnobGrid::Penalty(DEFAULT_PENALTY_GRID.to_vec()),
                ..base
            },
            Design::GlobalNull(_) => base,
        }
    }
}

/// Bradley–Terry path thresholds, from the null ranking towards full sorting.
pub const DEFAULT_LAMBDA_GRID: [f64; 15] = [
    1.0, 0.5, 0.3, 0.2, 0.15, 0.12, 0.1, 0.08, 0.06, 0.05, 0.04, 0.03, 0.02, 0.01, 0.0,
];
/// BIC penalty multipliers, from sparse to dense. The large values are there
/// so that tuning can reach near-empty bag estimates: at desk scale a bag
/// average of one edge already puts the bound far above single digits.
pub const DEFAULT_PENALTY_GRID: [f64; 12] = [256.0, 128.0, 64.0, 48.0, 32.0, 24.0, 16.0, 8.0, 4.0, 2.0, 1.0, 0.5];

/// A complexity knob, ordered from most to least conservative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "knob", content = "values", rename_all = "kebab-case")]
pub enum KnobGrid {
    Lambda(Vec<f64>),
    Clusters(Vec<usize>),
    Penalty(Vec<f64>),
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodConfig {
    pub alpha: f64,
    pub bags: usize,
    pub target: f64,
    pub basis: CountBasis,
    pub grid: KnobGrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Stable,
    Baseline,
    Test,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Stable => "stable",
            Method::Baseline => "baseline",
            Method::Test => "test",
        })
    }
}

/// One method's outcome on one simulated data set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialResult {
    pub design: String,
    pub setting: String,
    pub seed: u64,
    pub method: Method,
    pub rank_estimate: usize,
    pub fd: usize,
    pub td: usize,
    /// The bound the tuned stability pipeline reported.
    pub bound: Option<f64>,
    pub runtime_ms: f64,
}

/// Means and standard errors over the trials of one method.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub design: String,
    pub setting: String,
    pub method: Method,
    pub trials: usize,
    pub mean_fd: f64,
    pub stderr_fd: f64,
    pub mean_td: f64,
    pub stderr_td: f64,
    pub mean_rank: f64,
    pub mean_bound: Option<f64>,
    pub p_any_fd: f64,
    pub stderr_any_fd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialTable {
    pub results: Vec<TrialResult>,
    pub summary: Vec<SummaryRow>,
}

fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Summary rows per `(design, setting, method)`, in order of first
/// appearance in `results`.
pub fn summarize(results: &[TrialResult]) -> Vec<SummaryRow> {
    let mut keys: Vec<(&str, &str, Method)> = Vec::new();
    for r in results {
        let k = (r.design.as_str(), r.setting.as_str(), r.method);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|(design, setting, method)| {
            let rows: Vec<&TrialResult> = results
                .iter()
                .filter(|r| r.design == design && r.setting == setting && r.method == method)
                .collect();
            let col = |f: &dyn Fn(&TrialResult) -> f64| rows.iter().map(|r| f(r)).collect::<Vec<f64>>();
            let (mean_fd, stderr_fd) = mean_and_stderr(&col(&|r| r.fd as f64));
            let (mean_td, stderr_td) = mean_and_stderr(&col(&|r| r.td as f64));
            let (mean_rank, _) = mean_and_stderr(&col(&|r| r.rank_estimate as f64));
            let bounds: Vec<f64> = rows.iter().filter_map(|r| r.bound).collect();
            let mean_bound = (!bounds.is_empty()).then(|| mean_and_stderr(&bounds).0);
            let n = rows.len() as f64;
            let p_any_fd = rows.iter().filter(|r| r.fd > 0).count() as f64 / n;
            SummaryRow {
                design: design.to_string(),
                setting: setting.to_string(),
                method,
                trials: rows.len(),
                mean_fd,
                stderr_fd,
                mean_td,
                stderr_td,
                mean_rank,
                mean_bound,
                p_any_fd,
                stderr_any_fd: (p_any_fd * (1.0 - p_any_fd) / n).sqrt(),
            }
        })
        .collect()
}

pub struct RankingData {
    /// `(winner, loser)` for every game.
    pub games: Vec<(usize, usize)>,
    pub weights: Vec<f64>,
    pub truth: TotalRanking,
}

pub fn gen_ranking_data(design: &RankingDesign, seed: u64) -> Result<RankingData> {
    design.validate()?;
    let p = design.p;
    let w = design.weights();
    let mut rng = stream_rng(seed, 0);
    let mut games = Vec::with_capacity(design.n * p * (p - 1) / 2);
    for i in 0..p {
        for j in i + 1..p {
            let pi = w[i] / (w[i] + w[j]);
            for _ in 0..design.n {
                games.push(if rng.gen_bool(pi) { (i, j) } else { (j, i) });
            }
        }
    }
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| w[b].total_cmp(&w[a]).then(a.cmp(&b)));
    let truth = TotalRankingPoset::identity(p).ranking(order)?;
    Ok(RankingData {
        games,
        weights: w,
        truth,
    })
}

pub struct ClusteringData {
    /// Columns `2v` and `2v + 1` hold the two coordinates of variable `v`.
    pub data: FeatureMatrix,
    pub truth: Partition,
}

pub fn gen_clustering_data(design: &ClusteringDesign, seed: u64) -> Result<ClusteringData> {
    design.validate()?;
    let labels = design.labels();
    let noise = Normal::new(0.0, 0.5).expect("positive sd");
    let mut rng = stream_rng(seed, 0);
    let mut values = Vec::with_capacity(design.n * 2 * design.p);
    for _ in 0..design.n {
        for &c in &labels {
            values.push((c + 1) as f64 / design.d + noise.sample(&mut rng));
            values.push(noise.sample(&mut rng));
        }
    }
    Ok(ClusteringData {
        data: FeatureMatrix::new(design.n, 2 * design.p, values)?,
        truth: Partition::from_labels(&labels),
    })
}

/// The `p × 2` matrix of per-variable means over the given rows.
pub fn variable_means(data: &FeatureMatrix, rows: &[usize]) -> Result<FeatureMatrix> {
    let m = data.select_rows(rows).means();
    FeatureMatrix::new(m.len() / 2, 2, m)
}

pub struct CausalData {
    pub data: FeatureMatrix,
    pub dag: Dag,
    /// `(parent, child, coefficient)`.
    pub coefficients: Vec<(usize, usize, f64)>,
    pub truth: Cpdag,
}

pub fn gen_causal_data(design: &CausalDesign, seed: u64) -> Result<CausalData> {
    design.validate()?;
    let p = design.p;
    let mut rng = stream_rng(seed, 0);
    let mut order: Vec<usize> = (0..p).collect();
    order.shuffle(&mut rng);
    let mut coefficients = Vec::new();
    for a in 0..p {
        for b in a + 1..p {
            if rng.gen_bool(design.v) {
                coefficients.push((order[a], order[b], rng.gen_range(design.coef_low..=design.coef_high)));
            }
        }
    }
    let edges: Vec<(usize, usize)> = coefficients.iter().map(|&(i, j, _)| (i, j)).collect();
    let dag = Dag::new(p, &edges)?;
    let noise = Normal::new(0.0, design.noise_var.sqrt()).expect("positive variance");
    let mut values = Vec::with_capacity(design.n * p);
    let mut x = vec![0.0; p];
    for _ in 0..design.n {
        for &j in &order {
            x[j] = noise.sample(&mut rng)
                + coefficients
                    .iter()
                    .filter(|e| e.1 == j)
                    .map(|e| e.2 * x[e.0])
                    .sum::<f64>();
        }
        values.extend_from_slice(&x);
    }
    Ok(CausalData {
        data: FeatureMatrix::new(design.n, p, values)?,
        truth: dag_to_cpdag(&dag)?,
        dag,
        coefficients,
    })
}

/// The outcome of the tuned stability pipeline on one data set.
#[derive(Debug, Clone)]
pub struct StableOutcome<E, K> {
    pub selected: E,
    pub knob: K,
    pub report: FdBoundReport,
}

/// Tunes the knob to the target bound on the bag estimates, then runs
/// greedy selection with `Ψ_stable` on the estimates at the tuned setting.
pub fn stable_pipeline<P, K, F>(
    poset: &P,
    grid: &[K],
    method: &MethodConfig,
    seed: u64,
    fit: F,
) -> Result<StableOutcome<P::Elem, K>>
where
    P: MinimalSetFamily,
    P::Elem: Send,
    K: Clone + Sync,
    F: Fn(&K) -> Result<Vec<P::Elem>>,
{
    let (tuned, estimates) = tune_to_bound(poset, grid, method.target, method.alpha, method.basis, fit)?;
    let config = SelectionConfig::new(method.alpha, method.bags, seed)?;
    let trace = greedy_select(poset, &StableCriterion { estimates }, &config)?;
    Ok(StableOutcome {
        selected: trace.final_element,
        knob: tuned.knob,
        report: tuned.report,
    })
}

fn par_bags<T: Send>(bags: &[Vec<usize>], f: impl Fn(usize, &[usize]) -> Result<T> + Sync) -> Result<Vec<T>> {
    bags.par_iter().enumerate().map(|(b, rows)| f(b, rows)).collect()
}

struct Scored {
    method: Method,
    rank: usize,
    fd: usize,
    td: usize,
    bound: Option<f64>,
    runtime_ms: f64,
}

fn score<P: GradedPoset>(
    poset: &P,
    estimate: &P::Elem,
    truth: &P::Elem,
    method: Method,
    bound: Option<f64>,
    start: Instant,
) -> Result<Scored> {
    let r = discovery_report(poset, estimate, truth)?;
    Ok(Scored {
        method,
        rank: r.rank,
        fd: r.false_discoveries,
        td: r.true_discoveries,
        bound,
        runtime_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

fn ranking_trial(design: &RankingDesign, method: &MethodConfig, lambdas: &[f64], seed: u64) -> Result<Vec<Scored>> {
    let data = gen_ranking_data(design, derive_seed(seed, 0))?;
    let poset = TotalRankingPoset::identity(design.p);
    let start = Instant::now();
    let bags = make_complementary_bags(data.games.len(), method.bags, derive_seed(seed, 1))?;
    let fits: Vec<BtWeights> = par_bags(&bags, |_, rows| {
        let d = ComparisonData::from_games(design.p, rows.iter().map(|&g| data.games[g]))?;
        bradley_terry_mle(&d, DEFAULT_EPSILON)
    })?;
    let out = stable_pipeline(&poset, lambdas, method, seed, |&lambda| {
        fits.iter()
            .map(|f| total_ranking_path(&poset, &f.weights, lambda))
            .collect()
    })?;
    let stable = score(
        &poset,
        &out.selected,
        &data.truth,
        Method::Stable,
        Some(out.report.bound),
        start,
    )?;

    let start = Instant::now();
    let full = bradley_terry_mle(
        &ComparisonData::from_games(design.p, data.games.iter().copied())?,
        DEFAULT_EPSILON,
    )?;
    let estimate = total_ranking_path(&poset, &full.weights, 0.0)?;
    let baseline = score(&poset, &estimate, &data.truth, Method::Baseline, None, start)?;
    Ok(vec![stable, baseline])
}

fn clustering_trial(design: &ClusteringDesign, method: &MethodConfig, ks: &[usize], seed: u64) -> Result<Vec<Scored>> {
    let data = gen_clustering_data(design, derive_seed(seed, 0))?;
    let poset = ClusteringPoset::new(design.p);
    if let Some(&k) = ks.iter().find(|&&k| k == 0 || k > design.p) {
        return Err(Error::Domain(format!("k = {k} outside 1..={}", design.p)));
    }
    let start = Instant::now();
    let bags = make_complementary_bags(design.n, method.bags, derive_seed(seed, 1))?;
    let means: Vec<FeatureMatrix> = par_bags(&bags, |_, rows| variable_means(&data.data, rows))?;
    let out = stable_pipeline(&poset, ks, method, seed, |&k| {
        means
            .par_iter()
            .enumerate()
            .map(|(b, m)| kmeans_estimate(m, k, derive_seed(seed, 2 + b as u64)))
            .collect()
    })?;
    let stable = score(
        &poset,
        &out.selected,
        &data.truth,
        Method::Stable,
        Some(out.report.bound),
        start,
    )?;

    let start = Instant::now();
    let all: Vec<usize> = (0..design.n).collect();
    let m = variable_means(&data.data, &all)?;
    let grid: Vec<usize> = (2..design.p).collect();
    let k = silhouette_select_k(&m, &grid, derive_seed(seed, 2))?;
    let estimate = kmeans_estimate(&m, k, derive_seed(seed, 2))?;
    let baseline = score(&poset, &estimate, &data.truth, Method::Baseline, None, start)?;
    Ok(vec![stable, baseline])
}

/// Share of rows used for fitting in the baseline's penalty choice.
pub const HOLDOUT_TRAIN_FRACTION: f64 = 0.7;

/// Picks the penalty whose training-set hill climb has the largest held-out
/// likelihood (ties to the sparser setting) and returns that fit.
pub fn holdout_hillclimb(data: &FeatureMatrix, penalties: &[f64], seed: u64) -> Result<(f64, Cpdag)> {
    if penalties.is_empty() {
        return Err(Error::Domain("empty penalty grid".into()));
    }
    let mut rows: Vec<usize> = (0..data.n()).collect();
    rows.shuffle(&mut stream_rng(seed, 0));
    let cut = (data.n() as f64 * HOLDOUT_TRAIN_FRACTION).round() as usize;
    let (train, test) = (data.select_rows(&rows[..cut]), data.select_rows(&rows[cut..]));
    let mut best: Option<(f64, f64, Dag)> = None;
    for &pen in penalties {
        let dag = bic_hillclimb_dag(&train, pen, seed)?;
        let ll = holdout_log_likelihood(&train, &test, &dag)?;
        if best.as_ref().is_none_or(|b| ll > b.0) {
            best = Some((ll, pen, dag));
        }
    }
    let (_, pen, dag) = best.expect("nonempty grid");
    Ok((pen, dag_to_cpdag(&dag)?))
}

fn causal_trial(design: &CausalDesign, method: &MethodConfig, penalties: &[f64], seed: u64) -> Result<Vec<Scored>> {
    let data = gen_causal_data(design, derive_seed(seed, 0))?;
    let poset = RestrictedCpdagPoset::new(design.p)?;
    let start = Instant::now();
    let bags = make_complementary_bags(design.n, method.bags, derive_seed(seed, 1))?;
    let subsets: Vec<FeatureMatrix> = bags.iter().map(|rows| data.data.select_rows(rows)).collect();
    let out = stable_pipeline(&poset, penalties, method, seed, |&pen| {
        subsets
            .par_iter()
            .enumerate()
            .map(|(b, x)| bic_hillclimb_cpdag(x, pen, derive_seed(seed, 2 + b as u64)))
            .collect()
    })?;
    let stable = score(
        &poset,
        &out.selected,
        &data.truth,
        Method::Stable,
        Some(out.report.bound),
        start,
    )?;

    let start = Instant::now();
    let (_, estimate) = holdout_hillclimb(&data.data, penalties, derive_seed(seed, 2))?;
    let baseline = score(&poset, &estimate, &data.truth, Method::Baseline, None, start)?;
    Ok(vec![stable, baseline])
}

fn global_null_trial(design: &GlobalNullDesign, seed: u64) -> Result<Vec<Scored>> {
    let mut rng = stream_rng(seed, 0);
    let start = Instant::now();
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let groups = (0..design.p)
        .map(|_| {
            let xs: Vec<f64> = (0..design.per_group).map(|_| noise.sample(&mut rng)).collect();
            GroupStats::from_samples(&xs)
        })
        .collect::<Result<Vec<_>>>()?;
    let poset = TotalRankingPoset::identity(design.p);
    let criterion = TestCriterion {
        provider: SwapPValues::from_groups(&groups)?,
    };
    let config = SelectionConfig::new(design.per_test_alpha(), 2, seed)?;
    let trace = greedy_select(&poset, &criterion, &config)?;
    Ok(vec![score(
        &poset,
        &trace.final_element,
        &poset.least(),
        Method::Test,
        None,
        start,
    )?])
}

fn pairing_error(design: &Design, grid: &KnobGrid) -> Error {
    Error::Domain(format!("knob grid {grid:?} does not fit the {} design", design.name()))
}

/// Runs `trials` independent trials in parallel; trial `t` uses the derived
/// seed `derive_seed(seed, t)`, which is recorded in its rows.
pub fn run_trials(design: &Design, method: &MethodConfig, trials: usize, seed: u64) -> Result<TrialTable> {
    design.validate()?;
    match (design, &method.grid) {
        (Design::Ranking(_), KnobGrid::Lambda(g)) | (Design::Causal(_), KnobGrid::Penalty(g)) if g.is_empty() => {
            return Err(Error::Domain("empty knob grid".into()))
        }
        (Design::Clustering(_), KnobGrid::Clusters(g)) if g.is_empty() => {
            return Err(Error::Domain("empty knob grid".into()))
        }
        (Design::Ranking(_), KnobGrid::Lambda(_))
        | (Design::Clustering(_), KnobGrid::Clusters(_))
        | (Design::Causal(_), KnobGrid::Penalty(_))
        | (Design::GlobalNull(_), KnobGrid::None) => {}
        (d, g) => return Err(pairing_error(d, g)),
    }
    let per_trial: Vec<(u64, Vec<Scored>)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let s = derive_seed(seed, t as u64);
            let rows = match (design, &method.grid) {
                (Design::Ranking(d), KnobGrid::Lambda(g)) => ranking_trial(d, method, g, s),
                (Design::Clustering(d), KnobGrid::Clusters(g)) => clustering_trial(d, method, g, s),
                (Design::Causal(d), KnobGrid::Penalty(g)) => causal_trial(d, method, g, s),
                (Design::GlobalNull(d), _) => global_null_trial(d, s),
                (d, g) => Err(pairing_error(d, g)),
            }?;
            Ok((s, rows))
        })
        .collect::<Result<_>>()?;
    let (name, setting) = (design.name().to_string(), design.setting());
    let results: Vec<TrialResult> = per_trial
        .into_iter()
        .flat_map(|(s, rows)| {
            let (name, setting) = (name.clone(), setting.clone());
            rows.into_iter().map(move |r| TrialResult {
                design: name.clone(),
                setting: setting.clone(),
                seed: s,
                method: r.method,
                rank_estimate: r.rank,
                fd: r.fd,
                td: r.td,
                bound: r.bound,
                runtime_ms: r.runtime_ms,
            })
        })
        .collect();
    let summary = summarize(&results);
    Ok(TrialTable { results, summary })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_weight_is_one_and_swaps_exchange() {
        let d = RankingDesign::desk();
        let w = d.weights();
        assert_eq!(w[2], 1.0);
        let tau = |k: i32| 0.97f64.powi(k);
        for (i, k) in [(0, 2), (1, 1), (7, 9), (9, 7), (14, 14)] {
            assert!((w[i] - tau(k)).abs() < 1e-15, "item {i}");
        }
    }

    /// Inversions counted pair by pair on the swapped weight sequence.
    #[test]
    fn truth_rank_counts_inversions_of_the_swapped_weights() {
        for d in [RankingDesign::desk(), RankingDesign::full()] {
            let data = gen_ranking_data(&RankingDesign { n: 1, ..d.clone() }, 0).unwrap();
            let w = d.weights();
            let inversions = (0..d.p)
                .flat_map(|a| (a + 1..d.p).map(move |b| (a, b)))
                .filter(|&(a, b)| w[b] > w[a])
                .count();
            let poset = TotalRankingPoset::identity(d.p);
            assert_eq!(poset.rank(&data.truth), inversions);
            assert_eq!(inversions, 3 * d.swaps.len());
        }
    }

    #[test]
    fn win_frequencies_match_the_weights() {
        let d = RankingDesign::desk();
        let data = gen_ranking_data(&d, 4).unwrap();
        let w = &data.weights;
        for (i, j) in [(0, 1), (0, 2), (3, 14), (7, 9)] {
            let won = data.games.iter().filter(|&&g| g == (i, j)).count() as f64;
            let pi = w[i] / (w[i] + w[j]);
            let sd = (pi * (1.0 - pi) / d.n as f64).sqrt();
            assert!((won / d.n as f64 - pi).abs() < 3.0 * sd, "pair ({i}, {j})");
        }
    }

    #[test]
    fn generators_are_deterministic_per_seed() {
        let r1 = gen_ranking_data(&RankingDesign::desk(), 9).unwrap();
        let r2 = gen_ranking_data(&RankingDesign::desk(), 9).unwrap();
        assert_eq!(r1.games, r2.games);
        let c1 = gen_causal_data(&CausalDesign::desk(), 9).unwrap();
        let c2 = gen_causal_data(&CausalDesign::desk(), 9).unwrap();
        assert_eq!((c1.data, c1.truth), (c2.data, c2.truth));
    }

    #[test]
    fn cluster_means_sit_on_the_grid() {
        let d = ClusteringDesign::desk();
        let data = gen_clustering_data(&d, 2).unwrap();
        let all: Vec<usize> = (0..d.n).collect();
        let m = variable_means(&data.data, &all).unwrap();
        let tol = 3.0 * 0.5 / (d.n as f64).sqrt();
        for (v, c) in d.labels().into_iter().enumerate() {
            assert!((m.row(v)[0] - (c + 1) as f64 / d.d).abs() < tol);
            assert!(m.row(v)[1].abs() < tol);
        }
        let full = ClusteringDesign::full();
        let truth = gen_clustering_data(&full, 0).unwrap().truth;
        assert_eq!(ClusteringPoset::new(20).rank(&truth), 20 - 12);
    }

    #[test]
    fn causal_generator_contract() {
        let empty = CausalDesign {
            v: 0.0,
            ..CausalDesign::desk()
        };
        assert_eq!(gen_causal_data(&empty, 1).unwrap().truth, Cpdag::empty(8));
        let d = CausalDesign::full();
        let mut edges = 0usize;
        let seeds = 200;
        for s in 0..seeds {
            let g = gen_causal_data(&CausalDesign { n: 44, ..d.clone() }, s).unwrap();
            assert!(g.coefficients.iter().all(|c| (0.5..=0.7).contains(&c.2)));
            assert_eq!(g.truth.n_edges(), g.coefficients.len());
            edges += g.coefficients.len();
        }
        let pairs = (d.p * (d.p - 1) / 2 * seeds as usize) as f64;
        let sd = (pairs * d.v * (1.0 - d.v)).sqrt();
        assert!((edges as f64 - pairs * d.v).abs() < 3.0 * sd);
    }

    #[test]
    fn zero_trials_give_empty_tables() {
        let d = Design::Ranking(RankingDesign::desk());
        let t = run_trials(&d, &d.default_method(), 0, 0).unwrap();
        assert!(t.results.is_empty() && t.summary.is_empty());
    }

    #[test]
    fn mismatched_knobs_are_rejected() {
        let d = Design::Ranking(RankingDesign::desk());
        let m = Design::Causal(CausalDesign::desk()).default_method();
        assert!(matches!(run_trials(&d, &m, 1, 0), Err(Error::Domain(_))));
        let bad = Design::Ranking(RankingDesign {
            tau: 1.5,
            ..RankingDesign::desk()
        });
        assert!(run_trials(&bad, &d.default_method(), 1, 0).is_err());
    }

    #[test]
    fn one_small_trial_per_method() {
        let d = Design::Ranking(RankingDesign {
            p: 6,
            n: 40,
            tau: 0.9,
            swaps: vec![(1, 3)],
        });
        let m = MethodConfig {
            bags: 10,
            ..d.default_method()
        };
        let t = run_trials(&d, &m, 1, 3).unwrap();
        let methods: Vec<Method> = t.results.iter().map(|r| r.method).collect();
        assert_eq!(methods, vec![Method::Stable, Method::Baseline]);
        for r in &t.results {
            assert_eq!(r.fd + r.td, r.rank_estimate);
        }
        assert!(t.results[0].bound.is_some() && t.results[1].bound.is_none());
        let again = run_trials(&d, &m, 1, 3).unwrap();
        let strip = |t: &TrialTable| {
            t.results
                .iter()
                .map(|r| (r.seed, r.fd, r.td, r.bound))
                .collect::<Vec<_>>()
        };
        assert_eq!(strip(&t), strip(&again));
    }

    #[test]
    fn summary_recomputes_from_rows() {
        let row = |fd: usize, td: usize, method| TrialResult {
            design: "x".into(),
            setting: "s".into(),
            seed: 0,
            method,
            rank_estimate: fd + td,
            fd,
            td,
            bound: (method == Method::Stable).then_some(1.0),
            runtime_ms: 0.0,
        };
        let rows = vec![
            row(0, 2, Method::Stable),
            row(2, 1, Method::Baseline),
            row(1, 1, Method::Stable),
        ];
        let s = summarize(&rows);
        assert_eq!(s.len(), 2);
        assert_eq!(
            (s[0].method, s[0].trials, s[0].mean_fd, s[0].mean_td),
            (Method::Stable, 2, 0.5, 1.5)
        );
        assert!((s[0].stderr_fd - 0.5).abs() < 1e-12);
        assert_eq!((s[0].p_any_fd, s[0].mean_bound), (0.5, Some(1.0)));
        assert_eq!((s[1].mean_fd, s[1].mean_bound), (2.0, None));
    }

    #[test]
    fn holdout_baseline_prefers_the_planted_edge() {
        let d = CausalDesign {
            p: 3,
            v: 0.9,
            n: 2000,
            ..CausalDesign::desk()
        };
        let data = gen_causal_data(&d, 5).unwrap();
        let (_, g) = holdout_hillclimb(&data.data, &DEFAULT_PENALTY_GRID, 0).unwrap();
        assert_eq!(g.n_edges(), data.truth.n_edges());
    }
}
