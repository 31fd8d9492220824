//! `select` and `bound-report`.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use posetfd::bounds::{bound_report, estimate_qk, tune_to_bound, CountBasis, FdBoundReport};
use posetfd::cpdag::RestrictedCpdagPoset;
use posetfd::estimators::bradley_terry::{partial_ranking_path, total_ranking_path, DEFAULT_EPSILON};
use posetfd::estimators::{
    bic_hillclimb_cpdag, bradley_terry_mle, kmeans_estimate, BtWeights, ComparisonData, FeatureMatrix,
};
use posetfd::experiments::{DEFAULT_LAMBDA_GRID, DEFAULT_PENALTY_GRID};
use posetfd::families::boolean::BooleanPoset;
use posetfd::families::changepoint::ChangepointPoset;
use posetfd::families::partial_ranking::PartialRankingPoset;
use posetfd::families::partition::ClusteringPoset;
use posetfd::families::total_ranking::TotalRankingPoset;
use posetfd::families::MinimalSetFamily;
use posetfd::model::{self, Labels};
use posetfd::selection::{
    derive_seed, greedy_select, make_complementary_bags, GroupStats, SelectionConfig, SelectionTrace, StableCriterion,
    SwapPValues, TestCriterion,
};
use posetfd::GradedPoset;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::input::{read_comparisons, read_features, read_scores};
use crate::{emit, required, usage};

pub const DEFAULT_STABLE_ALPHA: f64 = 0.3;
pub const DEFAULT_TEST_ALPHA: f64 = 0.05;
pub const DEFAULT_BAGS: usize = 100;
pub const DEFAULT_TARGET: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Subset,
    Clustering,
    TotalRanking,
    PartialRanking,
    Causal,
    Changepoint,
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.to_possible_value().expect("no skipped variants").get_name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SelectMethod {
    Stable,
    Test,
}

fn parse_basis(s: &str) -> posetfd::Result<CountBasis> {
    s.parse()
}

#[derive(Debug, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct SelectArgs {
    /// Model family: total-ranking, partial-ranking, clustering or causal
    #[arg(long, value_enum)]
    pub family: Option<Family>,
    /// Step criterion; test needs a score table and total-ranking [default: stable]
    #[arg(long, value_enum)]
    pub method: Option<SelectMethod>,
    /// Comparisons CSV (rankings), feature CSV (clustering, causal) or score-table CSV (test)
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Output JSON file [default: stdout]
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Step threshold; for test, the family-wise level split over all pairs [default: 0.3 stable, 0.05 test]
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Number of subsample bags, even [default: 100]
    #[arg(long)]
    pub bags: Option<usize>,
    /// Target for the expected false-discovery bound [default: 3]
    #[arg(long)]
    pub target: Option<f64>,
    /// Knob grid from most to least conservative: lambdas, cluster counts or penalties
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<f64>>,
    /// Stratum sizes for the bound: enumerated or formula [default: enumerated]
    #[arg(long, value_parser = parse_basis)]
    pub basis: Option<CountBasis>,
    /// Item names in null order [default: order of first appearance]
    #[arg(long, value_delimiter = ',')]
    pub items: Option<Vec<String>>,
}

#[derive(Debug, Serialize)]
struct Step {
    from: String,
    to: String,
    psi: f64,
    candidates: usize,
}

#[derive(Debug, Serialize)]
struct Tuning {
    knob: f64,
    meets_target: bool,
    report: FdBoundReport,
}

#[derive(Debug, Serialize)]
struct Guarantee {
    alpha: f64,
    pairs: u128,
    per_test_alpha: f64,
    statement: String,
}

#[derive(Debug, Serialize)]
struct SelectOutput {
    family: Family,
    method: SelectMethod,
    items: Vec<String>,
    observations: usize,
    seed: u64,
    model: String,
    rank: usize,
    stop: String,
    final_min_psi: Option<f64>,
    trace: Vec<Step>,
    tuning: Option<Tuning>,
    test: Option<Guarantee>,
}

struct Selected {
    model: String,
    rank: usize,
    stop: String,
    final_min_psi: Option<f64>,
    trace: Vec<Step>,
    tuning: Option<Tuning>,
}

fn selected<P: GradedPoset>(
    poset: &P,
    trace: SelectionTrace<P::Elem>,
    enc: impl Fn(&P::Elem) -> String,
    tuning: Option<Tuning>,
) -> Selected {
    Selected {
        model: enc(&trace.final_element),
        rank: poset.rank(&trace.final_element),
        stop: trace.stop.to_string(),
        final_min_psi: trace.final_min_psi,
        trace: trace
            .steps
            .iter()
            .map(|s| Step {
                from: enc(&s.pair.lower),
                to: enc(&s.pair.upper),
                psi: s.psi,
                candidates: s.candidates,
            })
            .collect(),
        tuning,
    }
}

struct Stable {
    alpha: f64,
    bags: usize,
    target: f64,
    basis: CountBasis,
    seed: u64,
}

impl Stable {
    fn bags(&self, n: usize) -> Result<Vec<Vec<usize>>> {
        Ok(make_complementary_bags(n, self.bags, derive_seed(self.seed, 1))?)
    }

    /// Tunes the knob on the bag estimates and runs greedy selection at the
    /// tuned setting. With no observations, stops at the least element.
    fn run<P, K, F>(
        &self,
        poset: &P,
        n: usize,
        grid: &[K],
        fit: F,
        enc: impl Fn(&P::Elem) -> String,
    ) -> Result<Selected>
    where
        P: MinimalSetFamily,
        K: Copy + Into<f64>,
        F: FnMut(&K) -> posetfd::Result<Vec<P::Elem>>,
    {
        let config = SelectionConfig::new(self.alpha, self.bags, self.seed)?;
        if n == 0 {
            let trace = greedy_select(poset, &StableCriterion { estimates: Vec::new() }, &config)?;
            return Ok(selected(poset, trace, enc, None));
        }
        let (tuned, estimates) = tune_to_bound(poset, grid, self.target, self.alpha, self.basis, fit)?;
        let trace = greedy_select(poset, &StableCriterion { estimates }, &config)?;
        let tuning = Tuning {
            knob: tuned.knob.into(),
            meets_target: tuned.meets_target,
            report: tuned.report,
        };
        Ok(selected(poset, trace, enc, Some(tuning)))
    }
}

/// Observations of `rows` as points, one per variable.
fn variables_as_points(data: &FeatureMatrix, rows: &[usize]) -> posetfd::Result<FeatureMatrix> {
    let p = data.d();
    let values = (0..p).flat_map(|j| rows.iter().map(move |&i| data.row(i)[j])).collect();
    FeatureMatrix::new(p, rows.len(), values)
}

fn cluster_grid(grid: Option<&[f64]>, p: usize) -> Result<Vec<u32>> {
    match grid {
        None => Ok((1..=p as u32).rev().collect()),
        Some(g) => g
            .iter()
            .map(|&k| {
                if k.fract() == 0.0 && k >= 1.0 && k <= p as f64 {
                    Ok(k as u32)
                } else {
                    Err(usage(format!("cluster count {k} is not an integer in 1..={p}")))
                }
            })
            .collect(),
    }
}

fn labels(names: &[String]) -> Result<Labels> {
    Labels::new(names.to_vec()).map_err(|e| usage(e.to_string()))
}

fn select_stable(
    args: &SelectArgs,
    family: Family,
    input: &Path,
    stable: &Stable,
) -> Result<(Vec<String>, usize, Selected)> {
    let grid = args.grid.as_deref();
    match family {
        Family::TotalRanking | Family::PartialRanking => {
            let c = read_comparisons(input, args.items.as_deref())?;
            let (p, n) = (c.items.len(), c.games.len());
            let names = labels(&c.items)?;
            let fits: Vec<BtWeights> = if n == 0 {
                Vec::new()
            } else {
                stable
                    .bags(n)?
                    .par_iter()
                    .map(|rows| {
                        bradley_terry_mle(
                            &ComparisonData::from_games(p, rows.iter().map(|&g| c.games[g]))?,
                            DEFAULT_EPSILON,
                        )
                    })
                    .collect::<posetfd::Result<_>>()?
            };
            let lambdas = grid.map_or(DEFAULT_LAMBDA_GRID.to_vec(), <[f64]>::to_vec);
            let sel = if family == Family::TotalRanking {
                let poset = TotalRankingPoset::identity(p);
                let fit = |&l: &f64| fits.iter().map(|f| total_ranking_path(&poset, &f.weights, l)).collect();
                stable.run(&poset, n, &lambdas, fit, |x| model::encode_ranking(x, &names))?
            } else {
                let poset = PartialRankingPoset::new(p);
                let fit = |&l: &f64| Ok(fits.iter().map(|f| partial_ranking_path(&f.weights, l)).collect());
                stable.run(&poset, n, &lambdas, fit, |x| model::encode_partial_order(x, &names))?
            };
            Ok((c.items, n, sel))
        }
        Family::Clustering => {
            let f = read_features(input)?;
            let p = f.names.len();
            let names = labels(&f.names)?;
            let poset = ClusteringPoset::new(p);
            let ks = cluster_grid(grid, p)?;
            let points: Vec<FeatureMatrix> = match &f.data {
                None => Vec::new(),
                Some(d) => stable
                    .bags(d.n())?
                    .iter()
                    .map(|rows| variables_as_points(d, rows))
                    .collect::<posetfd::Result<_>>()?,
            };
            let seed = stable.seed;
            let fit = |&k: &u32| {
                points
                    .par_iter()
                    .enumerate()
                    .map(|(b, m)| kmeans_estimate(m, k as usize, derive_seed(seed, 2 + b as u64)))
                    .collect()
            };
            let n = f.data.as_ref().map_or(0, FeatureMatrix::n);
            let sel = stable.run(&poset, n, &ks, fit, |x| model::encode_partition(x, &names))?;
            Ok((f.names, n, sel))
        }
        Family::Causal => {
            let f = read_features(input)?;
            let names = labels(&f.names)?;
            let poset = RestrictedCpdagPoset::new(f.names.len())?;
            let penalties = grid.map_or(DEFAULT_PENALTY_GRID.to_vec(), <[f64]>::to_vec);
            let subsets: Vec<FeatureMatrix> = match &f.data {
                None => Vec::new(),
                Some(d) => stable.bags(d.n())?.iter().map(|rows| d.select_rows(rows)).collect(),
            };
            let seed = stable.seed;
            let fit = |&pen: &f64| {
                subsets
                    .par_iter()
                    .enumerate()
                    .map(|(b, x)| bic_hillclimb_cpdag(x, pen, derive_seed(seed, 2 + b as u64)))
                    .collect()
            };
            let n = f.data.as_ref().map_or(0, FeatureMatrix::n);
            let sel = stable.run(&poset, n, &penalties, fit, |x| model::encode_cpdag(x, &names))?;
            Ok((f.names, n, sel))
        }
        Family::Subset | Family::Changepoint => Err(usage(format!(
            "select has no base estimator for the {family} family; bound-report accepts its estimates"
        ))),
    }
}

fn select_test(args: &SelectArgs, input: &Path, seed: u64) -> Result<(Vec<String>, usize, Selected, Guarantee)> {
    let s = read_scores(input, args.items.as_deref())?;
    let p = s.groups.len();
    let names = labels(&s.groups)?;
    let n: usize = s.values.iter().map(Vec::len).sum();
    let alpha = args.alpha.unwrap_or(DEFAULT_TEST_ALPHA);
    if !(0.0..=1.0).contains(&alpha) {
        return Err(usage(format!("alpha {alpha} outside [0, 1]")));
    }
    let poset = TotalRankingPoset::identity(p);
    let pairs: u128 = poset.stratum_counts().iter().map(|c| c.enumerated).sum();
    let per_test_alpha = if pairs == 0 { alpha } else { alpha / pairs as f64 };
    let config = SelectionConfig::new(per_test_alpha, 2, seed)?;
    let trace = if n == 0 {
        greedy_select(&poset, &StableCriterion { estimates: Vec::new() }, &config)?
    } else {
        let groups = s
            .values
            .iter()
            .zip(&s.groups)
            .map(|(xs, g)| GroupStats::from_samples(xs).with_context(|| format!("group {g:?}")))
            .collect::<Result<Vec<_>>>()?;
        let criterion = TestCriterion {
            provider: SwapPValues::from_groups(&groups)?,
        };
        greedy_select(&poset, &criterion, &config)?
    };
    let guarantee = Guarantee {
        alpha,
        pairs,
        per_test_alpha,
        statement: format!("P(FD > 0) <= {alpha}: each step's p-value is compared with {alpha}/{pairs}"),
    };
    let sel = selected(&poset, trace, |x| model::encode_ranking(x, &names), None);
    Ok((s.groups, n, sel, guarantee))
}

pub fn cmd_select(args: SelectArgs, seed: u64) -> Result<bool> {
    let family = required(args.family, "family")?;
    let input = required(args.input.clone(), "input")?;
    let method = args.method.unwrap_or(SelectMethod::Stable);
    let (items, observations, sel, test) = match method {
        SelectMethod::Test if family != Family::TotalRanking => {
            return Err(usage(format!(
                "the test method needs the total-ranking family, not {family}"
            )));
        }
        SelectMethod::Test => {
            let (items, n, sel, g) = select_test(&args, &input, seed)?;
            (items, n, sel, Some(g))
        }
        SelectMethod::Stable => {
            let stable = Stable {
                alpha: args.alpha.unwrap_or(DEFAULT_STABLE_ALPHA),
                bags: args.bags.unwrap_or(DEFAULT_BAGS),
                target: args.target.unwrap_or(DEFAULT_TARGET),
                basis: args.basis.unwrap_or_default(),
                seed,
            };
            if !(0.0..0.5).contains(&stable.alpha) {
                return Err(usage(format!(
                    "alpha {} must lie in [0, 1/2) for the stable bound",
                    stable.alpha
                )));
            }
            let (items, n, sel) = select_stable(&args, family, &input, &stable)?;
            (items, n, sel, None)
        }
    };
    let out = SelectOutput {
        family,
        method,
        items,
        observations,
        seed,
        model: sel.model,
        rank: sel.rank,
        stop: sel.stop,
        final_min_psi: sel.final_min_psi,
        trace: sel.trace,
        tuning: sel.tuning,
        test,
    };
    emit(args.out.as_deref(), &(serde_json::to_string_pretty(&out)? + "\n"))?;
    Ok(true)
}

#[derive(Debug, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct BoundArgs {
    /// Model family of the estimates
    #[arg(long, value_enum)]
    pub family: Option<Family>,
    /// One encoded estimate per line; blank lines and lines starting with # are skipped
    #[arg(long)]
    pub estimates: Option<PathBuf>,
    /// Item names [default: 0..p-1]
    #[arg(long, value_delimiter = ',')]
    pub items: Option<Vec<String>>,
    /// Number of items, when --items is not given
    #[arg(long)]
    pub p: Option<usize>,
    /// Time horizon of the changepoint family
    #[arg(long)]
    pub horizon: Option<u32>,
    /// Selection threshold alpha in [0, 1/2) [default: 0.3]
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Stratum sizes: enumerated or formula [default: enumerated]
    #[arg(long, value_parser = parse_basis)]
    pub basis: Option<CountBasis>,
    /// Output JSON file [default: stdout]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct BoundOutput {
    family: Family,
    estimates: usize,
    /// `q_k` for `k = 1, 2, …`.
    q: Vec<f64>,
    report: FdBoundReport,
}

fn bound_for<P: MinimalSetFamily>(
    poset: &P,
    lines: &[(usize, &str)],
    path: &Path,
    parse: impl Fn(&str) -> posetfd::Result<P::Elem>,
    alpha: f64,
    basis: CountBasis,
) -> Result<(Vec<f64>, FdBoundReport)> {
    let estimates = lines
        .iter()
        .map(|&(line, text)| {
            parse(text)
                .and_then(|x| poset.validate(&x).map(|()| x))
                .with_context(|| format!("{}: line {line}", path.display()))
        })
        .collect::<Result<Vec<_>>>()?;
    let q = estimate_qk(poset, &estimates).into_iter().skip(1).collect();
    Ok((q, bound_report(poset, &estimates, alpha, basis)?))
}

pub fn cmd_bound_report(args: BoundArgs) -> Result<bool> {
    let family = required(args.family, "family")?;
    let path = required(args.estimates.clone(), "estimates")?;
    let names = match (&args.items, args.p) {
        (Some(items), None) => labels(items)?,
        (Some(items), Some(p)) if items.len() == p => labels(items)?,
        (Some(items), Some(p)) => return Err(usage(format!("{} items but --p {p}", items.len()))),
        (None, Some(p)) => Labels::numeric(p),
        (None, None) => return Err(usage("give --items or --p")),
    };
    let p = names.len();
    let alpha = args.alpha.unwrap_or(DEFAULT_STABLE_ALPHA);
    let basis = args.basis.unwrap_or_default();
    let text = std::fs::read_to_string(&path).with_context(|| format!("cannot read {}", path.display()))?;
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .collect();
    if lines.is_empty() {
        return Err(anyhow::anyhow!("{}: no estimates", path.display()));
    }
    let (q, report) = match family {
        Family::Subset => bound_for(
            &BooleanPoset::new(p),
            &lines,
            &path,
            |t| model::parse_subset(t, &names),
            alpha,
            basis,
        )?,
        Family::Clustering => bound_for(
            &ClusteringPoset::new(p),
            &lines,
            &path,
            |t| model::parse_partition(t, &names),
            alpha,
            basis,
        )?,
        Family::TotalRanking => {
            let poset = TotalRankingPoset::identity(p);
            bound_for(
                &poset,
                &lines,
                &path,
                |t| model::parse_ranking(t, &names, &poset),
                alpha,
                basis,
            )?
        }
        Family::PartialRanking => bound_for(
            &PartialRankingPoset::new(p),
            &lines,
            &path,
            |t| model::parse_partial_order(t, &names),
            alpha,
            basis,
        )?,
        Family::Causal => bound_for(
            &RestrictedCpdagPoset::new(p)?,
            &lines,
            &path,
            |t| model::parse_cpdag(t, &names),
            alpha,
            basis,
        )?,
        Family::Changepoint => {
            let horizon = required(args.horizon, "horizon")?;
            bound_for(
                &ChangepointPoset::new(p, horizon),
                &lines,
                &path,
                |t| model::parse_changepoint(t, horizon),
                alpha,
                basis,
            )?
        }
    };
    let out = BoundOutput {
        family,
        estimates: lines.len(),
        q,
        report,
    };
    emit(args.out.as_deref(), &(serde_json::to_string_pretty(&out)? + "\n"))?;
    Ok(true)
}
