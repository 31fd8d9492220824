//! `experiment`: runs a simulation design and writes the per-trial table,
//! the summary table and an optional JSON mirror of both.

use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use posetfd::bounds::CountBasis;
use posetfd::experiments::{run_trials, Design, KnobGrid, Method, MethodConfig, Profile, SummaryRow, TrialResult};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::{emit, usage};

pub const DEFAULT_TRIALS: usize = 50;

fn parse_profile(s: &str) -> posetfd::Result<Profile> {
    s.parse()
}

fn parse_basis(s: &str) -> posetfd::Result<CountBasis> {
    s.parse()
}

fn parse_json(s: &str) -> serde_json::Result<Value> {
    serde_json::from_str(s)
}

#[derive(Debug, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ExperimentArgs {
    /// ranking, clustering, causal or global-null
    #[arg(long)]
    pub design: Option<String>,
    /// desk or full [default: desk]
    #[arg(long, value_parser = parse_profile)]
    pub profile: Option<Profile>,
    /// A complete design as JSON, overriding --design and --profile,
    /// e.g. '{"design":"ranking","p":10,"n":200,"tau":0.98,"swaps":[[1,3]]}'
    #[arg(long, value_parser = parse_json)]
    pub design_json: Option<Value>,
    /// Number of trials [default: 50]
    #[arg(long)]
    pub trials: Option<usize>,
    /// Step threshold of the stable method [default: 0.3]
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Number of subsample bags, even [default: 100]
    #[arg(long)]
    pub bags: Option<usize>,
    /// Target for the expected false-discovery bound [default: 3, causal 2]
    #[arg(long)]
    pub target: Option<f64>,
    /// Knob grid from most to least conservative [default: the design's grid]
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<f64>>,
    /// Stratum sizes for the bound: enumerated or formula [default: enumerated]
    #[arg(long, value_parser = parse_basis)]
    pub basis: Option<CountBasis>,
    /// Per-trial CSV
    #[arg(long)]
    pub results: Option<PathBuf>,
    /// Summary CSV [default: stdout when no output file is given]
    #[arg(long)]
    pub summary: Option<PathBuf>,
    /// JSON mirror of the design, method, per-trial rows and summary
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// Record wall-clock runtime_ms; left blank otherwise so that reruns are byte-identical
    #[arg(long)]
    #[serde(default)]
    pub timings: bool,
}

#[derive(Debug, Serialize)]
struct Row<'a> {
    design: &'a str,
    setting: &'a str,
    seed: u64,
    method: Method,
    rank_estimate: usize,
    fd: usize,
    td: usize,
    bound: Option<f64>,
    runtime_ms: Option<f64>,
}

impl<'a> Row<'a> {
    fn new(r: &'a TrialResult, timings: bool) -> Self {
        Row {
            design: &r.design,
            setting: &r.setting,
            seed: r.seed,
            method: r.method,
            rank_estimate: r.rank_estimate,
            fd: r.fd,
            td: r.td,
            bound: r.bound,
            runtime_ms: timings.then_some(r.runtime_ms),
        }
    }
}

#[derive(Debug, Serialize)]
struct Mirror<'a> {
    design: &'a Design,
    method: &'a MethodConfig,
    trials: usize,
    seed: u64,
    results: &'a [Row<'a>],
    summary: &'a [SummaryRow],
}

fn to_csv<T: Serialize>(rows: impl IntoIterator<Item = T>, header: &[&str]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn design_of(args: &ExperimentArgs) -> Result<Design> {
    if let Some(v) = &args.design_json {
        return serde_json::from_value(v.clone()).map_err(|e| usage(format!("design-json: {e}")));
    }
    let name = args
        .design
        .as_deref()
        .ok_or_else(|| usage("missing --design or --design-json"))?;
    Design::preset(name, args.profile.unwrap_or_default()).map_err(|e| usage(e.to_string()))
}

fn method_of(args: &ExperimentArgs, design: &Design) -> Result<MethodConfig> {
    let mut m = design.default_method();
    m.alpha = args.alpha.unwrap_or(m.alpha);
    m.bags = args.bags.unwrap_or(m.bags);
    m.target = args.target.unwrap_or(m.target);
    m.basis = args.basis.unwrap_or(m.basis);
    if let Some(g) = &args.grid {
        m.grid = match m.grid {
            KnobGrid::Lambda(_) => KnobGrid::Lambda(g.clone()),
            KnobGrid::Penalty(_) => KnobGrid::Penalty(g.clone()),
            KnobGrid::Clusters(_) => KnobGrid::Clusters(
                g.iter()
                    .map(|&k| {
                        if k.fract() == 0.0 && k >= 1.0 {
                            Ok(k as usize)
                        } else {
                            Err(usage(format!("cluster count {k} is not a positive integer")))
                        }
                    })
                    .collect::<Result<_>>()?,
            ),
            KnobGrid::None => return Err(usage(format!("the {} design has no knob grid", design.name()))),
        };
    }
    Ok(m)
}

pub const RESULT_COLUMNS: [&str; 9] = [
    "design",
    "setting",
    "seed",
    "method",
    "rank_estimate",
    "fd",
    "td",
    "bound",
    "runtime_ms",
];
pub const SUMMARY_COLUMNS: [&str; 12] = [
    "design",
    "setting",
    "method",
    "trials",
    "mean_fd",
    "stderr_fd",
    "mean_td",
    "stderr_td",
    "mean_rank",
    "mean_bound",
    "p_any_fd",
    "stderr_any_fd",
];

pub fn cmd_experiment(args: ExperimentArgs, seed: u64) -> Result<bool> {
    let design = design_of(&args)?;
    let method = method_of(&args, &design)?;
    let trials = args.trials.unwrap_or(DEFAULT_TRIALS);
    let table = run_trials(&design, &method, trials, seed).map_err(|e| match e {
        posetfd::Error::Domain(m) => usage(m),
        other => other.into(),
    })?;
    let rows: Vec<Row> = table.results.iter().map(|r| Row::new(r, args.timings)).collect();
    let summary = to_csv(&table.summary, &SUMMARY_COLUMNS)?;
    if let Some(path) = &args.results {
        emit(Some(path), &to_csv(&rows, &RESULT_COLUMNS)?)?;
    }
    if let Some(path) = &args.json {
        let mirror = Mirror {
            design: &design,
            method: &method,
            trials,
            seed,
            results: &rows,
            summary: &table.summary,
        };
        emit(Some(path), &(serde_json::to_string_pretty(&mirror)? + "\n"))?;
    }
    if args.summary.is_some() || args.results.is_none() && args.json.is_none() {
        emit(args.summary.as_deref(), &summary)?;
    }
    Ok(true)
}
