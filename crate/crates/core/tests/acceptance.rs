//! Acceptance criteria 1 to 11, one pass/fail line each. Tolerances, trial
//! counts, seeds and time limits are pinned below. Runs without the libtest
//! harness so the lines always print; exits nonzero if any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use posetfd::bounds::{assumption_checks, tune_to_bound};
use posetfd::cpdag::Cpdag;
use posetfd::estimators::bradley_terry::{bradley_terry_mle_traced, total_ranking_path, DEFAULT_EPSILON};
use posetfd::estimators::{bic_hillclimb_cpdag, bradley_terry_mle, kmeans_estimate, ComparisonData, FeatureMatrix};
use posetfd::experiments::{
    gen_ranking_data, run_trials, CausalDesign, ClusteringDesign, Design, GlobalNullDesign, KnobGrid, Method,
    RankingDesign, SummaryRow,
};
use posetfd::families::partition::Partition;
use posetfd::families::total_ranking::TotalRankingPoset;
use posetfd::families::MinimalSetFamily;
use posetfd::oracle::suites::{self, CheckResult, SuiteOptions};
use posetfd::selection::{make_complementary_bags, stream_rng};
use rand_distr::{Distribution, Normal};

const SEED: u64 = 20_250_611;
const RANDOM_CASES: usize = 1000;
const NULL_TRIALS: usize = 500;
const RANKING_TRIALS: usize = 100;
const CLUSTERING_TRIALS: usize = 50;
const CAUSAL_TRIALS: usize = 50;
/// Standard errors of slack allowed on Monte Carlo means.
const MEAN_SLACK_SE: f64 = 3.0;
/// Standard errors of slack allowed on the null rejection frequency.
const RATE_SLACK_SE: f64 = 2.0;
const BT_RATIO_TOL: f64 = 1e-6;
const BT_MONOTONE_TOL: f64 = 1e-9;

struct Outcome {
    passed: bool,
    detail: String,
    notes: Vec<String>,
}

impl Outcome {
    fn from_checks(checks: Vec<CheckResult>) -> Outcome {
        let failed: Vec<String> = checks
            .iter()
            .filter(|c| !c.passed && !c.informational)
            .map(|c| format!("{}: {}", c.name, c.detail))
            .collect();
        let info = checks
            .iter()
            .filter(|c| c.informational)
            .map(|c| format!("{}: {}", c.name, c.detail));
        let scored = checks.iter().filter(|c| !c.informational).count();
        Outcome {
            passed: failed.is_empty(),
            detail: format!("{}/{scored} checks pass", scored - failed.len()),
            notes: failed.into_iter().map(|f| format!("FAILED {f}")).chain(info).collect(),
        }
    }
}

fn criterion(n: u32, title: &str, limit: Duration, run: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let out = run();
    let took = start.elapsed();
    let in_time = took <= limit;
    let ok = out.passed && in_time;
    println!(
        "criterion {n:>2} {} {title}: {} ({:.1}s of {}s{})",
        if ok { "PASS" } else { "FAIL" },
        out.detail,
        took.as_secs_f64(),
        limit.as_secs(),
        if in_time { "" } else { ", over the time limit" }
    );
    for note in out.notes {
        println!("             {note}");
    }
    ok
}

fn opts() -> SuiteOptions {
    SuiteOptions {
        seed: SEED,
        cases: RANDOM_CASES,
        inject_fault: false,
    }
}

fn row(summary: &[SummaryRow], method: Method) -> &SummaryRow {
    summary.iter().find(|s| s.method == method).expect("method present")
}

/// Mean FD of the stable method against `target` and against the reported
/// bounds, and the direction against the baseline.
fn stability_outcome(design: Design, trials: usize, check_bound: bool) -> Outcome {
    let method = design.default_method();
    let target = method.target;
    let table = match run_trials(&design, &method, trials, SEED) {
        Ok(t) => t,
        Err(e) => {
            return Outcome {
                passed: false,
                detail: format!("run failed: {e}"),
                notes: Vec::new(),
            }
        }
    };
    let stable = row(&table.summary, Method::Stable);
    let base = row(&table.summary, Method::Baseline);
    let slack = MEAN_SLACK_SE * stable.stderr_fd;
    let bound = stable.mean_bound.unwrap_or(f64::NAN);
    let under_target = stable.mean_fd <= target + slack;
    let under_bound = !check_bound || stable.mean_fd <= bound + slack;
    let direction = stable.mean_fd <= base.mean_fd;
    let consistent = table.results.iter().all(|r| r.fd + r.td == r.rank_estimate);
    let met = table
        .results
        .iter()
        .filter(|r| r.method == Method::Stable && r.bound.is_some_and(|b| b <= target))
        .count();
    Outcome {
        passed: under_target && under_bound && direction && consistent,
        detail: format!(
            "stable mean FD {:.3} ± {:.3} (target {target}, mean bound {bound:.3}), baseline mean FD {:.3} ± {:.3}",
            stable.mean_fd, stable.stderr_fd, base.mean_fd, base.stderr_fd
        ),
        notes: vec![format!(
            "{} trials of {}; stable mean TD {:.2} rank {:.2}; baseline mean TD {:.2} rank {:.2}; \
             target met by the tuned knob in {met} trials",
            trials,
            design.setting(),
            stable.mean_td,
            stable.mean_rank,
            base.mean_td,
            base.mean_rank
        )],
    }
}

/// Both sides of the null/non-null selection-rate conditions on one ranking
/// data set at the tuned lambda. Reported only; a violation does not fail.
fn ranking_assumption_notes(design: &RankingDesign) -> Vec<String> {
    let run = || -> posetfd::Result<Vec<String>> {
        let method = Design::Ranking(design.clone()).default_method();
        let KnobGrid::Lambda(grid) = &method.grid else {
            unreachable!("ranking designs tune lambda")
        };
        let data = gen_ranking_data(design, SEED)?;
        let poset = TotalRankingPoset::identity(design.p);
        let bags = make_complementary_bags(data.games.len(), method.bags, SEED)?;
        let fits = bags
            .iter()
            .map(|rows| {
                bradley_terry_mle(
                    &ComparisonData::from_games(design.p, rows.iter().map(|&g| data.games[g]))?,
                    DEFAULT_EPSILON,
                )
            })
            .collect::<posetfd::Result<Vec<_>>>()?;
        let (tuned, estimates) = tune_to_bound(&poset, grid, method.target, method.alpha, method.basis, |&lambda| {
            fits.iter()
                .map(|f| total_ranking_path(&poset, &f.weights, lambda))
                .collect()
        })?;
        let set = poset.minimal_covering_pairs()?;
        let mut notes = Vec::new();
        for c in assumption_checks(&poset, &set, &data.truth, &estimates)? {
            if c.non_null_pairs == 0 {
                continue;
            }
            notes.push(format!(
                "INFO lambda {} stratum {}: non-null rate {:.4} over {} pairs vs null rate {:.4} over {} pairs ({}); \
                 null rates span [{:.4}, {:.4}]",
                tuned.knob,
                c.rank,
                c.non_null_mean,
                c.non_null_pairs,
                c.null_mean,
                c.null_pairs,
                if c.dominance_holds() { "holds" } else { "violated" },
                c.null_min,
                c.null_max
            ));
        }
        Ok(notes)
    };
    run().unwrap_or_else(|e| vec![format!("INFO selection-rate report unavailable: {e}")])
}

fn sem(p: usize, edges: &[(usize, usize, f64)], n: usize, seed: u64) -> FeatureMatrix {
    let mut rng = stream_rng(seed, 1);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let rows = (0..n)
        .map(|_| {
            let mut x = vec![0.0; p];
            for j in 0..p {
                x[j] = noise.sample(&mut rng) + edges.iter().filter(|e| e.1 == j).map(|e| e.2 * x[e.0]).sum::<f64>();
            }
            x
        })
        .collect();
    FeatureMatrix::from_rows(rows).unwrap()
}

fn estimator_outcome() -> Outcome {
    let mut notes = Vec::new();

    let mut two = ComparisonData::new(2);
    two.add(0, 1, 7.0, 3.0).unwrap();
    let fit = bradley_terry_mle(&two, 0.0).unwrap();
    let ratio = fit.weights[0] / fit.weights[1];
    let ratio_ok = (ratio - 7.0 / 3.0).abs() <= BT_RATIO_TOL;
    notes.push(format!("two-item ratio {ratio:.9} vs 7/3"));

    let mut steps = 0;
    let mut monotone = true;
    for seed in 0..5 {
        let d = RankingDesign {
            n: 20,
            ..RankingDesign::desk()
        };
        let data = gen_ranking_data(&d, seed).unwrap();
        let cd = ComparisonData::from_games(d.p, data.games.iter().copied()).unwrap();
        let (_, trace) = bradley_terry_mle_traced(&cd, 0.01).unwrap();
        steps += trace.len() - 1;
        monotone &= trace
            .windows(2)
            .all(|w| w[1] >= w[0] - BT_MONOTONE_TOL * w[0].abs().max(1.0));
    }
    notes.push(format!("likelihood nondecreasing over {steps} MM steps: {monotone}"));

    let mut blobs_ok = 0;
    let noise = Normal::new(0.0, 0.1).unwrap();
    for seed in 0..20 {
        let mut rng = stream_rng(seed, 0);
        let mut rows = Vec::new();
        let mut truth = Vec::new();
        for (c, x) in [0.0, 10.0].into_iter().enumerate() {
            for _ in 0..15 {
                rows.push(vec![x + noise.sample(&mut rng), noise.sample(&mut rng)]);
                truth.push(c);
            }
        }
        let data = FeatureMatrix::from_rows(rows).unwrap();
        blobs_ok += usize::from(kmeans_estimate(&data, 2, seed).unwrap() == Partition::from_labels(&truth));
    }
    notes.push(format!("two planted blobs recovered exactly in {blobs_ok}/20 runs"));

    let collider = Cpdag::new(3, &[(0, 2), (1, 2)], &[]).unwrap();
    let mut colliders_ok = 0;
    for seed in 0..5 {
        let data = sem(3, &[(0, 2, 0.9), (1, 2, 0.9)], 5000, seed);
        colliders_ok += usize::from(bic_hillclimb_cpdag(&data, 1.0, seed).unwrap() == collider);
    }
    notes.push(format!("collider 0->2<-1 recovered at n=5000 in {colliders_ok}/5 runs"));

    Outcome {
        passed: ratio_ok && monotone && blobs_ok == 20 && colliders_ok == 5,
        detail: "Bradley-Terry ratio and monotonicity, k-means blobs, hill-climb collider".into(),
        notes,
    }
}

fn main() -> ExitCode {
    let minute = Duration::from_secs(60);
    let mut all = true;

    all &= criterion(1, "valuation axioms by enumeration", minute, || {
        Outcome::from_checks(suites::axiom_checks(&opts()))
    });
    all &= criterion(2, "closed-form similarity equals the meet brute force", minute, || {
        Outcome::from_checks(suites::meet_checks())
    });
    all &= criterion(3, "closed-form c_L equals brute-force maxima", minute, || {
        let mut out = Outcome::from_checks(suites::normalizer_checks());
        out.notes.push(
            "the unrestricted causal poset has no closed form; its c_L bound lines above are checked for dominance only"
                .into(),
        );
        out
    });
    all &= criterion(4, "minimal covering sets and stratum sizes", minute, || {
        Outcome::from_checks(suites::minimal_set_checks())
    });
    all &= criterion(5, "telescoping identity on random paths", minute, || {
        Outcome::from_checks(suites::telescoping_checks(&opts()))
    });
    all &= criterion(
        6,
        "testing-based control under the global null",
        Duration::from_secs(300),
        || {
            let d = GlobalNullDesign::desk();
            let design = Design::GlobalNull(d.clone());
            match run_trials(&design, &design.default_method(), NULL_TRIALS, SEED) {
                Ok(t) => {
                    let s = &t.summary[0];
                    let limit = d.fwer + RATE_SLACK_SE * s.stderr_any_fd;
                    Outcome {
                        passed: s.p_any_fd <= limit,
                        detail: format!(
                            "P(FD>0) = {:.4} ± {:.4} over {} trials, limit {limit:.4}",
                            s.p_any_fd, s.stderr_any_fd, s.trials
                        ),
                        notes: vec![format!(
                            "per-test alpha {:.6} = {}/{}",
                            d.per_test_alpha(),
                            d.fwer,
                            d.p * (d.p - 1) / 2
                        )],
                    }
                }
                Err(e) => Outcome {
                    passed: false,
                    detail: format!("run failed: {e}"),
                    notes: Vec::new(),
                },
            }
        },
    );
    all &= criterion(
        7,
        "stability-based control, ranking desk design",
        Duration::from_secs(1200),
        || {
            let mut out = stability_outcome(Design::Ranking(RankingDesign::desk()), RANKING_TRIALS, true);
            out.notes.extend(ranking_assumption_notes(&RankingDesign::desk()));
            out
        },
    );
    all &= criterion(
        8,
        "stability-based control, clustering desk design",
        Duration::from_secs(1200),
        || stability_outcome(Design::Clustering(ClusteringDesign::desk()), CLUSTERING_TRIALS, false),
    );
    all &= criterion(
        9,
        "stability-based control, causal desk design, CPDAG oracles",
        Duration::from_secs(1800),
        || {
            let mut out = stability_outcome(Design::Causal(CausalDesign::desk()), CAUSAL_TRIALS, false);
            let oracles = Outcome::from_checks(suites::cpdag_checks(&opts()));
            out.passed &= oracles.passed;
            out.detail = format!("{}; CPDAG oracles {}", out.detail, oracles.detail);
            out.notes.extend(oracles.notes);
            out
        },
    );
    all &= criterion(10, "join property and exact joins", minute, || {
        Outcome::from_checks(suites::join_checks(&opts()))
    });
    all &= criterion(11, "estimator unit checks", Duration::from_secs(300), estimator_outcome);

    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
