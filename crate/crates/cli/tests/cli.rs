use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use posetfd::experiments::{
    gen_causal_data, gen_clustering_data, gen_ranking_data, CausalDesign, ClusteringDesign, RankingDesign,
};
use posetfd::families::total_ranking::TotalRankingPoset;
use posetfd::model::{self, Labels};
use posetfd::selection::stream_rng;
use rand_distr::{Distribution, Normal};
use serde_json::Value;
use tempfile::TempDir;

fn posetfd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_posetfd"))
        .args(args)
        .env_remove("POSETFD_SEED")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = posetfd(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn item(i: usize) -> String {
    format!("i{i}")
}

fn comparisons_csv(seed: u64) -> String {
    let design = RankingDesign {
        p: 6,
        n: 150,
        tau: 0.9,
        swaps: vec![(1, 3)],
    };
    let data = gen_ranking_data(&design, seed).unwrap();
    let mut text = "item_i,item_j,winner\n".to_string();
    for &(w, l) in &data.games {
        let (a, b) = (w.min(l), w.max(l));
        writeln!(text, "{},{},{}", item(a), item(b), item(w)).unwrap();
    }
    text
}

fn features_csv(names: &[String], rows: impl Iterator<Item = Vec<f64>>) -> String {
    let mut text = names.join(",") + "\n";
    for r in rows {
        let cells: Vec<String> = r.iter().map(|x| x.to_string()).collect();
        writeln!(text, "{}", cells.join(",")).unwrap();
    }
    text
}

fn items(p: usize) -> Vec<String> {
    (0..p).map(item).collect()
}

#[test]
fn stable_ranking_selection_meets_the_target_and_round_trips() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "games.csv", &comparisons_csv(3));
    let out = dir.path().join("sel.json");
    let names = items(6).join(",");
    ok(&[
        "select",
        "--family",
        "total-ranking",
        "--input",
        s(&input),
        "--items",
        &names,
        "--bags",
        "20",
        "--target",
        "3",
        "--out",
        s(&out),
    ]);
    let v = json(&out);
    let tuning = &v["tuning"];
    assert!(tuning["report"]["bound"].as_f64().unwrap() <= 3.0);
    assert_eq!(tuning["meets_target"], true);
    assert_eq!(v["observations"], 150 * 15);
    let rank = v["rank"].as_u64().unwrap() as usize;
    assert_eq!(v["trace"].as_array().unwrap().len(), rank);

    let labels = Labels::new(items(6)).unwrap();
    let poset = TotalRankingPoset::identity(6);
    let text = v["model"].as_str().unwrap();
    let parsed = model::parse_ranking(text, &labels, &poset).unwrap();
    assert_eq!(model::encode_ranking(&parsed, &labels), text);
    assert_eq!(parsed.kendall_distance(), rank);
    for step in v["trace"].as_array().unwrap() {
        assert!(step["psi"].as_f64().unwrap() <= 0.3);
        for end in ["from", "to"] {
            let t = step[end].as_str().unwrap();
            assert_eq!(
                model::encode_ranking(&model::parse_ranking(t, &labels, &poset).unwrap(), &labels),
                t
            );
        }
    }
}

#[test]
fn partial_ranking_selection_runs() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "games.csv", &comparisons_csv(4));
    let v: Value = serde_json::from_str(&ok(&[
        "select",
        "--family",
        "partial-ranking",
        "--input",
        s(&input),
        "--bags",
        "10",
    ]))
    .unwrap();
    let labels = Labels::new(items(6)).unwrap();
    let order = model::parse_partial_order(v["model"].as_str().unwrap(), &labels).unwrap();
    assert_eq!(order.len(), v["rank"].as_u64().unwrap() as usize);
}

#[test]
fn test_method_records_the_per_pair_threshold() {
    let dir = TempDir::new().unwrap();
    let mut text = "group,value\n".to_string();
    let mut rng = stream_rng(9, 0);
    let noise = Normal::new(0.0, 1.0).unwrap();
    for g in 0..6 {
        for _ in 0..20 {
            let shift = if g == 4 { 3.0 } else { 0.0 };
            writeln!(text, "g{g},{}", shift + noise.sample(&mut rng)).unwrap();
        }
    }
    let input = write(&dir, "scores.csv", &text);
    let v: Value = serde_json::from_str(&ok(&[
        "select",
        "--family",
        "total-ranking",
        "--method",
        "test",
        "--alpha",
        "0.05",
        "--input",
        s(&input),
    ]))
    .unwrap();
    assert_eq!(v["test"]["pairs"], 15);
    assert_eq!(v["test"]["per_test_alpha"].as_f64().unwrap(), 0.05 / 15.0);
    assert!(v["rank"].as_u64().unwrap() >= 1, "g4 should move up: {v}");
    assert!(v["tuning"].is_null());
}

#[test]
fn empty_input_stops_at_the_least_element() {
    let dir = TempDir::new().unwrap();
    let games = write(&dir, "games.csv", "item_i,item_j,winner\n");
    let v: Value = serde_json::from_str(&ok(&[
        "select",
        "--family",
        "total-ranking",
        "--input",
        s(&games),
        "--items",
        "a,b,c",
    ]))
    .unwrap();
    assert_eq!(v["model"], "[a, b, c]");
    assert_eq!(v["stop"], "no-data");
    assert_eq!(v["rank"], 0);

    let scores = write(&dir, "scores.csv", "group,value\n");
    let v: Value = serde_json::from_str(&ok(&[
        "select",
        "--family",
        "total-ranking",
        "--method",
        "test",
        "--input",
        s(&scores),
        "--items",
        "a,b",
    ]))
    .unwrap();
    assert_eq!(v["stop"], "no-data");
    assert_eq!(v["model"], "[a, b]");

    let features = write(&dir, "x.csv", "u,v,w\n");
    let v: Value = serde_json::from_str(&ok(&["select", "--family", "causal", "--input", s(&features)])).unwrap();
    assert_eq!(v["model"], "[]");
    assert_eq!(v["stop"], "no-data");
}

#[test]
fn clustering_selection_on_generated_data() {
    let dir = TempDir::new().unwrap();
    let design = ClusteringDesign {
        p: 6,
        layout: vec![3, 1, 1, 1],
        d: 1.0,
        n: 60,
    };
    let data = gen_clustering_data(&design, 1).unwrap();
    let names = items(2 * design.p);
    let input = write(
        &dir,
        "x.csv",
        &features_csv(&names, (0..data.data.n()).map(|i| data.data.row(i).to_vec())),
    );
    let v: Value = serde_json::from_str(&ok(&[
        "select",
        "--family",
        "clustering",
        "--input",
        s(&input),
        "--bags",
        "10",
    ]))
    .unwrap();
    let labels = Labels::new(names).unwrap();
    let part = model::parse_partition(v["model"].as_str().unwrap(), &labels).unwrap();
    assert_eq!(part.p(), 12);
    assert_eq!(12 - part.num_blocks(), v["rank"].as_u64().unwrap() as usize);
}

#[test]
fn causal_selection_on_generated_data() {
    let dir = TempDir::new().unwrap();
    let design = CausalDesign {
        p: 4,
        v: 0.5,
        n: 400,
        ..CausalDesign::desk()
    };
    let data = gen_causal_data(&design, 2).unwrap();
    let names = items(4);
    let input = write(
        &dir,
        "x.csv",
        &features_csv(&names, (0..data.data.n()).map(|i| data.data.row(i).to_vec())),
    );
    let v: Value = serde_json::from_str(&ok(&[
        "select",
        "--family",
        "causal",
        "--input",
        s(&input),
        "--bags",
        "10",
        "--target",
        "2",
    ]))
    .unwrap();
    let labels = Labels::new(names).unwrap();
    let text = v["model"].as_str().unwrap();
    let g = model::parse_cpdag(text, &labels).unwrap();
    assert_eq!(model::encode_cpdag(&g, &labels), text);
    assert!(g.round_trips());
}

#[test]
fn parse_errors_name_the_line() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "games.csv", "item_i,item_j,winner\na,b,a\na,c,zz\n");
    let out = posetfd(&["select", "--family", "total-ranking", "--input", s(&input)]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn family_and_method_mismatch_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "x.csv", "u,v\n1,2\n");
    let out = posetfd(&[
        "select",
        "--family",
        "clustering",
        "--method",
        "test",
        "--input",
        s(&input),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let out = posetfd(&["select", "--input", s(&input)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--family"));
}

#[test]
fn experiment_output_is_byte_identical_across_runs_and_thread_counts() {
    let dir = TempDir::new().unwrap();
    let run = |tag: &str, threads: &str| {
        let r = dir.path().join(format!("r{tag}.csv"));
        let m = dir.path().join(format!("m{tag}.csv"));
        let j = dir.path().join(format!("j{tag}.json"));
        ok(&[
            "--threads",
            threads,
            "--seed",
            "11",
            "experiment",
            "--design",
            "ranking",
            "--trials",
            "3",
            "--bags",
            "10",
            "--results",
            s(&r),
            "--summary",
            s(&m),
            "--json",
            s(&j),
        ]);
        [r, m, j].map(|p| std::fs::read(p).unwrap())
    };
    let a = run("a", "1");
    let b = run("b", "1");
    let c = run("c", "3");
    assert_eq!(a, b);
    assert_eq!(a, c);
    let results = String::from_utf8(a[0].clone()).unwrap();
    let mut lines = results.lines();
    assert_eq!(
        lines.next().unwrap(),
        "design,setting,seed,method,rank_estimate,fd,td,bound,runtime_ms"
    );
    assert_eq!(lines.count(), 6);
}

#[test]
fn single_trial_emits_one_row_per_method() {
    let dir = TempDir::new().unwrap();
    let r = dir.path().join("r.csv");
    ok(&[
        "experiment",
        "--design",
        "ranking",
        "--trials",
        "1",
        "--bags",
        "10",
        "--results",
        s(&r),
        "--timings",
    ]);
    let text = std::fs::read_to_string(&r).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].contains(",stable,") && rows[1].contains(",baseline,"));
    for row in rows {
        let cells: Vec<&str> = row.split(',').collect();
        let (fd, td, rank): (usize, usize, usize) = (
            cells[5].parse().unwrap(),
            cells[6].parse().unwrap(),
            cells[4].parse().unwrap(),
        );
        assert_eq!(fd + td, rank);
        assert!(cells[8].parse::<f64>().is_ok(), "timings requested: {row}");
    }
}

#[test]
fn invalid_designs_are_rejected() {
    let out = posetfd(&["experiment", "--design", "nope"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope"));
    let bad = r#"{"design":"ranking","p":3,"n":10,"tau":1.5,"swaps":[]}"#;
    let out = posetfd(&["experiment", "--design-json", bad, "--trials", "1"]);
    assert_ne!(out.status.code(), Some(0));
    let out = posetfd(&["experiment", "--design", "global-null", "--grid", "1,2"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_supplies_defaults_and_flags_win() {
    let dir = TempDir::new().unwrap();
    let r = dir.path().join("r.csv");
    let config = write(
        &dir,
        "run.json",
        &format!(
            r#"{{"seed": 5, "design": "ranking", "trials": 2, "bags": 10, "results": {:?}}}"#,
            s(&r)
        ),
    );
    ok(&["--config", s(&config), "experiment"]);
    assert_eq!(std::fs::read_to_string(&r).unwrap().lines().count(), 1 + 4);
    ok(&["--config", s(&config), "experiment", "--trials", "1"]);
    assert_eq!(std::fs::read_to_string(&r).unwrap().lines().count(), 1 + 2);

    let typo = write(&dir, "typo.json", r#"{"design": "ranking", "trails": 2}"#);
    let out = posetfd(&["--config", s(&typo), "experiment"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn seed_comes_from_flag_then_config_then_environment() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "games.csv", "item_i,item_j,winner\n");
    let args = ["select", "--family", "total-ranking", "--input", s(&input)];
    let seed_of = |extra: &[&str], env: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_posetfd"));
        cmd.args(extra).args(args).env_remove("POSETFD_SEED");
        if let Some(e) = env {
            cmd.env("POSETFD_SEED", e);
        }
        let out = cmd.output().unwrap();
        assert!(out.status.success());
        serde_json::from_slice::<Value>(&out.stdout).unwrap()["seed"]
            .as_u64()
            .unwrap()
    };
    let config = write(&dir, "c.json", r#"{"seed": 8}"#);
    assert_eq!(seed_of(&[], None), 0);
    assert_eq!(seed_of(&[], Some("7")), 7);
    assert_eq!(seed_of(&["--config", s(&config)], Some("7")), 8);
    assert_eq!(seed_of(&["--seed", "9", "--config", s(&config)], Some("7")), 9);
}

#[test]
fn bound_report_matches_hand_arithmetic() {
    let dir = TempDir::new().unwrap();
    let est = write(&dir, "est.txt", "# two bags\n[a]\n\n[a, b]\n");
    let v: Value = serde_json::from_str(&ok(&[
        "bound-report",
        "--family",
        "subset",
        "--items",
        "a,b,c",
        "--alpha",
        "0.3",
        "--estimates",
        s(&est),
    ]))
    .unwrap();
    assert_eq!(v["estimates"], 2);
    assert_eq!(v["q"][0].as_f64().unwrap(), 1.5);
    let expected = 1.5 * 1.5 / (3.0 * (1.0 - 2.0 * 0.3));
    assert!((v["report"]["bound"].as_f64().unwrap() - expected).abs() < 1e-12);

    let bad = write(&dir, "bad.txt", "[a]\n[a, q]\n");
    let out = posetfd(&[
        "bound-report",
        "--family",
        "subset",
        "--items",
        "a,b,c",
        "--estimates",
        s(&bad),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn verify_passes_and_the_negative_control_fails() {
    let out = ok(&["verify", "--suite", "normalizers"]);
    assert!(out.trim_end().ends_with("0 failed"), "{out}");
    let out = posetfd(&["verify", "--suite", "axioms", "--cases", "50", "--inject-fault"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));
    let out = posetfd(&["verify", "--suite", "bogus"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn minimal_set_count_discrepancies_are_informational() {
    let dir = TempDir::new().unwrap();
    let report = dir.path().join("v.json");
    let out = ok(&["verify", "--suite", "minimal-sets", "--out", s(&report)]);
    assert!(
        out.lines().any(|l| l.starts_with("INFO") && l.contains("clustering")),
        "{out}"
    );
    let v = json(&report);
    assert!(v["checks"]
        .as_array()
        .unwrap()
        .iter()
        .any(|c| c["informational"] == true));
}
