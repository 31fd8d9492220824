//! `verify`: runs oracle suites and exits nonzero if any check fails.

use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use posetfd::oracle::suites::{self, Suite, SuiteOptions};
use serde::{Deserialize, Serialize};

use crate::{emit, usage};

#[derive(Debug, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct VerifyArgs {
    /// axioms, minimal-sets, normalizers, lemmas or all [default: all]
    #[arg(long)]
    pub suite: Option<String>,
    /// Random cases per family for the sampled checks [default: 1000]
    #[arg(long)]
    pub cases: Option<usize>,
    /// Adds a deliberately corrupted family as a negative control
    #[arg(long, hide = true)]
    #[serde(default)]
    pub inject_fault: bool,
    /// JSON report file
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn cmd_verify(args: VerifyArgs, seed: u64) -> Result<bool> {
    let suite: Suite = args
        .suite
        .as_deref()
        .unwrap_or("all")
        .parse()
        .map_err(|e: posetfd::Error| usage(e.to_string()))?;
    let opts = SuiteOptions {
        seed,
        cases: args.cases.unwrap_or(SuiteOptions::default().cases),
        inject_fault: args.inject_fault,
    };
    let report = suites::run(suite, &opts);
    for c in &report.checks {
        let tag = match (c.informational, c.passed) {
            (true, _) => "INFO",
            (false, true) => "PASS",
            (false, false) => "FAIL",
        };
        println!("{tag} {}: {}", c.name, c.detail);
    }
    let failed = report.failures().count();
    println!("{} checks, {failed} failed", report.checks.len());
    if let Some(path) = &args.out {
        emit(Some(path), &(serde_json::to_string_pretty(&report)? + "\n"))?;
    }
    Ok(report.passed())
}
