//! `axihee check`: the calculus suite and the structural-invariant corpus.

use std::fs;
use std::path::Path;

use axihee::experiments::{calculus_suite, invariant_corpus, CalculusReport, InvariantReport};
use serde::Serialize;

use crate::scenario::{Failure, RunResult};

pub const CALCULUS_CORPUS: usize = 50;
pub const INVARIANT_STATES: usize = 20;

#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub format: &'static str,
    pub version: u32,
    pub seed: u64,
    pub calculus: CalculusReport,
    pub invariants: InvariantReport,
    pub passed: bool,
}

impl CheckReport {
    /// One `PASS`/`FAIL` line per individual check.
    pub fn lines(&self) -> Vec<String> {
        self.calculus
            .checks()
            .into_iter()
            .map(|(n, ok)| ("calculus", n, ok))
            .chain(self.invariants.checks().into_iter().map(|(n, ok)| ("invariants", n, ok)))
            .map(|(group, name, ok)| format!("{} {group}.{name}", if ok { "PASS" } else { "FAIL" }))
            .collect()
    }
}

pub fn run_check(seed: u64, out: Option<&Path>) -> RunResult<CheckReport> {
    let calculus = calculus_suite(seed, CALCULUS_CORPUS)?;
    let invariants = invariant_corpus(seed, INVARIANT_STATES)?;
    let passed = calculus.passed() && invariants.passed();
    let rep = CheckReport { format: "axihee-check", version: 1, seed, calculus, invariants, passed };
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        let text = serde_json::to_string_pretty(&rep).map_err(|e| Failure::Io(e.to_string()))? + "\n";
        fs::write(dir.join("check.json"), text)?;
    }
    Ok(rep)
}
