//! Runs one scenario and writes its files.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use axihee::blowup_lab::{run_blowup_experiment, validate_blowup_hypothesis, BlowupConfig, BlowupReport};
use axihee::dirichlet_green::biot_savart;
use axihee::entropy_lab::{budget_study, gronwall_constant};
use axihee::experiments::{calculus_suite, scheme_convergence, stability_sweep, InitialData};
use axihee::hydro_solver::{FlowState, Outcome, Trajectory};
use axihee::io::{budget_csv, diagnostics_csv, Snapshot, SnapshotKind};
use axihee::rescaled_solver::{limit_study, run_eps};
use axihee::{Error, Field2D, RadialGrid};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{InitialSpec, Kind, ScenarioConfig, SnapshotMode};

pub const SUMMARY_FORMAT: &str = "axihee-summary";
pub const SUMMARY_VERSION: u32 = 1;

/// Process exit status of a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Completed,
    SignBreach,
    BlowupDetected,
    NumericFailure,
}

impl Status {
    pub fn exit_code(self) -> u8 {
        match self {
            Status::Completed => 0,
            Status::SignBreach => 3,
            Status::BlowupDetected => 4,
            Status::NumericFailure => 5,
        }
    }

    fn of(outcome: &Outcome) -> Self {
        match outcome {
            Outcome::Completed | Outcome::Stopped { .. } => Status::Completed,
            Outcome::SignBreach { .. } => Status::SignBreach,
            Outcome::CflAbort { .. } | Outcome::NonFinite { .. } => Status::NumericFailure,
        }
    }
}

/// Failures that stop a scenario before its summary is written.
#[derive(Debug, Clone, PartialEq)]
pub enum Failure {
    Validation(String),
    Numeric(String),
    Io(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 2,
            Failure::Numeric(_) => 5,
            Failure::Io(_) => 1,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Validation(m) | Failure::Numeric(m) | Failure::Io(m) => m,
        }
    }

    pub fn context(self, ctx: &str) -> Self {
        match self {
            Failure::Validation(m) => Failure::Validation(format!("{ctx}: {m}")),
            Failure::Numeric(m) => Failure::Numeric(format!("{ctx}: {m}")),
            Failure::Io(m) => Failure::Io(format!("{ctx}: {m}")),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::NonFinite { .. } | Error::CflViolation { .. } => Failure::Numeric(e.to_string()),
            Error::Io(_) => Failure::Io(e.to_string()),
            _ => Failure::Validation(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

pub type RunResult<T> = std::result::Result<T, Failure>;

/// Result of a scenario: its status and the `result` block of the summary.
#[derive(Debug, Clone)]
pub struct ScenarioResult {
    pub status: Status,
    pub result: Value,
}

#[derive(Serialize)]
struct Summary<'a> {
    format: &'static str,
    version: u32,
    kind: Kind,
    seed: u64,
    status: Status,
    exit_code: u8,
    config: &'a ScenarioConfig,
    result: &'a Value,
}

pub fn summary_json(cfg: &ScenarioConfig, seed: u64, res: &ScenarioResult) -> String {
    let s = Summary {
        format: SUMMARY_FORMAT,
        version: SUMMARY_VERSION,
        kind: cfg.kind,
        seed,
        status: res.status,
        exit_code: res.status.exit_code(),
        config: cfg,
        result: &res.result,
    };
    serde_json::to_string_pretty(&s).expect("summary serializes") + "\n"
}

/// Runs `cfg`, writing every file into `out` (created if needed), including `summary.json`.
pub fn run_scenario(cfg: &ScenarioConfig, out: &Path, seed: u64) -> RunResult<ScenarioResult> {
    fs::create_dir_all(out).map_err(|e| Failure::Io(format!("{}: {e}", out.display())))?;
    let res = match cfg.kind {
        Kind::Hydro | Kind::Rescaled => time_run(cfg, out)?.0,
        Kind::LimitStudy => limit(cfg, out)?,
        Kind::Blowup => blowup(cfg, out)?,
        Kind::Stability => stability(cfg)?,
        Kind::EntropyBudget => entropy(cfg, out)?,
        Kind::SchemeConvergence => convergence(cfg)?,
        Kind::CalculusSuite => calculus(cfg, seed)?,
    };
    fs::write(out.join("summary.json"), summary_json(cfg, seed, &res))?;
    Ok(res)
}

/// A hydro or rescaled run that also hands back its final state.
pub fn run_time_child(cfg: &ScenarioConfig, out: &Path, seed: u64) -> RunResult<(ScenarioResult, FlowState)> {
    fs::create_dir_all(out).map_err(|e| Failure::Io(format!("{}: {e}", out.display())))?;
    let (res, last) = time_run(cfg, out)?;
    fs::write(out.join("summary.json"), summary_json(cfg, seed, &res))?;
    Ok((res, last))
}

/// `timing.json`, kept apart from the summaries so those stay reproducible byte for byte.
pub fn write_timing(out: &Path, wall_seconds: f64, children: Option<&[f64]>) -> RunResult<()> {
    let mut v = json!({ "wall_seconds": wall_seconds });
    if let Some(c) = children {
        v["children_seconds"] = json!(c);
    }
    fs::write(out.join("timing.json"), serde_json::to_string_pretty(&v).expect("timing serializes") + "\n")?;
    Ok(())
}

pub fn initial_w0(cfg: &ScenarioConfig, grid: &RadialGrid) -> RunResult<Field2D> {
    match &cfg.initial {
        Some(InitialSpec::Named(d)) => Ok(d.w0(cfg.solver.nx, grid)?),
        Some(InitialSpec::Snapshot { snapshot }) => {
            let s = Snapshot::read(snapshot).map_err(|e| Failure::from(e).context(&snapshot.display().to_string()))?;
            if (s.w.nx(), s.w.na()) != (cfg.solver.nx, cfg.solver.na) {
                return Err(Failure::Validation(format!(
                    "{}: snapshot grid {}x{} does not match configured {}x{}",
                    snapshot.display(),
                    s.w.nx(),
                    s.w.na(),
                    cfg.solver.nx,
                    cfg.solver.na
                )));
            }
            Ok(s.w)
        }
        None => Err(Failure::Validation(format!("kind {} needs initial data", cfg.kind))),
    }
}

/// `# AXIHEE v1 kind=… nx=… na=… N=… dt=… t_end=…`, the first line of every CSV.
pub fn csv_preamble(cfg: &ScenarioConfig) -> String {
    let sc = &cfg.solver;
    let mut s = format!("# AXIHEE v1 kind={}", cfg.kind);
    if let Some(e) = cfg.eps {
        let _ = write!(s, " eps={e:e}");
    }
    let _ = writeln!(s, " nx={} na={} N={} dt={:e} t_end={:e}", sc.nx, sc.na, sc.modes(), sc.dt, sc.t_end);
    s
}

fn write_csv(cfg: &ScenarioConfig, path: PathBuf, body: &str) -> RunResult<()> {
    fs::write(path, csv_preamble(cfg) + body)?;
    Ok(())
}

fn snapshot_kind(eps: f64) -> SnapshotKind {
    if eps == 0.0 {
        SnapshotKind::Hydro
    } else {
        SnapshotKind::Rescaled { eps }
    }
}

fn write_snapshots(cfg: &ScenarioConfig, out: &Path, w0: &Field2D, tr: &Trajectory, eps: f64) -> RunResult<usize> {
    let dir = out.join("snapshots");
    let kind = snapshot_kind(eps);
    let states: Vec<(f64, &Field2D)> = match cfg.snapshots {
        SnapshotMode::None => return Ok(0),
        SnapshotMode::All => tr.snapshots.iter().map(|s| (s.t, &s.w)).collect(),
        SnapshotMode::Ends => vec![(0.0, w0), (tr.final_state.t, &tr.final_state.w)],
    };
    fs::create_dir_all(&dir)?;
    for (k, (t, w)) in states.iter().enumerate() {
        Snapshot { kind, t: *t, w: (*w).clone() }.write(&dir.join(format!("w_{k:05}.txt")))?;
    }
    Ok(states.len())
}

fn time_run(cfg: &ScenarioConfig, out: &Path) -> RunResult<(ScenarioResult, FlowState)> {
    let grid = RadialGrid::new(cfg.solver.na)?;
    let w0 = initial_w0(cfg, &grid)?;
    let eps = cfg.run_eps();
    let sc = axihee::SolverConfig { keep_snapshots: cfg.snapshots == SnapshotMode::All, ..cfg.solver.clone() };
    let tr = run_eps(&sc, eps, w0.clone())?;
    write_csv(cfg, out.join("diagnostics.csv"), &diagnostics_csv(&tr.records))?;
    let written = write_snapshots(cfg, out, &w0, &tr, eps)?;
    let fold = |f: fn(f64, f64) -> f64, init: f64, get: fn(&axihee::diagnostics::DiagnosticsRecord) -> f64| {
        tr.records.iter().map(get).fold(init, f)
    };
    let result = json!({
        "outcome": tr.outcome,
        "steps_taken": tr.steps_taken,
        "final_t": tr.final_state.t,
        "records": tr.records.len(),
        "snapshots_written": written,
        "max_mean_u_drift": fold(f64::max, 0.0, |r| r.mean_u_drift),
        "min_daw": fold(f64::min, f64::INFINITY, |r| r.min_daw),
        "max_daw": fold(f64::max, f64::NEG_INFINITY, |r| r.max_daw),
        "max_cancellation": tr.records.iter().flat_map(|r| r.cancel).fold(0.0, f64::max),
        "final_l2": tr.records.last().map(|r| r.l2),
    });
    Ok((ScenarioResult { status: Status::of(&tr.outcome), result }, tr.final_state))
}

fn limit(cfg: &ScenarioConfig, out: &Path) -> RunResult<ScenarioResult> {
    let grid = RadialGrid::new(cfg.solver.na)?;
    let w0 = initial_w0(cfg, &grid)?;
    let rep = match limit_study(&cfg.solver, &cfg.eps_list, &w0) {
        Err(Error::Precondition(m)) => return Err(Failure::Numeric(m)),
        r => r?,
    };
    let mut csv = String::from("eps,limit_gap\n");
    for (e, g) in rep.eps_values.iter().zip(&rep.gaps) {
        let _ = writeln!(csv, "{e:e},{g:e}");
    }
    write_csv(cfg, out.join("limit.csv"), &csv)?;
    let result = json!({ "report": rep, "checks": { "fitted_order_at_least_2": rep.fitted_order >= 2.0 } });
    Ok(ScenarioResult { status: Status::Completed, result })
}

fn blowup(cfg: &ScenarioConfig, out: &Path) -> RunResult<ScenarioResult> {
    let grid = RadialGrid::new(cfg.solver.na)?;
    let u0 = match &cfg.initial {
        Some(InitialSpec::Named(d @ InitialData::BlowupQuadratic { .. })) => d.u0(cfg.solver.nx, &grid)?,
        _ => biot_savart(&initial_w0(cfg, &grid)?, &grid, cfg.solver.modes())?.u,
    };
    let hypothesis = validate_blowup_hypothesis(&u0, &grid, cfg.x_hat)?;
    let bc = BlowupConfig {
        solver: cfg.solver.clone(),
        x_hat: cfg.x_hat,
        guard: cfg.guard,
        require_hypothesis: cfg.require_hypothesis,
    };
    let rep: BlowupReport = run_blowup_experiment(&bc, &u0)?;
    let mut csv = String::from("t,u_inf,dxu_inf,dxp_inf,tail_frac\n");
    for i in &rep.indicators {
        let _ = writeln!(csv, "{:e},{:e},{:e},{:e},{:e}", i.t, i.u_inf, i.dxu_inf, i.dxp_inf, i.tail_frac);
    }
    write_csv(cfg, out.join("indicators.csv"), &csv)?;
    let status = match (&rep.t_star, &rep.outcome) {
        (Some(_), _) => Status::BlowupDetected,
        (None, o) => Status::of(o),
    };
    let result = json!({
        "t_star": rep.t_star,
        "dxu_growth": rep.dxu_growth(),
        "outcome": rep.outcome,
        "hypothesis": hypothesis,
        "hypothesis_passed": hypothesis.passed(),
        "samples": rep.indicators.len(),
    });
    Ok(ScenarioResult { status, result })
}

/// Fixed perturbation direction of the stability sweep.
pub fn stability_perturbation(nx: usize, grid: &RadialGrid) -> RunResult<Field2D> {
    Ok(Field2D::from_fn(nx, grid, |x, a| {
        (2.0 * PI * x).cos() * (4.0 * PI * a).sin() + 0.5 * (4.0 * PI * x).sin() * a
    })?)
}

fn stability(cfg: &ScenarioConfig) -> RunResult<ScenarioResult> {
    let grid = RadialGrid::new(cfg.solver.na)?;
    let w0 = initial_w0(cfg, &grid)?;
    let p = stability_perturbation(cfg.solver.nx, &grid)?;
    let rep = stability_sweep(&cfg.solver, &w0, &p, &cfg.deltas)?;
    let result = json!({
        "report": rep,
        "checks": {
            "identical_gap": rep.identical_gap <= 1e-12,
            "bounded": rep.constant.is_finite() && rep.spread <= 2.0,
        },
    });
    Ok(ScenarioResult { status: Status::Completed, result })
}

/// Probe steps spread evenly through the run.
pub fn probe_steps(steps: usize, count: usize, spacing: usize) -> Vec<usize> {
    (1..=count)
        .map(|k| (k * steps) / (count + 1))
        .map(|s| s.clamp(2 * spacing, steps.saturating_sub(2 * spacing)))
        .collect()
}

fn entropy(cfg: &ScenarioConfig, out: &Path) -> RunResult<ScenarioResult> {
    let grid = RadialGrid::new(cfg.solver.na)?;
    let w0 = initial_w0(cfg, &grid)?;
    let eps = cfg.eps.unwrap_or_default();
    let probes = probe_steps(cfg.solver.steps()?, cfg.probe_count, cfg.probe_spacing);
    let study = budget_study(&cfg.solver, eps, &w0, &probes, cfg.probe_spacing)?;
    write_csv(cfg, out.join("budget.csv"), &budget_csv(&study.budgets))?;
    let mut csv = String::from("t,L\n");
    for (t, l) in study.times.iter().zip(&study.l_total) {
        let _ = writeln!(csv, "{t:e},{l:e}");
    }
    write_csv(cfg, out.join("entropy.csv"), &csv)?;
    let max_res = study.budgets.iter().map(|b| b.relative_residual()).fold(0.0, f64::max);
    let max_z = study.budgets.iter().map(|b| b.z_agreement()).fold(0.0, f64::max);
    let c = gronwall_constant(&[(eps, &study.times, &study.l_total)]);
    let result = json!({
        "eps": eps,
        "kappa": study.kappa,
        "probes": study.budgets.len(),
        "max_relative_residual": max_res,
        "max_z_agreement": max_z,
        "gronwall_constant": c,
        "checks": { "budget_closes": max_res <= 1e-3, "z_forms_agree": max_z <= 1e-8 },
    });
    Ok(ScenarioResult { status: Status::Completed, result })
}

fn convergence(cfg: &ScenarioConfig) -> RunResult<ScenarioResult> {
    let grid = RadialGrid::new(cfg.solver.na)?;
    let w0 = initial_w0(cfg, &grid)?;
    let rep = scheme_convergence(&cfg.solver, &w0, &cfg.n_list)?;
    Ok(ScenarioResult { status: Status::Completed, result: json!({ "report": rep }) })
}

fn calculus(cfg: &ScenarioConfig, seed: u64) -> RunResult<ScenarioResult> {
    let rep = calculus_suite(seed, cfg.corpus_size)?;
    let checks: serde_json::Map<String, Value> = rep.checks().into_iter().map(|(k, v)| (k.to_string(), json!(v))).collect();
    Ok(ScenarioResult { status: Status::Completed, result: json!({ "report": rep, "checks": checks, "passed": rep.passed() }) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn probes_stay_inside_the_run() {
        let p = probe_steps(500, 10, 1);
        assert_eq!(p, vec![45, 90, 136, 181, 227, 272, 318, 363, 409, 454]);
        assert!(probe_steps(10, 3, 2).iter().all(|&s| (4..=6).contains(&s)));
    }

    #[test]
    fn exit_codes_are_distinct() {
        let codes = [
            Status::Completed.exit_code(),
            Failure::Validation(String::new()).exit_code(),
            Status::SignBreach.exit_code(),
            Status::BlowupDetected.exit_code(),
            Status::NumericFailure.exit_code(),
        ];
        assert_eq!(codes, [0, 2, 3, 4, 5]);
        assert_eq!(Failure::from(Error::NonFinite { t: 1.0 }).exit_code(), 5);
        assert_eq!(Failure::from(Error::Config("x".into())).exit_code(), 2);
    }
}
