//! Parameter sweeps: independent children on a worker pool, then pairwise
//! terminal gaps and a fitted convergence order.

use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use axihee::hydro_solver::FlowState;
use axihee::rescaled_solver::{fit_log_slope, limit_gap};
use axihee::{Field2D, RadialGrid};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{InitialSpec, Kind, ScenarioConfig};
use crate::scenario::{run_time_child, write_timing, Failure, RunResult, ScenarioResult};

pub const SWEEP_FORMAT: &str = "axihee-sweep";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Axis {
    #[serde(rename = "N")]
    N,
    #[serde(rename = "dt")]
    Dt,
    #[serde(rename = "resolution")]
    Resolution,
    #[serde(rename = "eps")]
    Eps,
}

impl FromStr for Axis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "N" => Ok(Axis::N),
            "dt" => Ok(Axis::Dt),
            "resolution" => Ok(Axis::Resolution),
            "eps" => Ok(Axis::Eps),
            _ => Err(format!("unknown axis `{s}` (expected N, dt, resolution or eps)")),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ChildEntry {
    pub value: f64,
    pub dir: String,
    pub exit_code: u8,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_t: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PairGap {
    pub from: f64,
    pub to: f64,
    /// `None` when either child failed.
    pub gap: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub format: &'static str,
    pub version: u32,
    pub kind: Kind,
    pub axis: Axis,
    pub values: Vec<f64>,
    pub seed: u64,
    pub children: Vec<ChildEntry>,
    /// Consecutive children for N, dt and resolution; each child against the
    /// hydrostatic reference (`to = 0`) for eps.
    pub gaps: Vec<PairGap>,
    pub fitted_order: Option<f64>,
    pub exit_code: u8,
    pub config: ScenarioConfig,
}

fn invalid<T>(msg: impl Into<String>) -> RunResult<T> {
    Err(Failure::Validation(msg.into()))
}

/// Child configuration for one axis value.
pub fn child_config(base: &ScenarioConfig, axis: Axis, value: f64) -> RunResult<ScenarioConfig> {
    let mut c = base.clone();
    let as_count = |v: f64| -> RunResult<usize> {
        if v >= 1.0 && v.fract() == 0.0 {
            Ok(v as usize)
        } else {
            invalid(format!("{axis:?} values must be positive integers, got {v}"))
        }
    };
    match axis {
        Axis::N => c.solver.n_modes = Some(as_count(value)?),
        Axis::Dt => c.solver.dt = value,
        Axis::Resolution => c.solver.nx = as_count(value)?,
        Axis::Eps => {
            c.kind = Kind::Rescaled;
            c.eps = Some(value);
            c.eps_list.clear();
        }
    }
    c.validate().map_err(|e| Failure::Validation(format!("{axis:?} = {value}: {e}")))?;
    Ok(c)
}

fn check_request(cfg: &ScenarioConfig, axis: Axis, values: &[f64]) -> RunResult<()> {
    let ok_kind = match axis {
        Axis::Eps => matches!(cfg.kind, Kind::Rescaled | Kind::LimitStudy),
        _ => matches!(cfg.kind, Kind::Hydro | Kind::Rescaled),
    };
    if !ok_kind {
        return invalid(format!("axis {axis:?} is not valid for kind {}", cfg.kind));
    }
    if values.len() < 2 {
        return invalid("a sweep needs at least two values");
    }
    let up = values.windows(2).all(|w| w[1] > w[0]);
    let down = values.windows(2).all(|w| w[1] < w[0]);
    if !(up || down) {
        return invalid("sweep values must be sorted without repeats");
    }
    if axis == Axis::Resolution {
        if matches!(cfg.initial, Some(InitialSpec::Snapshot { .. })) {
            return invalid("a resolution sweep cannot start from a snapshot");
        }
        for w in values.windows(2) {
            let (lo, hi) = (w[0].min(w[1]), w[0].max(w[1]));
            if hi % lo != 0.0 {
                return invalid(format!("resolution {hi} is not a multiple of {lo}"));
            }
        }
    }
    Ok(())
}

/// `‖w_a − w_b‖` on the coarser x-grid; the finer field is sampled at the shared nodes.
pub fn terminal_gap(a: &Field2D, b: &Field2D, grid: &RadialGrid) -> Option<f64> {
    let (coarse, fine) = if a.nx() <= b.nx() { (a, b) } else { (b, a) };
    if coarse.na() != fine.na() || fine.nx() % coarse.nx() != 0 {
        return None;
    }
    let stride = fine.nx() / coarse.nx();
    let sampled = Field2D::from_values(
        coarse.nx(),
        coarse.na(),
        (0..coarse.na()).flat_map(|j| (0..coarse.nx()).map(move |i| (i, j))).map(|(i, j)| fine.get(i * stride, j)).collect(),
    )
    .ok()?;
    Some(coarse.zip_map(&sampled, |x, y| x - y).l2_norm(grid.h()))
}

type ChildRun = RunResult<(ScenarioResult, FlowState)>;

/// Runs the sweep; an empty `values` on the eps axis takes the scenario's `eps_list`.
pub fn sweep(cfg: &ScenarioConfig, axis: Axis, values: &[f64], out: &Path, seed: u64, threads: usize) -> RunResult<SweepReport> {
    let from_list: Vec<f64>;
    let values = if values.is_empty() && axis == Axis::Eps {
        from_list = cfg.expand_eps().iter().filter_map(|c| c.eps).collect();
        &from_list[..]
    } else {
        values
    };
    check_request(cfg, axis, values)?;
    let mut jobs: Vec<(String, ScenarioConfig)> = Vec::new();
    for (k, &v) in values.iter().enumerate() {
        jobs.push((format!("child_{k:02}"), child_config(cfg, axis, v)?));
    }
    if axis == Axis::Eps {
        let reference = ScenarioConfig { kind: Kind::Hydro, eps: None, eps_list: Vec::new(), ..cfg.clone() };
        jobs.push(("reference".into(), reference));
    }
    fs::create_dir_all(out)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Failure::Io(format!("cannot start worker pool: {e}")))?;
    let t0 = Instant::now();
    let runs: Vec<(ChildRun, f64)> = pool.install(|| {
        jobs.par_iter()
            .map(|(dir, c)| {
                let start = Instant::now();
                let r = run_time_child(c, &out.join(dir), seed);
                (r, start.elapsed().as_secs_f64())
            })
            .collect()
    });
    let wall = t0.elapsed().as_secs_f64();

    let mut children = Vec::new();
    let mut finals: Vec<Option<&FlowState>> = Vec::new();
    for ((dir, c), (r, _)) in jobs.iter().zip(&runs) {
        let value = match axis {
            _ if dir == "reference" => 0.0,
            Axis::N => c.solver.modes() as f64,
            Axis::Dt => c.solver.dt,
            Axis::Resolution => c.solver.nx as f64,
            Axis::Eps => c.eps.unwrap_or(0.0),
        };
        let entry = match r {
            Ok((res, st)) => {
                let ok = res.status.exit_code() == 0;
                finals.push(ok.then_some(st));
                ChildEntry { value, dir: dir.clone(), exit_code: res.status.exit_code(), final_t: Some(st.t), error: None }
            }
            Err(f) => {
                finals.push(None);
                ChildEntry {
                    value,
                    dir: dir.clone(),
                    exit_code: f.exit_code(),
                    final_t: None,
                    error: Some(f.message().to_string()),
                }
            }
        };
        children.push(entry);
    }

    let grid = RadialGrid::new(cfg.solver.na)?;
    let mut gaps = Vec::new();
    if axis == Axis::Eps {
        let reference = finals[values.len()];
        for (k, &v) in values.iter().enumerate() {
            let gap = match (finals[k], reference) {
                (Some(e), Some(h)) => limit_gap(e, h, &grid).ok(),
                _ => None,
            };
            gaps.push(PairGap { from: v, to: 0.0, gap });
        }
    } else {
        for k in 1..values.len() {
            let gap = match (finals[k - 1], finals[k]) {
                (Some(a), Some(b)) => terminal_gap(&a.w, &b.w, &grid),
                _ => None,
            };
            gaps.push(PairGap { from: values[k - 1], to: values[k], gap });
        }
    }
    let fitted_order = fit_order(axis, &gaps);
    let exit_code = children.iter().map(|c| c.exit_code).find(|&c| c != 0).unwrap_or(0);
    let report = SweepReport {
        format: SWEEP_FORMAT,
        version: 1,
        kind: cfg.kind,
        axis,
        values: values.to_vec(),
        seed,
        children,
        gaps,
        fitted_order,
        exit_code,
        config: cfg.clone(),
    };
    let text = serde_json::to_string_pretty(&report).map_err(|e| Failure::Io(e.to_string()))? + "\n";
    fs::write(out.join("sweep.json"), text)?;
    let per_child: Vec<f64> = runs.iter().map(|r| r.1).collect();
    write_timing(out, wall, Some(&per_child))?;
    Ok(report)
}

/// Slope of `log gap` against `log h`, with `h = 1/N`, `1/nx`, `dt` or `ε`;
/// each pair is keyed by its coarser member.
fn fit_order(axis: Axis, gaps: &[PairGap]) -> Option<f64> {
    let mut hs = Vec::new();
    let mut gs = Vec::new();
    for p in gaps {
        let g = p.gap?;
        if !(g > 0.0) {
            return None;
        }
        let h = match axis {
            Axis::N | Axis::Resolution => 1.0 / p.from.min(p.to),
            Axis::Dt => p.from.max(p.to),
            Axis::Eps => p.from,
        };
        hs.push(h);
        gs.push(g);
    }
    (hs.len() >= 2).then(|| fit_log_slope(&hs, &gs))
}

pub fn parse_values(s: &str) -> Result<Vec<f64>, String> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| format!("cannot parse sweep value `{}`", t.trim())))
        .collect()
}
