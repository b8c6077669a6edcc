//! Scenario files: TOML with `kind` at the top and `[grid]`, `[time]`,
//! `[physics]`, `[study]`, `[initial]` and `[output]` sections.

use std::fmt;
use std::path::{Path, PathBuf};

use axihee::experiments::InitialData;
use axihee::SolverConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Hydro,
    Rescaled,
    LimitStudy,
    Blowup,
    Stability,
    EntropyBudget,
    SchemeConvergence,
    CalculusSuite,
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default();
        f.write_str(&s)
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    kind: Option<Kind>,
    #[serde(default)]
    grid: RawGrid,
    #[serde(default)]
    time: RawTime,
    #[serde(default)]
    physics: RawPhysics,
    #[serde(default)]
    study: RawStudy,
    initial: Option<toml::Table>,
    #[serde(default)]
    output: RawOutput,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    nx: Option<usize>,
    n_a: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTime {
    dt: Option<f64>,
    t_end: Option<f64>,
    cfl_max: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPhysics {
    #[serde(rename = "N")]
    n_modes: Option<usize>,
    sigma_min: Option<f64>,
    monitor_sign: Option<bool>,
    eps: Option<f64>,
    eps_list: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStudy {
    n_list: Option<Vec<usize>>,
    deltas: Option<Vec<f64>>,
    probe_count: Option<usize>,
    probe_spacing: Option<usize>,
    corpus_size: Option<usize>,
    guard: Option<f64>,
    x_hat: Option<usize>,
    require_hypothesis: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<PathBuf>,
    cadence: Option<usize>,
    snapshots: Option<SnapshotMode>,
}

/// Which states are written as snapshot files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnapshotMode {
    /// Every recorded state.
    All,
    /// Initial and final states.
    #[default]
    Ends,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum InitialSpec {
    Named(InitialData),
    Snapshot { snapshot: PathBuf },
}

/// Validated scenario with every default filled in.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioConfig {
    pub kind: Kind,
    pub solver: SolverConfig,
    pub eps: Option<f64>,
    pub eps_list: Vec<f64>,
    pub n_list: Vec<usize>,
    pub deltas: Vec<f64>,
    pub probe_count: usize,
    pub probe_spacing: usize,
    pub corpus_size: usize,
    pub guard: f64,
    pub x_hat: usize,
    pub require_hypothesis: bool,
    pub initial: Option<InitialSpec>,
    pub snapshots: SnapshotMode,
    /// Not echoed in summaries, so reruns into another directory stay identical.
    #[serde(skip)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

pub fn parse_config(path: &Path) -> Result<ScenarioConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config_str(&text, base).map_err(|e| ConfigError(format!("{}: {}", path.display(), e.0)))
}

/// Parses scenario text; relative snapshot paths are resolved against `base`.
pub fn parse_config_str(text: &str, base: &Path) -> Result<ScenarioConfig, ConfigError> {
    let raw: RawFile = toml::from_str(text).map_err(|e| ConfigError(e.to_string().trim_end().to_string()))?;
    let kind = match raw.kind {
        Some(k) => k,
        None => return err("missing required field `kind`"),
    };
    let d = SolverConfig::default();
    let nx = raw.grid.nx.unwrap_or(d.nx);
    let cadence = raw.output.cadence.unwrap_or(d.cadence);
    let solver = SolverConfig {
        nx,
        na: raw.grid.n_a.unwrap_or(d.na),
        n_modes: raw.physics.n_modes,
        dt: raw.time.dt.unwrap_or(d.dt),
        t_end: raw.time.t_end.unwrap_or(d.t_end),
        cfl_max: raw.time.cfl_max.unwrap_or(d.cfl_max),
        sigma_min: raw.physics.sigma_min.unwrap_or(d.sigma_min),
        monitor_sign: raw.physics.monitor_sign.unwrap_or(kind != Kind::Blowup),
        cadence,
        keep_snapshots: false,
    };
    check_kind_fields(&raw, kind)?;
    let initial = raw.initial.map(|t| initial_spec(t, base)).transpose()?;
    let s = &raw.study;
    let cfg = ScenarioConfig {
        kind,
        solver,
        eps: raw.physics.eps,
        eps_list: raw.physics.eps_list.clone().unwrap_or_default(),
        n_list: s.n_list.clone().unwrap_or_else(|| vec![8, 16, 32]),
        deltas: s.deltas.clone().unwrap_or_else(|| vec![1e-2, 1e-3, 1e-4]),
        probe_count: s.probe_count.unwrap_or(10),
        probe_spacing: s.probe_spacing.unwrap_or(1),
        corpus_size: s.corpus_size.unwrap_or(50),
        guard: s.guard.unwrap_or(0.1),
        x_hat: s.x_hat.unwrap_or(0),
        require_hypothesis: s.require_hypothesis.unwrap_or(true),
        initial,
        snapshots: raw.output.snapshots.unwrap_or_default(),
        out_dir: raw.output.dir.unwrap_or_else(|| PathBuf::from("out")),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn initial_spec(mut t: toml::Table, base: &Path) -> Result<InitialSpec, ConfigError> {
    if let Some(v) = t.remove("snapshot") {
        if let Some(extra) = t.keys().next() {
            return err(format!("[initial]: unknown key `{extra}` next to `snapshot`"));
        }
        let p = v.as_str().ok_or_else(|| ConfigError("[initial].snapshot: expected a path string".into()))?;
        return Ok(InitialSpec::Snapshot { snapshot: base.join(p) });
    }
    if !t.contains_key("name") {
        return err("[initial]: missing required field `name` (or `snapshot`)");
    }
    let data: InitialData = t.try_into().map_err(|e: toml::de::Error| ConfigError(format!("[initial]: {}", e.message())))?;
    Ok(InitialSpec::Named(data))
}

/// Fields that only make sense for some kinds are rejected elsewhere.
fn check_kind_fields(raw: &RawFile, kind: Kind) -> Result<(), ConfigError> {
    use Kind::*;
    let p = &raw.physics;
    let s = &raw.study;
    let present: [(&str, bool, &[Kind]); 10] = [
        ("physics.eps", p.eps.is_some(), &[Rescaled, EntropyBudget]),
        ("physics.eps_list", p.eps_list.is_some(), &[LimitStudy]),
        ("study.n_list", s.n_list.is_some(), &[SchemeConvergence]),
        ("study.deltas", s.deltas.is_some(), &[Stability]),
        ("study.probe_count", s.probe_count.is_some(), &[EntropyBudget]),
        ("study.probe_spacing", s.probe_spacing.is_some(), &[EntropyBudget]),
        ("study.corpus_size", s.corpus_size.is_some(), &[CalculusSuite]),
        ("study.guard", s.guard.is_some(), &[Blowup]),
        ("study.x_hat", s.x_hat.is_some(), &[Blowup]),
        ("study.require_hypothesis", s.require_hypothesis.is_some(), &[Blowup]),
    ];
    for (name, set, kinds) in present {
        if set && !kinds.contains(&kind) {
            return err(format!("`{name}` is not used by kind {kind}"));
        }
    }
    Ok(())
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let sc = &self.solver;
        if sc.nx % 2 != 0 {
            return err(format!("grid.nx must be even, got {}", sc.nx));
        }
        if self.kind != Kind::CalculusSuite {
            sc.validate().map_err(|e| ConfigError(e.to_string()))?;
            if self.initial.is_none() {
                return err(format!("missing required section [initial] for kind {}", self.kind));
            }
        }
        match self.kind {
            Kind::Rescaled | Kind::EntropyBudget => match self.eps {
                None => return err(format!("missing required field `physics.eps` for kind {}", self.kind)),
                Some(e) if !(e > 0.0 && e.is_finite()) => return err(format!("physics.eps must be positive, got {e}")),
                _ => {}
            },
            Kind::LimitStudy => {
                if self.eps_list.len() < 2 {
                    return err("physics.eps_list needs at least two values for kind limit_study");
                }
                if self.eps_list.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
                    return err("physics.eps_list values must be positive");
                }
                if self.eps_list.windows(2).any(|w| w[1] >= w[0]) {
                    return err("physics.eps_list must be strictly decreasing");
                }
            }
            Kind::SchemeConvergence => {
                if self.n_list.len() < 3 {
                    return err("study.n_list needs at least three values");
                }
                if self.n_list.windows(2).any(|w| w[1] <= w[0]) {
                    return err("study.n_list must be strictly increasing");
                }
                if let Some(&n) = self.n_list.iter().find(|&&n| n == 0 || 3 * n > sc.nx) {
                    return err(format!("study.n_list value {n} must lie in 1..=nx/3"));
                }
            }
            Kind::Stability => {
                if self.deltas.is_empty() || self.deltas.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
                    return err("study.deltas must be a non-empty list of positive values");
                }
            }
            Kind::Blowup => {
                if !(self.guard > 0.0 && self.guard < 1.0) {
                    return err(format!("study.guard must lie in (0, 1), got {}", self.guard));
                }
                if self.x_hat >= sc.nx {
                    return err(format!("study.x_hat = {} is out of range", self.x_hat));
                }
            }
            Kind::CalculusSuite => {
                if self.corpus_size == 0 {
                    return err("study.corpus_size must be positive");
                }
            }
            Kind::Hydro => {}
        }
        if self.kind == Kind::EntropyBudget && (self.probe_count == 0 || self.probe_spacing == 0) {
            return err("study.probe_count and study.probe_spacing must be positive");
        }
        Ok(())
    }

    /// One child configuration per value of `eps_list`.
    pub fn expand_eps(&self) -> Vec<ScenarioConfig> {
        self.eps_list
            .iter()
            .map(|&e| ScenarioConfig { kind: Kind::Rescaled, eps: Some(e), eps_list: Vec::new(), ..self.clone() })
            .collect()
    }

    /// `ε` of the time-dependent system this scenario integrates.
    pub fn run_eps(&self) -> f64 {
        match self.kind {
            Kind::Rescaled => self.eps.unwrap_or(0.0),
            _ => 0.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ScenarioConfig, ConfigError> {
        parse_config_str(text, Path::new("/base"))
    }

    #[test]
    fn minimal_hydro_gets_defaults() {
        let c = parse("kind = \"hydro\"\n[initial]\nname = \"shear\"\nc = 4.0\n").unwrap();
        assert_eq!(c.kind, Kind::Hydro);
        assert_eq!((c.solver.nx, c.solver.na, c.solver.modes()), (128, 64, 42));
        assert_eq!((c.solver.cfl_max, c.solver.sigma_min, c.solver.cadence), (0.5, 0.1, 10));
        assert!(c.solver.monitor_sign);
        assert_eq!(c.initial, Some(InitialSpec::Named(InitialData::Shear { c: 4.0 })));
        assert_eq!(c.snapshots, SnapshotMode::Ends);
        assert_eq!(c.out_dir, PathBuf::from("out"));
    }

    #[test]
    fn limit_study_expands_to_children() {
        let c = parse(
            "kind = \"limit_study\"\n[physics]\neps_list = [0.2, 0.1, 0.05]\n[initial]\nname = \"shear\"\nc = 4.0\n",
        )
        .unwrap();
        let kids = c.expand_eps();
        assert_eq!(kids.len(), 3);
        assert_eq!(kids.iter().map(|k| k.eps.unwrap()).collect::<Vec<_>>(), vec![0.2, 0.1, 0.05]);
        assert!(kids.iter().all(|k| k.kind == Kind::Rescaled && k.solver == c.solver));
    }

    #[test]
    fn rejects_bad_input_with_context() {
        let cases = [
            ("kind = \"hydro\"\n[grid]\nnx = 100\nn_x = 3\n", "n_x"),
            ("kind = \"hydro\"\n[grid]\nnx = 101\n[initial]\nname = \"shear\"\nc = 1.0\n", "even"),
            ("kind = \"hydro\"\n[grid]\nnx = \"big\"\n", "nx"),
            ("[grid]\nnx = 64\n", "kind"),
            ("kind = \"hydro\"\n", "[initial]"),
            ("kind = \"rescaled\"\n[initial]\nname = \"shear\"\nc = 4.0\n", "physics.eps"),
            ("kind = \"limit_study\"\n[physics]\neps_list = [0.1, 0.2]\n[initial]\nname = \"shear\"\nc = 4.0\n", "decreasing"),
            ("kind = \"hydro\"\n[physics]\neps = 0.1\n[initial]\nname = \"shear\"\nc = 4.0\n", "physics.eps"),
            ("kind = \"hydro\"\n[initial]\nname = \"shear\"\nc = 4.0\nd = 1\n", "d"),
            ("kind = \"hydro\"\n[initial]\nname = \"spiral\"\n", "spiral"),
            ("kind = \"hydro\"\n[initial]\nc = 4.0\n", "name"),
            ("kind = \"hydro\"\n[initial]\nsnapshot = \"a.txt\"\nname = \"shear\"\n", "name"),
            ("kind = \"warp\"\n", "warp"),
        ];
        for (text, needle) in cases {
            let e = parse(text).unwrap_err();
            assert!(e.0.contains(needle), "{text:?} -> {}", e.0);
        }
    }

    #[test]
    fn type_errors_carry_location() {
        let e = parse("kind = \"hydro\"\n[time]\ndt = \"small\"\n").unwrap_err();
        assert!(e.0.contains("line 3"), "{}", e.0);
    }

    #[test]
    fn snapshot_paths_resolve_against_base() {
        let c = parse("kind = \"hydro\"\n[initial]\nsnapshot = \"w0.txt\"\n").unwrap();
        assert_eq!(c.initial, Some(InitialSpec::Snapshot { snapshot: PathBuf::from("/base/w0.txt") }));
    }

    #[test]
    fn calculus_suite_needs_no_initial_data() {
        let c = parse("kind = \"calculus_suite\"\n[study]\ncorpus_size = 5\n").unwrap();
        assert_eq!(c.corpus_size, 5);
        assert!(parse("kind = \"calculus_suite\"\n[study]\ncorpus_size = 0\n").is_err());
    }

    #[test]
    fn blowup_turns_the_sign_monitor_off_by_default() {
        let c = parse("kind = \"blowup\"\n[initial]\nname = \"blowup_quadratic\"\namp = 1.0\n").unwrap();
        assert!(!c.solver.monitor_sign && c.require_hypothesis);
        assert_eq!(c.guard, 0.1);
    }
}
