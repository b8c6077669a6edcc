//! Blowup experiments for the hydrostatic system without the sign condition.
//!
//! Breakdown is declared when the share of x-spectral energy of `w` in the top
//! third of resolved modes reaches a threshold, not when a norm gets large.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::hydro_solver::{integrate, recover_pressure, FlowState, Outcome, SolverConfig};
use crate::radial_calculus::{diff_a_field, extrapolate_boundary, RadialGrid};
use crate::spectral_x::{Field2D, SpectralX};

/// Tolerance shared by the three clauses.
pub const HYPOTHESIS_TOL: f64 = 1e-8;

/// Clause-by-clause result of the blowup hypothesis at one x-node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub x_hat: usize,
    /// `max_a |u₀(x̂, a) − mean|`.
    pub constancy_dev: f64,
    /// `∂x∂_a u₀(x̂, ·)` extrapolated to `a = 0` and `a = 1/2`.
    pub boundary_values: (f64, f64),
    /// Largest interior value of `∂x∂_a² u₀(x̂, ·)`.
    pub max_interior: f64,
    pub constant: bool,
    pub boundary_zero: bool,
    pub strictly_negative: bool,
}

impl HypothesisReport {
    pub fn passed(&self) -> bool {
        self.constant && self.boundary_zero && self.strictly_negative
    }
}

/// Checks `u₀(x̂, ·)` constant, `∂x∂_a u₀(x̂, ·) = 0` at one wall and
/// `∂x∂_a² u₀(x̂, ·) < 0` inside.
pub fn validate_blowup_hypothesis(u0: &Field2D, grid: &RadialGrid, x_hat: usize) -> Result<HypothesisReport> {
    check_len(grid.len(), u0.na())?;
    if x_hat >= u0.nx() {
        return Err(Error::Domain(format!("x-node {x_hat} out of range")));
    }
    let sx = SpectralX::new(u0.nx())?;
    let col = u0.column(x_hat);
    let mean = col.iter().sum::<f64>() / col.len() as f64;
    let constancy_dev = col.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);

    let dxa = diff_a_field(&sx.diff_x(u0), grid)?;
    let dxaa = diff_a_field(&dxa, grid)?;
    let boundary_values = extrapolate_boundary(&dxa.column(x_hat));
    let inner = dxaa.column(x_hat);
    let max_interior = inner[1..inner.len() - 1].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(HypothesisReport {
        x_hat,
        constancy_dev,
        boundary_values,
        max_interior,
        constant: constancy_dev <= HYPOTHESIS_TOL,
        boundary_zero: boundary_values.0.abs() <= HYPOTHESIS_TOL || boundary_values.1.abs() <= HYPOTHESIS_TOL,
        strictly_negative: max_interior < -HYPOTHESIS_TOL,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupConfig {
    /// Sign monitoring is switched off by the experiment regardless of this setting.
    pub solver: SolverConfig,
    pub x_hat: usize,
    /// Tail-fraction threshold declaring breakdown.
    pub guard: f64,
    /// Refuse data failing the hypothesis; off for control runs.
    pub require_hypothesis: bool,
}

impl BlowupConfig {
    pub fn new(solver: SolverConfig) -> Self {
        Self { solver, x_hat: 0, guard: 0.1, require_hypothesis: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Indicator {
    pub t: f64,
    pub u_inf: f64,
    pub dxu_inf: f64,
    pub dxp_inf: f64,
    pub tail_frac: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupReport {
    pub t_star: Option<f64>,
    pub indicators: Vec<Indicator>,
    pub nx: usize,
    pub na: usize,
    pub dt: f64,
    /// How the integration ended; `Stopped` means the guard tripped.
    pub outcome: Outcome,
}

impl BlowupReport {
    /// `max ‖∂x u‖_∞` up to detection (or the end) over its initial value.
    pub fn dxu_growth(&self) -> f64 {
        let first = self.indicators.first().map_or(0.0, |i| i.dxu_inf);
        let max = self.indicators.iter().map(|i| i.dxu_inf).fold(0.0, f64::max);
        if first > 0.0 {
            max / first
        } else if max > 0.0 {
            f64::INFINITY
        } else {
            1.0
        }
    }
}

/// Share of the nonzero-mode energy of `w` carried by modes above `nx/3`.
pub fn tail_fraction(w: &Field2D, sx: &SpectralX) -> f64 {
    let cut = w.nx() / 3;
    let (mut tail, mut total) = (0.0, 0.0);
    for j in 0..w.na() {
        let hat = sx.spectrum(w.row(j));
        for (k, c) in hat.iter().enumerate().skip(1) {
            let e = c.norm_sqr();
            total += e;
            if k > cut {
                tail += e;
            }
        }
    }
    if total > 0.0 {
        tail / total
    } else {
        0.0
    }
}

pub fn indicators(state: &FlowState, sx: &SpectralX, grid: &RadialGrid) -> Indicator {
    let p = recover_pressure(state, grid);
    Indicator {
        t: state.t,
        u_inf: state.u.max_abs(),
        dxu_inf: sx.diff_x(&state.u).max_abs(),
        dxp_inf: sx.diff(&p).iter().fold(0.0, |m, v| m.max(v.abs())),
        tail_frac: tail_fraction(&state.w, sx),
    }
}

/// Integrates from `w₀ = ∂_a u₀`, recording indicators every step until the guard trips.
pub fn run_blowup_experiment(config: &BlowupConfig, u0: &Field2D) -> Result<BlowupReport> {
    let sc = SolverConfig { monitor_sign: false, keep_snapshots: false, ..config.solver.clone() };
    sc.validate()?;
    let grid = RadialGrid::new(sc.na)?;
    check_len(sc.nx, u0.nx())?;
    if config.require_hypothesis {
        let rep = validate_blowup_hypothesis(u0, &grid, config.x_hat)?;
        if !rep.passed() {
            return Err(Error::Precondition(format!("blowup hypothesis fails: {rep:?}")));
        }
    }
    let sx = SpectralX::new(sc.nx)?;
    let w0 = diff_a_field(u0, &grid)?;
    let mut series = Vec::new();
    let mut t_star = None;
    let tr = integrate(&sc, 0.0, w0, &mut |s| {
        let ind = indicators(s, &sx, &grid);
        series.push(ind);
        if ind.tail_frac >= config.guard {
            t_star = Some(s.t);
            return false;
        }
        true
    })?;
    if let Outcome::NonFinite { t } = tr.outcome {
        return Err(Error::NonFinite { t });
    }
    Ok(BlowupReport { t_star, indicators: series, nx: sc.nx, na: sc.na, dt: sc.dt, outcome: tr.outcome })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial_calculus::make_grid;
    use std::f64::consts::PI;

    #[test]
    fn hypothesis_examples() {
        let g = make_grid(32).unwrap();
        let quad = Field2D::from_fn(16, &g, |x, a| -(2.0 * PI * x).sin() * a * a).unwrap();
        let rep = validate_blowup_hypothesis(&quad, &g, 0).unwrap();
        assert!(rep.passed(), "{rep:?}");
        assert!((rep.max_interior + 4.0 * PI).abs() < 1e-9);

        let lin = Field2D::from_fn(16, &g, |x, a| -(2.0 * PI * x).sin() * a).unwrap();
        let rep = validate_blowup_hypothesis(&lin, &g, 0).unwrap();
        assert!(!rep.strictly_negative && !rep.passed());

        let shear = Field2D::from_fn(16, &g, |_, a| a * a).unwrap();
        let rep = validate_blowup_hypothesis(&shear, &g, 0).unwrap();
        assert!(!rep.strictly_negative && !rep.passed());
        assert!(validate_blowup_hypothesis(&shear, &g, 16).is_err());
    }

    #[test]
    fn tail_fraction_of_simple_fields() {
        let g = make_grid(8).unwrap();
        let sx = SpectralX::new(24).unwrap();
        let low = Field2D::from_fn(24, &g, |x, a| a + (2.0 * PI * x).sin()).unwrap();
        assert!(tail_fraction(&low, &sx) < 1e-28);
        let both = Field2D::from_fn(24, &g, |x, _| (2.0 * PI * x).sin() + (2.0 * PI * 9.0 * x).sin()).unwrap();
        assert!((tail_fraction(&both, &sx) - 0.5).abs() < 1e-12);
        assert_eq!(tail_fraction(&Field2D::from_fn(24, &g, |_, a| a).unwrap(), &sx), 0.0);
    }

    #[test]
    fn shear_control_has_no_breakdown() {
        let sc = SolverConfig { nx: 16, na: 16, dt: 0.01, t_end: 0.2, ..SolverConfig::default() };
        let g = make_grid(16).unwrap();
        let u0 = Field2D::from_fn(16, &g, |_, a| a * a).unwrap();
        let cfg = BlowupConfig { require_hypothesis: false, ..BlowupConfig::new(sc.clone()) };
        let rep = run_blowup_experiment(&cfg, &u0).unwrap();
        assert_eq!(rep.t_star, None);
        assert_eq!(rep.indicators.len(), 21);
        let first = rep.indicators[0];
        for ind in &rep.indicators {
            assert!((ind.u_inf - first.u_inf).abs() < 1e-12 && ind.dxu_inf < 1e-12 && ind.dxp_inf < 1e-12);
        }
        assert!(matches!(run_blowup_experiment(&BlowupConfig::new(sc), &u0), Err(Error::Precondition(_))));
    }
}
