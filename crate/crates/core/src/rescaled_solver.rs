//! The ε-rescaled axisymmetric system in vorticity form and its distance to
//! the hydrostatic limit.
//!
//! Only the Biot–Savart law changes with `ε`; transport, time stepping and
//! monitors are shared with the hydrostatic solver, so `ε = 0` reproduces it
//! bit for bit.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::hydro_solver::{integrate, FlowState, Solver, SolverConfig, Trajectory};
use crate::radial_calculus::RadialGrid;
use crate::spectral_x::Field2D;

/// A state of the rescaled system; `eps` is stored on the state itself.
pub type EpsFlowState = FlowState;

/// `−(u_ε ∂x w_ε + v_ε ∂_a w_ε)`.
pub fn eps_rhs(state: &EpsFlowState, grid: &RadialGrid) -> Result<Field2D> {
    Solver::new(grid, state.w.nx(), state.n_modes, state.eps)?.rhs(state)
}

pub fn run_eps(config: &SolverConfig, eps: f64, w0: Field2D) -> Result<Trajectory> {
    if !(eps >= 0.0) {
        return Err(Error::Domain(format!("eps must be non-negative, got {eps}")));
    }
    integrate(config, eps, w0, &mut |_| true)
}

/// `∫∫ |u_ε − u|² + ε² |v_ε − v|²/(2a) + |w_ε − w|² da dx`.
pub fn limit_gap(eps: &EpsFlowState, hydro: &FlowState, grid: &RadialGrid) -> Result<f64> {
    eps.w.same_shape(&hydro.w)?;
    check_len(grid.len(), eps.w.na())?;
    let (nx, h) = (eps.w.nx(), grid.h());
    let e2 = eps.eps * eps.eps;
    let mut sum = 0.0;
    for (j, &a) in grid.nodes().iter().enumerate() {
        let q = e2 / (2.0 * a);
        for i in 0..nx {
            let du = eps.u.get(i, j) - hydro.u.get(i, j);
            let dv = eps.v.get(i, j) - hydro.v.get(i, j);
            let dw = eps.w.get(i, j) - hydro.w.get(i, j);
            sum += du * du + q * dv * dv + dw * dw;
        }
    }
    Ok(sum * h / nx as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitReport {
    pub eps_values: Vec<f64>,
    pub gaps: Vec<f64>,
    /// Least-squares slope of `log gap` against `log ε`.
    pub fitted_order: f64,
    pub t_end: f64,
}

/// Least-squares slope of `log y` against `log x`.
pub fn fit_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let num: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let den: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    num / den
}

/// Runs the hydrostatic system and one rescaled system per `ε` from the same `w0`
/// and reports the terminal gaps.
pub fn limit_study(config: &SolverConfig, eps_values: &[f64], w0: &Field2D) -> Result<LimitReport> {
    if eps_values.len() < 2 {
        return Err(Error::Config("a limit study needs at least two eps values".into()));
    }
    if eps_values.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::Domain("limit-study eps values must be positive".into()));
    }
    let grid = RadialGrid::new(config.na)?;
    let hydro = run_eps(config, 0.0, w0.clone())?;
    require_completed(&hydro)?;
    let mut gaps = Vec::with_capacity(eps_values.len());
    for &eps in eps_values {
        let tr = run_eps(config, eps, w0.clone())?;
        require_completed(&tr)?;
        gaps.push(limit_gap(&tr.final_state, &hydro.final_state, &grid)?);
    }
    Ok(LimitReport {
        eps_values: eps_values.to_vec(),
        fitted_order: fit_log_slope(eps_values, &gaps),
        gaps,
        t_end: config.t_end,
    })
}

fn require_completed(tr: &Trajectory) -> Result<()> {
    if tr.outcome.is_completed() {
        Ok(())
    } else {
        Err(Error::Precondition(format!("run did not complete: {:?}", tr.outcome)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hydro_solver::rhs;
    use crate::radial_calculus::make_grid;
    use std::f64::consts::PI;

    fn w0(nx: usize, g: &RadialGrid) -> Field2D {
        Field2D::from_fn(nx, g, |x, a| 4.0 * a + 0.1 * (2.0 * PI * x).sin() * (2.0 * PI * a).sin()).unwrap()
    }

    #[test]
    fn zero_eps_matches_hydrostatic_rhs() {
        let g = make_grid(16).unwrap();
        let st = Solver::hydrostatic(&g, 16, 5).unwrap().state(0.0, w0(16, &g)).unwrap();
        assert_eq!(eps_rhs(&st, &g).unwrap(), rhs(&st, &g).unwrap());
    }

    #[test]
    fn rescaled_rhs_properties() {
        let g = make_grid(16).unwrap();
        let s = Solver::new(&g, 16, 5, 0.2).unwrap();
        let flat = s.state(0.0, Field2D::from_fn(16, &g, |_, a| 4.0 * a).unwrap()).unwrap();
        assert!(eps_rhs(&flat, &g).unwrap().max_abs() < 1e-13);
        let st = s.state(0.0, w0(16, &g)).unwrap();
        let r = eps_rhs(&st, &g).unwrap();
        let wn = st.w.l2_norm(g.h());
        assert!((r.values().iter().sum::<f64>() * g.h() / 16.0).abs() <= 1e-10 * wn * wn);
    }

    #[test]
    fn zero_eps_trajectory_equals_hydrostatic() {
        let cfg = SolverConfig { nx: 16, na: 16, t_end: 0.05, dt: 0.01, cadence: 1, ..SolverConfig::default() };
        let g = make_grid(16).unwrap();
        let a = run_eps(&cfg, 0.0, w0(16, &g)).unwrap();
        let b = crate::hydro_solver::run(&cfg, w0(16, &g)).unwrap();
        assert_eq!(a.final_state, b.final_state);
        assert!(matches!(run_eps(&cfg, -1.0, w0(16, &g)), Err(Error::Domain(_))));
    }

    #[test]
    fn rescaled_run_conserves_mean_velocity() {
        let cfg = SolverConfig { nx: 16, na: 16, t_end: 0.25, dt: 0.005, cadence: 10, ..SolverConfig::default() };
        let g = make_grid(16).unwrap();
        let tr = run_eps(&cfg, 0.1, w0(16, &g)).unwrap();
        assert!(tr.outcome.is_completed());
        assert!(tr.records.iter().all(|r| r.mean_u_drift <= 1e-9));
    }

    #[test]
    fn gap_of_identical_states_is_zero() {
        let g = make_grid(16).unwrap();
        let st = Solver::new(&g, 16, 5, 0.1).unwrap().state(0.0, w0(16, &g)).unwrap();
        assert_eq!(limit_gap(&st, &st, &g).unwrap(), 0.0);
        let other = Solver::hydrostatic(&make_grid(8).unwrap(), 16, 5)
            .unwrap()
            .state(0.0, w0(16, &make_grid(8).unwrap()))
            .unwrap();
        assert!(limit_gap(&st, &other, &g).is_err());
    }

    #[test]
    fn slope_fit_recovers_power_law() {
        let x = [0.2, 0.1, 0.05];
        let y: Vec<f64> = x.iter().map(|e: &f64| 3.0 * e.powi(4)).collect();
        assert!((fit_log_slope(&x, &y) - 4.0).abs() < 1e-12);
    }
}
