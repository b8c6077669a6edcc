//! Time integration of the projected vorticity system
//! `∂t w + u ∂x w + v ∂_a w = 0`, with `(u, v)` recovered from `w` at every stage.
//!
//! The transport term is evaluated in flux form, `∂x P(u w) + D P(v w)`, which
//! equals the advective form because `∂x u + D v = 0` holds exactly for the
//! recovered velocities. The flux form makes `∫∫ rhs` vanish to round-off.

pub mod r_path;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{self, radial_mean, DiagnosticsRecord};
use crate::dirichlet_green::{BiotSavart, Velocity};
use crate::error::{check_len, Error, Result};
use crate::radial_calculus::{diff_a_field, face_diff_field, RadialGrid};
use crate::spectral_x::{diff_spectrum, Field2D, SpectralX};

use rustfft::num_complex::Complex64;

/// Vorticity-like unknown `w = ω/r` with its recovered velocities `(u, v) = (u^x, r u^r)`.
///
/// `eps = 0` is the hydrostatic system; `eps > 0` the rescaled one.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub t: f64,
    pub w: Field2D,
    pub u: Field2D,
    pub v: Field2D,
    pub n_modes: usize,
    pub eps: f64,
}

/// Transport operator for one grid, mode cutoff and aspect ratio.
#[derive(Debug, Clone)]
pub struct Solver {
    bs: BiotSavart,
}

impl Solver {
    pub fn new(grid: &RadialGrid, nx: usize, n_modes: usize, eps: f64) -> Result<Self> {
        Ok(Self { bs: BiotSavart::new(grid, nx, n_modes, eps)? })
    }

    pub fn hydrostatic(grid: &RadialGrid, nx: usize, n_modes: usize) -> Result<Self> {
        Self::new(grid, nx, n_modes, 0.0)
    }

    pub fn grid(&self) -> &RadialGrid {
        self.bs.grid()
    }

    pub fn spectral(&self) -> &SpectralX {
        self.bs.spectral()
    }

    pub fn biot_savart(&self) -> &BiotSavart {
        &self.bs
    }

    pub fn n_modes(&self) -> usize {
        self.bs.n_modes()
    }

    pub fn eps(&self) -> f64 {
        self.bs.eps()
    }

    /// State at time `t` with velocities recovered from `w`.
    pub fn state(&self, t: f64, w: Field2D) -> Result<FlowState> {
        let vel = self.bs.velocity(&w)?;
        Ok(FlowState { t, w, u: vel.u, v: vel.v, n_modes: self.n_modes(), eps: self.eps() })
    }

    /// `−(∂x P(u w) + D P(v w))` and the velocities recovered from `w`.
    pub fn tendency(&self, w: &Field2D) -> Result<(Field2D, Velocity)> {
        let sx = self.spectral();
        check_len(sx.nx(), w.nx())?;
        check_len(self.grid().len(), w.na())?;
        let (nx, na) = (w.nx(), w.na());
        let w_hat = sx.row_spectra(w);
        let vs = self.bs.velocity_spectra(&w_hat);
        let m = sx.padded_len();
        let mut buf = vec![Complex64::new(0.0, 0.0); m];
        let (mut wp, mut up, mut vp) = (vec![0.0; m], vec![0.0; m], vec![0.0; m]);
        let mut flux_x = Field2D::zeros(nx, na)?;
        let mut flux_a = Field2D::zeros(nx, na)?;
        let mut u = Field2D::zeros(nx, na)?;
        let mut v = Field2D::zeros(nx, na)?;
        for j in 0..na {
            sx.pad_eval(&w_hat[j], &mut wp, &mut buf);
            sx.pad_eval(&vs.u[j], &mut up, &mut buf);
            sx.pad_eval(&vs.v[j], &mut vp, &mut buf);
            up.iter_mut().zip(&wp).for_each(|(a, b)| *a *= b);
            vp.iter_mut().zip(&wp).for_each(|(a, b)| *a *= b);
            let mut uw = sx.pad_truncate(&up, &mut buf);
            diff_spectrum(&mut uw);
            flux_x.row_mut(j).copy_from_slice(&sx.synthesize(&uw));
            let vw = sx.pad_truncate(&vp, &mut buf);
            flux_a.row_mut(j).copy_from_slice(&sx.synthesize(&vw));
            u.row_mut(j).copy_from_slice(&sx.synthesize(&vs.u[j]));
            v.row_mut(j).copy_from_slice(&sx.synthesize(&vs.v[j]));
        }
        let div_a = face_diff_field(&flux_a, self.grid().h());
        let rhs = flux_x.zip_map(&div_a, |a, b| -(a + b));
        Ok((rhs, Velocity { u, v }))
    }

    pub fn rhs(&self, state: &FlowState) -> Result<Field2D> {
        Ok(self.tendency(&state.w)?.0)
    }

    /// Largest `dt` with `dt · max(|u|/Δx, |v|/h) ≤ cfl_max`.
    pub fn admissible_dt(&self, u: &Field2D, v: &Field2D, cfl_max: f64) -> f64 {
        let inv_dx = u.nx() as f64;
        let inv_h = 1.0 / self.grid().h();
        let rate = u
            .values()
            .iter()
            .zip(v.values())
            .map(|(a, b)| a.abs() * inv_dx + b.abs() * inv_h)
            .fold(0.0, f64::max);
        if rate == 0.0 {
            f64::INFINITY
        } else {
            cfl_max / rate
        }
    }

    /// Classical four-stage Runge–Kutta step.
    pub fn step_rk4(&self, state: &FlowState, dt: f64, cfl_max: f64) -> Result<FlowState> {
        let admissible_dt = self.admissible_dt(&state.u, &state.v, cfl_max);
        if dt > admissible_dt {
            return Err(Error::CflViolation { dt, admissible_dt });
        }
        let w = &state.w;
        let (k1, _) = self.tendency(w)?;
        let (k2, _) = self.tendency(&w.zip_map(&k1, |a, b| a + 0.5 * dt * b))?;
        let (k3, _) = self.tendency(&w.zip_map(&k2, |a, b| a + 0.5 * dt * b))?;
        let (k4, _) = self.tendency(&w.zip_map(&k3, |a, b| a + dt * b))?;
        let mut next = w.clone();
        let c = dt / 6.0;
        for (idx, x) in next.values_mut().iter_mut().enumerate() {
            *x += c * (k1.values()[idx] + 2.0 * (k2.values()[idx] + k3.values()[idx]) + k4.values()[idx]);
        }
        self.state(state.t + dt, next)
    }
}

/// `−(u ∂x w + v ∂_a w)` for a hydrostatic state.
pub fn rhs(state: &FlowState, grid: &RadialGrid) -> Result<Field2D> {
    Solver::new(grid, state.w.nx(), state.n_modes, state.eps)?.rhs(state)
}

/// Hydrostatic pressure `p(x) = −2 ∫ u² da`, normalized to zero x-mean.
pub fn recover_pressure(state: &FlowState, grid: &RadialGrid) -> Vec<f64> {
    let mut p = vec![0.0; state.u.nx()];
    for j in 0..state.u.na() {
        for (pi, ui) in p.iter_mut().zip(state.u.row(j)) {
            *pi -= 2.0 * grid.h() * ui * ui;
        }
    }
    let mean = p.iter().sum::<f64>() / p.len() as f64;
    p.iter_mut().for_each(|v| *v -= mean);
    p
}

/// Run parameters shared by the hydrostatic and rescaled integrators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub nx: usize,
    pub na: usize,
    /// Fourier cutoff `N`; `None` means `nx / 3`.
    pub n_modes: Option<usize>,
    pub dt: f64,
    pub t_end: f64,
    pub cfl_max: f64,
    /// Floor `σ` for `∂_a w` when the sign monitor is on.
    pub sigma_min: f64,
    pub monitor_sign: bool,
    /// Steps between recorded snapshots and diagnostics.
    pub cadence: usize,
    pub keep_snapshots: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            nx: 128,
            na: 64,
            n_modes: None,
            dt: 1e-3,
            t_end: 0.5,
            cfl_max: 0.5,
            sigma_min: 0.1,
            monitor_sign: true,
            cadence: 10,
            keep_snapshots: true,
        }
    }
}

impl SolverConfig {
    pub fn modes(&self) -> usize {
        self.n_modes.unwrap_or(self.nx / 3)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx < 8 || self.nx % 2 != 0 {
            return Err(Error::Config(format!("nx must be even and at least 8, got {}", self.nx)));
        }
        if self.na < 6 {
            return Err(Error::Config(format!("na must be at least 6, got {}", self.na)));
        }
        if 3 * self.modes() > self.nx {
            return Err(Error::Config(format!("N = {} exceeds nx/3", self.modes())));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::Config(format!("t_end must be non-negative, got {}", self.t_end)));
        }
        if !(self.cfl_max > 0.0 && self.cfl_max <= 1.0) {
            return Err(Error::Config(format!("cfl_max must lie in (0, 1], got {}", self.cfl_max)));
        }
        if self.monitor_sign && !(self.sigma_min > 0.0) {
            return Err(Error::Config("sigma_min must be positive when the sign monitor is on".into()));
        }
        if self.cadence == 0 {
            return Err(Error::Config("cadence must be at least 1".into()));
        }
        self.steps().map(|_| ())
    }

    /// Number of fixed steps reaching `t_end`.
    pub fn steps(&self) -> Result<usize> {
        let n = (self.t_end / self.dt).round();
        if (n * self.dt - self.t_end).abs() > 1e-9 * self.t_end.max(self.dt) {
            return Err(Error::Config(format!("t_end = {} is not a multiple of dt = {}", self.t_end, self.dt)));
        }
        Ok(n as usize)
    }
}

/// How an integration ended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Outcome {
    Completed,
    /// `min ∂_a w` fell below `σ`.
    SignBreach { t: f64, min_daw: f64 },
    CflAbort { t: f64, dt: f64, admissible_dt: f64 },
    NonFinite { t: f64 },
    /// The step observer asked to stop.
    Stopped { t: f64 },
}

impl Outcome {
    pub fn is_completed(&self) -> bool {
        matches!(self, Outcome::Completed)
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub snapshots: Vec<FlowState>,
    pub records: Vec<DiagnosticsRecord>,
    pub final_state: FlowState,
    pub outcome: Outcome,
    pub steps_taken: usize,
}

/// Hydrostatic run from `w0`.
pub fn run(config: &SolverConfig, w0: Field2D) -> Result<Trajectory> {
    integrate(config, 0.0, w0, &mut |_| true)
}

/// Fixed-step integration with monitors.
///
/// `observer` sees every accepted state (including the initial one) and may
/// stop the run by returning `false`.
pub fn integrate(
    config: &SolverConfig,
    eps: f64,
    w0: Field2D,
    observer: &mut dyn FnMut(&FlowState) -> bool,
) -> Result<Trajectory> {
    config.validate()?;
    check_len(config.nx, w0.nx())?;
    check_len(config.na, w0.na())?;
    let grid = RadialGrid::new(config.na)?;
    let solver = Solver::new(&grid, config.nx, config.modes(), eps)?;
    integrate_with(&solver, config, w0, observer)
}

pub fn integrate_with(
    solver: &Solver,
    config: &SolverConfig,
    w0: Field2D,
    observer: &mut dyn FnMut(&FlowState) -> bool,
) -> Result<Trajectory> {
    let grid = solver.grid().clone();
    let sx = solver.spectral().clone();
    if !w0.is_finite() {
        return Err(Error::NonFinite { t: 0.0 });
    }
    if config.monitor_sign {
        let min0 = diff_a_field(&w0, &grid)?.min();
        if min0 < 2.0 * config.sigma_min {
            return Err(Error::Precondition(format!(
                "initial min ∂_a w = {min0} is below 2σ = {}",
                2.0 * config.sigma_min
            )));
        }
    }
    let steps = config.steps()?;
    let mut state = solver.state(0.0, w0)?;
    let initial_mean = radial_mean(&state.u, &grid);
    let mut snapshots = Vec::new();
    let mut records = Vec::new();
    let emit = |s: &FlowState, snaps: &mut Vec<FlowState>, recs: &mut Vec<DiagnosticsRecord>| -> Result<()> {
        recs.push(diagnostics::record(s, &sx, &grid, config.sigma_min, &initial_mean, config.dt)?);
        if config.keep_snapshots {
            snaps.push(s.clone());
        }
        Ok(())
    };
    emit(&state, &mut snapshots, &mut records)?;
    let mut outcome = Outcome::Completed;
    let mut taken = 0;
    if !observer(&state) {
        outcome = Outcome::Stopped { t: 0.0 };
    }
    while outcome.is_completed() && taken < steps {
        let next = match solver.step_rk4(&state, config.dt, config.cfl_max) {
            Ok(s) => s,
            Err(Error::CflViolation { dt, admissible_dt }) => {
                outcome = Outcome::CflAbort { t: state.t, dt, admissible_dt };
                break;
            }
            Err(e) => return Err(e),
        };
        taken += 1;
        state = next;
        state.t = taken as f64 * config.dt;
        if !state.w.is_finite() || !state.u.is_finite() || !state.v.is_finite() {
            outcome = Outcome::NonFinite { t: state.t };
            break;
        }
        if config.monitor_sign {
            let min_daw = diff_a_field(&state.w, &grid)?.min();
            if min_daw < config.sigma_min {
                outcome = Outcome::SignBreach { t: state.t, min_daw };
            }
        }
        if !observer(&state) && outcome.is_completed() {
            outcome = Outcome::Stopped { t: state.t };
        }
        if taken % config.cadence == 0 || taken == steps || !outcome.is_completed() {
            emit(&state, &mut snapshots, &mut records)?;
        }
    }
    Ok(Trajectory { snapshots, records, final_state: state, outcome, steps_taken: taken })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::cancellation_residual;
    use crate::radial_calculus::make_grid;
    use std::f64::consts::PI;

    fn perturbed(nx: usize, g: &RadialGrid) -> Field2D {
        Field2D::from_fn(nx, g, |x, a| 4.0 * a + 0.1 * (2.0 * PI * x).sin() * (2.0 * PI * a).sin()).unwrap()
    }

    #[test]
    fn shear_is_steady() {
        let g = make_grid(16).unwrap();
        let s = Solver::hydrostatic(&g, 16, 5).unwrap();
        let w = Field2D::from_fn(16, &g, |_, a| 4.0 * a + (3.0 * a).sin()).unwrap();
        let st = s.state(0.0, w.clone()).unwrap();
        assert!(s.rhs(&st).unwrap().max_abs() < 1e-13);
        let mut cur = st;
        for _ in 0..20 {
            cur = s.step_rk4(&cur, 1e-2, 0.9).unwrap();
        }
        assert!(cur.w.zip_map(&w, |a, b| a - b).max_abs() < 1e-12);
    }

    #[test]
    fn transport_conserves_mean_and_nearly_energy() {
        let g = make_grid(64).unwrap();
        let s = Solver::hydrostatic(&g, 32, 10).unwrap();
        let st = s.state(0.0, perturbed(32, &g)).unwrap();
        let r = s.rhs(&st).unwrap();
        let mean: f64 = r.values().iter().sum::<f64>() * g.h() / 32.0;
        let wn = st.w.l2_norm(g.h());
        assert!(mean.abs() <= 1e-10 * wn * wn);
        let energy = r.inner(&st.w, g.h());
        assert!(energy.abs() <= 1e-8, "{energy}");
    }

    #[test]
    fn cfl_violation_reports_admissible_step() {
        let g = make_grid(16).unwrap();
        let s = Solver::hydrostatic(&g, 16, 5).unwrap();
        let st = s.state(0.0, perturbed(16, &g)).unwrap();
        match s.step_rk4(&st, 10.0, 0.5) {
            Err(Error::CflViolation { admissible_dt, .. }) => assert!(admissible_dt > 0.0 && admissible_dt < 10.0),
            other => panic!("expected CFL error, got {other:?}"),
        }
    }

    #[test]
    fn rk4_self_convergence() {
        let g = make_grid(16).unwrap();
        let s = Solver::hydrostatic(&g, 16, 5).unwrap();
        let w0 = Field2D::from_fn(16, &g, |x, a| 4.0 * a + 0.5 * (2.0 * PI * x).sin() * (2.0 * PI * a).sin()).unwrap();
        let run = |dt: f64, n: usize| {
            let mut st = s.state(0.0, w0.clone()).unwrap();
            for _ in 0..n {
                st = s.step_rk4(&st, dt, 1.0).unwrap();
            }
            st.w
        };
        let reference = run(0.2 / 64.0, 64);
        let e1 = run(0.2 / 4.0, 4).zip_map(&reference, |a, b| a - b).max_abs();
        let e2 = run(0.2 / 8.0, 8).zip_map(&reference, |a, b| a - b).max_abs();
        let order = (e1 / e2).log2();
        assert!(order >= 3.9, "order {order} ({e1:e}, {e2:e})");
    }

    #[test]
    fn mean_velocity_and_cancellation_hold_along_steps() {
        let g = make_grid(24).unwrap();
        let s = Solver::hydrostatic(&g, 24, 8).unwrap();
        let mut st = s.state(0.0, perturbed(24, &g)).unwrap();
        let m0 = radial_mean(&st.u, &g);
        for _ in 0..100 {
            st = s.step_rk4(&st, 2e-3, 0.9).unwrap();
        }
        let m1 = radial_mean(&st.u, &g);
        assert!(m0.iter().zip(&m1).all(|(a, b)| (a - b).abs() <= 1e-10));
        for k in 0..4 {
            assert!(cancellation_residual(&st.v, &st.w, k, s.spectral(), g.h()) <= 1e-10);
        }
    }

    #[test]
    fn pressure_gauge_and_momentum_residual() {
        let g = make_grid(16).unwrap();
        let flat = Solver::hydrostatic(&g, 16, 5).unwrap().state(0.0, Field2D::from_fn(16, &g, |_, a| 4.0 * a).unwrap()).unwrap();
        assert!(recover_pressure(&flat, &g).iter().all(|p| p.abs() < 1e-15));

        // Residual of ∂t u + u ∂x u + v ∂_a u + ∂x p with a centered time difference,
        // measured away from the two cells next to each wall, where u is first order.
        let residual = |na: usize, nx: usize, dt: f64| {
            let g = make_grid(na).unwrap();
            let s = Solver::hydrostatic(&g, nx, nx / 3).unwrap();
            let mut st = s.state(0.0, perturbed(nx, &g)).unwrap();
            for _ in 0..5 {
                st = s.step_rk4(&st, dt, 1.0).unwrap();
            }
            let prev = st.clone();
            let mid = s.step_rk4(&prev, dt, 1.0).unwrap();
            let next = s.step_rk4(&mid, dt, 1.0).unwrap();
            let dtu = next.u.zip_map(&prev.u, |a, b| (a - b) / (2.0 * dt));
            let sx = s.spectral();
            let adv = sx
                .dealiased_product_field(&mid.u, &sx.diff_x(&mid.u))
                .zip_map(&sx.dealiased_product_field(&mid.v, &diff_a_field(&mid.u, &g).unwrap()), |a, b| a + b);
            let dxp = sx.diff(&recover_pressure(&mid, &g));
            let mut res = dtu.zip_map(&adv, |a, b| a + b);
            for j in 0..na {
                for (r, d) in res.row_mut(j).iter_mut().zip(&dxp) {
                    *r += d;
                }
            }
            (3..na - 3).flat_map(|j| res.row(j).to_vec()).fold(0.0f64, |m, v| m.max(v.abs()))
        };
        let (r1, r2) = (residual(32, 32, 2e-3), residual(64, 32, 1e-3));
        assert!((r1 / r2).log2() > 1.8, "{r1:e} {r2:e}");
    }

    #[test]
    fn run_reports_sign_breach_and_steady_shear() {
        let cfg = SolverConfig { nx: 16, na: 16, dt: 0.01, t_end: 1.0, cadence: 25, ..SolverConfig::default() };
        let g = make_grid(16).unwrap();
        let w0 = Field2D::from_fn(16, &g, |_, a| 4.0 * a).unwrap();
        let tr = run(&cfg, w0.clone()).unwrap();
        assert!(tr.outcome.is_completed());
        assert_eq!(tr.records.len(), 5);
        assert!(tr.final_state.w.zip_map(&w0, |a, b| a - b).max_abs() < 1e-12);

        let weak = Field2D::from_fn(16, &g, |_, a| 0.15 * a).unwrap();
        assert!(matches!(run(&cfg, weak), Err(Error::Precondition(_))));

        // Strong perturbation against a weak shear: the monitor must fire.
        let cfg = SolverConfig { sigma_min: 0.2, t_end: 4.0, ..cfg };
        let w0 = Field2D::from_fn(16, &g, |x, a| 1.0 * a + 0.08 * (2.0 * PI * x).sin() * (2.0 * PI * a).cos()).unwrap();
        let tr = run(&cfg, w0).unwrap();
        assert!(matches!(tr.outcome, Outcome::SignBreach { .. }), "{:?}", tr.outcome);
    }

    #[test]
    fn config_validation() {
        let ok = SolverConfig::default();
        assert!(ok.validate().is_ok());
        assert!(SolverConfig { dt: 0.0, ..ok.clone() }.validate().is_err());
        assert!(SolverConfig { cfl_max: 1.5, ..ok.clone() }.validate().is_err());
        assert!(SolverConfig { n_modes: Some(50), ..ok.clone() }.validate().is_err());
        assert!(SolverConfig { t_end: 0.5005, ..ok }.validate().is_err());
    }
}
