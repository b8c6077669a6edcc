//! Relative entropy between the rescaled and hydrostatic systems.
//!
//! For each `x` the profile `a ↦ w(x, a)` is strictly increasing under the
//! sign condition, so `G(w̃) = (u − κ)/∂_a w` evaluated at `a = R(w̃)` is a
//! function of `w̃`. It is tabulated at the nodes `w̃ = w(x, a_j)`, taken
//! piecewise linear in between and constant outside the table. `F'' = G`, so
//! `F` is piecewise cubic and every Bregman divergence is integrated exactly.

use serde::{Deserialize, Serialize};

use crate::diagnostics::RESIDUAL_FLOOR;
use crate::error::{check_len, Error, Result};
use crate::hydro_solver::{integrate, FlowState, Solver, SolverConfig};
use crate::radial_calculus::{diff_a_field, RadialGrid};
use crate::spectral_x::Field2D;

/// Piecewise-linear tables in `w̃`, one per x-node, sharing breakpoints with `w`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexEntropy {
    kappa: f64,
    nx: usize,
    na: usize,
    /// Column-major: `nodes[i * na + j] = w(x_i, a_j)`.
    nodes: Vec<f64>,
    /// `G = F''` at the nodes.
    g: Vec<f64>,
    a: Vec<f64>,
}

impl ConvexEntropy {
    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    fn column(&self, i: usize) -> &[f64] {
        &self.nodes[i * self.na..(i + 1) * self.na]
    }

    fn g_column(&self, i: usize) -> &[f64] {
        &self.g[i * self.na..(i + 1) * self.na]
    }

    /// `R(w̃)`: the `a` with `w(x_i, a) = w̃`, clamped to the node range.
    pub fn inverse(&self, i: usize, wt: f64) -> f64 {
        interp(self.column(i), &self.a, wt)
    }

    /// `∂²F(x_i, w̃)`.
    pub fn d2f(&self, i: usize, wt: f64) -> f64 {
        interp(self.column(i), self.g_column(i), wt)
    }

    /// `∂F(x_i, w̃)`, zero at the lower table edge.
    pub fn df(&self, i: usize, wt: f64) -> f64 {
        let col = self.column(i);
        integrate_pl(col, self.g_column(i), col[0], wt, |_| 1.0)
    }

    /// `F(x_i, w̃)`, with `F = ∂F = 0` at the lower table edge.
    pub fn f(&self, i: usize, wt: f64) -> f64 {
        let col = self.column(i);
        integrate_pl(col, self.g_column(i), col[0], wt, |s| wt - s)
    }

    /// `F(w₁) − F(w₀) − ∂F(w₀)(w₁ − w₀)` at `x_i`.
    pub fn bregman(&self, i: usize, w0: f64, w1: f64) -> f64 {
        bregman_pl(self.column(i), self.g_column(i), w0, w1)
    }

    pub fn min_d2f(&self) -> f64 {
        self.g.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_d2f(&self) -> f64 {
        self.g.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Linear interpolation of `ys` over increasing `xs`, constant outside.
fn interp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[n - 1] {
        return ys[n - 1];
    }
    let k = xs.partition_point(|&v| v <= x) - 1;
    let t = (x - xs[k]) / (xs[k + 1] - xs[k]);
    ys[k] + t * (ys[k + 1] - ys[k])
}

/// `∫_lo^hi weight(s) g(s) ds` for piecewise-linear `g` and weight at most linear.
///
/// Simpson's rule on each linear piece is exact for the quadratic integrand.
fn integrate_pl(xs: &[f64], gs: &[f64], lo: f64, hi: f64, weight: impl Fn(f64) -> f64) -> f64 {
    if lo == hi {
        return 0.0;
    }
    let (s, e, sign) = if lo < hi { (lo, hi, 1.0) } else { (hi, lo, -1.0) };
    let first = xs.partition_point(|&v| v <= s);
    let last = xs.partition_point(|&v| v < e);
    let piece = |p: f64, q: f64| {
        let m = 0.5 * (p + q);
        (q - p) / 6.0 * (weight(p) * interp(xs, gs, p) + 4.0 * weight(m) * interp(xs, gs, m) + weight(q) * interp(xs, gs, q))
    };
    let mut sum = 0.0;
    let mut p = s;
    for &q in &xs[first..last] {
        sum += piece(p, q);
        p = q;
    }
    sign * (sum + piece(p, e))
}

/// `∫_{w0}^{w1} (w1 − s) g(s) ds`, the Bregman divergence of the `F` with `F'' = g`.
fn bregman_pl(xs: &[f64], gs: &[f64], w0: f64, w1: f64) -> f64 {
    integrate_pl(xs, gs, w0, w1, |s| w1 - s)
}

/// `κ = min u − max ∂_a w`, the largest constant keeping `∂²F ≥ 1` on this state.
pub fn natural_kappa(hydro: &FlowState, grid: &RadialGrid) -> Result<f64> {
    Ok(hydro.u.min() - diff_a_field(&hydro.w, grid)?.max())
}

/// Builds `F` from a hydrostatic state. `kappa = None` uses [`natural_kappa`].
pub fn build_convex_f(hydro: &FlowState, grid: &RadialGrid, sigma: f64, kappa: Option<f64>) -> Result<ConvexEntropy> {
    check_len(grid.len(), hydro.w.na())?;
    let daw = diff_a_field(&hydro.w, grid)?;
    let min = daw.min();
    if !(sigma > 0.0) || min < sigma {
        return Err(Error::Precondition(format!("sign condition fails: min ∂_a w = {min}, σ = {sigma}")));
    }
    let kappa = match kappa {
        Some(k) => k,
        None => natural_kappa(hydro, grid)?,
    };
    let (nx, na) = (hydro.w.nx(), hydro.w.na());
    let mut nodes = Vec::with_capacity(nx * na);
    let mut g = Vec::with_capacity(nx * na);
    for i in 0..nx {
        for j in 0..na {
            let w = hydro.w.get(i, j);
            if j > 0 && w <= *nodes.last().unwrap() {
                return Err(Error::Precondition(format!("w(x_{i}, ·) is not strictly increasing at a_{j}")));
            }
            nodes.push(w);
            g.push((hydro.u.get(i, j) - kappa) / daw.get(i, j));
        }
    }
    Ok(ConvexEntropy { kappa, nx, na, nodes, g, a: grid.nodes().to_vec() })
}

/// Parts of the relative entropy: `(L_k, L_c, L_k + L_c)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelativeEntropy {
    pub l_k: f64,
    pub l_c: f64,
    pub l_total: f64,
}

/// `L_k = ½∫∫ |u_ε − u|² + ε²|v_ε − v|²/(2a)` and `L_c = ½∫∫ F(w_ε) − F(w) − ∂F(w)(w_ε − w)`.
pub fn relative_entropy(eps: &FlowState, hydro: &FlowState, f: &ConvexEntropy, grid: &RadialGrid) -> Result<RelativeEntropy> {
    eps.w.same_shape(&hydro.w)?;
    check_len(grid.len(), eps.w.na())?;
    check_len(f.nx, eps.w.nx())?;
    check_len(f.na, eps.w.na())?;
    let (nx, h) = (eps.w.nx(), grid.h());
    let e2 = eps.eps * eps.eps;
    let (mut k, mut c) = (0.0, 0.0);
    for (j, &a) in grid.nodes().iter().enumerate() {
        for i in 0..nx {
            let du = eps.u.get(i, j) - hydro.u.get(i, j);
            let dv = eps.v.get(i, j) - hydro.v.get(i, j);
            k += du * du + e2 * dv * dv / (2.0 * a);
            c += f.bregman(i, hydro.w.get(i, j), eps.w.get(i, j));
        }
    }
    let q = 0.5 * h / nx as f64;
    let (l_k, l_c) = (q * k, q * c);
    Ok(RelativeEntropy { l_k, l_c, l_total: l_k + l_c })
}

/// Terms of the time-derivative identity at one time.
///
/// The identity is for `L_k + 2 L_c`: the convex-part terms `I3, I4, I5, X`
/// are the derivative of the Bregman integral without the factor `½`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyBudget {
    pub t: f64,
    pub i1: f64,
    pub i2: f64,
    pub i3: f64,
    pub i4: f64,
    pub i5: f64,
    pub x: f64,
    pub y: f64,
    pub z_direct: f64,
    /// `κ ∫∫ (v_ε − v)(w_ε − w)`.
    pub z_reduced: f64,
    /// `−κ ε² ∫∫ ∂x v (v_ε − v)/(2a)`, the form left after the cancellation.
    pub z_cancel: f64,
    pub r_term: f64,
    pub dldt_fd: f64,
}

pub const BUDGET_HEADER: &str = "t,I1,I2,I3,I4,I5,X,Y,Z_direct,Z_reduced,R,dLdt_fd,residual";

impl EntropyBudget {
    pub fn predicted(&self) -> f64 {
        self.i1 + self.i2 + self.i3 + self.i4 + self.i5 + self.z_direct + self.r_term
    }

    pub fn residual(&self) -> f64 {
        (self.dldt_fd - self.predicted()).abs()
    }

    pub fn relative_residual(&self) -> f64 {
        self.residual() / (self.dldt_fd.abs() + RESIDUAL_FLOOR)
    }

    pub fn z_agreement(&self) -> f64 {
        (self.z_direct - self.z_reduced).abs() / (self.z_reduced.abs().max(self.z_direct.abs()) + RESIDUAL_FLOOR)
    }

    pub fn csv_row(&self) -> String {
        [
            self.t,
            self.i1,
            self.i2,
            self.i3,
            self.i4,
            self.i5,
            self.x,
            self.y,
            self.z_direct,
            self.z_reduced,
            self.r_term,
            self.dldt_fd,
            self.residual(),
        ]
        .iter()
        .map(|v| format!("{v:e}"))
        .collect::<Vec<_>>()
        .join(",")
    }
}

/// Five equally spaced states of each system centred on the probe time.
#[derive(Debug, Clone)]
pub struct ProbeWindow {
    pub eps: [FlowState; 5],
    pub hydro: [FlowState; 5],
}

impl ProbeWindow {
    fn spacing(&self) -> Result<f64> {
        let d = self.hydro[1].t - self.hydro[0].t;
        if !(d > 0.0) {
            return Err(Error::Precondition("probe window times must increase".into()));
        }
        for k in 0..5 {
            let expect = self.hydro[0].t + k as f64 * d;
            let tol = 1e-9 * (1.0 + expect.abs());
            if (self.hydro[k].t - expect).abs() > tol || (self.eps[k].t - self.hydro[k].t).abs() > tol {
                return Err(Error::Precondition("probe window is not equally spaced and aligned".into()));
            }
        }
        Ok(d)
    }
}

/// Evaluates every term of the identity at the window centre.
///
/// `F` is rebuilt at each window time with the fixed `kappa`; `dLdt_fd` is the
/// fourth-order centred difference of `L_k + 2 L_c`.
pub fn entropy_budget(window: &ProbeWindow, grid: &RadialGrid, sigma: f64, kappa: f64) -> Result<EntropyBudget> {
    let dt_probe = window.spacing()?;
    let mut l = [0.0; 5];
    for k in 0..5 {
        let f = build_convex_f(&window.hydro[k], grid, sigma, Some(kappa))?;
        let re = relative_entropy(&window.eps[k], &window.hydro[k], &f, grid)?;
        l[k] = re.l_k + 2.0 * re.l_c;
    }
    let dldt_fd = (l[0] - 8.0 * l[1] + 8.0 * l[3] - l[4]) / (12.0 * dt_probe);
    let mut b = budget_terms(&window.eps[2], &window.hydro[2], grid, sigma, kappa)?;
    b.dldt_fd = dldt_fd;
    Ok(b)
}

/// Terms at one time; `dldt_fd` is left at zero.
pub fn budget_terms(eps: &FlowState, hydro: &FlowState, grid: &RadialGrid, sigma: f64, kappa: f64) -> Result<EntropyBudget> {
    eps.w.same_shape(&hydro.w)?;
    let (nx, na, h) = (hydro.w.nx(), hydro.w.na(), grid.h());
    let solver = Solver::hydrostatic(grid, nx, hydro.n_modes)?;
    let sx = solver.spectral();
    let e2 = eps.eps * eps.eps;

    // Hydrostatic fields and their time derivatives through the Biot–Savart law.
    let dtw = solver.rhs(hydro)?;
    let dt_vel = solver.biot_savart().velocity(&dtw)?;
    let daw = diff_a_field(&hydro.w, grid)?;
    let dxw = sx.diff_x(&hydro.w);
    let dxu = sx.diff_x(&hydro.u);
    let dxv = sx.diff_x(&hydro.v);
    let dav = diff_a_field(&hydro.v, grid)?;
    let dt_daw = diff_a_field(&dtw, grid)?;
    let dx_daw = sx.diff_x(&daw);

    let f = build_convex_f(hydro, grid, sigma, Some(kappa))?;
    let g = Field2D::from_values(nx, na, (0..na).flat_map(|j| (0..nx).map(move |i| (i, j))).map(|(i, j)| f.g[i * na + j]).collect())?;
    let dag = diff_a_field(&g, grid)?;

    // ∂G at fixed w̃ by the chain rule: ∂g − ∂_a g · ∂w/∂_a w.
    let mut dtg = vec![0.0; nx * na];
    let mut dxg = vec![0.0; nx * na];
    for i in 0..nx {
        for j in 0..na {
            let d = daw.get(i, j);
            let um = hydro.u.get(i, j) - kappa;
            let dtg_a = (dt_vel.u.get(i, j) * d - um * dt_daw.get(i, j)) / (d * d);
            let dxg_a = (dxu.get(i, j) * d - um * dx_daw.get(i, j)) / (d * d);
            dtg[i * na + j] = dtg_a - dag.get(i, j) * dtw.get(i, j) / d;
            dxg[i * na + j] = dxg_a - dag.get(i, j) * dxw.get(i, j) / d;
        }
    }

    let mut b = EntropyBudget {
        t: hydro.t,
        i1: 0.0,
        i2: 0.0,
        i3: 0.0,
        i4: 0.0,
        i5: 0.0,
        x: 0.0,
        y: 0.0,
        z_direct: 0.0,
        z_reduced: 0.0,
        z_cancel: 0.0,
        r_term: 0.0,
        dldt_fd: 0.0,
    };
    for (j, &a) in grid.nodes().iter().enumerate() {
        let ia = 1.0 / (2.0 * a);
        for i in 0..nx {
            let col = f.column(i);
            let (w, u, v) = (hydro.w.get(i, j), hydro.u.get(i, j), hydro.v.get(i, j));
            let du = eps.u.get(i, j) - u;
            let dv = eps.v.get(i, j) - v;
            let dw = eps.w.get(i, j) - w;
            let gij = f.g[i * na + j];
            // r ∂_a(v/r) = ∂_a v − v/(2a), and (v/r)-weighted terms carry 1/(2a).
            let sv = dav.get(i, j) - v * ia;
            b.i1 -= 0.5 * dxu.get(i, j) * (du * du + e2 * dv * dv * ia);
            b.i2 -= e2 * ia * (dxv.get(i, j) * du * dv + sv * dv * dv);
            b.i3 -= dxw.get(i, j) * gij * du * dw;
            b.i4 += bregman_pl(col, &dtg[i * na..(i + 1) * na], w, eps.w.get(i, j));
            b.i5 += eps.u.get(i, j) * bregman_pl(col, &dxg[i * na..(i + 1) * na], w, eps.w.get(i, j));
            b.x -= gij * daw.get(i, j) * dv * dw;
            b.y += u * dv * dw;
            b.z_reduced += kappa * dv * dw;
            b.z_cancel -= kappa * e2 * dxv.get(i, j) * dv * ia;
            b.r_term -= e2 * ia * (dt_vel.v.get(i, j) + v * sv) * dv;
        }
    }
    let q = h / nx as f64;
    for t in [&mut b.i1, &mut b.i2, &mut b.i3, &mut b.i4, &mut b.i5, &mut b.x, &mut b.y, &mut b.z_reduced, &mut b.z_cancel, &mut b.r_term] {
        *t *= q;
    }
    b.z_direct = b.x + b.y;
    Ok(b)
}

/// Budgets at several probe times of one `ε` run, plus the `L` history.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BudgetStudy {
    pub eps: f64,
    pub kappa: f64,
    pub budgets: Vec<EntropyBudget>,
    pub times: Vec<f64>,
    /// `L_k + L_c` at `times`.
    pub l_total: Vec<f64>,
}

/// Runs both systems from `w0`, probing the budget at the given step indices.
///
/// `κ` is fixed for the whole study at the minimum of [`natural_kappa`] over
/// all hydrostatic steps, so `∂²F ≥ 1` holds along the trajectory.
pub fn budget_study(
    config: &SolverConfig,
    eps: f64,
    w0: &Field2D,
    probe_steps: &[usize],
    probe_spacing: usize,
) -> Result<BudgetStudy> {
    if probe_spacing == 0 {
        return Err(Error::Config("probe spacing must be at least one step".into()));
    }
    let steps = config.steps()?;
    let mut wanted = std::collections::BTreeSet::new();
    for &s in probe_steps {
        if s < 2 * probe_spacing || s + 2 * probe_spacing > steps {
            return Err(Error::Precondition(format!("probe step {s} leaves the run window")));
        }
        for k in 0..5 {
            wanted.insert(s + k * probe_spacing - 2 * probe_spacing);
        }
    }
    for s in (0..=steps).step_by(config.cadence) {
        wanted.insert(s);
    }
    let grid = RadialGrid::new(config.na)?;
    let collect = |e: f64, kappa: &mut f64| -> Result<Vec<(usize, FlowState)>> {
        let mut out = Vec::new();
        let mut step = 0usize;
        let mut err = None;
        let tr = integrate(config, e, w0.clone(), &mut |s: &FlowState| {
            if e == 0.0 {
                match natural_kappa(s, &grid) {
                    Ok(k) => *kappa = kappa.min(k),
                    Err(x) => {
                        err = Some(x);
                        return false;
                    }
                }
            }
            if wanted.contains(&step) {
                out.push((step, s.clone()));
            }
            step += 1;
            true
        })?;
        if let Some(x) = err {
            return Err(x);
        }
        if !tr.outcome.is_completed() {
            return Err(Error::Precondition(format!("run did not complete: {:?}", tr.outcome)));
        }
        Ok(out)
    };
    let mut kappa = f64::INFINITY;
    let hydro = collect(0.0, &mut kappa)?;
    let mut unused = f64::INFINITY;
    let eps_states = collect(eps, &mut unused)?;
    let find = |v: &[(usize, FlowState)], s: usize| v.iter().find(|(k, _)| *k == s).map(|(_, st)| st.clone()).unwrap();

    let mut budgets = Vec::with_capacity(probe_steps.len());
    for &s in probe_steps {
        let idx = |k: usize| s + k * probe_spacing - 2 * probe_spacing;
        let window = ProbeWindow {
            eps: std::array::from_fn(|k| find(&eps_states, idx(k))),
            hydro: std::array::from_fn(|k| find(&hydro, idx(k))),
        };
        budgets.push(entropy_budget(&window, &grid, config.sigma_min, kappa)?);
    }
    let mut times = Vec::new();
    let mut l_total = Vec::new();
    for s in (0..=steps).step_by(config.cadence) {
        let (e, hy) = (find(&eps_states, s), find(&hydro, s));
        let f = build_convex_f(&hy, &grid, config.sigma_min, Some(kappa))?;
        times.push(hy.t);
        l_total.push(relative_entropy(&e, &hy, &f, &grid)?.l_total);
    }
    Ok(BudgetStudy { eps, kappa, budgets, times, l_total })
}

/// Smallest `C ≥ 0` with `L(t) ≤ (L(0) + ε⁴ t) e^{C t}` on every sampled series.
pub fn gronwall_constant(series: &[(f64, &[f64], &[f64])]) -> f64 {
    let mut c = 0.0f64;
    for &(eps, times, l) in series {
        let e4 = eps.powi(4);
        for (&t, &lt) in times.iter().zip(l) {
            if t > 0.0 {
                let base = l[0] + e4 * t;
                if lt > base {
                    c = c.max((lt / base).ln() / t);
                }
            }
        }
    }
    c
}
