//! Norms, weighted energies, cancellation residuals and comparison checks.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::hydro_solver::FlowState;
use crate::radial_calculus::{diff_a_field, RadialGrid};
use crate::spectral_x::{Field2D, SpectralX};

/// Absolute floor used when normalizing residuals.
pub const RESIDUAL_FLOOR: f64 = 1e-14;

/// Scalar diagnostics of one snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub l2: f64,
    pub hs4: f64,
    /// Weighted energy of order 4; absent when the sign condition fails.
    pub whs4: Option<f64>,
    pub min_daw: f64,
    pub max_daw: f64,
    /// `max_x |∫u da − ∫u₀ da|`.
    pub mean_u_drift: f64,
    pub cancel: [f64; 4],
    pub dt: f64,
}

pub const DIAGNOSTICS_HEADER: &str =
    "t,l2,hs4,whs4,min_daw,max_daw,mean_u_drift,cancel0,cancel1,cancel2,cancel3,dt";

impl DiagnosticsRecord {
    pub fn csv_row(&self) -> String {
        let whs4 = self.whs4.map(|v| format!("{v:e}")).unwrap_or_default();
        format!(
            "{:e},{:e},{:e},{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
            self.t,
            self.l2,
            self.hs4,
            whs4,
            self.min_daw,
            self.max_daw,
            self.mean_u_drift,
            self.cancel[0],
            self.cancel[1],
            self.cancel[2],
            self.cancel[3],
            self.dt
        )
    }
}

/// `∫ u da` for every x-node.
pub fn radial_mean(u: &Field2D, grid: &RadialGrid) -> Vec<f64> {
    let mut out = vec![0.0; u.nx()];
    for j in 0..u.na() {
        for (o, v) in out.iter_mut().zip(u.row(j)) {
            *o += v * grid.h();
        }
    }
    out
}

/// All mixed derivatives `∂x^p ∂_a^q w` with `p + q ≤ s`, indexed `[p][q]`.
fn derivative_table(w: &Field2D, s: usize, sx: &SpectralX, grid: &RadialGrid) -> Result<Vec<Vec<Field2D>>> {
    if grid.len() < s + 2 {
        return Err(Error::Stencil { needed: s + 2, got: grid.len() });
    }
    let mut table = Vec::with_capacity(s + 1);
    let mut dx = w.clone();
    for p in 0..=s {
        let mut col = Vec::with_capacity(s + 1 - p);
        let mut cur = dx.clone();
        col.push(cur.clone());
        for _ in 1..=(s - p) {
            cur = diff_a_field(&cur, grid)?;
            col.push(cur.clone());
        }
        table.push(col);
        if p < s {
            dx = sx.diff_x(&dx);
        }
    }
    Ok(table)
}

/// `H^s` norm over `𝕋 × (0, 1/2)` with the `da dx` measure.
pub fn hs_norm(w: &Field2D, s: usize, sx: &SpectralX, grid: &RadialGrid) -> Result<f64> {
    check_len(grid.len(), w.na())?;
    let table = derivative_table(w, s, sx, grid)?;
    let sum: f64 = table.iter().flatten().map(|f| f.inner(f, grid.h())).sum();
    Ok(sum.sqrt())
}

/// Like `hs_norm`, with the top pure-x term weighted by `1/∂_a w`.
pub fn weighted_energy(w: &Field2D, s: usize, sigma: f64, sx: &SpectralX, grid: &RadialGrid) -> Result<f64> {
    check_len(grid.len(), w.na())?;
    let daw = diff_a_field(w, grid)?;
    let min = daw.min();
    if !(min >= sigma && sigma > 0.0) {
        return Err(Error::Precondition(format!("sign condition fails: min ∂_a w = {min} < σ = {sigma}")));
    }
    let table = derivative_table(w, s, sx, grid)?;
    let mut sum = 0.0;
    for (p, col) in table.iter().enumerate() {
        for (q, f) in col.iter().enumerate() {
            if p == s && q == 0 {
                let weighted = f.zip_map(&daw, |a, d| a * a / d);
                sum += weighted.values().iter().sum::<f64>() * grid.h() / w.nx() as f64;
            } else {
                sum += f.inner(f, grid.h());
            }
        }
    }
    Ok(sum.sqrt())
}

/// Normalized `|∫∫ ∂x^k v ∂x^k w|`.
pub fn cancellation_residual(v: &Field2D, w: &Field2D, k: usize, sx: &SpectralX, h: f64) -> f64 {
    let (mut dv, mut dw) = (v.clone(), w.clone());
    for _ in 0..k {
        dv = sx.diff_x(&dv);
        dw = sx.diff_x(&dw);
    }
    let num = dv.inner(&dw, h).abs();
    let den = dv.l2_norm(h) * dw.l2_norm(h);
    if num == 0.0 {
        0.0
    } else {
        num / (den + RESIDUAL_FLOOR)
    }
}

/// Diagnostics of one state.
pub fn record(
    state: &FlowState,
    sx: &SpectralX,
    grid: &RadialGrid,
    sigma: f64,
    initial_mean: &[f64],
    dt: f64,
) -> Result<DiagnosticsRecord> {
    let h = grid.h();
    let daw = diff_a_field(&state.w, grid)?;
    let (min_daw, max_daw) = (daw.min(), daw.max());
    let whs4 = if sigma > 0.0 && min_daw >= sigma { Some(weighted_energy(&state.w, 4, sigma, sx, grid)?) } else { None };
    let mean = radial_mean(&state.u, grid);
    check_len(mean.len(), initial_mean.len())?;
    let mean_u_drift = mean.iter().zip(initial_mean).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let mut cancel = [0.0; 4];
    for (k, c) in cancel.iter_mut().enumerate() {
        *c = cancellation_residual(&state.v, &state.w, k, sx, h);
    }
    Ok(DiagnosticsRecord {
        t: state.t,
        l2: state.w.l2_norm(h),
        hs4: hs_norm(&state.w, 4, sx, grid)?,
        whs4,
        min_daw,
        max_daw,
        mean_u_drift,
        cancel,
        dt,
    })
}

/// `‖w₁ − w₂‖` in `L²(da dx)` along two trajectories sampled at the same times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct L2Comparison {
    pub times: Vec<f64>,
    pub gaps: Vec<f64>,
    /// `sup_t gap(t) / gap(0)`; zero when both series vanish.
    pub sup_ratio: f64,
}

pub fn l2_compare(traj1: &[FlowState], traj2: &[FlowState], grid: &RadialGrid) -> Result<L2Comparison> {
    check_len(traj1.len(), traj2.len())?;
    if traj1.is_empty() {
        return Err(Error::Precondition("empty trajectories".into()));
    }
    let mut times = Vec::with_capacity(traj1.len());
    let mut gaps = Vec::with_capacity(traj1.len());
    for (a, b) in traj1.iter().zip(traj2) {
        a.w.same_shape(&b.w)?;
        if (a.t - b.t).abs() > 1e-12 * (1.0 + a.t.abs()) {
            return Err(Error::Precondition(format!("snapshot times differ: {} vs {}", a.t, b.t)));
        }
        times.push(a.t);
        gaps.push(a.w.zip_map(&b.w, |x, y| x - y).l2_norm(grid.h()));
    }
    let sup = gaps.iter().copied().fold(0.0, f64::max);
    let sup_ratio = if sup == 0.0 { 0.0 } else { sup / gaps[0].max(RESIDUAL_FLOOR) };
    Ok(L2Comparison { times, gaps, sup_ratio })
}

/// Single constant bounding the sup-ratios of a perturbation sweep, with the spread max/min.
pub fn stability_constant(sup_ratios: &[f64]) -> (f64, f64) {
    let max = sup_ratios.iter().copied().fold(0.0, f64::max);
    let min = sup_ratios.iter().copied().fold(f64::INFINITY, f64::min);
    (max, if min > 0.0 { max / min } else { f64::INFINITY })
}

/// `‖d‖_{H¹} / (‖d‖_{H⁴}^{1/4} ‖d‖_{L²}^{3/4})`.
pub fn interpolation_ratio(d: &Field2D, sx: &SpectralX, grid: &RadialGrid) -> Result<f64> {
    let h1 = hs_norm(d, 1, sx, grid)?;
    let h4 = hs_norm(d, 4, sx, grid)?;
    let l2 = d.l2_norm(grid.h());
    Ok(if h1 == 0.0 { 0.0 } else { h1 / (h4.powf(0.25) * l2.powf(0.75)) })
}

/// `max|f| / (‖f‖ + ‖∂x f‖ + ‖∂_a² f‖)`.
pub fn sobolev_ratio(f: &Field2D, sx: &SpectralX, grid: &RadialGrid) -> Result<f64> {
    let h = grid.h();
    let daa = diff_a_field(&diff_a_field(f, grid)?, grid)?;
    let den = f.l2_norm(h) + sx.diff_x(f).l2_norm(h) + daa.l2_norm(h);
    Ok(if den == 0.0 { 0.0 } else { f.max_abs() / den })
}

/// Smallest `C` with `dE/dt ≤ C (1 + √E) E^{3/2}` along a sampled energy curve.
pub fn energy_growth_constant(times: &[f64], energies: &[f64]) -> f64 {
    let mut c = 0.0f64;
    for k in 1..times.len() {
        let de = (energies[k] - energies[k - 1]) / (times[k] - times[k - 1]);
        let e = 0.5 * (energies[k] + energies[k - 1]);
        if e > 0.0 {
            c = c.max(de / ((1.0 + e.sqrt()) * e.powf(1.5)));
        }
    }
    c
}

/// Boundedness of the stream function near the axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoleReport {
    /// `max_x |φ(x, 0)|`.
    pub axis_value: f64,
    /// `max |∂_a^i φ|` over the first three cells, `i = 1 ..= m_max + 1`.
    pub a_derivatives: Vec<f64>,
    /// `max |∂_r^{2m+1} φ|` over the first three cells, `m = 0 ..= m_max`.
    pub odd_r_derivatives: Vec<f64>,
}

/// Builds `φ = −∫_a^{1/2} u dã` and reports derivative bounds next to the axis.
pub fn pole_check(u: &Field2D, grid: &RadialGrid, m_max: usize) -> Result<PoleReport> {
    check_len(grid.len(), u.na())?;
    let (nx, na, h) = (u.nx(), u.na(), grid.h());
    if na < m_max + 4 {
        return Err(Error::Stencil { needed: m_max + 4, got: na });
    }
    let mean = radial_mean(u, grid);
    let scale = u.max_abs().max(1.0);
    if mean.iter().any(|m| m.abs() > 1e-10 * scale) {
        return Err(Error::Precondition("compatibility ∫u da = 0 fails".into()));
    }
    // φ on faces, integrated down from a = 1/2.
    let mut face = vec![0.0; nx];
    for j in (0..na).rev() {
        for (f, v) in face.iter_mut().zip(u.row(j)) {
            *f -= h * v;
        }
    }
    let axis_value = face.iter().fold(0.0, |m: f64, v| m.max(v.abs()));

    // ∂_a^i φ = ∂_a^{i-1} u.
    let mut derivs = vec![u.clone()];
    for _ in 0..(2 * m_max + 1) {
        let next = diff_a_field(derivs.last().expect("non-empty"), grid)?;
        derivs.push(next);
    }
    let near_axis = |f: &Field2D| (0..3).flat_map(|j| f.row(j).to_vec()).fold(0.0, |m: f64, v| m.max(v.abs()));
    let a_derivatives = derivs.iter().take(m_max + 1).map(near_axis).collect();

    let mut odd_r_derivatives = Vec::with_capacity(m_max + 1);
    for m in 0..=m_max {
        let coeffs = r_derivative_coefficients(2 * m + 1);
        let mut best = 0.0f64;
        for j in 0..3 {
            let r = grid.r_nodes()[j];
            for i in 0..nx {
                let mut val = 0.0;
                for (order, poly) in coeffs.iter().enumerate().skip(1) {
                    let c: f64 = poly.iter().enumerate().map(|(p, c)| c * r.powi(p as i32)).sum();
                    val += c * derivs[order - 1].get(i, j);
                }
                best = best.max(val.abs());
            }
        }
        odd_r_derivatives.push(best);
    }
    Ok(PoleReport { axis_value, a_derivatives, odd_r_derivatives })
}

/// Polynomials `c_i(r)` with `∂_r^n φ = Σ_i c_i(r) ∂_a^i φ`, using `∂_r = r ∂_a`.
///
/// Entry `[i][p]` is the coefficient of `r^p` in `c_i`.
pub fn r_derivative_coefficients(n: usize) -> Vec<Vec<f64>> {
    let mut c = vec![vec![0.0; n + 2]; n + 1];
    c[0][0] = 1.0;
    for _ in 0..n {
        let mut next = vec![vec![0.0; n + 2]; n + 1];
        for i in 0..=n {
            for p in 0..n + 2 {
                let v = c[i][p];
                if v == 0.0 {
                    continue;
                }
                if p > 0 {
                    next[i][p - 1] += v * p as f64;
                }
                if i < n && p + 1 < n + 2 {
                    next[i + 1][p + 1] += v;
                }
            }
        }
        c = next;
    }
    c
}
