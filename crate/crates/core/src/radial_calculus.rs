//! Radial direction in the area coordinate `a = r²/2`.
//!
//! The unit cross-section `0 < r < 1` maps to `0 < a < 1/2`, the measure
//! `r dr` becomes `da` and `(1/r)∂_r` becomes `∂_a`. Cells are centered so the
//! axis `a = 0` is never sampled.

use crate::error::{check_len, Error, Result};
use crate::spectral_x::Field2D;

/// Quadratic extrapolation weights from the three cells nearest a wall to the wall itself.
const EXTRAP: [f64; 3] = [15.0 / 8.0, -10.0 / 8.0, 3.0 / 8.0];

/// Cell-centered grid on `(0, 1/2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    n_a: usize,
    h: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    r_nodes: Vec<f64>,
}

impl RadialGrid {
    pub fn new(n_a: usize) -> Result<Self> {
        if n_a < 2 {
            return Err(Error::InvalidGrid(format!("n_a must be at least 2, got {n_a}")));
        }
        let h = 0.5 / n_a as f64;
        let nodes: Vec<f64> = (0..n_a).map(|j| (j as f64 + 0.5) * h).collect();
        let r_nodes = nodes.iter().map(|&a| (2.0 * a).sqrt()).collect();
        Ok(Self { n_a, h, nodes, weights: vec![h; n_a], r_nodes })
    }

    pub fn len(&self) -> usize {
        self.n_a
    }

    pub fn is_empty(&self) -> bool {
        self.n_a == 0
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn r_nodes(&self) -> &[f64] {
        &self.r_nodes
    }
}

pub fn make_grid(n_a: usize) -> Result<RadialGrid> {
    RadialGrid::new(n_a)
}

/// Midpoint approximation of `∫₀^{1/2} f da`.
pub fn integrate_radial(f: &[f64], g: &RadialGrid) -> Result<f64> {
    check_len(g.len(), f.len())?;
    Ok(f.iter().zip(g.weights()).map(|(v, w)| v * w).sum())
}

/// Second-order derivative in `a`: centered inside, one-sided at the two end cells.
pub fn diff_a(f: &[f64], g: &RadialGrid) -> Result<Vec<f64>> {
    check_len(g.len(), f.len())?;
    if f.len() < 3 {
        return Err(Error::Stencil { needed: 3, got: f.len() });
    }
    let mut out = vec![0.0; f.len()];
    diff_a_into(f, g.h(), &mut out);
    Ok(out)
}

pub(crate) fn diff_a_into(f: &[f64], h: f64, out: &mut [f64]) {
    let n = f.len();
    let c = 0.5 / h;
    out[0] = c * (-3.0 * f[0] + 4.0 * f[1] - f[2]);
    for j in 1..n - 1 {
        out[j] = c * (f[j + 1] - f[j - 1]);
    }
    out[n - 1] = c * (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]);
}

/// `diff_a` applied to every x-column of a field.
pub fn diff_a_field(f: &Field2D, g: &RadialGrid) -> Result<Field2D> {
    check_len(g.len(), f.na())?;
    if f.na() < 3 {
        return Err(Error::Stencil { needed: 3, got: f.na() });
    }
    let (nx, na) = (f.nx(), f.na());
    let c = 0.5 / g.h();
    let mut out = Field2D::zeros(nx, na)?;
    {
        let (r0, r1, r2) = (f.row(0), f.row(1), f.row(2));
        let o = out.row_mut(0);
        for i in 0..nx {
            o[i] = c * (-3.0 * r0[i] + 4.0 * r1[i] - r2[i]);
        }
    }
    for j in 1..na - 1 {
        let (lo, hi) = (f.row(j - 1), f.row(j + 1));
        let o = out.row_mut(j);
        for i in 0..nx {
            o[i] = c * (hi[i] - lo[i]);
        }
    }
    {
        let (r0, r1, r2) = (f.row(na - 1), f.row(na - 2), f.row(na - 3));
        let o = out.row_mut(na - 1);
        for i in 0..nx {
            o[i] = c * (3.0 * r0[i] - 4.0 * r1[i] + r2[i]);
        }
    }
    Ok(out)
}

/// Derivative in `a` of a quantity that vanishes at both walls.
///
/// Values are interpolated to the cell faces (fourth order inside, a cubic
/// through the zero wall value next to each wall) and differenced, so the
/// result telescopes: `Σ h·(D f)_j = 0` up to round-off.
pub fn face_diff(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    assert!(n >= 3, "face_diff needs at least 3 cells");
    let mut faces = vec![0.0; n + 1];
    for (k, face) in faces.iter_mut().enumerate().take(n).skip(1) {
        *face = face_value(k, n, |j| f[j]);
    }
    (0..n).map(|j| (faces[j + 1] - faces[j]) / h).collect()
}

#[inline]
pub(crate) fn face_value<T>(k: usize, n: usize, f: impl Fn(usize) -> T) -> T
where
    T: Copy + std::ops::Add<Output = T> + std::ops::Sub<Output = T> + std::ops::Mul<f64, Output = T>,
{
    if k == 1 {
        f(0) * 0.75 + f(1) * 0.5 - f(2) * 0.05
    } else if k == n - 1 {
        f(n - 1) * 0.75 + f(n - 2) * 0.5 - f(n - 3) * 0.05
    } else {
        ((f(k - 1) + f(k)) * 9.0 - f(k - 2) - f(k + 1)) * (1.0 / 16.0)
    }
}

/// `face_diff` applied to every x-column of a field.
pub fn face_diff_field(f: &Field2D, h: f64) -> Field2D {
    let (nx, na) = (f.nx(), f.na());
    assert!(na >= 3, "face_diff_field needs at least 3 cells");
    let mut faces = vec![0.0; (na + 1) * nx];
    for k in 1..na {
        let dst = &mut faces[k * nx..(k + 1) * nx];
        for (i, d) in dst.iter_mut().enumerate() {
            *d = face_value(k, na, |j| f.values()[j * nx + i]);
        }
    }
    let mut out = Field2D::zeros(nx, na).expect("valid shape");
    let inv_h = 1.0 / h;
    for j in 0..na {
        let o = out.row_mut(j);
        for i in 0..nx {
            o[i] = (faces[(j + 1) * nx + i] - faces[j * nx + i]) * inv_h;
        }
    }
    out
}

/// Quadratic extrapolation of cell values to `a = 0` and `a = 1/2`.
pub fn extrapolate_boundary(f: &[f64]) -> (f64, f64) {
    let n = f.len();
    let lo = EXTRAP[0] * f[0] + EXTRAP[1] * f[1] + EXTRAP[2] * f[2];
    let hi = EXTRAP[0] * f[n - 1] + EXTRAP[1] * f[n - 2] + EXTRAP[2] * f[n - 3];
    (lo, hi)
}

/// Discrete fundamental theorem of calculus between two nodes.
///
/// Returns `|f(b) − f(a) − ∫ₐᵇ diff_a f da|` with the trapezoid rule on the nodes.
pub fn verify_ftc(f: &[f64], g: &RadialGrid, a_lo: usize, a_hi: usize) -> Result<f64> {
    if a_lo >= a_hi {
        return Err(Error::Precondition(format!("need a_lo < a_hi, got {a_lo} >= {a_hi}")));
    }
    if a_hi >= g.len() {
        return Err(Error::Domain(format!("node index {a_hi} out of range")));
    }
    let df = diff_a(f, g)?;
    let integral: f64 = (a_lo..a_hi).map(|j| 0.5 * g.h() * (df[j] + df[j + 1])).sum();
    Ok((f[a_hi] - f[a_lo] - integral).abs())
}

/// Residual of `∫ f g' da − [f g] + ∫ g f' da` with extrapolated wall values.
pub fn verify_ibp(f: &[f64], g: &[f64], grid: &RadialGrid) -> Result<f64> {
    check_len(f.len(), g.len())?;
    let dg = diff_a(g, grid)?;
    let df = diff_a(f, grid)?;
    let fdg: Vec<f64> = f.iter().zip(&dg).map(|(a, b)| a * b).collect();
    let gdf: Vec<f64> = g.iter().zip(&df).map(|(a, b)| a * b).collect();
    let (f0, f1) = extrapolate_boundary(f);
    let (g0, g1) = extrapolate_boundary(g);
    let boundary = f1 * g1 - f0 * g0;
    Ok((integrate_radial(&fdg, grid)? - boundary + integrate_radial(&gdf, grid)?).abs())
}

/// `∫|f|² da / ∫|∂_a f|² da` for `f` vanishing somewhere in `[0, 1/2]`.
///
/// The zero may sit at a node, between two nodes of opposite sign, or at a wall
/// (extrapolated value within `10 h²` of zero relative to `max|f|`).
pub fn poincare_ratio(f: &[f64], grid: &RadialGrid) -> Result<f64> {
    check_len(grid.len(), f.len())?;
    let scale = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return Ok(0.0);
    }
    let at_node = f.iter().any(|v| v.abs() <= 1e-12 * scale);
    let crossing = f.windows(2).any(|p| p[0] * p[1] < 0.0);
    let (lo, hi) = extrapolate_boundary(f);
    let tol = 10.0 * grid.h() * grid.h() * scale;
    let at_wall = lo.abs() <= tol || hi.abs() <= tol;
    if !(at_node || crossing || at_wall) {
        return Err(Error::Precondition("f does not vanish anywhere in [0, 1/2]".into()));
    }
    let df = diff_a(f, grid)?;
    let num = integrate_radial(&f.iter().map(|v| v * v).collect::<Vec<_>>(), grid)?;
    let den = integrate_radial(&df.iter().map(|v| v * v).collect::<Vec<_>>(), grid)?;
    Ok(if den == 0.0 { 0.0 } else { num / den })
}
