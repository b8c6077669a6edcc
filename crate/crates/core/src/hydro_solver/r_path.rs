//! Independent discretization in the physical radius `r`.
//!
//! Uniform cells in `r ∈ (0, 1)`, the Dirichlet solver as a kernel integral
//! against `ρ dρ`, and `L_r = (1/r) ∂_r` by finite differences. Used only to
//! cross-check the area-coordinate solver.

use crate::error::{check_len, Error, Result};
use crate::spectral_x::{Field2D, SpectralX};

#[derive(Debug, Clone)]
pub struct RPathSolver {
    nx: usize,
    n_modes: usize,
    r: Vec<f64>,
    dr: f64,
    sx: SpectralX,
}

impl RPathSolver {
    pub fn new(n_r: usize, nx: usize, n_modes: usize) -> Result<Self> {
        if n_r < 4 {
            return Err(Error::Stencil { needed: 4, got: n_r });
        }
        if 3 * n_modes > nx {
            return Err(Error::Config(format!("mode cutoff {n_modes} exceeds nx/3")));
        }
        let dr = 1.0 / n_r as f64;
        Ok(Self {
            nx,
            n_modes,
            r: (0..n_r).map(|j| (j as f64 + 0.5) * dr).collect(),
            dr,
            sx: SpectralX::new(nx)?,
        })
    }

    pub fn r_nodes(&self) -> &[f64] {
        &self.r
    }

    /// Samples `f(x, r)` on this grid (rows indexed by r-cell).
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Result<Field2D> {
        let mut out = Field2D::zeros(self.nx, self.r.len())?;
        for (j, &r) in self.r.iter().enumerate() {
            for (i, v) in out.row_mut(j).iter_mut().enumerate() {
                *v = f(i as f64 / self.nx as f64, r);
            }
        }
        Ok(out)
    }

    /// `u = −P_N L_r 𝒜(w)` and `v = P_N ∂x 𝒜(w)`.
    pub fn velocity(&self, w: &Field2D) -> Result<(Field2D, Field2D)> {
        check_len(self.r.len(), w.na())?;
        check_len(self.nx, w.nx())?;
        let n = self.r.len();
        let d = 0.5 * self.dr;
        let mut pot = Field2D::zeros(self.nx, n)?;
        let mut u = Field2D::zeros(self.nx, n)?;
        for j in 0..n {
            let r = self.r[j];
            for m in 0..n {
                let rho = self.r[m];
                let q = rho * self.dr;
                let mut kp = -0.25 * ((r * r - rho * rho).abs() - r * r - rho * rho + 2.0 * r * r * rho * rho) * q;
                let sgn = if m < j { 1.0 } else if m > j { -1.0 } else { 0.0 };
                let mut ku = 0.5 * (sgn - 1.0 + 2.0 * rho * rho) * q;
                if m == j {
                    // Exact cell integrals of |r² − ρ²| ρ and sgn(r² − ρ²) ρ.
                    kp -= 0.25 * (2.0 * r * r * d * d + 0.5 * d.powi(4));
                    ku += 0.5 * (-d * d);
                }
                let src = w.row(m).to_vec();
                for (p, s) in pot.row_mut(j).iter_mut().zip(&src) {
                    *p += kp * s;
                }
                for (p, s) in u.row_mut(j).iter_mut().zip(&src) {
                    *p += ku * s;
                }
            }
        }
        let u = self.sx.project_pn(&u, self.n_modes);
        let v = self.sx.project_pn(&self.sx.diff_x(&pot), self.n_modes);
        Ok((u, v))
    }

    /// `(1/r) ∂_r w` with an even reflection across the axis.
    fn l_r(&self, w: &Field2D) -> Field2D {
        let n = self.r.len();
        let mut out = w.clone();
        for i in 0..self.nx {
            for j in 0..n {
                let d = if j == 0 {
                    (w.get(i, 1) - w.get(i, 0)) / (2.0 * self.dr)
                } else if j == n - 1 {
                    (3.0 * w.get(i, j) - 4.0 * w.get(i, j - 1) + w.get(i, j - 2)) / (2.0 * self.dr)
                } else {
                    (w.get(i, j + 1) - w.get(i, j - 1)) / (2.0 * self.dr)
                };
                out.set(i, j, d / self.r[j]);
            }
        }
        out
    }

    /// `−(u ∂x w + v L_r w)` with dealiased products.
    pub fn rhs(&self, w: &Field2D) -> Result<Field2D> {
        let (u, v) = self.velocity(w)?;
        let a = self.sx.dealiased_product_field(&u, &self.sx.diff_x(w));
        let b = self.sx.dealiased_product_field(&v, &self.l_r(w));
        Ok(a.zip_map(&b, |x, y| -(x + y)))
    }

    pub fn step_rk4(&self, w: &Field2D, dt: f64) -> Result<Field2D> {
        let k1 = self.rhs(w)?;
        let k2 = self.rhs(&w.zip_map(&k1, |a, b| a + 0.5 * dt * b))?;
        let k3 = self.rhs(&w.zip_map(&k2, |a, b| a + 0.5 * dt * b))?;
        let k4 = self.rhs(&w.zip_map(&k3, |a, b| a + dt * b))?;
        let mut next = w.clone();
        for (idx, x) in next.values_mut().iter_mut().enumerate() {
            *x += dt / 6.0 * (k1.values()[idx] + 2.0 * (k2.values()[idx] + k3.values()[idx]) + k4.values()[idx]);
        }
        Ok(next)
    }
}

/// Cubic Lagrange interpolation of cell data at `a` (cells `(j + 1/2) h`).
pub fn interpolate_cells(values: &[f64], h: f64, a: f64) -> f64 {
    let n = values.len();
    let s = a / h - 0.5;
    let base = (s.floor() as isize - 1).clamp(0, n as isize - 4) as usize;
    let mut out = 0.0;
    for p in 0..4 {
        let mut l = 1.0;
        for q in 0..4 {
            if q != p {
                l *= (s - (base + q) as f64) / (p as f64 - q as f64);
            }
        }
        out += l * values[base + p];
    }
    out
}
