//! The Dirichlet solver `𝒜 = (−∂_a²)⁻¹` with zero data at `a = 0, 1/2`,
//! and the Biot–Savart laws that recover velocities from `w`.
//!
//! The production path is a tridiagonal solve with odd ghost cells
//! (`ψ_{-1} = −ψ_0`, `ψ_n = −ψ_{n-1}`). The resulting matrix is symmetric, so
//! the discrete cancellation `∫∫ v w = 0` holds to round-off. The kernel
//! quadrature is kept as an independent check.

use rustfft::num_complex::Complex64;

use crate::error::{check_len, Error, Result};
use crate::radial_calculus::{face_value, RadialGrid};
use crate::spectral_x::{Field2D, SpectralX};

/// `𝒜(w)` together with its wall values.
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletPotential {
    pub values: Field2D,
    /// Values at `a = 0`, one per x-node.
    pub lower: Vec<f64>,
    /// Values at `a = 1/2`, one per x-node.
    pub upper: Vec<f64>,
}

/// Green's function of `−∂_a²` on `(0, 1/2)` with zero Dirichlet data.
pub fn dirichlet_kernel(a: f64, at: f64) -> f64 {
    -0.5 * ((a - at).abs() - a - at + 4.0 * a * at)
}

/// Midpoint quadrature of `∫ K(a, ã) w(ã) dã`.
///
/// The self cell uses the exact cell integral of `|a − ã|`, which is `h²/4`.
pub fn apply_a_kernel(w: &Field2D, grid: &RadialGrid) -> Result<DirichletPotential> {
    check_len(grid.len(), w.na())?;
    let (nx, na, h) = (w.nx(), w.na(), grid.h());
    let nodes = grid.nodes();
    let mut out = Field2D::zeros(nx, na)?;
    for j in 0..na {
        let o = out.row_mut(j);
        for m in 0..na {
            let mut k = dirichlet_kernel(nodes[j], nodes[m]) * h;
            if m == j {
                k -= 0.5 * 0.25 * h * h;
            }
            for (oi, wi) in o.iter_mut().zip(w.row(m)) {
                *oi += k * wi;
            }
        }
    }
    let wall = |a: f64| -> Vec<f64> {
        (0..nx)
            .map(|i| (0..na).map(|m| dirichlet_kernel(a, nodes[m]) * h * w.get(i, m)).sum())
            .collect()
    };
    Ok(DirichletPotential { values: out, lower: wall(0.0), upper: wall(0.5) })
}

/// Factored `h²(−L_h + diag(c))`, where `L_h` is the ghost-cell Laplacian in `a`.
///
/// Off-diagonals are all `−1`, so only the pivots are stored.
#[derive(Debug, Clone)]
struct Tridiag {
    inv_pivot: Vec<f64>,
}

impl Tridiag {
    fn new(h: f64, shift: &[f64]) -> Self {
        let n = shift.len();
        let mut inv_pivot = vec![0.0; n];
        let mut prev = 0.0;
        for j in 0..n {
            let wall = if j == 0 || j == n - 1 { 1.0 } else { 0.0 };
            let m = 2.0 + wall + h * h * shift[j] - prev;
            inv_pivot[j] = 1.0 / m;
            prev = inv_pivot[j];
        }
        Self { inv_pivot }
    }

    fn solve_in_place<T>(&self, h: f64, x: &mut [T])
    where
        T: Copy + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
    {
        let n = x.len();
        let h2 = h * h;
        x[0] = x[0] * (h2 * self.inv_pivot[0]);
        for j in 1..n {
            x[j] = (x[j] * h2 + x[j - 1]) * self.inv_pivot[j];
        }
        for j in (0..n - 1).rev() {
            x[j] = x[j] + x[j + 1] * self.inv_pivot[j];
        }
    }
}

/// Solves `(−∂_a² + c(a)) ψ = rhs` with zero wall data for one column.
pub fn solve_dirichlet(rhs: &[f64], h: f64, shift: &[f64]) -> Result<Vec<f64>> {
    check_len(rhs.len(), shift.len())?;
    if rhs.len() < 3 {
        return Err(Error::Stencil { needed: 3, got: rhs.len() });
    }
    let mut x = rhs.to_vec();
    Tridiag::new(h, shift).solve_in_place(h, &mut x);
    Ok(x)
}

/// Ghost-cell tridiagonal solve of `−∂_a² 𝒜 = w`, column by column.
pub fn apply_a_tridiag(w: &Field2D, grid: &RadialGrid) -> Result<DirichletPotential> {
    check_len(grid.len(), w.na())?;
    let (nx, na) = (w.nx(), w.na());
    if na < 3 {
        return Err(Error::Stencil { needed: 3, got: na });
    }
    let t = Tridiag::new(grid.h(), &vec![0.0; na]);
    let mut out = w.clone();
    let mut col = vec![0.0; na];
    for i in 0..nx {
        for (j, c) in col.iter_mut().enumerate() {
            *c = w.get(i, j);
        }
        t.solve_in_place(grid.h(), &mut col);
        for (j, c) in col.iter().enumerate() {
            out.set(i, j, *c);
        }
    }
    // The odd ghost cell makes the wall value the mean of ψ and −ψ.
    let lower = (0..nx).map(|i| 0.5 * (out.get(i, 0) - out.get(i, 0))).collect();
    let upper = (0..nx).map(|i| 0.5 * (out.get(i, na - 1) - out.get(i, na - 1))).collect();
    Ok(DirichletPotential { values: out, lower, upper })
}

/// Velocity pair `(u, v)` recovered from `w`.
#[derive(Debug, Clone, PartialEq)]
pub struct Velocity {
    pub u: Field2D,
    pub v: Field2D,
}

/// Biot–Savart operator for a fixed grid, mode cutoff and aspect ratio `ε`.
///
/// Mode `k` of the stream function solves `(−∂_a² + ε²(2πk)²/(2a)) ψ̂_k = ŵ_k`;
/// then `u = −D ψ`, `v = ∂x ψ` with `D` the wall-vanishing face derivative.
/// `ε = 0` is the hydrostatic law.
#[derive(Debug, Clone)]
pub struct BiotSavart {
    grid: RadialGrid,
    sx: SpectralX,
    n_modes: usize,
    eps: f64,
    factors: Vec<Tridiag>,
}

/// Velocity spectra per a-row, modes above the cutoff zero.
pub(crate) struct VelocitySpectra {
    pub u: Vec<Vec<Complex64>>,
    pub v: Vec<Vec<Complex64>>,
}

impl BiotSavart {
    pub fn new(grid: &RadialGrid, nx: usize, n_modes: usize, eps: f64) -> Result<Self> {
        if !(eps >= 0.0) || !eps.is_finite() {
            return Err(Error::Domain(format!("eps must be a finite non-negative number, got {eps}")));
        }
        if grid.len() < 3 {
            return Err(Error::Stencil { needed: 3, got: grid.len() });
        }
        if 3 * n_modes > nx {
            return Err(Error::Config(format!("mode cutoff {n_modes} exceeds nx/3 for nx = {nx}")));
        }
        let sx = SpectralX::new(nx)?;
        let factors = (0..=n_modes)
            .map(|k| {
                let kk = 2.0 * std::f64::consts::PI * k as f64;
                let shift: Vec<f64> = grid.nodes().iter().map(|&a| eps * eps * kk * kk / (2.0 * a)).collect();
                Tridiag::new(grid.h(), &shift)
            })
            .collect();
        Ok(Self { grid: grid.clone(), sx, n_modes, eps, factors })
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn spectral(&self) -> &SpectralX {
        &self.sx
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// Stream function spectra from vorticity spectra (rows indexed by a-node).
    pub(crate) fn stream_spectra(&self, w_hat: &[Vec<Complex64>]) -> Vec<Vec<Complex64>> {
        let na = self.grid.len();
        let half = self.sx.nx() / 2;
        let mut psi = vec![vec![Complex64::new(0.0, 0.0); half + 1]; na];
        let mut col = vec![Complex64::new(0.0, 0.0); na];
        for (k, t) in self.factors.iter().enumerate() {
            for (j, c) in col.iter_mut().enumerate() {
                *c = w_hat[j][k];
            }
            t.solve_in_place(self.grid.h(), &mut col);
            for (j, c) in col.iter().enumerate() {
                psi[j][k] = *c;
            }
        }
        psi
    }

    pub(crate) fn velocity_spectra(&self, w_hat: &[Vec<Complex64>]) -> VelocitySpectra {
        let psi = self.stream_spectra(w_hat);
        let na = self.grid.len();
        let half = self.sx.nx() / 2;
        let zero = Complex64::new(0.0, 0.0);
        let mut faces = vec![vec![zero; self.n_modes + 1]; na + 1];
        for (f, face) in faces.iter_mut().enumerate().take(na).skip(1) {
            for (k, c) in face.iter_mut().enumerate() {
                *c = face_value(f, na, |j| psi[j][k]);
            }
        }
        let inv_h = 1.0 / self.grid.h();
        let mut u = vec![vec![zero; half + 1]; na];
        let mut v = vec![vec![zero; half + 1]; na];
        for j in 0..na {
            for k in 0..=self.n_modes {
                u[j][k] = -(faces[j + 1][k] - faces[j][k]) * inv_h;
                v[j][k] = psi[j][k] * Complex64::new(0.0, 2.0 * std::f64::consts::PI * k as f64);
            }
        }
        VelocitySpectra { u, v }
    }

    /// Stream function `ψ` on the lattice (modes above the cutoff removed).
    pub fn stream_function(&self, w: &Field2D) -> Result<Field2D> {
        self.check(w)?;
        let psi = self.stream_spectra(&self.sx.row_spectra(w));
        Ok(self.synthesize_rows(&psi))
    }

    pub fn velocity(&self, w: &Field2D) -> Result<Velocity> {
        self.check(w)?;
        let s = self.velocity_spectra(&self.sx.row_spectra(w));
        Ok(Velocity { u: self.synthesize_rows(&s.u), v: self.synthesize_rows(&s.v) })
    }

    pub(crate) fn synthesize_rows(&self, rows: &[Vec<Complex64>]) -> Field2D {
        let mut out = Field2D::zeros(self.sx.nx(), rows.len()).expect("valid shape");
        for (j, r) in rows.iter().enumerate() {
            out.row_mut(j).copy_from_slice(&self.sx.synthesize(r));
        }
        out
    }

    fn check(&self, w: &Field2D) -> Result<()> {
        check_len(self.sx.nx(), w.nx())?;
        check_len(self.grid.len(), w.na())
    }
}

/// Hydrostatic velocities `u = −P_N ∂_a 𝒜(w)`, `v = P_N ∂x 𝒜(w)`.
pub fn biot_savart(w: &Field2D, grid: &RadialGrid, n_modes: usize) -> Result<Velocity> {
    BiotSavart::new(grid, w.nx(), n_modes, 0.0)?.velocity(w)
}

/// Velocities of the rescaled system at aspect ratio `ε`.
pub fn eps_biot_savart(w: &Field2D, eps: f64, grid: &RadialGrid, n_modes: usize) -> Result<Velocity> {
    BiotSavart::new(grid, w.nx(), n_modes, eps)?.velocity(w)
}
