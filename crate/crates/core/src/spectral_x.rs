//! Real Fourier representation along the periodic direction `x ∈ ℝ/ℤ`.
//!
//! Coefficients use the orthonormal basis `1, √2 cos 2πkx, √2 sin 2πkx`.
//! The Nyquist mode `cos(π nx x)` is kept separately so the transform pair is
//! exactly invertible.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{check_len, Error, Result};
use crate::radial_calculus::RadialGrid;

/// Cosine/sine coefficients of one periodic row.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralCoeffs {
    pub a0: f64,
    /// `a[k-1]` multiplies `√2 cos 2πkx`, for `k = 1 ..= nx/2 - 1`.
    pub a: Vec<f64>,
    /// `b[k-1]` multiplies `√2 sin 2πkx`.
    pub b: Vec<f64>,
    /// Coefficient of `cos(π nx x)`.
    pub nyquist: f64,
}

impl SpectralCoeffs {
    pub fn zeros(nx: usize) -> Self {
        let k = nx / 2 - 1;
        Self { a0: 0.0, a: vec![0.0; k], b: vec![0.0; k], nyquist: 0.0 }
    }

    pub fn k_max(&self) -> usize {
        self.a.len()
    }

    /// `a0² + Σ (a_k² + b_k²) + nyquist²`, equal to `∫ f² dx`.
    pub fn energy(&self) -> f64 {
        self.a0 * self.a0
            + self.a.iter().zip(&self.b).map(|(a, b)| a * a + b * b).sum::<f64>()
            + self.nyquist * self.nyquist
    }
}

/// Samples on the `x × a` lattice, stored one a-row at a time (`values[j * nx + i]`).
#[derive(Debug, Clone, PartialEq)]
pub struct Field2D {
    nx: usize,
    na: usize,
    values: Vec<f64>,
}

fn check_nx(nx: usize) -> Result<()> {
    if nx < 8 || nx % 2 != 0 {
        return Err(Error::Config(format!("nx must be even and at least 8, got {nx}")));
    }
    Ok(())
}

impl Field2D {
    pub fn zeros(nx: usize, na: usize) -> Result<Self> {
        check_nx(nx)?;
        if na == 0 {
            return Err(Error::InvalidGrid("field needs at least one a-row".into()));
        }
        Ok(Self { nx, na, values: vec![0.0; nx * na] })
    }

    pub fn from_values(nx: usize, na: usize, values: Vec<f64>) -> Result<Self> {
        let mut f = Self::zeros(nx, na)?;
        check_len(nx * na, values.len())?;
        f.values = values;
        Ok(f)
    }

    /// Samples `f(x_i, a_j)` on the lattice.
    pub fn from_fn(nx: usize, grid: &RadialGrid, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let mut out = Self::zeros(nx, grid.len())?;
        for (j, &a) in grid.nodes().iter().enumerate() {
            for (i, v) in out.row_mut(j).iter_mut().enumerate() {
                *v = f(i as f64 / nx as f64, a);
            }
        }
        Ok(out)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn na(&self) -> usize {
        self.na
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.values[j * self.nx..(j + 1) * self.nx]
    }

    pub fn row_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.values[j * self.nx..(j + 1) * self.nx]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.nx + i]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.values[j * self.nx + i] = v;
    }

    /// Values along `a` at the x-node `i`.
    pub fn column(&self, i: usize) -> Vec<f64> {
        (0..self.na).map(|j| self.get(i, j)).collect()
    }

    pub fn same_shape(&self, other: &Field2D) -> Result<()> {
        check_len(self.nx, other.nx)?;
        check_len(self.na, other.na)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field2D {
        Field2D { nx: self.nx, na: self.na, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    /// Elementwise combination of two fields of the same shape.
    pub fn zip_map(&self, other: &Field2D, f: impl Fn(f64, f64) -> f64) -> Field2D {
        assert_eq!((self.nx, self.na), (other.nx, other.na), "field shape mismatch");
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Field2D { nx: self.nx, na: self.na, values }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// `∫∫ f g dx da` with the lattice quadrature.
    pub fn inner(&self, other: &Field2D, h: f64) -> f64 {
        assert_eq!((self.nx, self.na), (other.nx, other.na), "field shape mismatch");
        let s: f64 = self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum();
        s * h / self.nx as f64
    }

    pub fn l2_norm(&self, h: f64) -> f64 {
        self.inner(self, h).sqrt()
    }
}

/// Cached FFT plans for one x resolution.
#[derive(Clone)]
pub struct SpectralX {
    nx: usize,
    m: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    fwd_pad: Arc<dyn Fft<f64>>,
    inv_pad: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for SpectralX {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralX").field("nx", &self.nx).field("padded", &self.m).finish()
    }
}

impl SpectralX {
    pub fn new(nx: usize) -> Result<Self> {
        if nx < 2 || nx % 2 != 0 {
            return Err(Error::Config(format!("nx must be even, got {nx}")));
        }
        let m = 3 * nx / 2;
        let mut planner = FftPlanner::new();
        Ok(Self {
            nx,
            m,
            fwd: planner.plan_fft_forward(nx),
            inv: planner.plan_fft_inverse(nx),
            fwd_pad: planner.plan_fft_forward(m),
            inv_pad: planner.plan_fft_inverse(m),
        })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    /// Normalized half spectrum `f̂_k`, `k = 0 ..= nx/2`, with `f_i = Σ f̂_k e^{2πikx_i}`.
    pub fn spectrum(&self, f: &[f64]) -> Vec<Complex64> {
        assert_eq!(f.len(), self.nx, "row length must equal nx");
        let mut buf: Vec<Complex64> = f.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fwd.process(&mut buf);
        let s = 1.0 / self.nx as f64;
        buf.truncate(self.nx / 2 + 1);
        buf.iter_mut().for_each(|c| *c *= s);
        buf
    }

    /// Nodal values from a half spectrum (length `nx/2 + 1`).
    pub fn synthesize(&self, hat: &[Complex64]) -> Vec<f64> {
        let half = self.nx / 2;
        assert_eq!(hat.len(), half + 1, "half spectrum length must be nx/2 + 1");
        let mut buf = vec![Complex64::new(0.0, 0.0); self.nx];
        buf[0] = Complex64::new(hat[0].re, 0.0);
        for k in 1..half {
            buf[k] = hat[k];
            buf[self.nx - k] = hat[k].conj();
        }
        buf[half] = Complex64::new(hat[half].re, 0.0);
        self.inv.process(&mut buf);
        buf.iter().map(|c| c.re).collect()
    }

    pub fn to_modes(&self, f: &[f64]) -> SpectralCoeffs {
        let hat = self.spectrum(f);
        let half = self.nx / 2;
        let r2 = std::f64::consts::SQRT_2;
        SpectralCoeffs {
            a0: hat[0].re,
            a: (1..half).map(|k| r2 * hat[k].re).collect(),
            b: (1..half).map(|k| -r2 * hat[k].im).collect(),
            nyquist: hat[half].re,
        }
    }

    pub fn to_nodes(&self, c: &SpectralCoeffs) -> Result<Vec<f64>> {
        let half = self.nx / 2;
        check_len(half - 1, c.a.len())?;
        check_len(half - 1, c.b.len())?;
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut hat = vec![Complex64::new(0.0, 0.0); half + 1];
        hat[0].re = c.a0;
        for k in 1..half {
            hat[k] = Complex64::new(s * c.a[k - 1], -s * c.b[k - 1]);
        }
        hat[half].re = c.nyquist;
        Ok(self.synthesize(&hat))
    }

    /// Zeroes every mode with `k > n`.
    pub fn project(&self, f: &[f64], n: usize) -> Vec<f64> {
        let mut hat = self.spectrum(f);
        hat.iter_mut().skip(n + 1).for_each(|c| *c = Complex64::new(0.0, 0.0));
        self.synthesize(&hat)
    }

    /// Exact derivative of every mode; the Nyquist mode has zero derivative.
    pub fn diff(&self, f: &[f64]) -> Vec<f64> {
        let mut hat = self.spectrum(f);
        diff_spectrum(&mut hat);
        self.synthesize(&hat)
    }

    /// Values of the trigonometric polynomial `hat` on the `3nx/2` padded grid (Nyquist dropped).
    pub(crate) fn pad_eval(&self, hat: &[Complex64], out: &mut [f64], buf: &mut [Complex64]) {
        let half = self.nx / 2;
        buf.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
        buf[0] = Complex64::new(hat[0].re, 0.0);
        for k in 1..half {
            buf[k] = hat[k];
            buf[self.m - k] = hat[k].conj();
        }
        self.inv_pad.process(buf);
        for (o, c) in out.iter_mut().zip(buf.iter()) {
            *o = c.re;
        }
    }

    /// Half spectrum (`k < nx/2`, Nyquist zero) of padded-grid samples.
    pub(crate) fn pad_truncate(&self, vals: &[f64], buf: &mut [Complex64]) -> Vec<Complex64> {
        for (b, &v) in buf.iter_mut().zip(vals) {
            *b = Complex64::new(v, 0.0);
        }
        self.fwd_pad.process(buf);
        let s = 1.0 / self.m as f64;
        let half = self.nx / 2;
        let mut hat: Vec<Complex64> = buf[..=half].iter().map(|c| c * s).collect();
        hat[half] = Complex64::new(0.0, 0.0);
        hat
    }

    pub(crate) fn padded_len(&self) -> usize {
        self.m
    }

    /// Half spectrum of `f·g`, products formed on the padded grid and truncated to `|k| < nx/2`.
    pub(crate) fn product_spectrum(&self, fh: &[Complex64], gh: &[Complex64]) -> Vec<Complex64> {
        let mut buf = vec![Complex64::new(0.0, 0.0); self.m];
        let mut fv = vec![0.0; self.m];
        let mut gv = vec![0.0; self.m];
        self.pad_eval(fh, &mut fv, &mut buf);
        self.pad_eval(gh, &mut gv, &mut buf);
        fv.iter_mut().zip(&gv).for_each(|(a, b)| *a *= b);
        self.pad_truncate(&fv, &mut buf)
    }

    pub fn dealiased_product(&self, f: &[f64], g: &[f64]) -> Vec<f64> {
        let p = self.product_spectrum(&self.spectrum(f), &self.spectrum(g));
        self.synthesize(&p)
    }

    fn check_field(&self, f: &Field2D) {
        assert_eq!(f.nx(), self.nx, "field nx does not match transform size");
    }

    fn map_rows(&self, f: &Field2D, op: impl Fn(&[f64]) -> Vec<f64>) -> Field2D {
        self.check_field(f);
        let mut out = Field2D::zeros(f.nx(), f.na()).expect("valid shape");
        for j in 0..f.na() {
            out.row_mut(j).copy_from_slice(&op(f.row(j)));
        }
        out
    }

    pub fn diff_x(&self, f: &Field2D) -> Field2D {
        self.map_rows(f, |r| self.diff(r))
    }

    pub fn project_pn(&self, f: &Field2D, n: usize) -> Field2D {
        self.map_rows(f, |r| self.project(r, n))
    }

    pub fn dealiased_product_field(&self, f: &Field2D, g: &Field2D) -> Field2D {
        self.check_field(g);
        let mut out = Field2D::zeros(f.nx(), f.na()).expect("valid shape");
        for j in 0..f.na() {
            out.row_mut(j).copy_from_slice(&self.dealiased_product(f.row(j), g.row(j)));
        }
        out
    }

    /// Half spectra of every a-row.
    pub fn row_spectra(&self, f: &Field2D) -> Vec<Vec<Complex64>> {
        self.check_field(f);
        (0..f.na()).map(|j| self.spectrum(f.row(j))).collect()
    }
}

/// Multiplies mode `k` by `2πik`; the Nyquist entry is set to zero.
pub(crate) fn diff_spectrum(hat: &mut [Complex64]) {
    let half = hat.len() - 1;
    for (k, c) in hat.iter_mut().enumerate() {
        *c *= Complex64::new(0.0, 2.0 * PI * k as f64);
    }
    hat[half] = Complex64::new(0.0, 0.0);
}

pub fn to_modes(f: &[f64]) -> Result<SpectralCoeffs> {
    Ok(SpectralX::new(f.len())?.to_modes(f))
}

pub fn to_nodes(c: &SpectralCoeffs, nx: usize) -> Result<Vec<f64>> {
    SpectralX::new(nx)?.to_nodes(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::SQRT_2;

    fn xs(nx: usize) -> Vec<f64> {
        (0..nx).map(|i| i as f64 / nx as f64).collect()
    }

    fn trig(nx: usize, coeffs: &[(usize, f64, f64)]) -> Vec<f64> {
        xs(nx)
            .iter()
            .map(|&x| {
                coeffs
                    .iter()
                    .map(|&(k, c, s)| {
                        let t = 2.0 * PI * k as f64 * x;
                        c * t.cos() + s * t.sin()
                    })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn cosine_mode_coefficient() {
        let f: Vec<f64> = xs(16).iter().map(|x| SQRT_2 * (2.0 * PI * x).cos()).collect();
        let c = to_modes(&f).unwrap();
        assert!((c.a[0] - 1.0).abs() < 1e-14);
        assert!(c.a0.abs() < 1e-14 && c.nyquist.abs() < 1e-14);
        assert!(c.a[1..].iter().chain(&c.b).all(|v| v.abs() < 1e-14));
        let c = to_modes(&[2.5; 8]).unwrap();
        assert!((c.a0 - 2.5).abs() < 1e-15 && (c.energy() - 6.25).abs() < 1e-14);
        assert!(matches!(to_modes(&[1.0; 7]), Err(Error::Config(_))));
    }

    #[test]
    fn derivative_of_sine() {
        let sx = SpectralX::new(16).unwrap();
        let f: Vec<f64> = xs(16).iter().map(|x| SQRT_2 * (2.0 * PI * x).sin()).collect();
        let d = sx.diff(&f);
        for (x, v) in xs(16).iter().zip(&d) {
            assert!((v - 2.0 * PI * SQRT_2 * (2.0 * PI * x).cos()).abs() < 1e-12);
        }
        assert!(sx.diff(&[3.0; 16]).iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn projection_examples() {
        let sx = SpectralX::new(32).unwrap();
        let f = trig(32, &[(3, 0.0, 1.0)]);
        assert!(sx.project(&f, 2).iter().all(|v| v.abs() < 1e-14));
        let g = trig(32, &[(1, 1.0, 0.5), (4, 0.3, -0.2), (9, 0.1, 0.1)]);
        let p = sx.project(&g, 4);
        let pp = sx.project(&p, 4);
        assert!(p.iter().zip(&pp).all(|(a, b)| (a - b).abs() < 1e-14));
        let a = sx.project(&sx.diff(&g), 4);
        let b = sx.diff(&sx.project(&g, 4));
        assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-12));
    }

    #[test]
    fn squared_cosine() {
        let sx = SpectralX::new(16).unwrap();
        let f: Vec<f64> = xs(16).iter().map(|x| SQRT_2 * (2.0 * PI * x).cos()).collect();
        let p = sx.dealiased_product(&f, &f);
        for (x, v) in xs(16).iter().zip(&p) {
            assert!((v - 1.0 - (4.0 * PI * x).cos()).abs() < 1e-13);
        }
        let g = trig(16, &[(2, 0.4, 0.1)]);
        let q = sx.dealiased_product(&[1.0; 16], &g);
        assert!(q.iter().zip(&g).all(|(a, b)| (a - b).abs() < 1e-14));
    }

    fn band_limited(seed: &[f64], kmax: usize, nx: usize) -> Vec<f64> {
        let coeffs: Vec<(usize, f64, f64)> =
            (0..=kmax).map(|k| (k, seed[2 * k], if k == 0 { 0.0 } else { seed[2 * k + 1] })).collect();
        trig(nx, &coeffs)
    }

    proptest! {
        #[test]
        fn parseval_and_round_trip(seed in proptest::collection::vec(-1.0f64..1.0, 24)) {
            let nx = 32;
            let sx = SpectralX::new(nx).unwrap();
            let f = band_limited(&seed, 11, nx);
            let c = sx.to_modes(&f);
            let e: f64 = f.iter().map(|v| v * v).sum::<f64>() / nx as f64;
            prop_assert!((c.energy() - e).abs() <= 1e-12 * e.max(1e-300));
            let back = sx.to_nodes(&c).unwrap();
            let scale = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            prop_assert!(f.iter().zip(&back).all(|(a, b)| (a - b).abs() <= 1e-12 * scale));
        }

        #[test]
        fn projection_is_contractive(seed in proptest::collection::vec(-1.0f64..1.0, 24), n in 0usize..12) {
            let sx = SpectralX::new(32).unwrap();
            let f = band_limited(&seed, 11, 32);
            let p = sx.project(&f, n);
            let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
            prop_assert!(norm(&p) <= norm(&f) * (1.0 + 1e-14));
            let tail: Vec<f64> = f.iter().zip(&p).map(|(a, b)| a - b).collect();
            if n > 0 {
                let d2 = sx.diff(&sx.diff(&f));
                let bound = norm(&d2) / (2.0 * PI * n as f64).powi(2);
                prop_assert!(norm(&tail) <= bound * (1.0 + 1e-12) + 1e-13);
            }
            let diff_mean: f64 = sx.diff(&f).iter().sum();
            prop_assert!(diff_mean.abs() < 1e-10);
        }

        #[test]
        fn product_matches_doubled_grid(
            s1 in proptest::collection::vec(-1.0f64..1.0, 24),
            s2 in proptest::collection::vec(-1.0f64..1.0, 24),
        ) {
            // Bandwidths 7 + 7 < 16 = nx/2, so the product is fully resolved.
            let nx = 32;
            let sx = SpectralX::new(nx).unwrap();
            let (f, g) = (band_limited(&s1, 7, nx), band_limited(&s2, 7, nx));
            let p = sx.dealiased_product(&f, &g);
            let f2 = band_limited(&s1, 7, 2 * nx);
            let g2 = band_limited(&s2, 7, 2 * nx);
            for i in 0..nx {
                prop_assert!((p[i] - f2[2 * i] * g2[2 * i]).abs() < 1e-12);
            }
        }
    }
}
