//! Named initial data and the composite studies shared by the CLI and the
//! acceptance suite.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{
    cancellation_residual, interpolation_ratio, l2_compare, radial_mean, sobolev_ratio, stability_constant,
    DiagnosticsRecord,
};
use crate::dirichlet_green::{apply_a_kernel, BiotSavart};
use crate::error::{check_len, Error, Result};
use crate::hydro_solver::{run, FlowState, SolverConfig};
use crate::radial_calculus::{diff_a_field, face_diff_field, poincare_ratio, verify_ftc, verify_ibp, RadialGrid};
use crate::rescaled_solver::fit_log_slope;
use crate::spectral_x::{Field2D, SpectralX};

/// One-line initial-data generators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialData {
    /// `w₀ = c a`.
    Shear { c: f64 },
    /// `w₀ = c a + amp sin(2π kx x) sin(2π ka a)`.
    ShearPerturbed { c: f64, amp: f64, kx: u32, ka: u32 },
    /// `w₀ = c a + amp Σ_k k^{−decay} sin(2πk x + k) sin(2πa)` over all resolved k,
    /// data of finite Sobolev regularity.
    ShearRough { c: f64, amp: f64, decay: f64 },
    /// `u₀ = −amp sin(2πx) a²`, `w₀ = ∂_a u₀`.
    BlowupQuadratic { amp: f64 },
}

impl InitialData {
    /// The smooth well-posedness case `4a + 0.1 sin(2πx) sin(2πa)`.
    pub fn smooth() -> Self {
        InitialData::ShearPerturbed { c: 4.0, amp: 0.1, kx: 1, ka: 1 }
    }

    pub fn w0(&self, nx: usize, grid: &RadialGrid) -> Result<Field2D> {
        match *self {
            InitialData::Shear { c } => Field2D::from_fn(nx, grid, |_, a| c * a),
            InitialData::ShearPerturbed { c, amp, kx, ka } => Field2D::from_fn(nx, grid, |x, a| {
                c * a + amp * (2.0 * PI * kx as f64 * x).sin() * (2.0 * PI * ka as f64 * a).sin()
            }),
            InitialData::ShearRough { c, amp, decay } => {
                let kmax = nx / 2;
                let profile: Vec<f64> = (0..nx)
                    .map(|i| {
                        let x = i as f64 / nx as f64;
                        (1..kmax).map(|k| (k as f64).powf(-decay) * (2.0 * PI * k as f64 * x + k as f64).sin()).sum()
                    })
                    .collect();
                let mut w = Field2D::zeros(nx, grid.len())?;
                for (j, &a) in grid.nodes().iter().enumerate() {
                    for (i, v) in w.row_mut(j).iter_mut().enumerate() {
                        *v = c * a + amp * profile[i] * (2.0 * PI * a).sin();
                    }
                }
                Ok(w)
            }
            InitialData::BlowupQuadratic { .. } => diff_a_field(&self.u0(nx, grid)?, grid),
        }
    }

    /// Velocity profile for the blowup data; `None` for data given by `w₀`.
    pub fn u0(&self, nx: usize, grid: &RadialGrid) -> Result<Field2D> {
        match *self {
            InitialData::BlowupQuadratic { amp } => Field2D::from_fn(nx, grid, |x, a| -amp * (2.0 * PI * x).sin() * a * a),
            _ => Err(Error::Config("only blowup data are given by a velocity profile".into())),
        }
    }
}

/// `max_t ‖w₁ − w₂‖` over two trajectories recorded at the same cadence.
pub fn sup_gap(a: &[FlowState], b: &[FlowState], grid: &RadialGrid) -> Result<f64> {
    Ok(l2_compare(a, b, grid)?.gaps.into_iter().fold(0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub values: Vec<f64>,
    /// `C([0,T]; L²)` gap between consecutive runs.
    pub gaps: Vec<f64>,
    /// Least-squares slope of `log gap` against `log(1/value)` (or `log value` for dt).
    pub fitted_order: f64,
}

/// Runs one configuration per mode cutoff `N` from the same `w₀`.
pub fn scheme_convergence(config: &SolverConfig, w0: &Field2D, n_values: &[usize]) -> Result<ConvergenceReport> {
    if n_values.len() < 3 {
        return Err(Error::Config("a convergence study needs at least three values".into()));
    }
    let grid = RadialGrid::new(config.na)?;
    let mut runs = Vec::with_capacity(n_values.len());
    for &n in n_values {
        let c = SolverConfig { n_modes: Some(n), keep_snapshots: true, ..config.clone() };
        runs.push(run(&c, w0.clone())?.snapshots);
    }
    let mut gaps = Vec::new();
    for k in 1..runs.len() {
        gaps.push(sup_gap(&runs[k - 1], &runs[k], &grid)?);
    }
    let inv: Vec<f64> = n_values[..n_values.len() - 1].iter().map(|&n| 1.0 / n as f64).collect();
    Ok(ConvergenceReport {
        values: n_values.iter().map(|&n| n as f64).collect(),
        fitted_order: fit_log_slope(&inv, &gaps),
        gaps,
    })
}

/// Runs halving `dt` from the same `w₀`; gaps are taken at the final time.
pub fn dt_convergence(config: &SolverConfig, w0: &Field2D, dts: &[f64]) -> Result<ConvergenceReport> {
    if dts.len() < 3 {
        return Err(Error::Config("a convergence study needs at least three values".into()));
    }
    let grid = RadialGrid::new(config.na)?;
    let mut finals = Vec::new();
    for &dt in dts {
        finals.push(run(&SolverConfig { dt, keep_snapshots: false, ..config.clone() }, w0.clone())?.final_state);
    }
    let gaps: Vec<f64> = finals.windows(2).map(|p| p[0].w.zip_map(&p[1].w, |x, y| x - y).l2_norm(grid.h())).collect();
    Ok(ConvergenceReport { values: dts.to_vec(), fitted_order: fit_log_slope(&dts[..dts.len() - 1], &gaps), gaps })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub deltas: Vec<f64>,
    pub sup_ratios: Vec<f64>,
    /// Largest sup-ratio, the single constant bounding the sweep.
    pub constant: f64,
    /// Largest over smallest sup-ratio.
    pub spread: f64,
    /// `C([0,T]; L²)` gap of two runs from identical data.
    pub identical_gap: f64,
}

/// Perturbs `w₀` by `δ·p` for each `δ` and compares with the unperturbed run.
pub fn stability_sweep(config: &SolverConfig, w0: &Field2D, perturbation: &Field2D, deltas: &[f64]) -> Result<StabilityReport> {
    w0.same_shape(perturbation)?;
    let grid = RadialGrid::new(config.na)?;
    let cfg = SolverConfig { keep_snapshots: true, ..config.clone() };
    let base = run(&cfg, w0.clone())?;
    let again = run(&cfg, w0.clone())?;
    let identical_gap = sup_gap(&base.snapshots, &again.snapshots, &grid)?;
    let mut sup_ratios = Vec::with_capacity(deltas.len());
    for &d in deltas {
        let pert = run(&cfg, w0.zip_map(perturbation, |a, b| a + d * b))?;
        if !pert.outcome.is_completed() {
            return Err(Error::Precondition(format!("perturbed run (δ = {d}) did not complete: {:?}", pert.outcome)));
        }
        sup_ratios.push(l2_compare(&pert.snapshots, &base.snapshots, &grid)?.sup_ratio);
    }
    let (constant, spread) = stability_constant(&sup_ratios);
    Ok(StabilityReport { deltas: deltas.to_vec(), sup_ratios, constant, spread, identical_gap })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignBand {
    pub min0: f64,
    pub max0: f64,
    /// Smallest `C` with `min₀ − C t ≤ min ∂_a w(t)` and `max ∂_a w(t) ≤ max₀ + C t`.
    pub c: f64,
}

pub fn sign_band(records: &[DiagnosticsRecord]) -> Result<SignBand> {
    let first = records.first().ok_or_else(|| Error::Precondition("no diagnostics records".into()))?;
    let mut c = 0.0f64;
    for r in records.iter().filter(|r| r.t > 0.0) {
        c = c.max((first.min_daw - r.min_daw) / r.t).max((r.max_daw - first.max_daw) / r.t);
    }
    Ok(SignBand { min0: first.min_daw, max0: first.max_daw, c })
}

/// Seeded corpus checks of the one-dimensional calculus and the Sobolev-type inequalities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalculusReport {
    pub resolutions: Vec<usize>,
    /// Worst FTC and IBP residuals over the corpus at each resolution.
    pub ftc_residuals: Vec<f64>,
    pub ibp_residuals: Vec<f64>,
    pub ftc_order: f64,
    pub ibp_order: f64,
    pub poincare_max: f64,
    /// Constants fitted on the corpus at the middle resolution.
    pub sobolev_constant: f64,
    pub interpolation_constant: f64,
    /// The same ratios at the finest resolution, which the fitted constants must bound.
    pub sobolev_fine_max: f64,
    pub interpolation_fine_max: f64,
    pub corpus_size: usize,
}

impl CalculusReport {
    pub fn checks(&self) -> Vec<(&'static str, bool)> {
        vec![
            ("ftc_order", self.ftc_order >= 2.0),
            ("ibp_order", self.ibp_order >= 2.0),
            ("poincare", self.poincare_max <= 0.25 * 1.1),
            ("sobolev", self.sobolev_fine_max <= 1.1 * self.sobolev_constant),
            ("interpolation", self.interpolation_fine_max <= 1.1 * self.interpolation_constant),
        ]
    }

    pub fn passed(&self) -> bool {
        self.checks().iter().all(|c| c.1)
    }
}

/// Random smooth radial profile with a simple zero at a random interior point.
#[derive(Debug, Clone)]
struct Profile {
    zero: f64,
    c: [f64; 4],
    s: [f64; 4],
}

impl Profile {
    fn random(rng: &mut ChaCha8Rng) -> Self {
        Self {
            zero: rng.random_range(0.05..0.45),
            c: std::array::from_fn(|_| rng.random_range(-1.0..1.0)),
            s: std::array::from_fn(|_| rng.random_range(-1.0..1.0)),
        }
    }

    /// `(a − a*)(1 + ½ q(a)/Σ|coeff|)` with `q` a short trigonometric sum.
    fn eval(&self, a: f64) -> f64 {
        let norm: f64 = self.c.iter().chain(&self.s).map(|v| v.abs()).sum::<f64>().max(1e-12);
        let q: f64 = (0..4)
            .map(|m| {
                let k = 2.0 * PI * (m + 1) as f64 * a;
                self.c[m] * k.cos() + self.s[m] * k.sin()
            })
            .sum();
        (a - self.zero) * (1.0 + 0.5 * q / norm)
    }
}

/// Random trigonometric polynomial of degree 4 on the period `[0, 1]`.
#[derive(Debug, Clone)]
struct Trig {
    c: [f64; 5],
    s: [f64; 5],
}

impl Trig {
    fn random(rng: &mut ChaCha8Rng) -> Self {
        Self { c: std::array::from_fn(|_| rng.random_range(-1.0..1.0)), s: std::array::from_fn(|_| rng.random_range(-1.0..1.0)) }
    }

    fn eval(&self, a: f64) -> f64 {
        (0..5).map(|m| (2.0 * PI * m as f64 * a).cos() * self.c[m] + (2.0 * PI * m as f64 * a).sin() * self.s[m]).sum()
    }
}

fn random_field(rng: &mut ChaCha8Rng) -> (Profile, Vec<(u32, f64, f64)>) {
    let profile = Profile::random(rng);
    let modes = (1..=4).map(|k| (k, rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
    (profile, modes)
}

fn sample_field(nx: usize, grid: &RadialGrid, field: &(Profile, Vec<(u32, f64, f64)>)) -> Result<Field2D> {
    let (p, modes) = field;
    Field2D::from_fn(nx, grid, |x, a| {
        let fx: f64 = 1.0
            + modes
                .iter()
                .map(|&(k, c, s)| {
                    let t = 2.0 * PI * k as f64 * x;
                    0.5 * (c * t.cos() + s * t.sin())
                })
                .sum::<f64>();
        fx * p.eval(a)
    })
}

pub fn calculus_suite(seed: u64, corpus_size: usize) -> Result<CalculusReport> {
    calculus_suite_at(seed, corpus_size, &[32, 64, 128])
}

pub fn calculus_suite_at(seed: u64, corpus_size: usize, resolutions: &[usize]) -> Result<CalculusReport> {
    if corpus_size == 0 {
        return Err(Error::Config("empty corpus".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let profiles: Vec<Profile> = (0..corpus_size).map(|_| Profile::random(&mut rng)).collect();
    let trig: Vec<Trig> = (0..corpus_size).map(|_| Trig::random(&mut rng)).collect();
    let fields: Vec<_> = (0..corpus_size).map(|_| random_field(&mut rng)).collect();
    let resolutions = resolutions.to_vec();

    let mut ftc_residuals = Vec::new();
    let mut ibp_residuals = Vec::new();
    let mut poincare_max = 0.0f64;
    for &n in &resolutions {
        let g = RadialGrid::new(n)?;
        let (mut ftc, mut ibp) = (0.0f64, 0.0f64);
        for (k, p) in profiles.iter().enumerate() {
            let f: Vec<f64> = g.nodes().iter().map(|&a| p.eval(a)).collect();
            poincare_max = poincare_max.max(poincare_ratio(&f, &g)?);
            let b1: Vec<f64> = g.nodes().iter().map(|&a| trig[k].eval(a)).collect();
            let b2: Vec<f64> = g.nodes().iter().map(|&a| trig[(k + 1) % corpus_size].eval(a)).collect();
            ftc = ftc.max(verify_ftc(&b1, &g, 0, n - 1)?);
            ibp = ibp.max(verify_ibp(&b1, &b2, &g)?);
        }
        ftc_residuals.push(ftc);
        ibp_residuals.push(ibp);
    }
    let hs: Vec<f64> = resolutions.iter().map(|&n| 0.5 / n as f64).collect();

    let nx = 16;
    let sx = SpectralX::new(nx)?;
    let ratios = |n: usize| -> Result<(f64, f64)> {
        let g = RadialGrid::new(n)?;
        let (mut s, mut i) = (0.0f64, 0.0f64);
        for f in &fields {
            let w = sample_field(nx, &g, f)?;
            s = s.max(sobolev_ratio(&w, &sx, &g)?);
            i = i.max(interpolation_ratio(&w, &sx, &g)?);
        }
        Ok((s, i))
    };
    let (sobolev_constant, interpolation_constant) = ratios(resolutions[1])?;
    let (sobolev_fine_max, interpolation_fine_max) = ratios(resolutions[2])?;
    Ok(CalculusReport {
        ftc_order: fit_log_slope(&hs, &ftc_residuals),
        ibp_order: fit_log_slope(&hs, &ibp_residuals),
        resolutions,
        ftc_residuals,
        ibp_residuals,
        poincare_max,
        sobolev_constant,
        interpolation_constant,
        sobolev_fine_max,
        interpolation_fine_max,
        corpus_size,
    })
}

/// Band-limited random state for structural checks: `c a` plus `kmax` x-modes.
pub fn random_band_limited(rng: &mut impl Rng, nx: usize, grid: &RadialGrid, kmax: u32) -> Result<Field2D> {
    check_len(0, (2 * kmax as usize + 1).saturating_sub(nx))?;
    let c = rng.random_range(2.0..6.0);
    let terms: Vec<(u32, u32, f64, f64)> = (1..=kmax)
        .flat_map(|k| (1..=3).map(move |m| (k, m)))
        .map(|(k, m)| (k, m, rng.random_range(-0.05..0.05), rng.random_range(-0.05..0.05)))
        .collect();
    Field2D::from_fn(nx, grid, |x, a| {
        c * a
            + terms
                .iter()
                .map(|&(k, m, p, q)| {
                    let t = 2.0 * PI * k as f64 * x;
                    (p * t.cos() + q * t.sin()) * (PI * m as f64 * a).cos()
                })
                .sum::<f64>()
    })
}

/// Worst structural residuals of the Biot–Savart law over a random corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantReport {
    pub states: usize,
    /// `max |∂x u + ∂_a v| / max |w|`.
    pub divergence: f64,
    /// `|∂x ψ|` at both walls, with the wall values of the kernel path.
    pub wall_v: f64,
    /// `max_x |∫ u da|`.
    pub compatibility: f64,
    /// Normalized `∫∫ ∂x^k v ∂x^k w` for `k = 0..3`.
    pub cancellation: f64,
}

impl InvariantReport {
    pub fn checks(&self) -> Vec<(&'static str, bool)> {
        vec![
            ("incompressibility", self.divergence <= 1e-10),
            ("wall_v", self.wall_v <= 1e-10),
            ("compatibility", self.compatibility <= 1e-12),
            ("cancellation", self.cancellation <= 1e-10),
        ]
    }

    pub fn passed(&self) -> bool {
        self.checks().iter().all(|c| c.1)
    }
}

/// Structural identities on `count` seeded band-limited states (`nx = 32`, `n_a = 64`, `N = 10`).
pub fn invariant_corpus(seed: u64, count: usize) -> Result<InvariantReport> {
    let (nx, na, n_modes) = (32, 64, 10);
    let g = RadialGrid::new(na)?;
    let bs = BiotSavart::new(&g, nx, n_modes, 0.0)?;
    let sx = bs.spectral();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = InvariantReport { states: count, divergence: 0.0, wall_v: 0.0, compatibility: 0.0, cancellation: 0.0 };
    let sup = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    for _ in 0..count {
        let w = random_band_limited(&mut rng, nx, &g, 8)?;
        let vel = bs.velocity(&w)?;
        let div = sx.diff_x(&vel.u).zip_map(&face_diff_field(&vel.v, g.h()), |a, b| a + b);
        rep.divergence = rep.divergence.max(div.max_abs() / w.max_abs());
        let pot = apply_a_kernel(&w, &g)?;
        rep.wall_v = rep.wall_v.max(sup(&sx.diff(&pot.lower))).max(sup(&sx.diff(&pot.upper)));
        rep.compatibility = rep.compatibility.max(sup(&radial_mean(&vel.u, &g)));
        for k in 0..4 {
            rep.cancellation = rep.cancellation.max(cancellation_residual(&vel.v, &w, k, sx, g.h()));
        }
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators() {
        let g = RadialGrid::new(16).unwrap();
        let w = InitialData::Shear { c: 2.0 }.w0(8, &g).unwrap();
        assert_eq!(w.get(3, 5), 2.0 * g.nodes()[5]);
        let b = InitialData::BlowupQuadratic { amp: 1.0 };
        let w = b.w0(8, &g).unwrap();
        // ∂_a(−sin(2πx) a²) = −2a sin(2πx), exact for the quadratic.
        assert!((w.get(2, 4) + 2.0 * g.nodes()[4]).abs() < 1e-12);
        assert!(InitialData::smooth().u0(8, &g).is_err());
        let r = InitialData::ShearRough { c: 4.0, amp: 0.1, decay: 5.0 }.w0(32, &g).unwrap();
        assert!(diff_a_field(&r, &g).unwrap().min() > 3.0);
    }

    #[test]
    fn initial_data_round_trips_through_json() {
        let d = InitialData::ShearPerturbed { c: 4.0, amp: 0.1, kx: 1, ka: 2 };
        let s = serde_json::to_string(&d).unwrap();
        assert_eq!(s, r#"{"name":"shear_perturbed","c":4.0,"amp":0.1,"kx":1,"ka":2}"#);
        assert_eq!(serde_json::from_str::<InitialData>(&s).unwrap(), d);
    }

    #[test]
    fn sign_band_fit() {
        let rec = |t: f64, lo: f64, hi: f64| DiagnosticsRecord {
            t,
            l2: 0.0,
            hs4: 0.0,
            whs4: None,
            min_daw: lo,
            max_daw: hi,
            mean_u_drift: 0.0,
            cancel: [0.0; 4],
            dt: 0.1,
        };
        let band = sign_band(&[rec(0.0, 3.0, 5.0), rec(0.5, 2.0, 5.2), rec(1.0, 2.5, 6.0)]).unwrap();
        assert!((band.c - 2.0).abs() < 1e-12);
        assert!(sign_band(&[]).is_err());
    }

    #[test]
    fn calculus_suite_is_deterministic() {
        let a = calculus_suite(7, 5).unwrap();
        let b = calculus_suite(7, 5).unwrap();
        assert_eq!(a, b);
        assert!(a.ftc_order > 1.8 && a.ibp_order > 1.5, "{a:?}");
        assert!(a.poincare_max <= 0.275, "{a:?}");
    }

    #[test]
    fn invariant_corpus_holds_to_round_off() {
        let rep = invariant_corpus(3, 4).unwrap();
        assert_eq!(rep.states, 4);
        assert!(rep.passed(), "{rep:?}");
        assert_eq!(rep, invariant_corpus(3, 4).unwrap());
    }
}
