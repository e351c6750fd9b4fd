//! Direct integration of iψ_t = −½Δψ + ½ω²r²ψ + g|ψ|²ψ on a periodic square
//! grid by Strang splitting, used to measure growth rates of perturbed vortices.

use crate::linearized::Eigenfunction;
use crate::profile::VortexProfile;
use crate::C64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum SimError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Coefficients of the evolution equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Equation {
    /// Trap strength ω² (1 for the normalized equation, 0 for free evolution).
    pub omega2: f64,
    /// Cubic coupling g (1 for the normalized equation).
    pub g: f64,
}

impl Equation {
    pub const GP: Equation = Equation { omega2: 1.0, g: 1.0 };
    pub const FREE: Equation = Equation { omega2: 0.0, g: 0.0 };
}

/// Default number of grid points per direction.
pub const DEFAULT_N: usize = 256;
/// Default time step.
pub const DEFAULT_DT: f64 = 1e-3;

/// Radius of the condensate, √(2μ).
pub fn condensate_radius(mu: f64) -> f64 {
    (2.0 * mu).sqrt()
}

/// Default half-width L = R(μ) + 4 of the square [−L, L]².
pub fn default_half_width(mu: f64) -> f64 {
    condensate_radius(mu) + 4.0
}

/// n×n complex field on the periodic square [−L, L)², row-major (x fastest).
#[derive(Clone)]
pub struct GridState {
    pub n: usize,
    pub half_width: f64,
    pub dx: f64,
    pub dt: f64,
    pub t: f64,
    pub equation: Equation,
    pub psi: Vec<C64>,
    coords: Vec<f64>,
    k2: Vec<f64>,
    /// e^{−i|k|²dt/2} for the current dt.
    kinetic: Vec<C64>,
    kinetic_dt: f64,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    warned: bool,
}

impl std::fmt::Debug for GridState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GridState")
            .field("n", &self.n)
            .field("half_width", &self.half_width)
            .field("dt", &self.dt)
            .field("t", &self.t)
            .finish()
    }
}

impl GridState {
    /// Grid initialized from ψ(x, y).
    pub fn new(
        n: usize,
        half_width: f64,
        dt: f64,
        equation: Equation,
        init: impl Fn(f64, f64) -> C64 + Sync,
    ) -> Result<Self, SimError> {
        if n < 4 || n % 2 != 0 {
            return Err(SimError::InvalidArgument(format!("grid size {n} must be even and at least 4")));
        }
        if !(half_width > 0.0 && dt > 0.0) {
            return Err(SimError::InvalidArgument("half-width and time step must be positive".into()));
        }
        let dx = 2.0 * half_width / n as f64;
        let coords: Vec<f64> = (0..n).map(|i| -half_width + i as f64 * dx).collect();
        let dk = PI / half_width;
        let k: Vec<f64> = (0..n).map(|i| if i < n / 2 { i as f64 } else { i as f64 - n as f64 } * dk).collect();
        let k2: Vec<f64> = (0..n * n).map(|idx| k[idx % n].powi(2) + k[idx / n].powi(2)).collect();
        let psi: Vec<C64> = (0..n * n).into_par_iter().map(|idx| init(coords[idx % n], coords[idx / n])).collect();
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        Ok(GridState {
            n,
            half_width,
            dx,
            dt,
            t: 0.0,
            equation,
            psi,
            coords,
            k2,
            kinetic: Vec::new(),
            kinetic_dt: f64::NAN,
            fwd,
            inv,
            warned: false,
        })
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// ∑|ψ|² dx².
    pub fn norm(&self) -> f64 {
        self.psi.iter().map(|c| c.norm_sqr()).sum::<f64>() * self.dx * self.dx
    }

    fn fft2(&self, data: &mut [C64], forward: bool) {
        let n = self.n;
        let plan = if forward { &self.fwd } else { &self.inv };
        data.par_chunks_mut(n).for_each(|row| plan.process(row));
        transpose(data, n);
        data.par_chunks_mut(n).for_each(|row| plan.process(row));
        transpose(data, n);
        if !forward {
            let s = 1.0 / (n * n) as f64;
            data.par_iter_mut().for_each(|c| *c *= s);
        }
    }

    fn potential_half_step(&mut self, dt: f64) {
        let n = self.n;
        let (omega2, g) = (self.equation.omega2, self.equation.g);
        let coords = &self.coords;
        let max_phase = self
            .psi
            .par_iter_mut()
            .enumerate()
            .map(|(idx, c)| {
                let (x, y) = (coords[idx % n], coords[idx / n]);
                let v = 0.5 * omega2 * (x * x + y * y) + g * c.norm_sqr();
                *c *= C64::from_polar(1.0, -v * dt);
                v.abs() * dt
            })
            .reduce(|| 0.0, f64::max);
        if max_phase >= 0.5 && !self.warned {
            self.warned = true;
            log::warn!("phase increment {max_phase:.3} per half step: time step too large for the potential");
        }
    }

    /// One Strang step: half potential/nonlinear phase, full kinetic step
    /// e^{−i|k|²dt/2} in Fourier space, half phase.
    pub fn strang_step(&mut self) {
        let dt = self.dt;
        self.potential_half_step(0.5 * dt);
        let mut data = std::mem::take(&mut self.psi);
        self.fft2(&mut data, true);
        if self.kinetic_dt != dt {
            self.kinetic = self.k2.iter().map(|k2| C64::from_polar(1.0, -0.5 * k2 * dt)).collect();
            self.kinetic_dt = dt;
        }
        let kinetic = &self.kinetic;
        data.par_iter_mut().zip(kinetic.par_iter()).for_each(|(c, f)| *c *= f);
        self.fft2(&mut data, false);
        self.psi = data;
        self.potential_half_step(0.5 * dt);
        self.t += dt;
    }

    pub fn run(&mut self, steps: usize) {
        for _ in 0..steps {
            self.strang_step();
        }
    }

    /// E = ∑[½|∇ψ|² + ½ω²r²|ψ|² + ½g|ψ|⁴] dx², the kinetic term spectrally.
    pub fn energy(&self) -> f64 {
        let n = self.n;
        let mut data = self.psi.clone();
        self.fft2(&mut data, true);
        let kinetic: f64 = data.iter().zip(&self.k2).map(|(c, k2)| k2 * c.norm_sqr()).sum::<f64>() / (n * n) as f64;
        let (omega2, g) = (self.equation.omega2, self.equation.g);
        let local: f64 = self
            .psi
            .iter()
            .enumerate()
            .map(|(idx, c)| {
                let (x, y) = (self.coords[idx % n], self.coords[idx / n]);
                let a = c.norm_sqr();
                0.5 * omega2 * (x * x + y * y) * a + 0.5 * g * a * a
            })
            .sum();
        (0.5 * kinetic + local) * self.dx * self.dx
    }

    /// Bilinear interpolation of a grid field at (x, y), periodic.
    pub fn interpolate(&self, field: &[C64], x: f64, y: f64) -> C64 {
        let n = self.n;
        let fx = (x + self.half_width) / self.dx;
        let fy = (y + self.half_width) / self.dx;
        let (i0, j0) = (fx.floor(), fy.floor());
        let (tx, ty) = (fx - i0, fy - j0);
        let wrap = |k: f64| (k as i64).rem_euclid(n as i64) as usize;
        let (i0, j0) = (wrap(i0), wrap(j0));
        let (i1, j1) = ((i0 + 1) % n, (j0 + 1) % n);
        let at = |i: usize, j: usize| field[j * n + i];
        at(i0, j0) * ((1.0 - tx) * (1.0 - ty))
            + at(i1, j0) * (tx * (1.0 - ty))
            + at(i0, j1) * ((1.0 - tx) * ty)
            + at(i1, j1) * (tx * ty)
    }
}

fn transpose(data: &mut [C64], n: usize) {
    const B: usize = 16;
    for bi in (0..n).step_by(B) {
        for bj in (bi..n).step_by(B) {
            for i in bi..(bi + B).min(n) {
                for j in bj.max(i + 1)..(bj + B).min(n) {
                    data.swap(i * n + j, j * n + i);
                }
            }
        }
    }
}

/// The stationary vortex e^{imθ}w(r) at (x, y).
pub fn vortex_value(profile: &VortexProfile, x: f64, y: f64) -> C64 {
    let r = (x * x + y * y).sqrt();
    if r == 0.0 {
        return C64::new(0.0, 0.0);
    }
    let w = profile.sample(r).0;
    w * (C64::new(x, y) / r).powi(profile.m as i32)
}

/// Cubic Hermite interpolation of (y₊, y₋) at r; zero outside the mesh.
pub fn eigenfunction_at(eig: &Eigenfunction, r: f64) -> (C64, C64) {
    let rs = &eig.r;
    if r < rs[0] || r > *rs.last().unwrap() {
        return (C64::new(0.0, 0.0), C64::new(0.0, 0.0));
    }
    let i = rs.partition_point(|&x| x <= r).clamp(1, rs.len() - 1) - 1;
    let h = rs[i + 1] - rs[i];
    let t = (r - rs[i]) / h;
    let (h00, h10, h01, h11) =
        (2.0 * t.powi(3) - 3.0 * t * t + 1.0, t.powi(3) - 2.0 * t * t + t, -2.0 * t.powi(3) + 3.0 * t * t, t.powi(3) - t * t);
    let herm = |y: &[C64], d: &[C64]| y[i] * h00 + d[i] * (h10 * h) + y[i + 1] * h01 + d[i + 1] * (h11 * h);
    (herm(&eig.y_plus, &eig.dy_plus), herm(&eig.y_minus, &eig.dy_minus))
}

/// Perturbation Φ₊ + conj(Φ₋) at t = 0 with Φ₊ = e^{i(j+m)θ}y₊(r),
/// Φ₋ = e^{i(j−m)θ}y₋(r); the linearized flow carries it to
/// Φ₊e^{λt} + conj(Φ₋e^{λt}).
pub fn mode_perturbation(eig: &Eigenfunction, m: u32, j: i32, x: f64, y: f64) -> C64 {
    let r = (x * x + y * y).sqrt();
    if r == 0.0 {
        return C64::new(0.0, 0.0);
    }
    let (yp, ym) = eigenfunction_at(eig, r);
    let e = C64::new(x, y) / r;
    let m = m as i32;
    yp * e.powi(j + m) + (ym * e.powi(j - m)).conj()
}

/// Result of a growth-rate measurement.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GrowthResult {
    /// Least-squares slope of ln a(t).
    pub slope: f64,
    pub r_squared: f64,
    /// R² < 0.99: the amplitude does not grow exponentially.
    pub non_exponential: bool,
    pub times: Vec<f64>,
    pub amplitudes: Vec<f64>,
}

/// Settings of [`growth_rate`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GrowthSettings {
    pub n: usize,
    pub dt: f64,
    /// Half-width of the grid; `None` selects R(μ) + 4.
    pub half_width: Option<f64>,
    /// Interval between amplitude samples.
    pub sample_interval: f64,
    /// Radial and angular resolution of the projection onto angular modes.
    pub n_radial: usize,
    pub n_angular: usize,
}

impl Default for GrowthSettings {
    fn default() -> Self {
        GrowthSettings { n: DEFAULT_N, dt: DEFAULT_DT, half_width: None, sample_interval: 0.1, n_radial: 96, n_angular: 64 }
    }
}

/// ‖δ_{m+j}‖² + ‖δ_{m−j}‖² of the angular harmonics e^{ikθ} of δ on the
/// disk r < R, by polar resampling.
fn harmonic_amplitude(state: &GridState, delta: &[C64], harmonics: &[i32], r_max: f64, nr: usize, nth: usize) -> f64 {
    let dr = r_max / nr as f64;
    let mut total = 0.0;
    for ir in 0..nr {
        let r = (ir as f64 + 0.5) * dr;
        let samples: Vec<C64> = (0..nth)
            .map(|it| {
                let th = 2.0 * PI * it as f64 / nth as f64;
                state.interpolate(delta, r * th.cos(), r * th.sin())
            })
            .collect();
        for &k in harmonics {
            let c: C64 = samples
                .iter()
                .enumerate()
                .map(|(it, s)| s * C64::from_polar(1.0, -(k as f64) * 2.0 * PI * it as f64 / nth as f64))
                .sum::<C64>()
                / nth as f64;
            total += 2.0 * PI * c.norm_sqr() * r * dr;
        }
    }
    total
}

/// Least-squares line through (x, y): (slope, intercept, R²).
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, my - slope * mx, r2)
}

/// Evolves the vortex perturbed by `amplitude`·(unit-norm eigenfunction of
/// mode j) up to time T alongside the unperturbed vortex, and fits the log
/// of the norm of the difference projected on the angular harmonics m ± j.
pub fn growth_rate(
    profile: &VortexProfile,
    j: i32,
    eig: &Eigenfunction,
    t_end: f64,
    amplitude: f64,
    settings: &GrowthSettings,
) -> Result<GrowthResult, SimError> {
    if !(t_end > 0.0 && amplitude > 0.0) {
        return Err(SimError::InvalidArgument("T and amplitude must be positive".into()));
    }
    let l = settings.half_width.unwrap_or_else(|| default_half_width(profile.mu));
    let base = |x: f64, y: f64| vortex_value(profile, x, y);
    let mut reference = GridState::new(settings.n, l, settings.dt, Equation::GP, base)?;
    let mut perturbed = GridState::new(settings.n, l, settings.dt, Equation::GP, |x, y| {
        base(x, y) + amplitude * mode_perturbation(eig, profile.m, j, x, y)
    })?;
    let m = profile.m as i32;
    let harmonics: Vec<i32> = if j == 0 { vec![m] } else { vec![m + j, m - j] };
    let r_max = l * 0.95;
    let per_sample = (settings.sample_interval / settings.dt).round().max(1.0) as usize;
    let n_samples = (t_end / (per_sample as f64 * settings.dt)).round() as usize;
    let mut times = Vec::with_capacity(n_samples + 1);
    let mut amplitudes = Vec::with_capacity(n_samples + 1);
    let mut record = |a: &GridState, b: &GridState| {
        let delta: Vec<C64> = a.psi.iter().zip(&b.psi).map(|(p, q)| p - q).collect();
        times.push(a.t);
        amplitudes.push(harmonic_amplitude(a, &delta, &harmonics, r_max, settings.n_radial, settings.n_angular).sqrt());
    };
    record(&perturbed, &reference);
    for _ in 0..n_samples {
        perturbed.run(per_sample);
        reference.run(per_sample);
        record(&perturbed, &reference);
    }
    let logs: Vec<f64> = amplitudes.iter().map(|a| a.max(1e-300).ln()).collect();
    let (slope, _, r_squared) = linear_fit(&times, &logs);
    Ok(GrowthResult { slope, r_squared, non_exponential: r_squared < 0.99, times, amplitudes })
}
