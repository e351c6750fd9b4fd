//! Eigenvalues forced by the symmetries of the Gross–Pitaevskii equation:
//! the phase/frequency double zero at λ = 0 (j = 0), the GGV boost at
//! λ = ±i (j = 1) and the breather boost at λ = ±2i (j = 0), together with
//! the lens-transformation machinery behind the breather.

use crate::evans::{winding_number, ContourPath, EvansContext, EvansError, EvansOptions};
use crate::profile::VortexProfile;
use crate::C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum SymmetryError {
    #[error(transparent)]
    Evans(#[from] EvansError),
    #[error("nonlinearity power {p} is not critical (4/n = {critical}) for a self-map")]
    NonCritical { p: f64, critical: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Mantissa tolerance for the forced zeros.
pub const ZERO_TOL: f64 = 1e-6;

/// Finite-difference step of the residual checks.
pub const RESIDUAL_STEP: f64 = 1e-3;

/// Radial sample points for residual checks: interior of the bulk, away from
/// the origin and from the far tail.
pub fn residual_radii(profile: &VortexProfile, n: usize) -> Vec<f64> {
    let r_hi = if profile.is_degenerate() { profile.mu.sqrt() + 2.0 } else { profile.peak_radius() + 3.0 };
    let r_lo = 0.3;
    (0..n).map(|k| r_lo + (r_hi - r_lo) * k as f64 / (n - 1) as f64).collect()
}

/// Scaled residual of the mode-j system at λ for a candidate (y₊, y₋):
///
///   [iλ + ½Δ_r − (j+m)²/(2r²) − ½r² + μ − 2w²] y₊ − w² y₋,
///   [−iλ + ½Δ_r − (j−m)²/(2r²) − ½r² + μ − 2w²] y₋ − w² y₊,
///
/// with Δ_r by fourth-order central differences of step h. Returns the
/// maximum over `radii` divided by the maximum of |y₊| + |y₋|.
pub fn mode_residual(
    profile: &VortexProfile,
    j: i32,
    lambda: C64,
    y: &dyn Fn(f64) -> (C64, C64),
    radii: &[f64],
    h: f64,
) -> f64 {
    let m = profile.m as i32;
    let mu = profile.mu;
    let i = C64::new(0.0, 1.0);
    let kp = ((j + m) * (j + m)) as f64;
    let km = ((j - m) * (j - m)) as f64;
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for &r in radii {
        let pts: Vec<(C64, C64)> = [-2.0, -1.0, 0.0, 1.0, 2.0].iter().map(|&k| y(r + k * h)).collect();
        let d1 = |f: &dyn Fn(&(C64, C64)) -> C64| {
            (f(&pts[0]) - 8.0 * f(&pts[1]) + 8.0 * f(&pts[3]) - f(&pts[4])) / (12.0 * h)
        };
        let d2 = |f: &dyn Fn(&(C64, C64)) -> C64| {
            (-f(&pts[0]) + 16.0 * f(&pts[1]) - 30.0 * f(&pts[2]) + 16.0 * f(&pts[3]) - f(&pts[4])) / (12.0 * h * h)
        };
        let (yp, ym) = pts[2];
        let lap_p = d2(&|p| p.0) + d1(&|p| p.0) / r;
        let lap_m = d2(&|p| p.1) + d1(&|p| p.1) / r;
        let w2 = profile.sample(r).0.powi(2);
        let pot = -0.5 * r * r + mu - 2.0 * w2;
        let rp = (i * lambda + pot - 0.5 * kp / (r * r)) * yp + 0.5 * lap_p - w2 * ym;
        let rm = (-i * lambda + pot - 0.5 * km / (r * r)) * ym + 0.5 * lap_m - w2 * yp;
        worst = worst.max(rp.norm()).max(rm.norm());
        scale = scale.max(yp.norm() + ym.norm());
    }
    if scale == 0.0 {
        worst
    } else {
        worst / scale
    }
}

// ---------------------------------------------------------------------------
// Phase symmetry
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhaseReport {
    pub mu: f64,
    /// |E_0(0)| (mantissa).
    pub value: f64,
    /// |dE_0/dβ| at β = 0 by central differences along the imaginary axis.
    pub derivative: f64,
    /// |d²E_0/dβ²| at β = 0.
    pub curvature: f64,
    /// Number of zeros of E_0 inside |λ| = 0.1.
    pub multiplicity: i64,
    /// Residual of y = (w, −w) in the j = 0 system at λ = 0.
    pub eigenvector_residual: f64,
    pub pass: bool,
}

/// Checks that λ = 0 is a double zero of E_0 with eigenvector (w, −w).
pub fn phase_double_zero_check(profile: &VortexProfile) -> Result<PhaseReport, SymmetryError> {
    let ctx = EvansContext::new(profile, EvansOptions::default());
    let f = ctx.mode(0);
    let d = 1e-3;
    let e = |b: f64| -> Result<f64, SymmetryError> { Ok(ctx.eval(0, C64::new(0.0, b))?.mantissa.re) };
    let (e0, ep, em) = (e(0.0)?, e(d)?, e(-d)?);
    let derivative = ((ep - em) / (2.0 * d)).abs();
    let curvature = ((ep + em - 2.0 * e0) / (d * d)).abs();
    let multiplicity = winding_number(&f, &ContourPath::circle(C64::new(0.0, 0.0), 0.1))?.winding;
    let y = |r: f64| {
        let w = profile.eval(r).0;
        (C64::new(w, 0.0), C64::new(-w, 0.0))
    };
    let eigenvector_residual = mode_residual(profile, 0, C64::new(0.0, 0.0), &y, &residual_radii(profile, 40), RESIDUAL_STEP);
    let pass = multiplicity == 2
        && e0.abs() < ZERO_TOL
        && derivative < ZERO_TOL.max(1e-4 * curvature * d)
        && (profile.is_degenerate() || eigenvector_residual < 1e-6);
    Ok(PhaseReport { mu: profile.mu, value: e0.abs(), derivative, curvature, multiplicity, eigenvector_residual, pass })
}

// ---------------------------------------------------------------------------
// GGV boost
// ---------------------------------------------------------------------------

/// Closed-form eigenfunction of mode j = 1 forced by the GGV boost, at
/// λ = i (sign = +1) or λ = −i (sign = −1):
/// y₊ = ½[w′ − mw/r ± rw], y₋ = ½[w′ + mw/r ∓ rw].
pub fn ggv_eigenfunction(profile: &VortexProfile, sign: i32, r: f64) -> (f64, f64) {
    let (w, wp) = profile.eval(r);
    let m = profile.m as f64;
    let s = sign.signum() as f64;
    (0.5 * (wp - m * w / r + s * r * w), 0.5 * (wp + m * w / r - s * r * w))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GgvReport {
    pub mu: f64,
    /// |E_1(i)|, |E_1(−i)|.
    pub values: [f64; 2],
    /// Scaled residuals of the closed forms at λ = i and λ = −i.
    pub residuals: [f64; 2],
    pub pass: bool,
}

pub fn ggv_check(profile: &VortexProfile) -> Result<GgvReport, SymmetryError> {
    let ctx = EvansContext::new(profile, EvansOptions::default());
    let radii = residual_radii(profile, 40);
    let mut values = [0.0; 2];
    let mut residuals = [0.0; 2];
    for (k, sign) in [1, -1].into_iter().enumerate() {
        let lambda = C64::new(0.0, sign as f64);
        values[k] = ctx.eval(1, lambda)?.mantissa.norm();
        let y = |r: f64| {
            let (a, b) = ggv_eigenfunction(profile, sign, r);
            (C64::new(a, 0.0), C64::new(b, 0.0))
        };
        residuals[k] = mode_residual(profile, 1, lambda, &y, &radii, RESIDUAL_STEP);
    }
    let pass = values.iter().all(|&v| v < ZERO_TOL) && residuals.iter().all(|&r| r < 1e-6);
    Ok(GgvReport { mu: profile.mu, values, residuals, pass })
}

// ---------------------------------------------------------------------------
// Lens transformations and the breather boost
// ---------------------------------------------------------------------------

/// Time-dependent coefficients of u(t, x) = a e^{−ib|x|²/2} v(cx, τ) mapping
/// solutions of i∂_t v + ½Δv − ½ω²|x|²v − λ|v|^p v = 0 to solutions of the
/// same equation with trap ν² and coupling γ = λ c^{2 − np/2}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BoostKind {
    /// b = 0, c = 1.
    Identity,
    /// Free lens transform (ω² = ν² = 0): b = b₀/(1 − b₀t), c = c₀/(1 − b₀t).
    Talanov { b0: f64, c0: f64 },
    /// Free equation to trap ν²: b = ν tan νt, c = 1/cos νt.
    NlsToGp { nu: f64 },
    /// Trap ω² to the free equation: b = −ω²t/(1 + ω²t²), c = (1 + ω²t²)^{−1/2}.
    GpToNls { omega: f64 },
    /// Self-map of the trap ω² = ν²: c^{−2} = √(1 + ε²) + ε cos 2ωt.
    Breather { amplitude: f64, omega: f64 },
    /// `outer` applied to the output of `inner`.
    Composed { inner: Box<BoostTransform>, outer: Box<BoostTransform> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostTransform {
    pub kind: BoostKind,
    /// Trap of the source equation.
    pub omega2: f64,
    /// Trap of the target equation.
    pub nu2: f64,
    /// Spatial dimension.
    pub n: u32,
}

/// Direction of a lens transformation in two dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BoostDirection {
    NlsToGp { nu: f64 },
    GpToNls { omega: f64 },
    GpToGp { amplitude: f64, omega: f64 },
}

impl BoostTransform {
    pub fn identity(omega2: f64, n: u32) -> Self {
        BoostTransform { kind: BoostKind::Identity, omega2, nu2: omega2, n }
    }

    pub fn talanov(b0: f64, c0: f64, n: u32) -> Self {
        BoostTransform { kind: BoostKind::Talanov { b0, c0 }, omega2: 0.0, nu2: 0.0, n }
    }

    pub fn nls_to_gp(nu: f64, n: u32) -> Self {
        BoostTransform { kind: BoostKind::NlsToGp { nu }, omega2: 0.0, nu2: nu * nu, n }
    }

    pub fn gp_to_nls(omega: f64, n: u32) -> Self {
        BoostTransform { kind: BoostKind::GpToNls { omega }, omega2: omega * omega, nu2: 0.0, n }
    }

    pub fn breather(amplitude: f64, omega: f64, n: u32) -> Self {
        BoostTransform { kind: BoostKind::Breather { amplitude, omega }, omega2: omega * omega, nu2: omega * omega, n }
    }

    pub fn from_direction(dir: BoostDirection) -> Self {
        match dir {
            BoostDirection::NlsToGp { nu } => Self::nls_to_gp(nu, 2),
            BoostDirection::GpToNls { omega } => Self::gp_to_nls(omega, 2),
            BoostDirection::GpToGp { amplitude, omega } => Self::breather(amplitude, omega, 2),
        }
    }

    /// `outer ∘ inner`: the target trap of `inner` must be the source trap of `outer`.
    pub fn compose(inner: BoostTransform, outer: BoostTransform) -> Result<Self, SymmetryError> {
        if (inner.nu2 - outer.omega2).abs() > 1e-14 || inner.n != outer.n {
            return Err(SymmetryError::InvalidArgument("traps or dimensions of the composed maps do not match".into()));
        }
        let (omega2, nu2, n) = (inner.omega2, outer.nu2, inner.n);
        Ok(BoostTransform { kind: BoostKind::Composed { inner: Box::new(inner), outer: Box::new(outer) }, omega2, nu2, n })
    }

    /// (b, c, τ) at time t.
    pub fn coefficients(&self, t: f64) -> (f64, f64, f64) {
        match &self.kind {
            BoostKind::Identity => (0.0, 1.0, t),
            BoostKind::Talanov { b0, c0 } => {
                let d = 1.0 - b0 * t;
                (b0 / d, c0 / d, c0 * c0 * t / d)
            }
            BoostKind::NlsToGp { nu } => {
                let (s, c) = (nu * t).sin_cos();
                (nu * s / c, 1.0 / c, s / c / nu)
            }
            BoostKind::GpToNls { omega } => {
                let q = 1.0 + omega * omega * t * t;
                (-omega * omega * t / q, 1.0 / q.sqrt(), (omega * t).atan() / omega)
            }
            BoostKind::Breather { amplitude, omega } => {
                let e = *amplitude;
                let a = (1.0 + e * e).sqrt();
                let th = omega * t;
                let s = a + e * (2.0 * th).cos();
                let b = e * omega * (2.0 * th).sin() / s;
                // τ′ = 1/s with a² − ε² = 1 integrates to an angle tracking ωt.
                let k = ((a - e) / (a + e)).sqrt();
                let phi = (k * th.sin()).atan2(th.cos());
                let turns = ((th - phi) / (2.0 * PI)).round();
                (b, 1.0 / s.sqrt(), (phi + 2.0 * PI * turns) / omega)
            }
            BoostKind::Composed { inner, outer } => {
                let (b2, c2, t2) = outer.coefficients(t);
                let (b1, c1, t1) = inner.coefficients(t2);
                (b2 + c2 * c2 * b1, c2 * c1, t1)
            }
        }
    }

    pub fn b(&self, t: f64) -> f64 {
        self.coefficients(t).0
    }

    pub fn c(&self, t: f64) -> f64 {
        self.coefficients(t).1
    }

    pub fn tau(&self, t: f64) -> f64 {
        self.coefficients(t).2
    }

    /// a = c^{n/2}.
    pub fn a(&self, t: f64) -> f64 {
        self.c(t).powf(self.n as f64 / 2.0)
    }

    /// Target coupling γ = λ c^{2 − np/2}.
    pub fn gamma(&self, t: f64, lambda: f64, p: f64) -> f64 {
        lambda * self.c(t).powf(2.0 - self.n as f64 * p / 2.0)
    }

    /// Residuals of b′ − b² + ω²c⁴ − ν², c′ − bc and τ′ − c² at t by
    /// fourth-order central differences of step h.
    pub fn ode_residuals(&self, t: f64, h: f64) -> [f64; 3] {
        let at = |k: f64| self.coefficients(t + k * h);
        let (m2, m1, p1, p2) = (at(-2.0), at(-1.0), at(1.0), at(2.0));
        let d = |f: fn(&(f64, f64, f64)) -> f64| (f(&m2) - 8.0 * f(&m1) + 8.0 * f(&p1) - f(&p2)) / (12.0 * h);
        let (b, c, _) = self.coefficients(t);
        let db = d(|x| x.0);
        let dc = d(|x| x.1);
        let dt = d(|x| x.2);
        [db - b * b + self.omega2 * c.powi(4) - self.nu2, dc - b * c, dt - c * c]
    }
}

/// A complex field v(t, x, y).
pub type Field<'a> = Box<dyn Fn(f64, f64, f64) -> C64 + Send + Sync + 'a>;

/// u(t, x) = a e^{−ib|x|²/2} v(cx, τ) in two dimensions. For maps with c ≢ 1
/// the nonlinearity must be critical (p = 4/n), so that γ = λ.
pub fn breather_transform<'a>(
    v: &'a (dyn Fn(f64, f64, f64) -> C64 + Send + Sync),
    transform: &'a BoostTransform,
    p: f64,
) -> Result<Field<'a>, SymmetryError> {
    if transform.n != 2 {
        return Err(SymmetryError::InvalidArgument("fields are two-dimensional".into()));
    }
    let critical = 4.0 / transform.n as f64;
    if (p - critical).abs() > 1e-12 && transform.kind != BoostKind::Identity {
        return Err(SymmetryError::NonCritical { p, critical });
    }
    Ok(Box::new(move |t, x, y| {
        let (b, c, tau) = transform.coefficients(t);
        let a = c.powf(transform.n as f64 / 2.0);
        let phase = C64::from_polar(1.0, -0.5 * b * (x * x + y * y));
        a * phase * v(tau, c * x, c * y)
    }))
}

/// The stationary vortex e^{−iμt} e^{imθ} w(r) as a field.
pub fn vortex_field(profile: &VortexProfile) -> Field<'_> {
    let m = profile.m as i32;
    let mu = profile.mu;
    Box::new(move |t, x, y| {
        let r = (x * x + y * y).sqrt();
        if r == 0.0 {
            return C64::new(0.0, 0.0);
        }
        let w = profile.eval(r).0;
        let angular = (C64::new(x, y) / r).powi(m);
        C64::from_polar(w, -mu * t) * angular
    })
}

/// Scaled residual of i∂_t u + ½Δu − ½ν²|x|²u − γ|u|^p u at the given
/// space-time points, by fourth-order central differences (steps ht, hx),
/// divided by the maximum |u| at the points.
pub fn field_residual(u: &dyn Fn(f64, f64, f64) -> C64, nu2: f64, gamma: f64, p: f64, points: &[(f64, f64, f64)], ht: f64, hx: f64) -> f64 {
    let i = C64::new(0.0, 1.0);
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    let c1 = [1.0, -8.0, 0.0, 8.0, -1.0];
    let c2 = [-1.0, 16.0, -30.0, 16.0, -1.0];
    for &(t, x, y) in points {
        let u0 = u(t, x, y);
        let mut ut = C64::new(0.0, 0.0);
        let mut lap = C64::new(0.0, 0.0);
        for (k, off) in [-2.0, -1.0, 0.0, 1.0, 2.0].iter().enumerate() {
            if c1[k] != 0.0 {
                ut += c1[k] * u(t + off * ht, x, y);
            }
            lap += c2[k] * (u(t, x + off * hx, y) + u(t, x, y + off * hx));
        }
        ut /= 12.0 * ht;
        lap /= 12.0 * hx * hx;
        let res = i * ut + 0.5 * lap - 0.5 * nu2 * (x * x + y * y) * u0 - gamma * u0.norm().powf(p) * u0;
        worst = worst.max(res.norm());
        scale = scale.max(u0.norm());
    }
    if scale == 0.0 {
        worst
    } else {
        worst / scale
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BreatherReport {
    pub mu: f64,
    /// |E_0(2i)|, |E_0(−2i)|.
    pub values: [f64; 2],
    /// Scaled residual of the linearized breather direction in the j = 0
    /// system at λ = 2i.
    pub residual: f64,
    pub pass: bool,
}

/// Boost amplitude of the numerical derivative.
pub const BREATHER_AMPLITUDE: f64 = 1e-5;

/// Components (y₊, y₋) of the linearized breather direction at radius r:
/// the two-sided derivative ũ of the breather-boosted vortex in the boost
/// amplitude, projected onto e^{−iμt}(e^{imθ} e^{2it} y₊ + e^{imθ} e^{−2it} ȳ₋)
/// by sampling one period on the ray θ = 0.
pub fn breather_direction(profile: &VortexProfile, r: f64) -> (C64, C64) {
    let v = vortex_field(profile);
    let plus = BoostTransform::breather(BREATHER_AMPLITUDE, 1.0, 2);
    let minus = BoostTransform::breather(-BREATHER_AMPLITUDE, 1.0, 2);
    let up = breather_transform(&*v, &plus, 2.0).expect("critical cubic map");
    let um = breather_transform(&*v, &minus, 2.0).expect("critical cubic map");
    let n = 16;
    let mu = profile.mu;
    let mut yp = C64::new(0.0, 0.0);
    let mut ym_conj = C64::new(0.0, 0.0);
    for k in 0..n {
        let t = PI * k as f64 / n as f64;
        let du = (up(t, r, 0.0) - um(t, r, 0.0)) / (2.0 * BREATHER_AMPLITUDE);
        let g = du * C64::from_polar(1.0, mu * t);
        yp += g * C64::from_polar(1.0, -2.0 * t);
        ym_conj += g * C64::from_polar(1.0, 2.0 * t);
    }
    (yp / n as f64, (ym_conj / n as f64).conj())
}

/// Checks the zeros E_0(±2i) and that the linearized breather direction
/// solves the j = 0 system at λ = 2i.
pub fn breather_eigen_check(profile: &VortexProfile) -> Result<BreatherReport, SymmetryError> {
    let ctx = EvansContext::new(profile, EvansOptions::default());
    let values = [ctx.eval(0, C64::new(0.0, 2.0))?.mantissa.norm(), ctx.eval(0, C64::new(0.0, -2.0))?.mantissa.norm()];
    let y = |r: f64| breather_direction(profile, r);
    let residual = mode_residual(profile, 0, C64::new(0.0, 2.0), &y, &residual_radii(profile, 30), 5e-3);
    let pass = values.iter().all(|&v| v < ZERO_TOL) && residual < 1e-4;
    Ok(BreatherReport { mu: profile.mu, values, residual, pass })
}

/// All forced-eigenvalue checks at one profile.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SymmetryReport {
    pub phase: PhaseReport,
    pub ggv: GgvReport,
    pub breather: BreatherReport,
}

impl SymmetryReport {
    pub fn pass(&self) -> bool {
        self.phase.pass && self.ggv.pass && self.breather.pass
    }
}

pub fn symmetry_report(profile: &VortexProfile) -> Result<SymmetryReport, SymmetryError> {
    Ok(SymmetryReport {
        phase: phase_double_zero_check(profile)?,
        ggv: ggv_check(profile)?,
        breather: breather_eigen_check(profile)?,
    })
}
