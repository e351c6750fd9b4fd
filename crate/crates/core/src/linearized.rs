//! Per-mode linearization about a vortex: the 4×4 first-order system for
//! (y₊, y₊′, y₋, y₋′), its lift to the exterior square Λ²ℂ⁴ and the adjoint
//! lift, with initial data from the asymptotics at the origin and at infinity.
//!
//! Integration runs in s = ln r on z = (y₊, r y₊′, y₋, r y₋′), for which
//! dz/ds = C z with C = [[0,1,0,0],[r²K₁₁,0,r²K₁₂,0],[0,0,0,1],[r²K₂₁,0,r²K₂₂,0]].
//! The dominant exponential rate of the wedge flow is subtracted during the
//! integration and accumulated in a logarithmic scale.

use crate::ode::{integrate, GroupedNorm, OdeError, OdeOptions};
use crate::profile::{ProfileTable, VortexProfile, R_MIN};
use crate::special::u_asymptotic;
use crate::C64;
use nalgebra::{Matrix4, SMatrix};
use thiserror::Error;

pub type Mat4 = [[C64; 4]; 4];
pub type Mat6 = [[C64; 6]; 6];
pub type Ext = [C64; 6];

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Basis of Λ²ℂ⁴: e1∧e2, e1∧e3, e1∧e4, e2∧e3, e2∧e4, e3∧e4 (0-based pairs).
pub const PAIRS: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinearError {
    #[error("stiff segment near r = {r}")]
    StiffSegment { r: f64 },
    #[error("integration failed near r = {r}: {reason}")]
    Integration { r: f64, reason: String },
    #[error("non-simple eigenvalue (nullspace dimension {dim})")]
    NonSimple { dim: usize },
    #[error("not an eigenvalue (smallest singular value ratio {ratio:.3e})")]
    NotEigenvalue { ratio: f64 },
    #[error("no convergent asymptotic start for the decaying solutions")]
    AsymptoticStart,
}

fn ode_error(e: OdeError) -> LinearError {
    match e {
        OdeError::StepUnderflow { t } => LinearError::StiffSegment { r: t.exp() },
        OdeError::TooManySteps { t, .. } => {
            LinearError::Integration { r: t.exp(), reason: "step budget exhausted".into() }
        }
        OdeError::NonFinite { t } => LinearError::Integration { r: t.exp(), reason: "non-finite state".into() },
    }
}

/// x ∧ y in the fixed basis.
pub fn wedge(x: &[C64; 4], y: &[C64; 4]) -> Ext {
    PAIRS.map(|(i, j)| x[i] * y[j] - x[j] * y[i])
}

/// Induced operator on Λ²ℂ⁴: (B∧)(x∧y) = Bx∧y + x∧By.
pub fn exterior_square(b: &Mat4) -> Mat6 {
    let mut out = [[ZERO; 6]; 6];
    for (p, &(i, j)) in PAIRS.iter().enumerate() {
        for (q, &(k, l)) in PAIRS.iter().enumerate() {
            let mut v = ZERO;
            if j == l {
                v += b[i][k];
            }
            if i == l {
                v -= b[j][k];
            }
            if i == k {
                v += b[j][l];
            }
            if j == k {
                v -= b[i][l];
            }
            out[p][q] = v;
        }
    }
    out
}

/// Hodge dual with respect to the pairing: (a∧b)∧(c∧d) = ⟨⋆(c∧d), a∧b⟩·e1∧e2∧e3∧e4.
pub fn hodge(v: &Ext) -> Ext {
    [v[5], -v[4], v[3], v[2], -v[1], v[0]]
}

/// Plücker quadric v₁v₆ − v₂v₅ + v₃v₄; zero exactly for decomposable vectors.
pub fn plucker_defect(v: &Ext) -> C64 {
    v[0] * v[5] - v[1] * v[4] + v[2] * v[3]
}

/// Duality pairing ẑ·ŷ = Σ ẑ_k ŷ_k.
pub fn pairing(z: &Ext, y: &Ext) -> C64 {
    z.iter().zip(y).map(|(a, b)| a * b).sum()
}

fn sup_norm(v: &Ext) -> f64 {
    v.iter().map(|c| c.re.abs().max(c.im.abs())).fold(0.0, f64::max)
}

/// Scale factors of the map from r-form wedges to s-form wedges:
/// z = diag(1, r, 1, r)·y induces e_ij ↦ d_i d_j.
fn ext_scale(r: f64) -> [f64; 6] {
    [r, 1.0, r, r, r * r, r]
}

/// The linearized system of azimuthal mode j at spectral parameter λ.
#[derive(Clone, Copy)]
pub struct ModeSystem<'a> {
    pub j: i32,
    pub m: u32,
    pub mu: f64,
    pub lambda: C64,
    pub profile: &'a VortexProfile,
    table: &'a ProfileTable,
}

impl<'a> ModeSystem<'a> {
    pub fn new(profile: &'a VortexProfile, j: i32, lambda: C64) -> Self {
        ModeSystem { j, m: profile.m, mu: profile.mu, lambda, profile, table: profile.table() }
    }

    /// Same system at another spectral parameter.
    pub fn at(&self, lambda: C64) -> Self {
        ModeSystem { lambda, ..*self }
    }

    /// Indicial exponents (|j+m|, |j−m|) of the regular solutions at the origin.
    pub fn exponents(&self) -> (u32, u32) {
        let m = self.m as i32;
        ((self.j + m).unsigned_abs(), (self.j - m).unsigned_abs())
    }

    /// k± = (j±m)²/r² + r² − 2μ ∓ 2iλ.
    pub fn k_pm(&self, r: f64) -> (C64, C64) {
        let (a, b) = self.exponents();
        let base = r * r - 2.0 * self.mu;
        let il2 = C64::new(0.0, 2.0) * self.lambda;
        let r2 = r * r;
        (
            C64::new((a * a) as f64 / r2 + base, 0.0) - il2,
            C64::new((b * b) as f64 / r2 + base, 0.0) + il2,
        )
    }

    /// Potential matrix K = [[k⁺ + 4w², 2w²], [2w², k⁻ + 4w²]] as (K₁₁, K₁₂, K₂₂).
    #[inline]
    fn potential(&self, r: f64) -> (C64, f64, C64) {
        let w2 = self.table.w_squared(r);
        let (kp, km) = self.k_pm(r);
        (kp + 4.0 * w2, 2.0 * w2, km + 4.0 * w2)
    }

    /// Coefficient matrix B(r) of the system for (y₊, y₊′, y₋, y₋′).
    pub fn coeff_matrix(&self, r: f64) -> Mat4 {
        let (k11, k12, k22) = self.potential(r);
        let k12 = C64::new(k12, 0.0);
        let inv = C64::new(-1.0 / r, 0.0);
        [
            [ZERO, ONE, ZERO, ZERO],
            [k11, inv, k12, ZERO],
            [ZERO, ZERO, ZERO, ONE],
            [k12, ZERO, k22, inv],
        ]
    }

    /// Coefficient matrix C(s) of the system for z in the variable s = ln r.
    pub fn s_matrix(&self, r: f64) -> Mat4 {
        let (k11, k12, k22) = self.potential(r);
        let r2 = r * r;
        let k12 = C64::new(r2 * k12, 0.0);
        [
            [ZERO, ONE, ZERO, ZERO],
            [k11 * r2, ZERO, k12, ZERO],
            [ZERO, ZERO, ZERO, ONE],
            [k12, ZERO, k22 * r2, ZERO],
        ]
    }

    /// Entries (α, β, δ) = r²(K₁₁, K₁₂, K₂₂) and the dominant wedge growth
    /// rate Re(√(r²κ₁) + √(r²κ₂)) over the eigenvalues κ of K.
    #[inline]
    fn s_coefficients(&self, r: f64) -> (C64, f64, C64, f64) {
        let (k11, k12, k22) = self.potential(r);
        let r2 = r * r;
        let half = 0.5 * (k11 + k22);
        let disc = (0.25 * (k11 - k22) * (k11 - k22) + k12 * k12).sqrt();
        let g = (r2 * (half + disc)).sqrt().re + (r2 * (half - disc)).sqrt().re;
        (k11 * r2, r2 * k12, k22 * r2, g)
    }
}

/// Vector in Λ²ℂ⁴ (r-form coordinates) with a logarithmic scale:
/// the represented vector is e^{log_scale}·v.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledVector {
    pub v: Ext,
    pub log_scale: f64,
}

impl ScaledVector {
    pub fn zero() -> Self {
        ScaledVector { v: [ZERO; 6], log_scale: 0.0 }
    }

    /// Divides v by its sup-norm and moves the factor into log_scale.
    pub fn normalized(mut self) -> Self {
        let n = sup_norm(&self.v);
        if n > 0.0 {
            for c in self.v.iter_mut() {
                *c /= n;
            }
            self.log_scale += n.ln();
        }
        self
    }
}

/// Which lift is being integrated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// ŷ′ = (B∧)ŷ, integrated rightward from the origin.
    Primal,
    /// ẑ′ = −(B∧)ᵀẑ, integrated leftward from infinity.
    Adjoint,
}

/// Wedge of the two regular solutions at r0 in r-form, with next-order
/// Frobenius corrections; the factor r0^{|j+m|+|j−m|} is kept in log_scale.
pub fn origin_init(sys: &ModeSystem, r0: f64) -> ScaledVector {
    let (xi, log) = origin_init_s(sys, r0);
    let sc = ext_scale(r0);
    let v = std::array::from_fn(|k| xi[k] / sc[k]);
    ScaledVector { v, log_scale: log }.normalized()
}

/// s-form origin wedge and its log magnitude.
pub(crate) fn origin_init_s(sys: &ModeSystem, r0: f64) -> (Ext, f64) {
    let (a, b) = sys.exponents();
    let (a, b) = (a as f64, b as f64);
    let r2 = r0 * r0;
    let cp = -(sys.mu + C64::i() * sys.lambda) / (2.0 * (a + 1.0));
    let cm = -(sys.mu - C64::i() * sys.lambda) / (2.0 * (b + 1.0));
    let z1 = [ONE + cp * r2, a + (a + 2.0) * cp * r2, ZERO, ZERO];
    let z2 = [ZERO, ZERO, ONE + cm * r2, b + (b + 2.0) * cm * r2];
    (wedge(&z1, &z2), (a + b) * r0.ln())
}

/// Decaying solution u = r^A e^{−r²/2} U(a, A+1, r²) of the far-field scalar
/// equation, a = (A + 1 − ν)/2: returns (ln u, r u′/u) when the asymptotic
/// expansion is converged at r, else None.
fn decaying_scalar(a_exp: f64, nu: C64, r: f64) -> Option<(C64, C64)> {
    let a = (a_exp + 1.0 - nu) / 2.0;
    let b = a_exp + 1.0;
    let x = r * r;
    let (s0, e0) = u_asymptotic(a, b, x);
    let (s1, e1) = u_asymptotic(a + 1.0, b + 1.0, x);
    if !(e0 < 1e-14 && e1 < 1e-14) || s0.norm() == 0.0 {
        return None;
    }
    let ln_u = C64::new(a_exp * r.ln() - 0.5 * x, 0.0) - a * x.ln() + s0.ln();
    let gamma = a_exp - x - 2.0 * a * s1 / s0;
    Some((ln_u, gamma))
}

/// Far-field data of the two decaying solutions y∞₃ = (u₃, u₃′, 0, 0) and
/// y∞₄ = (0, 0, u₄, u₄′): (ln u₃, r u₃′/u₃, ln u₄, r u₄′/u₄).
fn decaying_pair(sys: &ModeSystem, r: f64) -> Option<(C64, C64, C64, C64)> {
    let (a, b) = sys.exponents();
    let il = C64::i() * sys.lambda;
    let (l3, g3) = decaying_scalar(a as f64, sys.mu + il, r)?;
    let (l4, g4) = decaying_scalar(b as f64, sys.mu - il, r)?;
    Some((l3, g3, l4, g4))
}

/// Smallest radius ≥ `r_min_start` at which the far-field expansions converge.
pub fn adjoint_start_radius(sys: &ModeSystem, r_min_start: f64) -> Result<f64, LinearError> {
    let mut r = r_min_start;
    for _ in 0..40 {
        if decaying_pair(sys, r).is_some() {
            return Ok(r);
        }
        r *= 1.1;
    }
    Err(LinearError::AsymptoticStart)
}

/// s-form adjoint wedge −R²⋆(y∞₃∧y∞₄) at R and its log magnitude.
pub(crate) fn adjoint_init_s(sys: &ModeSystem, r: f64) -> Result<(Ext, f64), LinearError> {
    let (l3, g3, l4, g4) = decaying_pair(sys, r).ok_or(LinearError::AsymptoticStart)?;
    // r-form y3 = u3 (1, g3/r, 0, 0), y4 = u4 (0, 0, 1, g4/r).
    let y3 = [ONE, g3 / r, ZERO, ZERO];
    let y4 = [ZERO, ZERO, ONE, g4 / r];
    let star = hodge(&wedge(&y3, &y4));
    let ln = l3 + l4;
    let phase = C64::from_polar(1.0, ln.im);
    let sc = ext_scale(r);
    // ζ = ẑ / (d_i d_j), with ẑ = −r²·u3·u4·⋆(ŷ3∧ŷ4).
    let zeta: Ext = std::array::from_fn(|k| -star[k] * phase / sc[k]);
    let n = sup_norm(&zeta);
    let zeta = zeta.map(|c| c / n);
    Ok((zeta, ln.re + 2.0 * r.ln() + n.ln()))
}

/// Adjoint wedge at R in r-form (see [`adjoint_start_radius`] for where the
/// far-field expansion is valid).
pub fn infinity_init_adjoint(sys: &ModeSystem, r: f64) -> Result<ScaledVector, LinearError> {
    let (zeta, log) = adjoint_init_s(sys, r)?;
    let sc = ext_scale(r);
    let v = std::array::from_fn(|k| zeta[k] * sc[k]);
    Ok(ScaledVector { v, log_scale: log }.normalized())
}

/// Result of an s-form exterior integration with growth subtraction.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ExteriorRun {
    pub v: Ext,
    /// ∫ g |ds| accumulated by growth subtraction.
    pub log_growth: f64,
    /// Logarithm of the window rescalings.
    pub log_window: f64,
}

#[inline]
fn pack6(v: &Ext) -> [f64; 13] {
    let mut y = [0.0; 13];
    for k in 0..6 {
        y[2 * k] = v[k].re;
        y[2 * k + 1] = v[k].im;
    }
    y
}

#[inline]
fn unpack6(y: &[f64; 13]) -> Ext {
    std::array::from_fn(|k| C64::new(y[2 * k], y[2 * k + 1]))
}

/// Integrates an s-form wedge from s0 to s1 with growth subtraction and
/// window rescaling.
pub(crate) fn run_exterior(
    sys: &ModeSystem,
    v0: &Ext,
    s0: f64,
    s1: f64,
    dir: Direction,
    rtol: f64,
) -> Result<ExteriorRun, LinearError> {
    let groups = [(0usize, 12usize)];
    let norm = GroupedNorm { rtol, floor: 1e-300, groups: &groups };
    let mut log_window = 0.0;
    let rhs = |s: f64, y: &[f64; 13], d: &mut [f64; 13]| {
        let r = s.exp();
        let (al, be, de, g) = sys.s_coefficients(r);
        let v = unpack6(y);
        let out: Ext = match dir {
            Direction::Primal => [
                be * v[1] - g * v[0],
                v[3] + v[2] - g * v[1],
                v[4] + de * v[1] - g * v[2],
                al * v[1] + v[4] - g * v[3],
                al * v[2] + be * v[5] - be * v[0] + de * v[3] - g * v[4],
                -be * v[1] - g * v[5],
            ],
            Direction::Adjoint => [
                be * v[4] + g * v[0],
                -(be * v[0] + de * v[2] + al * v[3] - be * v[5]) + g * v[1],
                -(v[1] + al * v[4]) + g * v[2],
                -(v[1] + de * v[4]) + g * v[3],
                -(v[2] + v[3]) + g * v[4],
                -be * v[4] + g * v[5],
            ],
        };
        for k in 0..6 {
            d[2 * k] = out[k].re;
            d[2 * k + 1] = out[k].im;
        }
        d[12] = match dir {
            Direction::Primal => g,
            Direction::Adjoint => -g,
        };
    };
    let opts = OdeOptions { h_init: Some(0.05), ..OdeOptions::default() };
    let out = integrate(rhs, &norm, s0, pack6(v0), s1, &[], &opts, |_, y| {
        let mut n = 0.0_f64;
        for c in y.iter().take(12) {
            n = n.max(c.abs());
        }
        if !(1e-2..=1e2).contains(&n) && n > 0.0 {
            for c in y.iter_mut().take(12) {
                *c /= n;
            }
            log_window += n.ln();
            true
        } else {
            false
        }
    })
    .map_err(ode_error)?;
    Ok(ExteriorRun { v: unpack6(&out.y), log_growth: out.y[12], log_window })
}

/// Integrates a wedge (r-form in and out) between r_from and r_to. Primal
/// vectors are integrated rightward and adjoint vectors leftward, but either
/// orientation of the interval is accepted.
pub fn integrate_scaled(
    sys: &ModeSystem,
    state: &ScaledVector,
    dir: Direction,
    r_from: f64,
    r_to: f64,
) -> Result<ScaledVector, LinearError> {
    integrate_scaled_tol(sys, state, dir, r_from, r_to, 1e-11)
}

pub fn integrate_scaled_tol(
    sys: &ModeSystem,
    state: &ScaledVector,
    dir: Direction,
    r_from: f64,
    r_to: f64,
    rtol: f64,
) -> Result<ScaledVector, LinearError> {
    if state.v.iter().all(|c| *c == ZERO) {
        return Ok(*state);
    }
    let (sa, sb) = (ext_scale(r_from), ext_scale(r_to));
    let v0: Ext = match dir {
        Direction::Primal => std::array::from_fn(|k| state.v[k] * sa[k]),
        Direction::Adjoint => std::array::from_fn(|k| state.v[k] / sa[k]),
    };
    let run = run_exterior(sys, &v0, r_from.ln(), r_to.ln(), dir, rtol)?;
    let v: Ext = match dir {
        Direction::Primal => std::array::from_fn(|k| run.v[k] / sb[k]),
        Direction::Adjoint => std::array::from_fn(|k| run.v[k] * sb[k]),
    };
    Ok(ScaledVector { v, log_scale: state.log_scale + run.log_growth + run.log_window }.normalized())
}

/// Plain 4×4 integration of one solution in r-form (used by oracles).
pub fn integrate_plain4(
    sys: &ModeSystem,
    y0: &[C64; 4],
    r_from: f64,
    r_to: f64,
    rtol: f64,
) -> Result<[C64; 4], LinearError> {
    let z0 = [y0[0], y0[1] * r_from, y0[2], y0[3] * r_from];
    let mut y = [0.0; 8];
    for k in 0..4 {
        y[2 * k] = z0[k].re;
        y[2 * k + 1] = z0[k].im;
    }
    let groups = [(0usize, 8usize)];
    let norm = GroupedNorm { rtol, floor: 1e-300, groups: &groups };
    let out = integrate(
        |s, y: &[f64; 8], d: &mut [f64; 8]| {
            let c = sys.s_matrix(s.exp());
            let z: [C64; 4] = std::array::from_fn(|k| C64::new(y[2 * k], y[2 * k + 1]));
            for i in 0..4 {
                let v: C64 = (0..4).map(|k| c[i][k] * z[k]).sum();
                d[2 * i] = v.re;
                d[2 * i + 1] = v.im;
            }
        },
        &norm,
        r_from.ln(),
        y,
        r_to.ln(),
        &[],
        &OdeOptions { h_init: Some(0.01), ..OdeOptions::default() },
        |_, _| false,
    )
    .map_err(ode_error)?;
    let z: [C64; 4] = std::array::from_fn(|k| C64::new(out.y[2 * k], out.y[2 * k + 1]));
    Ok([z[0], z[1] / r_to, z[2], z[3] / r_to])
}

/// Radius past the profile maximum beyond which w² < 1e-18 (at least 5):
/// the far-field initialization starts no closer than this.
pub fn far_field_radius(profile: &VortexProfile) -> f64 {
    if profile.is_degenerate() {
        return 5.0;
    }
    let table = profile.table();
    let r_end = table.r_end();
    let mut r = profile.peak_radius().max(1.0);
    while r < r_end && table.w_squared(r) >= 1e-18 {
        r += 0.05;
    }
    r.max(5.0)
}

/// Default matching radius: the profile maximizer, or √μ for the zero profile.
pub fn default_matching_radius(profile: &VortexProfile) -> f64 {
    if profile.is_degenerate() {
        profile.mu.max(1.0).sqrt()
    } else {
        profile.peak_radius()
    }
}

/// Eigenfunction samples on a radial mesh.
#[derive(Debug, Clone)]
pub struct Eigenfunction {
    pub lambda: C64,
    pub r: Vec<f64>,
    pub y_plus: Vec<C64>,
    pub dy_plus: Vec<C64>,
    pub y_minus: Vec<C64>,
    pub dy_minus: Vec<C64>,
    /// Ratio of the two smallest singular values of the matching matrix.
    pub singular_ratio: f64,
}

impl Eigenfunction {
    /// ∫ f(r) r dr by cubic Hermite quadrature on the mesh, given f and f′ as
    /// functions of the sample index.
    pub fn hermite_integral(&self, f: impl Fn(usize) -> (f64, f64)) -> f64 {
        let mut total = 0.0;
        for i in 0..self.r.len() - 1 {
            let h = self.r[i + 1] - self.r[i];
            let (fa, da) = f(i);
            let (fb, db) = f(i + 1);
            total += 0.5 * h * (fa + fb) + h * h / 12.0 * (da - db);
        }
        total
    }

    /// ∫(|y₊|² − |y₋|²) r dr.
    pub fn krein_integral(&self) -> f64 {
        self.hermite_integral(|i| {
            let r = self.r[i];
            let (a, b) = (self.y_plus[i], self.y_minus[i]);
            let (da, db) = (self.dy_plus[i], self.dy_minus[i]);
            let f = (a.norm_sqr() - b.norm_sqr()) * r;
            let df = (a.norm_sqr() - b.norm_sqr()) + 2.0 * r * ((a.conj() * da).re - (b.conj() * db).re);
            (f, df)
        })
    }

    /// ∫(|y₊|² + |y₋|²) r dr.
    pub fn norm_integral(&self) -> f64 {
        self.hermite_integral(|i| {
            let r = self.r[i];
            let (a, b) = (self.y_plus[i], self.y_minus[i]);
            let (da, db) = (self.dy_plus[i], self.dy_minus[i]);
            let f = (a.norm_sqr() + b.norm_sqr()) * r;
            let df = (a.norm_sqr() + b.norm_sqr()) + 2.0 * r * ((a.conj() * da).re + (b.conj() * db).re);
            (f, df)
        })
    }
}

type Frame = [[C64; 2]; 4];

/// Modified Gram–Schmidt on a 4×2 frame: returns (Q, R) with frame = Q R.
fn qr2(f: &Frame) -> (Frame, [[C64; 2]; 2]) {
    let col = |f: &Frame, j: usize| -> [C64; 4] { std::array::from_fn(|i| f[i][j]) };
    let c0 = col(f, 0);
    let n0 = c0.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    let q0: [C64; 4] = c0.map(|c| c / n0);
    let c1 = col(f, 1);
    let p: C64 = (0..4).map(|i| q0[i].conj() * c1[i]).sum();
    let r1: [C64; 4] = std::array::from_fn(|i| c1[i] - p * q0[i]);
    let n1 = r1.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    let q1 = r1.map(|c| c / n1);
    let q = std::array::from_fn(|i| [q0[i], q1[i]]);
    (q, [[C64::new(n0, 0.0), p], [ZERO, C64::new(n1, 0.0)]])
}

/// Integrates a 2-column frame in s between the given radii, orthonormalizing
/// at every stop; returns per-stop (Q, R) in z-form.
fn march_frame(
    sys: &ModeSystem,
    frame0: &Frame,
    radii: &[f64],
    rtol: f64,
) -> Result<Vec<(Frame, [[C64; 2]; 2])>, LinearError> {
    let (q0, r0) = qr2(frame0);
    let mut out = vec![(q0, r0)];
    let pack = |f: &Frame| -> [f64; 16] {
        let mut y = [0.0; 16];
        for i in 0..4 {
            for j in 0..2 {
                y[4 * i + 2 * j] = f[i][j].re;
                y[4 * i + 2 * j + 1] = f[i][j].im;
            }
        }
        y
    };
    let unpack = |y: &[f64; 16]| -> Frame {
        std::array::from_fn(|i| std::array::from_fn(|j| C64::new(y[4 * i + 2 * j], y[4 * i + 2 * j + 1])))
    };
    let groups = [(0usize, 16usize)];
    let norm = GroupedNorm { rtol, floor: 1e-300, groups: &groups };
    let stops: Vec<f64> = radii[1..].iter().map(|r| r.ln()).collect();
    let mut err = None;
    let res = integrate(
        |s, y: &[f64; 16], d: &mut [f64; 16]| {
            let c = sys.s_matrix(s.exp());
            let f = unpack(y);
            for i in 0..4 {
                for j in 0..2 {
                    let v: C64 = (0..4).map(|k| c[i][k] * f[k][j]).sum();
                    d[4 * i + 2 * j] = v.re;
                    d[4 * i + 2 * j + 1] = v.im;
                }
            }
        },
        &norm,
        radii[0].ln(),
        pack(&q0),
        *stops.last().unwrap(),
        &stops,
        &OdeOptions { h_init: Some(0.01), ..OdeOptions::default() },
        |ev, y| {
            if ev.stop.is_some() {
                let f = unpack(y);
                let (q, r) = qr2(&f);
                if !r[1][1].re.is_finite() || r[1][1].re == 0.0 {
                    err = Some(LinearError::Integration { r: ev.t.exp(), reason: "frame collapsed".into() });
                }
                out.push((q, r));
                *y = pack(&q);
                true
            } else {
                false
            }
        },
    );
    res.map_err(ode_error)?;
    if let Some(e) = err {
        return Err(e);
    }
    Ok(out)
}

/// Eigenfunction at an (approximate) eigenvalue by matching the span of the
/// regular solutions with the span of the decaying solutions at the profile
/// maximizer.
pub fn eigenfunction_solve(sys: &ModeSystem) -> Result<Eigenfunction, LinearError> {
    eigenfunction_solve_at(sys, default_matching_radius(sys.profile), 0.02)
}

pub fn eigenfunction_solve_at(sys: &ModeSystem, r_mid: f64, h_max: f64) -> Result<Eigenfunction, LinearError> {
    let rtol = 1e-11;
    let r0 = R_MIN;
    let r_far = adjoint_start_radius(sys, far_field_radius(sys.profile))?;
    // Left mesh: geometric up to 0.05, then uniform with spacing ≤ h_max.
    let mut left = vec![r0];
    let mut r = r0;
    while r * 1.5 < 0.05_f64.min(r_mid) {
        r *= 1.5;
        left.push(r);
    }
    let start = *left.last().unwrap();
    let n_left = ((r_mid - start) / h_max).ceil().max(1.0) as usize;
    for i in 1..=n_left {
        left.push(start + (r_mid - start) * i as f64 / n_left as f64);
    }
    let n_right = ((r_far - r_mid) / h_max).ceil().max(1.0) as usize;
    let right: Vec<f64> = (0..=n_right).map(|i| r_far - (r_far - r_mid) * i as f64 / n_right as f64).collect();

    let (a, b) = sys.exponents();
    let (a, b) = (a as f64, b as f64);
    let r2 = r0 * r0;
    let cp = -(sys.mu + C64::i() * sys.lambda) / (2.0 * (a + 1.0));
    let cm = -(sys.mu - C64::i() * sys.lambda) / (2.0 * (b + 1.0));
    let f_left: Frame = [
        [ONE + cp * r2, ZERO],
        [a + (a + 2.0) * cp * r2, ZERO],
        [ZERO, ONE + cm * r2],
        [ZERO, b + (b + 2.0) * cm * r2],
    ];
    let (_, g3, _, g4) = decaying_pair(sys, r_far).ok_or(LinearError::AsymptoticStart)?;
    let f_right: Frame = [[ONE, ZERO], [g3, ZERO], [ZERO, ONE], [ZERO, g4]];
    let lf = march_frame(sys, &f_left, &left, rtol)?;
    let rf = march_frame(sys, &f_right, &right, rtol)?;

    // Nullspace of [Q_L | Q_R] at r_mid.
    let (ql, qr) = (&lf.last().unwrap().0, &rf.last().unwrap().0);
    let mut mat = Matrix4::<C64>::zeros();
    for i in 0..4 {
        mat[(i, 0)] = ql[i][0];
        mat[(i, 1)] = ql[i][1];
        mat[(i, 2)] = -qr[i][0];
        mat[(i, 3)] = -qr[i][1];
    }
    let svd = mat.svd(false, true);
    let sv = svd.singular_values;
    let mut idx: Vec<usize> = (0..4).collect();
    idx.sort_by(|&x, &y| sv[x].partial_cmp(&sv[y]).unwrap());
    let (s_min, s_next, s_max) = (sv[idx[0]], sv[idx[1]], sv[idx[3]]);
    let ratio = s_min / s_next;
    if s_next < 1e-6 * s_max {
        return Err(LinearError::NonSimple { dim: 2 });
    }
    if ratio > 1e-3 {
        return Err(LinearError::NotEigenvalue { ratio });
    }
    let v_t = svd.v_t.unwrap();
    let null: [C64; 4] = std::array::from_fn(|k| v_t[(idx[0], k)].conj());

    // Back-substitute coefficients along each march.
    let back = |frames: &Vec<(Frame, [[C64; 2]; 2])>, c_end: [C64; 2]| -> Vec<[C64; 4]> {
        let n = frames.len();
        let mut coeff = vec![[ZERO; 2]; n];
        coeff[n - 1] = c_end;
        for k in (0..n - 1).rev() {
            let rr = &frames[k + 1].1;
            let c = coeff[k + 1];
            let c1 = c[1] / rr[1][1];
            let c0 = (c[0] - rr[0][1] * c1) / rr[0][0];
            coeff[k] = [c0, c1];
        }
        frames
            .iter()
            .zip(&coeff)
            .map(|((q, _), c)| std::array::from_fn(|i| q[i][0] * c[0] + q[i][1] * c[1]))
            .collect()
    };
    let zl = back(&lf, [null[0], null[1]]);
    let zr = back(&rf, [null[2], null[3]]);

    let mut rs = Vec::new();
    let mut zs = Vec::new();
    for (r, z) in left.iter().zip(&zl) {
        rs.push(*r);
        zs.push(*z);
    }
    for (r, z) in right.iter().zip(&zr).rev().skip(1) {
        rs.push(*r);
        zs.push(*z);
    }
    let mut ef = Eigenfunction {
        lambda: sys.lambda,
        y_plus: zs.iter().map(|z| z[0]).collect(),
        dy_plus: zs.iter().zip(&rs).map(|(z, r)| z[1] / *r).collect(),
        y_minus: zs.iter().map(|z| z[2]).collect(),
        dy_minus: zs.iter().zip(&rs).map(|(z, r)| z[3] / *r).collect(),
        r: rs,
        singular_ratio: ratio,
    };
    // Unit L² norm, phase fixed by the largest sample.
    let n = ef.norm_integral().sqrt();
    let (mut best, mut phase) = (0.0, ONE);
    for (a, b) in ef.y_plus.iter().zip(&ef.y_minus) {
        for c in [a, b] {
            if c.norm() > best {
                best = c.norm();
                phase = c.conj() / c.norm();
            }
        }
    }
    let s = phase / n;
    for v in [&mut ef.y_plus, &mut ef.dy_plus, &mut ef.y_minus, &mut ef.dy_minus] {
        for c in v.iter_mut() {
            *c *= s;
        }
    }
    Ok(ef)
}

/// Exterior-square matrix of a 4×4 nalgebra matrix (test convenience).
pub fn exterior_square_na(b: &SMatrix<C64, 4, 4>) -> SMatrix<C64, 6, 6> {
    let arr: Mat4 = std::array::from_fn(|i| std::array::from_fn(|j| b[(i, j)]));
    let e = exterior_square(&arr);
    SMatrix::<C64, 6, 6>::from_fn(|i, j| e[i][j])
}
