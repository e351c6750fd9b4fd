//! Special functions of the zero-amplitude problem: Gamma, Kummer M and U,
//! generalized Laguerre polynomials, and the closed-form radial solutions of
//! the linear trap equation.

use crate::ode::{integrate_plain, OdeOptions, ProjectiveNorm};
use crate::C64;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecialError {
    #[error("gamma pole at {re}{im:+}i")]
    GammaPole { re: f64, im: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("precision loss: estimated relative error {estimate:.3e}")]
    PrecisionLoss { estimate: f64 },
}

/// A value together with an a-posteriori estimate of its relative error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub rel_error: f64,
}

/// Relative error above which series evaluations log a precision warning.
const WARN_LEVEL: f64 = 1e-8;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

fn is_nonpositive_integer(x: f64) -> bool {
    x <= 0.0 && x == x.round()
}

/// sin(πx) with exact argument reduction, accurate near the integers.
fn sin_pi(x: f64) -> f64 {
    let n = x.round();
    let s = (PI * (x - n)).sin();
    if (n as i64) % 2 == 0 {
        s
    } else {
        -s
    }
}

fn sin_pi_complex(z: C64) -> C64 {
    let n = z.re.round();
    let s = (PI * C64::new(z.re - n, z.im)).sin();
    if (n as i64) % 2 == 0 {
        s
    } else {
        -s
    }
}

fn lanczos_real(x: f64) -> f64 {
    // Valid for x >= 0.5.
    let z = x - 1.0;
    let mut s = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        s += c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    (2.0 * PI).sqrt() * t.powf(z + 0.5) * (-t).exp() * s
}

fn lanczos_complex(z: C64) -> C64 {
    let z = z - 1.0;
    let mut s = C64::new(LANCZOS[0], 0.0);
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        s += c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    (2.0 * PI).sqrt() * (t.ln() * (z + 0.5) - t).exp() * s
}

/// Gamma function of a real argument.
pub fn gamma_fn(x: f64) -> Result<f64, SpecialError> {
    if is_nonpositive_integer(x) {
        return Err(SpecialError::GammaPole { re: x, im: 0.0 });
    }
    if x == x.round() && x <= 171.0 {
        // Exact factorials for small positive integers.
        let mut f = 1.0;
        let mut k = 2.0;
        while k < x {
            f *= k;
            k += 1.0;
        }
        return Ok(f);
    }
    if x < 0.5 {
        Ok(PI / (sin_pi(x) * lanczos_real(1.0 - x)))
    } else {
        Ok(lanczos_real(x))
    }
}

/// Gamma function of a complex argument.
pub fn gamma_complex(z: C64) -> Result<C64, SpecialError> {
    if z.im == 0.0 {
        return gamma_fn(z.re).map(|v| C64::new(v, 0.0)).map_err(|_| SpecialError::GammaPole {
            re: z.re,
            im: z.im,
        });
    }
    if z.re < 0.5 {
        Ok(PI / (sin_pi_complex(z) * lanczos_complex(1.0 - z)))
    } else {
        Ok(lanczos_complex(z))
    }
}

/// Reciprocal Gamma function (entire; exactly zero at the poles of Γ).
pub fn rgamma(x: f64) -> f64 {
    if is_nonpositive_integer(x) {
        return 0.0;
    }
    if x < 0.5 {
        sin_pi(x) * lanczos_real(1.0 - x) / PI
    } else {
        1.0 / gamma_fn(x).expect("pole excluded above")
    }
}

/// Reciprocal Gamma function of a complex argument.
pub fn rgamma_complex(z: C64) -> C64 {
    if z.im == 0.0 {
        return C64::new(rgamma(z.re), 0.0);
    }
    if z.re < 0.5 {
        sin_pi_complex(z) * lanczos_complex(1.0 - z) / PI
    } else {
        1.0 / lanczos_complex(z)
    }
}

/// Kummer's function M(a, b, x) with an error estimate.
pub fn confluent_m_est(a: f64, b: f64, x: f64) -> Result<Estimate, SpecialError> {
    if is_nonpositive_integer(b) {
        return Err(SpecialError::InvalidParameter(format!("M requires b not in {{0,-1,...}}, got {b}")));
    }
    if x < 0.0 {
        return Err(SpecialError::InvalidParameter(format!("M requires x >= 0, got {x}")));
    }
    let crossover = 40.0 + 2.0 * (a.abs() + b.abs());
    let est = if x <= crossover || is_nonpositive_integer(a) {
        m_series(a, b, x)
    } else {
        m_asymptotic(a, b, x)
    };
    if est.rel_error > WARN_LEVEL {
        log::warn!("confluent_m({a}, {b}, {x}): estimated relative error {:.2e}", est.rel_error);
    }
    Ok(est)
}

/// Kummer's function M(a, b, x) (power series for small x, asymptotic
/// expansion for large x).
pub fn confluent_m(a: f64, b: f64, x: f64) -> Result<f64, SpecialError> {
    confluent_m_est(a, b, x).map(|e| e.value)
}

/// Power series of M; public for crossover validation.
pub fn m_series(a: f64, b: f64, x: f64) -> Estimate {
    let mut term = 1.0_f64;
    let mut sum = 1.0_f64;
    let mut biggest = 1.0_f64;
    let mut n = 0usize;
    while n < 500 {
        term *= (a + n as f64) / (b + n as f64) * x / (n as f64 + 1.0);
        n += 1;
        sum += term;
        biggest = biggest.max(term.abs());
        if term == 0.0 || (term.abs() < 1e-16 * sum.abs() && n as f64 > x) {
            break;
        }
    }
    let cancellation = biggest / sum.abs().max(f64::MIN_POSITIVE);
    Estimate { value: sum, rel_error: 2.2e-16 * cancellation * (n as f64).sqrt().max(1.0) }
}

/// Large-x asymptotic expansion of M; public for crossover validation.
pub fn m_asymptotic(a: f64, b: f64, x: f64) -> Estimate {
    let (s1, e1) = divergent_sum(|n| (b - a + n) * (1.0 - a + n) / ((n + 1.0) * x));
    let (s2, _) = divergent_sum(|n| -(a + n) * (a - b + 1.0 + n) / ((n + 1.0) * x));
    let gb = gamma_fn(b).unwrap_or(f64::NAN);
    let lead = gb * rgamma(a) * x.exp() * x.powf(a - b) * s1;
    let sub = gb * rgamma(b - a) * (PI * a).cos() * x.powf(-a) * s2;
    let value = lead + sub;
    let rel = if value != 0.0 { (e1 * lead.abs()) / value.abs() } else { f64::INFINITY };
    Estimate { value, rel_error: rel.max(2.2e-16) }
}

/// Sums an asymptotic series Σ t_n with t_0 = 1 and t_{n+1} = t_n·ratio(n),
/// truncating at the smallest term. Returns (sum, magnitude of the first
/// omitted term relative to the sum).
fn divergent_sum(ratio: impl Fn(f64) -> f64) -> (f64, f64) {
    let mut term = 1.0_f64;
    let mut sum = 1.0_f64;
    for n in 0..400 {
        let next = term * ratio(n as f64);
        if next.abs() >= term.abs() && n > 0 {
            return (sum, next.abs() / sum.abs());
        }
        term = next;
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            return (sum, term.abs() / sum.abs());
        }
    }
    (sum, term.abs() / sum.abs())
}

/// Large-x expansion of Tricomi's U for complex `a`:
/// returns `S` with U(a, b, x) = x^{-a}·S and the relative truncation error.
pub fn u_asymptotic(a: C64, b: f64, x: f64) -> (C64, f64) {
    let mut term = C64::new(1.0, 0.0);
    let mut sum = term;
    for n in 0..600 {
        let nf = n as f64;
        let next = term * (a + nf) * (a - b + 1.0 + nf) / (-(nf + 1.0) * x);
        if next.norm() >= term.norm() && n as f64 > (a.norm() + b.abs()) {
            return (sum, next.norm() / sum.norm());
        }
        term = next;
        sum += term;
        if term.norm() < 1e-17 * sum.norm() {
            return (sum, term.norm() / sum.norm());
        }
    }
    (sum, term.norm() / sum.norm())
}

/// Tricomi's confluent hypergeometric function U(a, b, x) with an error estimate.
pub fn confluent_u_est(a: f64, b: f64, x: f64) -> Result<Estimate, SpecialError> {
    if x <= 0.0 {
        return Err(SpecialError::InvalidParameter(format!("U requires x > 0, got {x}")));
    }
    let (s, err) = u_asymptotic(C64::new(a, 0.0), b, x);
    let est = if err < 1e-15 {
        Estimate { value: x.powf(-a) * s.re, rel_error: err.max(2.2e-16) }
    } else if x <= 2.0 {
        u_connection(a, b, x)
    } else {
        u_inward(a, b, x)?
    };
    if est.rel_error > WARN_LEVEL {
        log::warn!("confluent_u({a}, {b}, {x}): estimated relative error {:.2e}", est.rel_error);
    }
    Ok(est)
}

/// Tricomi's confluent hypergeometric function U(a, b, x).
pub fn confluent_u(a: f64, b: f64, x: f64) -> Result<f64, SpecialError> {
    confluent_u_est(a, b, x).map(|e| e.value)
}

/// Connection formula U = Γ(1−b)/Γ(a−b+1)·M(a,b,x) + Γ(b−1)/Γ(a)·x^{1−b}·M(a−b+1,2−b,x).
/// At integer b the limit is approximated by averaging b ± 1e-6.
fn u_connection(a: f64, b: f64, x: f64) -> Estimate {
    let generic = |b: f64| -> Estimate {
        let m1 = m_series(a, b, x);
        let m2 = m_series(a - b + 1.0, 2.0 - b, x);
        let t1 = gamma_fn(1.0 - b).unwrap_or(f64::NAN) * rgamma(a - b + 1.0) * m1.value;
        let t2 = gamma_fn(b - 1.0).unwrap_or(f64::NAN) * rgamma(a) * x.powf(1.0 - b) * m2.value;
        let value = t1 + t2;
        let scale = t1.abs() * (m1.rel_error + 1e-15) + t2.abs() * (m2.rel_error + 1e-15);
        Estimate { value, rel_error: scale / value.abs().max(f64::MIN_POSITIVE) }
    };
    if (b - b.round()).abs() < 1e-9 {
        let delta = 1e-6;
        let lo = generic(b - delta);
        let hi = generic(b + delta);
        let value = 0.5 * (lo.value + hi.value);
        let spread = (hi.value - lo.value).abs();
        let rel = lo.rel_error.max(hi.rel_error) + delta * delta * spread / (delta * value.abs());
        Estimate { value, rel_error: rel }
    } else {
        generic(b)
    }
}

/// Integrates Kummer's equation x f'' + (b − x) f' − a f = 0 inward from a
/// point where the asymptotic expansion is converged; U is the dominant
/// solution in that direction, so the integration is stable.
fn u_inward(a: f64, b: f64, x: f64) -> Result<Estimate, SpecialError> {
    let mut x0 = x.max(30.0);
    let mut start = None;
    for _ in 0..12 {
        let (s0, e0) = u_asymptotic(C64::new(a, 0.0), b, x0);
        let (s1, e1) = u_asymptotic(C64::new(a + 1.0, 0.0), b + 1.0, x0);
        if e0 < 1e-15 && e1 < 1e-15 {
            let f0 = x0.powf(-a) * s0.re;
            let df0 = -a * x0.powf(-a - 1.0) * s1.re;
            start = Some((f0, df0));
            break;
        }
        x0 *= 1.5;
    }
    let (f0, df0) = start.ok_or(SpecialError::PrecisionLoss { estimate: 1.0 })?;
    let norm = ProjectiveNorm { rtol: 1e-13, len: 2, floor: 1e-300 };
    let y = integrate_plain(
        |t, y: &[f64; 2], d: &mut [f64; 2]| {
            d[0] = y[1];
            d[1] = ((t - b) * y[1] + a * y[0]) / t;
        },
        &norm,
        x0,
        [f0, df0],
        x,
        &OdeOptions::default(),
    )
    .map_err(|_| SpecialError::PrecisionLoss { estimate: 1.0 })?;
    Ok(Estimate { value: y[0], rel_error: 1e-11 })
}

/// Generalized Laguerre polynomial L_n^{(α)}(x) by the three-term recurrence.
pub fn laguerre(n: u32, alpha: f64, x: f64) -> f64 {
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = 1.0 + alpha - x;
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 + alpha - x) * cur - (kf + alpha) * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// Bound state of the linear trap equation with vortex degree `m` and `n`
/// radial nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LinearMode {
    pub m: u32,
    pub n: u32,
}

impl LinearMode {
    pub fn new(m: u32, n: u32) -> Self {
        LinearMode { m, n }
    }

    /// Eigen-frequency μ_n = m + 1 + 2n.
    pub fn frequency(&self) -> u32 {
        self.m + 1 + 2 * self.n
    }

    /// r^m e^{−r²/2} L_n^{(m)}(r²).
    pub fn eval(&self, r: f64) -> f64 {
        linear_mode_eval(*self, r)
    }
}

/// r^m e^{−r²/2} L_n^{(m)}(r²).
pub fn linear_mode_eval(mode: LinearMode, r: f64) -> f64 {
    let x = r * r;
    r.powi(mode.m as i32) * (-0.5 * x).exp() * laguerre(mode.n, mode.m as f64, x)
}

/// Regular and decaying solutions of the linear radial equation and their
/// closed-form Wronskian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearSolutions {
    pub w1: f64,
    pub w2: f64,
    pub wronskian: f64,
}

/// w₁ = r^m e^{−r²/2} M((m+1−μ)/2, m+1, r²), w₂ likewise with U, and
/// W(w₁, w₂) = −(2/r)·Γ(m+1)/Γ((m+1−μ)/2).
pub fn linear_radial_solutions(m: u32, mu: f64, r: f64) -> Result<LinearSolutions, SpecialError> {
    if r <= 0.0 {
        return Err(SpecialError::InvalidParameter(format!("r must be positive, got {r}")));
    }
    let a = 0.5 * (m as f64 + 1.0 - mu);
    let b = m as f64 + 1.0;
    let x = r * r;
    let pref = r.powi(m as i32) * (-0.5 * x).exp();
    let w1 = pref * confluent_m(a, b, x)?;
    let w2 = pref * confluent_u(a, b, x)?;
    let wronskian = -(2.0 / r) * gamma_fn(b)? * rgamma(a);
    Ok(LinearSolutions { w1, w2, wronskian })
}

/// Linear spectrum [m+1, m+3, …, m+1+2·n_max].
pub fn linear_spectrum(m: u32, n_max: u32) -> Vec<f64> {
    (0..=n_max).map(|n| (m + 1 + 2 * n) as f64).collect()
}
