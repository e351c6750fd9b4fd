//! Evans function E_j(λ) = ẑ·ŷ of the mode systems, its zeros on the
//! imaginary axis, argument-principle counts on contours and the location of
//! off-axis zeros.

use crate::linearized::{
    adjoint_start_radius, default_matching_radius, far_field_radius, pairing, run_exterior, Direction,
    LinearError, ModeSystem,
};
use crate::profile::{VortexProfile, R_MIN};
use crate::C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvansError {
    #[error(transparent)]
    Linear(#[from] LinearError),
    #[error("Evans function vanishes on the contour near lambda = {re} + {im}i")]
    ZeroOnContour { re: f64, im: f64 },
    #[error("winding unresolved: argument change {total_arg} is not an integer multiple")]
    WindingUnresolved { total_arg: f64 },
    #[error("inconsistent count: n_su = {n_su} is odd or negative")]
    InconsistentCount { n_su: i64 },
    #[error("derivative noise: s0 = {s0} but winding = {winding}")]
    DerivativeNoise { s0: f64, winding: i64 },
    #[error("refinement failed: {0}")]
    RefinementFailed(String),
}

/// Evans function value as mantissa·e^{log_scale}.
///
/// The mantissa equals E_j(λ) times a smooth positive factor, so its zeros,
/// argument and sign on the imaginary axis are those of E_j; it does not
/// depend on the matching radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvansValue {
    pub mantissa: C64,
    pub log_scale: f64,
    pub lambda: C64,
    pub j: i32,
    pub mu: f64,
}

impl EvansValue {
    /// E_j(λ) itself (may overflow for large log_scale).
    pub fn value(&self) -> C64 {
        self.mantissa * self.log_scale.exp()
    }

    /// E(self)/E(other) without overflow.
    pub fn ratio(&self, other: &EvansValue) -> C64 {
        self.mantissa / other.mantissa * (self.log_scale - other.log_scale).exp()
    }
}

/// Numerical settings of the Evans evaluation.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EvansOptions {
    pub rtol: f64,
    /// Matching radius; defaults to the profile maximizer.
    pub r_mid: Option<f64>,
    /// Smallest radius for the far-field start; defaults to where w² < 1e-18.
    pub r_far: Option<f64>,
    /// Origin start radius.
    pub r0: f64,
}

impl Default for EvansOptions {
    fn default() -> Self {
        EvansOptions { rtol: 1e-10, r_mid: None, r_far: None, r0: R_MIN }
    }
}

/// Evans evaluator bound to one profile, with the radii fixed once.
#[derive(Clone)]
pub struct EvansContext<'a> {
    pub profile: &'a VortexProfile,
    pub r_mid: f64,
    pub r_far_min: f64,
    pub options: EvansOptions,
}

impl<'a> EvansContext<'a> {
    pub fn new(profile: &'a VortexProfile, options: EvansOptions) -> Self {
        let r_mid = options.r_mid.unwrap_or_else(|| default_matching_radius(profile));
        let r_far_min = options.r_far.unwrap_or_else(|| far_field_radius(profile)).max(1.05 * r_mid);
        EvansContext { profile, r_mid, r_far_min, options }
    }

    pub fn eval(&self, j: i32, lambda: C64) -> Result<EvansValue, EvansError> {
        let sys = ModeSystem::new(self.profile, j, lambda);
        let rtol = self.options.rtol;
        let (xi0, l_xi) = crate::linearized::origin_init_s(&sys, self.options.r0);
        let primal = run_exterior(&sys, &xi0, self.options.r0.ln(), self.r_mid.ln(), Direction::Primal, rtol)?;
        let r_far = adjoint_start_radius(&sys, self.r_far_min)?;
        let (zeta0, l_zeta) = crate::linearized::adjoint_init_s(&sys, r_far)?;
        let adj = run_exterior(&sys, &zeta0, r_far.ln(), self.r_mid.ln(), Direction::Adjoint, rtol)?;
        let pair = pairing(&adj.v, &primal.v);
        let mut log_scale = l_xi + l_zeta + primal.log_growth + adj.log_growth;
        let window = primal.log_window + adj.log_window;
        let mantissa = if window.abs() < 600.0 {
            pair * window.exp()
        } else {
            log_scale += window;
            pair
        };
        Ok(EvansValue { mantissa, log_scale, lambda, j, mu: self.profile.mu })
    }

    /// The Evans function of mode j as a [`SpectralFunction`].
    pub fn mode(&self, j: i32) -> ModeEvans<'_, 'a> {
        ModeEvans { ctx: self, j }
    }
}

/// One-shot evaluation with default options.
pub fn evans_eval(j: i32, lambda: C64, profile: &VortexProfile) -> Result<EvansValue, EvansError> {
    EvansContext::new(profile, EvansOptions::default()).eval(j, lambda)
}

/// A scalar analytic function of λ whose zeros are sought.
pub trait SpectralFunction: Sync {
    fn eval(&self, lambda: C64) -> Result<EvansValue, EvansError>;
}

pub struct ModeEvans<'c, 'a> {
    ctx: &'c EvansContext<'a>,
    pub j: i32,
}

impl SpectralFunction for ModeEvans<'_, '_> {
    fn eval(&self, lambda: C64) -> Result<EvansValue, EvansError> {
        self.ctx.eval(self.j, lambda)
    }
}

/// Wraps a closed-form analytic function (test harnesses, synthetic oracles).
pub struct AnalyticFunction<F: Fn(C64) -> C64 + Sync>(pub F);

impl<F: Fn(C64) -> C64 + Sync> SpectralFunction for AnalyticFunction<F> {
    fn eval(&self, lambda: C64) -> Result<EvansValue, EvansError> {
        Ok(EvansValue { mantissa: (self.0)(lambda), log_scale: 0.0, lambda, j: 0, mu: 0.0 })
    }
}

// ---------------------------------------------------------------------------
// Imaginary-axis scan
// ---------------------------------------------------------------------------

/// Natural cubic spline through (x_i, y_i).
pub struct CubicSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl CubicSpline {
    pub fn new(x: &[f64], y: &[f64]) -> Self {
        let n = x.len();
        assert!(n >= 3 && y.len() == n);
        let mut m = vec![0.0; n];
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        for i in 1..n - 1 {
            let h0 = x[i] - x[i - 1];
            let h1 = x[i + 1] - x[i];
            let a = h0 / 6.0;
            let b = (h0 + h1) / 3.0;
            let cc = h1 / 6.0;
            let rhs = (y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0;
            let denom = b - a * c[i - 1];
            c[i] = cc / denom;
            d[i] = (rhs - a * d[i - 1]) / denom;
        }
        for i in (1..n - 1).rev() {
            m[i] = d[i] - c[i] * m[i + 1];
        }
        CubicSpline { x: x.to_vec(), y: y.to_vec(), m }
    }

    fn interval(&self, t: f64) -> usize {
        self.x.partition_point(|&v| v <= t).clamp(1, self.x.len() - 1) - 1
    }

    /// (s(t), s′(t)).
    pub fn eval(&self, t: f64) -> (f64, f64) {
        let i = self.interval(t);
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - t) / h;
        let b = (t - self.x[i]) / h;
        let (m0, m1) = (self.m[i], self.m[i + 1]);
        let s = a * self.y[i] + b * self.y[i + 1] + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
        let ds = (self.y[i + 1] - self.y[i]) / h + (-(3.0 * a * a - 1.0) * m0 + (3.0 * b * b - 1.0) * m1) * h / 6.0;
        (s, ds)
    }

    /// Root of the spline in [lo, hi] (which must bracket a sign change) by
    /// safeguarded Newton.
    pub fn root(&self, lo: f64, hi: f64) -> f64 {
        let (mut a, mut b) = (lo, hi);
        let fa = self.eval(a).0;
        let mut t = 0.5 * (a + b);
        for _ in 0..60 {
            let (s, ds) = self.eval(t);
            if s == 0.0 {
                return t;
            }
            if (s > 0.0) == (fa > 0.0) {
                a = t;
            } else {
                b = t;
            }
            let newton = t - s / ds;
            t = if ds != 0.0 && newton > a && newton < b { newton } else { 0.5 * (a + b) };
            if (b - a).abs() < 1e-14 * (1.0 + t.abs()) {
                break;
            }
        }
        t
    }
}

/// A zero of E_j on the imaginary axis at λ = i·im.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisZero {
    pub im: f64,
    pub mult: u32,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct AxisScan {
    pub zeros: Vec<AxisZero>,
    /// Intervals (in Im λ) where a near-tangency could not be resolved.
    pub flagged: Vec<(f64, f64)>,
    /// Median |mantissa| over the scan samples; zero tolerances are relative to it.
    pub median_abs: f64,
    pub evaluations: usize,
}

/// Real restriction f(β) = Re E(iβ) (mantissa).
fn axis_value(f: &dyn SpectralFunction, beta: f64) -> Result<f64, EvansError> {
    Ok(f.eval(C64::new(0.0, beta))?.mantissa.re)
}

/// Illinois false position on a sign-changing bracket of the true function,
/// seeded with an interior estimate.
fn polish_bracket(
    f: &dyn SpectralFunction,
    mut a: f64,
    mut fa: f64,
    mut b: f64,
    mut fb: f64,
    guess: f64,
    evals: &mut usize,
) -> Result<f64, EvansError> {
    if guess > a.min(b) && guess < a.max(b) {
        let fg = axis_value(f, guess)?;
        *evals += 1;
        if fg == 0.0 {
            return Ok(guess);
        }
        if (fg > 0.0) == (fa > 0.0) {
            a = guess;
            fa = fg;
        } else {
            b = guess;
            fb = fg;
        }
    }
    let mut side = 0i32;
    for _ in 0..80 {
        if (b - a).abs() < 1e-13 * (1.0 + a.abs()) {
            break;
        }
        let c = (a * fb - b * fa) / (fb - fa);
        let fc = axis_value(f, c)?;
        *evals += 1;
        if fc == 0.0 {
            return Ok(c);
        }
        if (fc > 0.0) == (fb > 0.0) {
            b = c;
            fb = fc;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
    }
    Ok(if fa.abs() < fb.abs() { a } else { b })
}

/// Golden-section minimization of |f| on [a, b].
fn min_abs(f: &dyn SpectralFunction, mut a: f64, mut b: f64, evals: &mut usize) -> Result<(f64, f64), EvansError> {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = axis_value(f, c)?.abs();
    let mut fd = axis_value(f, d)?.abs();
    *evals += 2;
    for _ in 0..60 {
        if (b - a).abs() < 1e-12 {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = axis_value(f, c)?.abs();
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = axis_value(f, d)?.abs();
        }
        *evals += 1;
    }
    Ok(if fc < fd { (c, fc) } else { (d, fd) })
}

/// Zeros of E on the imaginary-axis segment i·[lo, hi].
///
/// The real restriction is sampled at `n_samples` points, interpolated by a
/// cubic spline, and sign changes are polished on the true function.
/// Near-tangencies (small |E| without a sign change) are resolved on a 100×
/// finer local mesh; a resolved double zero is reported with multiplicity 2.
pub fn axis_zero_scan(f: &dyn SpectralFunction, lo: f64, hi: f64, n_samples: usize) -> Result<AxisScan, EvansError> {
    axis_zero_scan_with(f, lo, hi, n_samples, 1e-3)
}

/// [`axis_zero_scan`] with an explicit gap below which two simple zeros are
/// merged into one double zero (0 keeps every resolved zero separate).
pub fn axis_zero_scan_with(
    f: &dyn SpectralFunction,
    lo: f64,
    hi: f64,
    n_samples: usize,
    merge_gap: f64,
) -> Result<AxisScan, EvansError> {
    let n = n_samples.max(5);
    let xs: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
    let mut ys = Vec::with_capacity(n);
    for &x in &xs {
        ys.push(axis_value(f, x)?);
    }
    let mut evals = n;
    let mut sorted: Vec<f64> = ys.iter().map(|v| v.abs()).collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = sorted[n / 2];
    let zero_tol = 1e-6 * median;
    let spline = CubicSpline::new(&xs, &ys);
    let mut found: Vec<f64> = Vec::new();
    let mut doubles: Vec<f64> = Vec::new();
    let mut flagged = Vec::new();

    for i in 0..n - 1 {
        let (a, b) = (xs[i], xs[i + 1]);
        let (fa, fb) = (ys[i], ys[i + 1]);
        if fa == 0.0 {
            found.push(a);
            continue;
        }
        if (fa > 0.0) != (fb > 0.0) && fb != 0.0 {
            let guess = spline.root(a, b);
            found.push(polish_bracket(f, a, fa, b, fb, guess, &mut evals)?);
        }
    }
    if ys[n - 1] == 0.0 {
        found.push(xs[n - 1]);
    }

    // Near-tangencies: local minima of |f| without a sign change.
    for i in 1..n - 1 {
        let (fl, fc, fr) = (ys[i - 1], ys[i], ys[i + 1]);
        if fc == 0.0 || (fl > 0.0) != (fc > 0.0) || (fr > 0.0) != (fc > 0.0) {
            continue;
        }
        if !(fc.abs() <= fl.abs() && fc.abs() <= fr.abs()) {
            continue;
        }
        let local = fl.abs().max(fr.abs());
        let spline_min = {
            let mut best = f64::INFINITY;
            for k in 0..=40 {
                let t = xs[i - 1] + (xs[i + 1] - xs[i - 1]) * k as f64 / 40.0;
                let s = spline.eval(t).0;
                best = best.min(if (s > 0.0) == (fc > 0.0) { s.abs() } else { -s.abs() });
            }
            best
        };
        if !(fc.abs() < 0.05 * local || spline_min < 0.02 * local) {
            continue;
        }
        let (a, b) = (xs[i - 1], xs[i + 1]);
        let fine = 200;
        let fx: Vec<f64> = (0..=fine).map(|k| a + (b - a) * k as f64 / fine as f64).collect();
        let mut fy = Vec::with_capacity(fine + 1);
        for &x in &fx {
            fy.push(axis_value(f, x)?);
        }
        evals += fine + 1;
        let mut local_roots = Vec::new();
        for k in 0..fine {
            if (fy[k] > 0.0) != (fy[k + 1] > 0.0) {
                local_roots.push(polish_bracket(f, fx[k], fy[k], fx[k + 1], fy[k + 1], 0.5 * (fx[k] + fx[k + 1]), &mut evals)?);
            }
        }
        if local_roots.is_empty() {
            let kmin = (0..=fine).min_by(|&p, &q| fy[p].abs().partial_cmp(&fy[q].abs()).unwrap()).unwrap();
            let (x0, x1) = (fx[kmin.saturating_sub(1)], fx[(kmin + 1).min(fine)]);
            let (xm, fm) = min_abs(f, x0, x1, &mut evals)?;
            if fm < zero_tol {
                doubles.push(xm);
            } else if fm < 1e-3 * local {
                flagged.push((a, b));
            }
        } else {
            found.extend(local_roots);
        }
    }

    found.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut zeros: Vec<AxisZero> = Vec::new();
    for x in found {
        if let Some(last) = zeros.last_mut() {
            let gap = (x - last.im).abs();
            if gap < 1e-9 * (1.0 + x.abs()) {
                continue;
            }
            if gap < merge_gap && last.mult == 1 {
                last.im = 0.5 * (last.im + x);
                last.mult = 2;
                continue;
            }
        }
        zeros.push(AxisZero { im: x, mult: 1 });
    }
    for x in doubles {
        if !zeros.iter().any(|z| (z.im - x).abs() < merge_gap.max(1e-9)) {
            zeros.push(AxisZero { im: x, mult: 2 });
        }
    }
    zeros.sort_by(|a, b| a.im.partial_cmp(&b.im).unwrap());
    Ok(AxisScan { zeros, flagged, median_abs: median, evaluations: evals })
}

// ---------------------------------------------------------------------------
// Contours and the argument principle
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Piece {
    Line { a: C64, b: C64 },
    Arc { center: C64, radius: f64, t0: f64, t1: f64 },
}

impl Piece {
    pub fn point(&self, t: f64) -> C64 {
        match *self {
            Piece::Line { a, b } => a + (b - a) * t,
            Piece::Arc { center, radius, t0, t1 } => center + C64::from_polar(radius, t0 + (t1 - t0) * t),
        }
    }

    /// dλ/dt.
    pub fn tangent(&self, t: f64) -> C64 {
        match *self {
            Piece::Line { a, b } => b - a,
            Piece::Arc { center: _, radius, t0, t1 } => {
                C64::i() * C64::from_polar(radius, t0 + (t1 - t0) * t) * (t1 - t0)
            }
        }
    }

    pub fn length(&self) -> f64 {
        match *self {
            Piece::Line { a, b } => (b - a).norm(),
            Piece::Arc { radius, t0, t1, .. } => radius * (t1 - t0).abs(),
        }
    }

    fn mirror(&self) -> Piece {
        // λ ↦ −conj(λ), traversed in reverse.
        match *self {
            Piece::Line { a, b } => Piece::Line { a: -b.conj(), b: -a.conj() },
            Piece::Arc { center, radius, t0, t1 } => Piece::Arc { center: -center.conj(), radius, t0: PI - t1, t1: PI - t0 },
        }
    }
}

/// Piecewise-smooth contour. A `mirrored` contour is the right half of a
/// contour symmetric under λ ↦ −conj(λ), running from its lower to its upper
/// crossing of the imaginary axis; the left half is implied by symmetry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourPath {
    pub pieces: Vec<Piece>,
    pub mirrored: bool,
}

impl ContourPath {
    pub fn circle(center: C64, radius: f64) -> Self {
        ContourPath { pieces: vec![Piece::Arc { center, radius, t0: 0.0, t1: 2.0 * PI }], mirrored: false }
    }

    /// Counterclockwise rectangle [x0, x1] × [y0, y1] with quarter-circle
    /// corners of radius `corner`.
    pub fn rectangle(x0: f64, x1: f64, y0: f64, y1: f64, corner: f64) -> Self {
        let c = corner.min(0.25 * (x1 - x0)).min(0.25 * (y1 - y0));
        let p = |x: f64, y: f64| C64::new(x, y);
        let pieces = vec![
            Piece::Line { a: p(x0 + c, y0), b: p(x1 - c, y0) },
            Piece::Arc { center: p(x1 - c, y0 + c), radius: c, t0: -0.5 * PI, t1: 0.0 },
            Piece::Line { a: p(x1, y0 + c), b: p(x1, y1 - c) },
            Piece::Arc { center: p(x1 - c, y1 - c), radius: c, t0: 0.0, t1: 0.5 * PI },
            Piece::Line { a: p(x1 - c, y1), b: p(x0 + c, y1) },
            Piece::Arc { center: p(x0 + c, y1 - c), radius: c, t0: 0.5 * PI, t1: PI },
            Piece::Line { a: p(x0, y1 - c), b: p(x0, y0 + c) },
            Piece::Arc { center: p(x0 + c, y0 + c), radius: c, t0: PI, t1: 1.5 * PI },
        ];
        ContourPath { pieces, mirrored: false }
    }

    /// Right half of the symmetric rounded rectangle [−x, x] × [−y, y].
    pub fn right_half(x: f64, y: f64, corner: f64) -> Self {
        let c = corner.min(0.25 * x).min(0.25 * y);
        let p = |a: f64, b: f64| C64::new(a, b);
        let pieces = vec![
            Piece::Line { a: p(0.0, -y), b: p(x - c, -y) },
            Piece::Arc { center: p(x - c, -y + c), radius: c, t0: -0.5 * PI, t1: 0.0 },
            Piece::Line { a: p(x, -y + c), b: p(x, y - c) },
            Piece::Arc { center: p(x - c, y - c), radius: c, t0: 0.0, t1: 0.5 * PI },
            Piece::Line { a: p(x - c, y), b: p(0.0, y) },
        ];
        ContourPath { pieces, mirrored: true }
    }

    /// The standard contour Γ for a profile at chemical potential μ:
    /// |Re λ| ≤ 3(μ − m), |Im λ| ≤ y, as a mirrored right half.
    pub fn standard(mu: f64, m: u32, y: f64) -> Self {
        Self::right_half(3.0 * (mu - m as f64), y, 0.05)
    }

    /// Explicit closed contour (mirror image appended for mirrored paths).
    pub fn closed(&self) -> ContourPath {
        if !self.mirrored {
            return self.clone();
        }
        let mut pieces = self.pieces.clone();
        pieces.extend(self.pieces.iter().rev().map(|p| p.mirror()));
        ContourPath { pieces, mirrored: false }
    }

    /// Polyline through the piece end points and arc midpoints.
    pub fn vertices(&self) -> Vec<C64> {
        let mut v = Vec::new();
        for p in &self.pieces {
            v.push(p.point(0.0));
            if matches!(p, Piece::Arc { .. }) {
                v.push(p.point(0.5));
            }
        }
        if let Some(last) = self.pieces.last() {
            v.push(last.point(1.0));
        }
        v
    }

    pub fn length(&self) -> f64 {
        self.pieces.iter().map(|p| p.length()).sum()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContourSample {
    pub lambda: C64,
    pub value: EvansValue,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WindingResult {
    pub winding: i64,
    pub total_arg: f64,
    pub samples: Vec<ContourSample>,
}

fn wrap(d: f64) -> f64 {
    let mut d = d % (2.0 * PI);
    if d > PI {
        d -= 2.0 * PI;
    } else if d <= -PI {
        d += 2.0 * PI;
    }
    d
}

/// Number of zeros of f inside the contour by the argument principle with
/// adaptive sampling (consecutive arguments differ by less than π/2).
pub fn winding_number(f: &dyn SpectralFunction, contour: &ContourPath) -> Result<WindingResult, EvansError> {
    let mut samples: Vec<ContourSample> = Vec::new();
    let mut total = 0.0;
    let budget_depth = 32;
    for piece in &contour.pieces {
        if piece.length() == 0.0 {
            continue;
        }
        let n0 = ((piece.length() / 0.1).ceil() as usize).clamp(8, 400);
        let mut ts: Vec<f64> = (0..=n0).map(|k| k as f64 / n0 as f64).collect();
        let mut vals = Vec::with_capacity(ts.len());
        for &t in &ts {
            vals.push(f.eval(piece.point(t))?);
        }
        let mut depth = vec![0usize; ts.len()];
        let mut k = 0;
        while k + 1 < ts.len() {
            let d = wrap(vals[k + 1].mantissa.arg() - vals[k].mantissa.arg());
            if d.abs() >= 0.5 * PI {
                if depth[k] >= budget_depth {
                    return Err(EvansError::WindingUnresolved { total_arg: total });
                }
                let tm = 0.5 * (ts[k] + ts[k + 1]);
                let vm = f.eval(piece.point(tm))?;
                let dnew = depth[k] + 1;
                ts.insert(k + 1, tm);
                vals.insert(k + 1, vm);
                depth[k] = dnew;
                depth.insert(k + 1, dnew);
                continue;
            }
            total += d;
            k += 1;
        }
        for (t, v) in ts.iter().zip(vals) {
            samples.push(ContourSample { lambda: piece.point(*t), value: v });
        }
    }
    // Zero on the contour: |mantissa| negligible relative to the typical sample.
    let mut mags: Vec<f64> = samples.iter().map(|s| s.value.mantissa.norm()).collect();
    mags.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = mags[mags.len() / 2];
    if let Some(s) = samples.iter().find(|s| s.value.mantissa.norm() < 1e-9 * median) {
        return Err(EvansError::ZeroOnContour { re: s.lambda.re, im: s.lambda.im });
    }
    let turns = if contour.mirrored { total / PI } else { total / (2.0 * PI) };
    let winding = turns.round();
    if (turns - winding).abs() > 0.1 {
        return Err(EvansError::WindingUnresolved { total_arg: total });
    }
    Ok(WindingResult { winding: winding as i64, total_arg: total, samples })
}

/// n_su = winding − Σ axis multiplicities; must be even and non-negative.
pub fn unstable_count(winding: i64, axis: &[AxisZero]) -> Result<i64, EvansError> {
    let on_axis: i64 = axis.iter().map(|z| z.mult as i64).sum();
    let n_su = winding - on_axis;
    if n_su < 0 || n_su % 2 != 0 {
        return Err(EvansError::InconsistentCount { n_su });
    }
    Ok(n_su)
}

/// E′/E at λ by central differences with step h.
pub fn log_derivative(f: &dyn SpectralFunction, lambda: C64, h: f64) -> Result<C64, EvansError> {
    let e0 = f.eval(lambda)?;
    let ep = f.eval(lambda + h)?;
    let em = f.eval(lambda - h)?;
    Ok((ep.ratio(&e0) - em.ratio(&e0)) / (2.0 * h))
}

const GL8: [(f64, f64); 8] = [
    (-0.960_289_856_497_536_3, 0.101_228_536_290_376_26),
    (-0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (-0.525_532_409_916_329_0, 0.313_706_645_877_887_3),
    (-0.183_434_642_495_649_8, 0.362_683_783_378_362_0),
    (0.183_434_642_495_649_8, 0.362_683_783_378_362_0),
    (0.525_532_409_916_329_0, 0.313_706_645_877_887_3),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (0.960_289_856_497_536_3, 0.101_228_536_290_376_26),
];

/// Moments s_k = (1/2πi)∮ λ^k E′/E dλ for k = 0..=k_max over a closed
/// contour (mirrored paths are closed first). Circles use the trapezoid rule;
/// other pieces use composite 8-point Gauss–Legendre.
pub fn moments(f: &dyn SpectralFunction, contour: &ContourPath, k_max: usize) -> Result<Vec<C64>, EvansError> {
    let closed = contour.closed();
    let scale = closed.length() / (2.0 * PI);
    let h = 1e-5 * scale.max(1e-3);
    let mut s = vec![C64::new(0.0, 0.0); k_max + 1];
    let mut accumulate = |lam: C64, weight: C64| -> Result<(), EvansError> {
        let ld = log_derivative(f, lam, h)?;
        let mut p = C64::new(1.0, 0.0);
        for sk in s.iter_mut() {
            *sk += p * ld * weight;
            p *= lam;
        }
        Ok(())
    };
    for piece in &closed.pieces {
        match piece {
            Piece::Arc { t0, t1, .. } if ((t1 - t0).abs() - 2.0 * PI).abs() < 1e-12 => {
                let n = 64;
                for k in 0..n {
                    let t = k as f64 / n as f64;
                    accumulate(piece.point(t), piece.tangent(t) / n as f64)?;
                }
            }
            _ => {
                let n = ((piece.length() / 0.2).ceil() as usize).max(2);
                for k in 0..n {
                    for &(x, w) in &GL8 {
                        let t = (k as f64 + 0.5 * (x + 1.0)) / n as f64;
                        accumulate(piece.point(t), piece.tangent(t) * (0.5 * w / n as f64))?;
                    }
                }
            }
        }
    }
    Ok(s.into_iter().map(|v| v / (2.0 * PI * C64::i())).collect())
}

/// Single moment s_k, checked against the winding number through s_0.
pub fn moment(f: &dyn SpectralFunction, contour: &ContourPath, k: usize) -> Result<C64, EvansError> {
    let s = moments(f, contour, k)?;
    let w = winding_number(f, contour)?.winding;
    if (s[0].re - w as f64).abs() > 0.1 || s[0].im.abs() > 0.1 {
        return Err(EvansError::DerivativeNoise { s0: s[0].re, winding: w });
    }
    Ok(s[k])
}

/// Muller iteration on E from λ0; E is rescaled by e^{−log_scale(λ0)} so the
/// iteration sees an analytic function of moderate size.
pub fn polish_zero(f: &dyn SpectralFunction, lambda0: C64, step: f64) -> Result<C64, EvansError> {
    let reference = f.eval(lambda0)?;
    let g = |l: C64| -> Result<C64, EvansError> { Ok(f.eval(l)?.ratio(&reference)) };
    let mut x0 = lambda0 - step;
    let mut x1 = lambda0 + C64::new(0.0, step);
    let mut x2 = lambda0;
    let (mut f0, mut f1, mut f2) = (g(x0)?, g(x1)?, C64::new(1.0, 0.0));
    for _ in 0..60 {
        let h1 = x1 - x0;
        let h2 = x2 - x1;
        let d1 = (f1 - f0) / h1;
        let d2 = (f2 - f1) / h2;
        let a = (d2 - d1) / (h2 + h1);
        let b = a * h2 + d2;
        let disc = (b * b - 4.0 * a * f2).sqrt();
        let den = if (b + disc).norm() > (b - disc).norm() { b + disc } else { b - disc };
        let dx = if den.norm() == 0.0 { C64::new(step, 0.0) } else { -2.0 * f2 / den };
        let x3 = x2 + dx;
        if !x3.re.is_finite() || !x3.im.is_finite() {
            return Err(EvansError::RefinementFailed("Muller iteration diverged".into()));
        }
        if dx.norm() < 1e-12 * (1.0 + x3.norm()) {
            return Ok(x3);
        }
        x0 = x1;
        f0 = f1;
        x1 = x2;
        f1 = f2;
        x2 = x3;
        f2 = g(x3)?;
        if f2.norm() == 0.0 {
            return Ok(x2);
        }
    }
    Ok(x2)
}

/// Zeros inside a rectangle, found by recursive bisection on winding counts
/// down to boxes of size `FINE_BOX`, then located by [`refine_single`].
fn zeros_in_box(
    f: &dyn SpectralFunction,
    rect: (f64, f64, f64, f64),
    depth: usize,
    out: &mut Vec<C64>,
) -> Result<(), EvansError> {
    const FINE_BOX: f64 = 0.05;
    let (x0, x1, y0, y1) = rect;
    let contour = ContourPath::rectangle(x0, x1, y0, y1, 0.0);
    let w = match winding_number(f, &contour) {
        Ok(w) => w.winding,
        Err(EvansError::ZeroOnContour { .. }) if depth < 40 => {
            // Nudge the box outward slightly.
            let d = 1e-3 * (x1 - x0).max(y1 - y0);
            return zeros_in_box(f, ((x0 - d).max(0.5 * x0), x1 + d, y0 - d, y1 + d), depth + 1, out);
        }
        Err(e) => return Err(e),
    };
    if w <= 0 {
        return Ok(());
    }
    let size = (x1 - x0).max(y1 - y0);
    if w == 1 && size <= FINE_BOX {
        out.push(refine_single(f, rect)?);
        return Ok(());
    }
    if depth > 60 || size < 1e-7 {
        let s = moments(f, &contour, 1)?;
        for _ in 0..w {
            out.push(s[1] / s[0]);
        }
        return Ok(());
    }
    // Split along the longer side, offset slightly from the midpoint.
    if x1 - x0 >= y1 - y0 {
        let xm = x0 + 0.5007 * (x1 - x0);
        zeros_in_box(f, (x0, xm, y0, y1), depth + 1, out)?;
        zeros_in_box(f, (xm, x1, y0, y1), depth + 1, out)?;
    } else {
        let ym = y0 + 0.5007 * (y1 - y0);
        zeros_in_box(f, (x0, x1, y0, ym), depth + 1, out)?;
        zeros_in_box(f, (x0, x1, ym, y1), depth + 1, out)?;
    }
    Ok(())
}

/// The single zero inside a small box. Away from the imaginary axis the
/// first moment gives the start and shrinking circles re-verify it; next to
/// the axis (where poles of E′/E sit just outside the box) the box centre is
/// used. Muller polishing finishes, and the result must stay in the box.
fn refine_single(f: &dyn SpectralFunction, rect: (f64, f64, f64, f64)) -> Result<C64, EvansError> {
    let (x0, x1, y0, y1) = rect;
    let size = (x1 - x0).max(y1 - y0);
    let centre = C64::new(0.5 * (x0 + x1), 0.5 * (y0 + y1));
    let mut est = centre;
    if x0 > 0.5 * size {
        let s = moments(f, &ContourPath::rectangle(x0, x1, y0, y1, 0.0), 1)?;
        est = s[1] / s[0];
        let mut radius = 0.5 * size;
        for _ in 0..8 {
            let circle = ContourPath::circle(est, radius);
            if winding_number(f, &circle).map(|r| r.winding).unwrap_or(-1) != 1 {
                break;
            }
            let s = moments(f, &circle, 1)?;
            let next = s[1] / s[0];
            let moved = (next - est).norm();
            est = next;
            if moved < 1e-3 * size {
                break;
            }
            radius = (0.25 * radius).max(4.0 * moved);
        }
    }
    let margin = 0.1 * size;
    let inside = |z: C64| z.re > x0 - margin && z.re < x1 + margin && z.im > y0 - margin && z.im < y1 + margin;
    for start in [est, centre] {
        if let Ok(z) = polish_zero(f, start, 0.1 * size) {
            if inside(z) {
                return Ok(z);
            }
        }
    }
    Err(EvansError::RefinementFailed(format!("no zero located in box around {centre}")))
}

/// Zeros of f in the rectangle [x0, x1] × [y0, y1].
pub fn zeros_in_rectangle(f: &dyn SpectralFunction, x0: f64, x1: f64, y0: f64, y1: f64) -> Result<Vec<C64>, EvansError> {
    let mut out = Vec::new();
    zeros_in_box(f, (x0, x1, y0, y1), 0, &mut out)?;
    out.sort_by(|a, b| a.im.partial_cmp(&b.im).unwrap());
    Ok(out)
}

/// Unstable eigenvalues (Re λ > 0) inside the right half of Γ.
///
/// `x_left` is the left edge of the search box (a small positive number so
/// the box avoids the axis zeros).
pub fn refine_unstable(
    f: &dyn SpectralFunction,
    x_left: f64,
    x_right: f64,
    y: f64,
    n_su: i64,
) -> Result<Vec<C64>, EvansError> {
    let mut out = Vec::new();
    if n_su <= 0 {
        return Ok(out);
    }
    // Unstable eigenvalues typically have small real parts: search a thin
    // strip first and the remainder only when the count is not yet reached.
    let split = x_right.min(1.0);
    zeros_in_box(f, (x_left, split, -y, y), 0, &mut out)?;
    if (out.len() as i64) < n_su / 2 && split < x_right {
        zeros_in_box(f, (split, x_right, -y, y), 0, &mut out)?;
    }
    out.retain(|l| l.re > 0.0);
    out.sort_by(|a, b| a.im.partial_cmp(&b.im).unwrap());
    Ok(out)
}
