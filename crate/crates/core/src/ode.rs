//! Adaptive Dormand–Prince 5(4) integrator over fixed-size real state arrays.
//!
//! Complex systems are integrated by interleaving real and imaginary parts.
//! The integrator supports mandatory stop points (for dense sampling) and an
//! observer hook that may rescale the state after any accepted step.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OdeError {
    #[error("stiff segment: step size underflow at t = {t}")]
    StepUnderflow { t: f64 },
    #[error("step budget of {max_steps} exhausted at t = {t}")]
    TooManySteps { t: f64, max_steps: usize },
    #[error("non-finite state encountered at t = {t}")]
    NonFinite { t: f64 },
}

/// Error measure used to accept or reject a step. Values ≤ 1 are accepted.
pub trait ErrorNorm<const N: usize> {
    fn norm(&self, y_old: &[f64; N], y_new: &[f64; N], err: &[f64; N]) -> f64;
}

/// Componentwise mixed tolerance: `max_i |e_i| / (atol + rtol·max(|y_i|, |ŷ_i|))`.
#[derive(Debug, Clone, Copy)]
pub struct MixedNorm {
    pub rtol: f64,
    pub atol: f64,
}

impl<const N: usize> ErrorNorm<N> for MixedNorm {
    fn norm(&self, y_old: &[f64; N], y_new: &[f64; N], err: &[f64; N]) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..N {
            let sc = self.atol + self.rtol * y_old[i].abs().max(y_new[i].abs());
            worst = worst.max(err[i].abs() / sc);
        }
        worst
    }
}

/// Error relative to the sup-norm of the leading `len` components, for
/// projective (scale-free) integrations. Components past `len` use the mixed
/// rule with `atol = floor`.
#[derive(Debug, Clone, Copy)]
pub struct ProjectiveNorm {
    pub rtol: f64,
    pub len: usize,
    pub floor: f64,
}

impl<const N: usize> ErrorNorm<N> for ProjectiveNorm {
    fn norm(&self, y_old: &[f64; N], y_new: &[f64; N], err: &[f64; N]) -> f64 {
        let mut scale = 0.0_f64;
        for i in 0..self.len {
            scale = scale.max(y_old[i].abs()).max(y_new[i].abs());
        }
        let sc = self.rtol * scale + self.floor;
        let mut worst = 0.0_f64;
        for i in 0..self.len {
            worst = worst.max(err[i].abs() / sc);
        }
        for i in self.len..N {
            let s = self.floor + self.rtol * y_old[i].abs().max(y_new[i].abs());
            worst = worst.max(err[i].abs() / s);
        }
        worst
    }
}

/// Relative error per block of components: each block is measured against
/// its own sup-norm, so blocks of very different magnitude (a solution and
/// its sensitivities, say) are controlled independently.
#[derive(Debug, Clone, Copy)]
pub struct GroupedNorm<'a> {
    pub rtol: f64,
    pub floor: f64,
    pub groups: &'a [(usize, usize)],
}

impl<const N: usize> ErrorNorm<N> for GroupedNorm<'_> {
    fn norm(&self, y_old: &[f64; N], y_new: &[f64; N], err: &[f64; N]) -> f64 {
        let mut worst = 0.0_f64;
        for &(lo, hi) in self.groups {
            let mut scale = 0.0_f64;
            let mut e = 0.0_f64;
            for i in lo..hi {
                scale = scale.max(y_old[i].abs()).max(y_new[i].abs());
                e = e.max(err[i].abs());
            }
            worst = worst.max(e / (self.rtol * scale + self.floor));
        }
        worst
    }
}

#[derive(Debug, Clone)]
pub struct OdeOptions {
    pub h_init: Option<f64>,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions { h_init: None, h_max: f64::INFINITY, max_steps: 200_000 }
    }
}

/// Information passed to the observer after each accepted step.
#[derive(Debug, Clone, Copy)]
pub struct StepEvent {
    pub t: f64,
    pub h: f64,
    /// Index into the stop list when the step landed exactly on a stop point.
    pub stop: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct OdeOutcome<const N: usize> {
    pub y: [f64; N],
    pub accepted: usize,
    pub rejected: usize,
    pub h_last: f64,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[inline]
fn combo<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for &(c, k) in terms {
        if c != 0.0 {
            let hc = h * c;
            for i in 0..N {
                out[i] += hc * k[i];
            }
        }
    }
    out
}

fn initial_step<const N: usize, F, E>(
    f: &mut F,
    norm: &E,
    t0: f64,
    y0: &[f64; N],
    f0: &[f64; N],
    dir: f64,
    span: f64,
) -> f64
where
    F: FnMut(f64, &[f64; N], &mut [f64; N]),
    E: ErrorNorm<N>,
{
    let d0 = norm.norm(y0, y0, y0);
    let d1 = norm.norm(y0, y0, f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 * span.max(1e-300) } else { 0.01 * d0 / d1 };
    let h0 = h0.min(span);
    let y1 = combo(y0, dir * h0, &[(1.0, f0)]);
    let mut f1 = [0.0; N];
    f(t0 + dir * h0, &y1, &mut f1);
    let mut df = [0.0; N];
    for i in 0..N {
        df[i] = f1[i] - f0[i];
    }
    let d2 = norm.norm(y0, y0, &df) / h0;
    let dm = d1.max(d2);
    let h1 = if dm <= 1e-15 { (h0 * 1e-3).max(1e-6 * span) } else { (0.01 / dm).powf(0.2) };
    (100.0 * h0).min(h1).min(span)
}

/// Integrates `y' = f(t, y)` from `t0` to `t1` (either direction).
///
/// `stops` must be ordered in the integration direction and lie within the
/// interval; the integrator lands exactly on each of them and reports it to
/// `observe`. The observer runs after every accepted step and returns `true`
/// when it modified the state (the cached derivative is then recomputed).
pub fn integrate<const N: usize, F, E, O>(
    mut f: F,
    norm: &E,
    t0: f64,
    y0: [f64; N],
    t1: f64,
    stops: &[f64],
    opts: &OdeOptions,
    mut observe: O,
) -> Result<OdeOutcome<N>, OdeError>
where
    F: FnMut(f64, &[f64; N], &mut [f64; N]),
    E: ErrorNorm<N>,
    O: FnMut(&StepEvent, &mut [f64; N]) -> bool,
{
    let mut y = y0;
    let span = (t1 - t0).abs();
    if span == 0.0 {
        return Ok(OdeOutcome { y, accepted: 0, rejected: 0, h_last: 0.0 });
    }
    let dir = if t1 > t0 { 1.0 } else { -1.0 };
    let mut t = t0;
    let mut k1 = [0.0; N];
    f(t, &y, &mut k1);
    let mut h_prop = match opts.h_init {
        Some(h) => h.abs().min(span),
        None => initial_step(&mut f, norm, t0, &y, &k1, dir, span),
    }
    .min(opts.h_max);
    let mut accepted = 0usize;
    let mut rejected = 0usize;
    let mut next_stop = 0usize;
    let mut last_h = h_prop;
    let (mut k2, mut k3, mut k4, mut k5, mut k6, mut k7) =
        ([0.0; N], [0.0; N], [0.0; N], [0.0; N], [0.0; N], [0.0; N]);
    let mut reject_streak = false;
    loop {
        let target = if next_stop < stops.len() { stops[next_stop] } else { t1 };
        let remaining = (target - t) * dir;
        let mut landing = false;
        let mut clamped = false;
        let mut h = h_prop;
        if remaining <= 0.0 {
            // Stop coincides with the current point.
            if next_stop < stops.len() {
                let ev = StepEvent { t, h: 0.0, stop: Some(next_stop) };
                next_stop += 1;
                if observe(&ev, &mut y) {
                    f(t, &y, &mut k1);
                }
                continue;
            }
            break;
        }
        if h >= remaining * (1.0 - 1e-12) {
            h = remaining;
            landing = true;
            clamped = true;
        } else if h > 0.7 * remaining {
            // Avoid leaving a sliver before the target.
            h = 0.5 * remaining;
            clamped = true;
        }
        if !clamped && h < 1e-14 * (t.abs() + span) {
            return Err(OdeError::StepUnderflow { t });
        }
        if accepted + rejected >= opts.max_steps {
            return Err(OdeError::TooManySteps { t, max_steps: opts.max_steps });
        }
        let hs = dir * h;
        let y2 = combo(&y, hs, &[(A21, &k1)]);
        f(t + C2 * hs, &y2, &mut k2);
        let y3 = combo(&y, hs, &[(A31, &k1), (A32, &k2)]);
        f(t + C3 * hs, &y3, &mut k3);
        let y4 = combo(&y, hs, &[(A41, &k1), (A42, &k2), (A43, &k3)]);
        f(t + C4 * hs, &y4, &mut k4);
        let y5 = combo(&y, hs, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]);
        f(t + C5 * hs, &y5, &mut k5);
        let y6 = combo(&y, hs, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]);
        let t_new = if landing { target } else { t + hs };
        f(t + hs, &y6, &mut k6);
        let y_new = combo(&y, hs, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
        f(t + hs, &y_new, &mut k7);
        let mut err = [0.0; N];
        for i in 0..N {
            err[i] = hs
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        }
        let en = norm.norm(&y, &y_new, &err);
        if !en.is_finite() {
            if y_new.iter().all(|v| v.is_finite()) && err.iter().all(|v| v.is_finite()) {
                return Err(OdeError::NonFinite { t });
            }
            rejected += 1;
            h_prop = h * 0.25;
            reject_streak = true;
            continue;
        }
        if en <= 1.0 {
            accepted += 1;
            last_h = h;
            t = t_new;
            y = y_new;
            k1 = k7;
            let stop = if landing && next_stop < stops.len() {
                next_stop += 1;
                Some(next_stop - 1)
            } else {
                None
            };
            let ev = StepEvent { t, h, stop };
            if observe(&ev, &mut y) {
                f(t, &y, &mut k1);
            }
            let fac = if en == 0.0 { 5.0 } else { (0.9 * en.powf(-0.2)).clamp(0.2, 5.0) };
            let fac = if reject_streak { fac.min(1.0) } else { fac };
            reject_streak = false;
            if landing && stop.is_none() {
                break;
            }
            // A step shortened to hit a target says nothing against the
            // controller's previous proposal.
            h_prop = if clamped { h_prop.max(h * fac) } else { h * fac }.min(opts.h_max);
        } else {
            rejected += 1;
            let fac = (0.9 * en.powf(-0.2)).clamp(0.2, 1.0);
            h_prop = h * fac;
            reject_streak = true;
        }
    }
    Ok(OdeOutcome { y, accepted, rejected, h_last: last_h })
}

/// Convenience wrapper without stops or observer.
pub fn integrate_plain<const N: usize, F, E>(
    f: F,
    norm: &E,
    t0: f64,
    y0: [f64; N],
    t1: f64,
    opts: &OdeOptions,
) -> Result<[f64; N], OdeError>
where
    F: FnMut(f64, &[f64; N], &mut [f64; N]),
    E: ErrorNorm<N>,
{
    integrate(f, norm, t0, y0, t1, &[], opts, |_, _| false).map(|o| o.y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_growth_matches_closed_form() {
        let norm = MixedNorm { rtol: 1e-12, atol: 1e-14 };
        let y = integrate_plain(
            |_, y: &[f64; 1], d: &mut [f64; 1]| d[0] = y[0],
            &norm,
            0.0,
            [1.0],
            3.0,
            &OdeOptions::default(),
        )
        .unwrap();
        assert!((y[0] - 3f64.exp()).abs() < 1e-10 * 3f64.exp());
    }

    #[test]
    fn harmonic_oscillator_backward() {
        let norm = MixedNorm { rtol: 1e-12, atol: 1e-14 };
        let y = integrate_plain(
            |_, y: &[f64; 2], d: &mut [f64; 2]| {
                d[0] = y[1];
                d[1] = -y[0];
            },
            &norm,
            2.0,
            [2f64.sin(), 2f64.cos()],
            -1.0,
            &OdeOptions::default(),
        )
        .unwrap();
        assert!((y[0] - (-1f64).sin()).abs() < 1e-10);
        assert!((y[1] - (-1f64).cos()).abs() < 1e-10);
    }

    #[test]
    fn stops_are_hit_exactly() {
        let norm = MixedNorm { rtol: 1e-10, atol: 1e-12 };
        let stops = [0.25, 0.5, 0.75];
        let mut seen = Vec::new();
        integrate(
            |_, y: &[f64; 1], d: &mut [f64; 1]| d[0] = -y[0],
            &norm,
            0.0,
            [1.0],
            1.0,
            &stops,
            &OdeOptions::default(),
            |ev, y| {
                if let Some(i) = ev.stop {
                    seen.push((i, ev.t, y[0]));
                }
                false
            },
        )
        .unwrap();
        assert_eq!(seen.len(), 3);
        for (i, t, v) in seen {
            assert_eq!(t, stops[i]);
            assert!((v - (-t).exp()).abs() < 1e-9);
        }
    }

    #[test]
    fn observer_rescaling_is_respected() {
        // Rescale whenever the value exceeds 10; track the log separately.
        let norm = ProjectiveNorm { rtol: 1e-11, len: 1, floor: 1e-300 };
        let mut log_scale = 0.0;
        let out = integrate(
            |_, y: &[f64; 1], d: &mut [f64; 1]| d[0] = 2.0 * y[0],
            &norm,
            0.0,
            [1.0],
            20.0,
            &[],
            &OdeOptions::default(),
            |_, y| {
                if y[0] > 10.0 {
                    log_scale += y[0].ln();
                    y[0] = 1.0;
                    true
                } else {
                    false
                }
            },
        )
        .unwrap();
        let total = log_scale + out.y[0].ln();
        assert!((total - 40.0).abs() < 1e-8);
    }
}
