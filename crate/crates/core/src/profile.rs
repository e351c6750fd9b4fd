//! Vortex radial profiles: −w″ − w′/r + m²w/r² + r²w + 2w³ − 2μw = 0 with
//! w ~ d0·r^m at the origin and Gaussian decay at infinity.
//!
//! Profiles are computed by multiple shooting in the logarithmic variable
//! s = ln r with state (w, r·w′), continued in μ from the linear bifurcation
//! point μ = m + 1 by pseudo-arclength in (μ, ln d0).

use crate::ode::{integrate, GroupedNorm, OdeError, OdeOptions};
use crate::quad::adaptive_panels;
use crate::special::u_asymptotic;
use crate::C64;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};
use thiserror::Error;

/// Innermost shooting node.
pub const R_MIN: f64 = 1e-7;
/// Spacing of the dense interpolation table.
const TABLE_H: f64 = 0.005;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProfileError {
    #[error("branch stall at mu = {last_mu}: {reason}")]
    BranchStall { last_mu: f64, reason: String },
    #[error("invalid profile at mu = {mu}: {reason}")]
    InvalidProfile { mu: f64, reason: String },
    #[error("refine failed: {0}")]
    RefineFailed(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("serialization: {0}")]
    Serialization(String),
    #[error(transparent)]
    Ode(#[from] OdeError),
}

/// Outer radius of the computational domain, linear in μ from R(3) = 5 to
/// R(35) = 25 and clamped to [5, 25].
pub fn domain_radius(mu: f64) -> f64 {
    (5.0 + (mu - 3.0) * 20.0 / 32.0).clamp(5.0, 25.0)
}

/// ln T(r) and d ln T / d ln r for the decaying linear solution
/// T(r) = r^m e^{−r²/2} U((m+1−μ)/2, m+1, r²) ~ r^{μ−1} e^{−r²/2}.
pub fn tail_shape(m: u32, mu: f64, r: f64) -> (f64, f64) {
    let a = 0.5 * (m as f64 + 1.0 - mu);
    let b = m as f64 + 1.0;
    let x = r * r;
    let (s0, _) = u_asymptotic(C64::new(a, 0.0), b, x);
    let (s1, _) = u_asymptotic(C64::new(a + 1.0, 0.0), b + 1.0, x);
    let ln_t = m as f64 * r.ln() - 0.5 * x - a * x.ln() + s0.re.ln();
    let gamma = m as f64 - x - 2.0 * a * s1.re / s0.re;
    (ln_t, gamma)
}

/// Shooting mesh on [R_MIN, R(μ)]: geometric clustering at the origin plus a
/// density proportional to the local exponential rate of the linearized
/// flow, so every segment spans a bounded number of e-folds.
pub fn shooting_mesh(mu: f64, n_nodes: usize) -> Vec<f64> {
    assert!(n_nodes >= 4, "need at least four shooting nodes");
    let r_end = domain_radius(mu);
    let density = |r: f64| {
        1.0 / (r + 0.05) + (4.0 * mu - 2.0 * r * r).max(r * r - 2.0 * mu).max(1.0).sqrt()
    };
    let n_fine = 8000;
    let h = r_end / n_fine as f64;
    let mut cum = vec![0.0; n_fine + 1];
    for i in 1..=n_fine {
        let (a, b) = ((i - 1) as f64 * h, i as f64 * h);
        cum[i] = cum[i - 1] + 0.5 * h * (density(a) + density(b));
    }
    let total = cum[n_fine];
    let mut nodes = Vec::with_capacity(n_nodes);
    nodes.push(R_MIN);
    let mut j = 0usize;
    for k in 1..n_nodes {
        let target = total * k as f64 / (n_nodes - 1) as f64;
        while j < n_fine && cum[j + 1] < target {
            j += 1;
        }
        let r = if k == n_nodes - 1 {
            r_end
        } else {
            let frac = (target - cum[j]) / (cum[j + 1] - cum[j]);
            (j as f64 + frac) * h
        };
        nodes.push(r);
    }
    nodes
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    /// Converged solution of the nonlinear radial equation.
    #[default]
    Solution,
    /// Bifurcation seed ε·w₀^{(m)} at μ = m + 1 (a linear-theory approximation).
    Seed,
    /// Identically zero profile (linear limit).
    Zero,
}

/// Leading tail behaviour w ~ A·r^{exponent}·e^{−r²/2}.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct TailModel {
    #[serde(rename = "A")]
    pub amplitude: f64,
    pub exponent: f64,
}

/// Radial vortex profile on a multiple-shooting mesh.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VortexProfile {
    pub m: u32,
    pub mu: f64,
    pub nodes: Vec<f64>,
    pub w: Vec<f64>,
    pub w_prime: Vec<f64>,
    pub d0: f64,
    pub tail: TailModel,
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(default)]
    pub kind: ProfileKind,
    #[serde(skip)]
    table: OnceLock<Arc<ProfileTable>>,
}

/// Dense uniform table of (w, w′, w″) with quintic Hermite interpolation, the
/// fast sampler used inside the linearized integrations.
#[derive(Debug, Clone)]
pub struct ProfileTable {
    h: f64,
    w: Vec<f64>,
    wp: Vec<f64>,
    wpp: Vec<f64>,
    r_end: f64,
}

impl ProfileTable {
    /// (w, w′) at r ≥ 0; beyond the table the last value is extended by zero.
    #[inline]
    pub fn sample(&self, r: f64) -> (f64, f64) {
        if r >= self.r_end {
            return (0.0, 0.0);
        }
        let x = r / self.h;
        let i = (x as usize).min(self.w.len() - 2);
        let t = x - i as f64;
        let h = self.h;
        let (y0, d0, s0) = (self.w[i], self.wp[i] * h, self.wpp[i] * h * h);
        let (y1, d1, s1) = (self.w[i + 1], self.wp[i + 1] * h, self.wpp[i + 1] * h * h);
        let t2 = t * t;
        let t3 = t2 * t;
        let t4 = t3 * t;
        let t5 = t4 * t;
        let h0 = 1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5;
        let h1 = t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5;
        let h2 = 0.5 * t2 - 1.5 * t3 + 1.5 * t4 - 0.5 * t5;
        let h3 = 10.0 * t3 - 15.0 * t4 + 6.0 * t5;
        let h4 = -4.0 * t3 + 7.0 * t4 - 3.0 * t5;
        let h5 = 0.5 * t3 - t4 + 0.5 * t5;
        let w = h0 * y0 + h1 * d0 + h2 * s0 + h3 * y1 + h4 * d1 + h5 * s1;
        let g0 = -30.0 * t2 + 60.0 * t3 - 30.0 * t4;
        let g1 = 1.0 - 18.0 * t2 + 32.0 * t3 - 15.0 * t4;
        let g2 = t - 4.5 * t2 + 6.0 * t3 - 2.5 * t4;
        let g3 = -g0;
        let g4 = -12.0 * t2 + 28.0 * t3 - 15.0 * t4;
        let g5 = 1.5 * t2 - 4.0 * t3 + 2.5 * t4;
        let wp = (g0 * y0 + g1 * d0 + g2 * s0 + g3 * y1 + g4 * d1 + g5 * s1) / h;
        (w, wp)
    }

    /// w(r)² at r ≥ 0.
    #[inline]
    pub fn w_squared(&self, r: f64) -> f64 {
        let (w, _) = self.sample(r);
        w * w
    }

    pub fn r_end(&self) -> f64 {
        self.r_end
    }
}

impl VortexProfile {
    /// Identically zero profile at chemical potential `mu` (linear limit).
    pub fn zero(m: u32, mu: f64) -> Self {
        let nodes = shooting_mesh(mu, 16);
        let n = nodes.len();
        VortexProfile {
            m,
            mu,
            nodes,
            w: vec![0.0; n],
            w_prime: vec![0.0; n],
            d0: 0.0,
            tail: TailModel { amplitude: 0.0, exponent: mu - 1.0 },
            k: 0.0,
            kind: ProfileKind::Zero,
            table: OnceLock::new(),
        }
    }

    pub fn is_degenerate(&self) -> bool {
        self.kind == ProfileKind::Zero || self.d0 == 0.0
    }

    /// Outer end of the computational domain.
    pub fn r_max(&self) -> f64 {
        *self.nodes.last().expect("profiles have nodes")
    }

    /// Dense interpolation table, built on first use.
    pub fn table(&self) -> &ProfileTable {
        self.table.get_or_init(|| Arc::new(build_table(self)))
    }

    /// Fast (w, w′) from the dense table; zero beyond the domain.
    #[inline]
    pub fn sample(&self, r: f64) -> (f64, f64) {
        self.table().sample(r)
    }

    /// Precise (w, w′): origin model below R_MIN, tail model beyond r_max,
    /// otherwise integration of the radial equation from the nearest node.
    pub fn eval(&self, r: f64) -> (f64, f64) {
        let m = self.m as i32;
        match self.kind {
            ProfileKind::Zero => return (0.0, 0.0),
            ProfileKind::Seed => return seed_shape(self.m, self.d0, r),
            ProfileKind::Solution => {}
        }
        if r <= 0.0 {
            return (0.0, if m == 1 { self.d0 } else { 0.0 });
        }
        if r < R_MIN {
            return (self.d0 * r.powi(m), m as f64 * self.d0 * r.powi(m - 1));
        }
        let r_end = self.r_max();
        if r >= r_end {
            return self.tail_eval(r);
        }
        self.eval_from_node(nearest_node(&self.nodes, r), r)
    }

    /// (w, w′) at r by integrating the radial equation from node `k`.
    pub fn eval_from_node(&self, k: usize, r: f64) -> (f64, f64) {
        match self.kind {
            ProfileKind::Zero => return (0.0, 0.0),
            ProfileKind::Seed => return seed_shape(self.m, self.d0, r),
            ProfileKind::Solution => {}
        }
        let start = [self.w[k], self.nodes[k] * self.w_prime[k]];
        let (s0, s1) = (self.nodes[k].ln(), r.ln());
        let groups = [(0usize, 2usize)];
        let norm = GroupedNorm { rtol: 1e-14, floor: 1e-300, groups: &groups };
        let m2 = (self.m * self.m) as f64;
        let mu = self.mu;
        let out = integrate(
            |s, y: &[f64; 2], d: &mut [f64; 2]| {
                let r = s.exp();
                let r2 = r * r;
                d[0] = y[1];
                d[1] = (m2 + r2 * r2 - 2.0 * mu * r2 + 2.0 * r2 * y[0] * y[0]) * y[0];
            },
            &norm,
            s0,
            start,
            s1,
            &[],
            &OdeOptions { h_init: Some(0.01), ..OdeOptions::default() },
            |_, _| false,
        );
        match out {
            Ok(o) => (o.y[0], o.y[1] / r),
            Err(_) => self.sample(r),
        }
    }

    fn tail_eval(&self, r: f64) -> (f64, f64) {
        let r_end = self.r_max();
        let n = self.w.len();
        let (ln_t_end, _) = tail_shape(self.m, self.mu, r_end);
        let (ln_t, gamma) = tail_shape(self.m, self.mu, r);
        let w = self.w[n - 1] * (ln_t - ln_t_end).exp();
        (w, w * gamma / r)
    }

    /// Radius of the interior maximum of w.
    pub fn peak_radius(&self) -> f64 {
        if self.is_degenerate() {
            return f64::NAN;
        }
        let table = self.table();
        let n = table.w.len();
        let mut best = 1;
        for i in 1..n {
            if table.w[i] > table.w[best] {
                best = i;
            }
        }
        let mut lo = (best.saturating_sub(1)) as f64 * table.h;
        let mut hi = ((best + 1).min(n - 1)) as f64 * table.h;
        let d = |r: f64| self.eval(r).1;
        if d(lo) * d(hi) > 0.0 {
            return best as f64 * table.h;
        }
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if d(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Maximum of w over the dense table.
    pub fn max_w(&self) -> f64 {
        self.table().w.iter().cloned().fold(0.0, f64::max)
    }

    /// Particle-number norm K = 2π∫w² r dr.
    pub fn particle_number(&self) -> f64 {
        particle_number(self)
    }

    /// Checks the a-priori bounds every positive profile must satisfy.
    pub fn check_invariants(&self) -> Result<(), ProfileError> {
        let fail = |reason: String| Err(ProfileError::InvalidProfile { mu: self.mu, reason });
        if self.kind != ProfileKind::Solution {
            return Ok(());
        }
        let m = self.m as f64;
        if self.mu <= m + 1.0 {
            return fail(format!("mu = {} does not exceed m + 1 = {}", self.mu, m + 1.0));
        }
        if self.w.iter().skip(1).any(|&w| w <= 0.0) {
            return fail("profile is not positive on the mesh".into());
        }
        let wmax = self.max_w();
        if wmax * wmax >= self.mu - m {
            return fail(format!("max w^2 = {} violates bound mu - m = {}", wmax * wmax, self.mu - m));
        }
        let table = self.table();
        let mut maxima = 0;
        for i in 1..table.w.len() - 1 {
            if table.w[i] > 1e-8 * wmax && table.w[i] >= table.w[i - 1] && table.w[i] > table.w[i + 1] {
                maxima += 1;
            }
        }
        if maxima != 1 {
            return fail(format!("expected a single interior maximum, found {maxima}"));
        }
        let rp = self.peak_radius();
        let (lo, hi) = (m / (2.0 * self.mu).sqrt(), (2.0 * self.mu).sqrt());
        if !(rp > lo && rp < hi) {
            return fail(format!("maximizer {rp} outside ({lo}, {hi})"));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String, ProfileError> {
        serde_json::to_string_pretty(self).map_err(|e| ProfileError::Serialization(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self, ProfileError> {
        serde_json::from_str(text).map_err(|e| ProfileError::Serialization(e.to_string()))
    }
}

fn nearest_node(nodes: &[f64], r: f64) -> usize {
    let idx = nodes.partition_point(|&x| x < r);
    if idx == 0 {
        0
    } else if idx >= nodes.len() {
        nodes.len() - 1
    } else if (r - nodes[idx - 1]) <= (nodes[idx] - r) {
        idx - 1
    } else {
        idx
    }
}

/// ε·r^m e^{−r²/2} and its derivative.
fn seed_shape(m: u32, eps: f64, r: f64) -> (f64, f64) {
    if r <= 0.0 {
        return (0.0, if m == 1 { eps } else { 0.0 });
    }
    let f = eps * r.powi(m as i32) * (-0.5 * r * r).exp();
    (f, f * (m as f64 / r - r))
}

/// Bifurcation seed ε·w₀^{(m)} = ε·r^m e^{−r²/2} at μ = m + 1.
pub fn seed_profile(m: u32, eps: f64) -> VortexProfile {
    assert!(m >= 1, "vortex degree must be at least 1");
    let mu = m as f64 + 1.0;
    if eps == 0.0 {
        return VortexProfile::zero(m, mu);
    }
    let nodes = shooting_mesh(mu, 64);
    let (w, w_prime): (Vec<f64>, Vec<f64>) = nodes.iter().map(|&r| seed_shape(m, eps, r)).unzip();
    let mut p = VortexProfile {
        m,
        mu,
        nodes,
        w,
        w_prime,
        d0: eps,
        tail: TailModel { amplitude: eps, exponent: mu - 1.0 },
        k: 0.0,
        kind: ProfileKind::Seed,
        table: OnceLock::new(),
    };
    p.k = particle_number(&p);
    p
}

fn build_table(p: &VortexProfile) -> ProfileTable {
    let r_end = p.r_max();
    let n = (r_end / TABLE_H).ceil() as usize + 1;
    let mut w = vec![0.0; n];
    let mut wp = vec![0.0; n];
    let m = p.m;
    let mf = m as f64;
    match p.kind {
        ProfileKind::Zero => {}
        ProfileKind::Seed => {
            for i in 0..n {
                let (a, b) = seed_shape(m, p.d0, i as f64 * TABLE_H);
                w[i] = a;
                wp[i] = b;
            }
        }
        ProfileKind::Solution => {
            fill_solution_table(p, &mut w, &mut wp);
            w[0] = 0.0;
            wp[0] = if m == 1 { p.d0 } else { 0.0 };
        }
    }
    let mut wpp = vec![0.0; n];
    if p.kind != ProfileKind::Zero {
        wpp[0] = if m == 2 { 2.0 * p.d0 } else { 0.0 };
        for i in 1..n {
            let r = i as f64 * TABLE_H;
            wpp[i] = -wp[i] / r
                + (mf * mf / (r * r) + r * r - 2.0 * p.mu + 2.0 * w[i] * w[i]) * w[i];
            if p.kind == ProfileKind::Seed {
                // The seed solves the linear equation at μ = m + 1.
                wpp[i] = -wp[i] / r + (mf * mf / (r * r) + r * r - 2.0 * p.mu) * w[i];
            }
        }
    }
    ProfileTable { h: TABLE_H, w, wp, wpp, r_end: (n - 1) as f64 * TABLE_H }
}

/// Integrates every segment half-way from both ends, recording table values.
fn fill_solution_table(p: &VortexProfile, w: &mut [f64], wp: &mut [f64]) {
    let n = w.len();
    let nodes = &p.nodes;
    let m2 = (p.m * p.m) as f64;
    let mu = p.mu;
    let rhs = |s: f64, y: &[f64; 2], d: &mut [f64; 2]| {
        let r = s.exp();
        let r2 = r * r;
        d[0] = y[1];
        d[1] = (m2 + r2 * r2 - 2.0 * mu * r2 + 2.0 * r2 * y[0] * y[0]) * y[0];
    };
    let groups = [(0usize, 2usize)];
    let norm = GroupedNorm { rtol: 1e-11, floor: 1e-300, groups: &groups };
    let opts = OdeOptions::default();
    let r_end = p.r_max();
    for k in 0..nodes.len() - 1 {
        let (ra, rb) = (nodes[k], nodes[k + 1]);
        let rm = (ra * rb).sqrt();
        let i_lo = (ra / TABLE_H).ceil() as usize;
        let i_hi = ((rb / TABLE_H).floor() as usize).min(n - 1);
        if i_lo > i_hi {
            continue;
        }
        let fwd: Vec<usize> = (i_lo..=i_hi).filter(|&i| (i as f64 * TABLE_H) <= rm).collect();
        let bwd: Vec<usize> = (i_lo..=i_hi).rev().filter(|&i| (i as f64 * TABLE_H) > rm).collect();
        let stops_f: Vec<f64> = fwd.iter().map(|&i| (i as f64 * TABLE_H).max(ra).ln()).collect();
        let stops_b: Vec<f64> = bwd.iter().map(|&i| (i as f64 * TABLE_H).min(rb).ln()).collect();
        let start_a = [p.w[k], ra * p.w_prime[k]];
        let start_b = [p.w[k + 1], rb * p.w_prime[k + 1]];
        if !fwd.is_empty() {
            let mut record = |i: usize, y: &[f64; 2]| {
                let r = i as f64 * TABLE_H;
                w[i] = y[0];
                wp[i] = y[1] / r;
            };
            let _ = integrate(rhs, &norm, ra.ln(), start_a, *stops_f.last().unwrap(), &stops_f, &opts, |ev, y| {
                if let Some(j) = ev.stop {
                    record(fwd[j], y);
                }
                false
            });
        }
        if !bwd.is_empty() {
            let mut record = |i: usize, y: &[f64; 2]| {
                let r = i as f64 * TABLE_H;
                w[i] = y[0];
                wp[i] = y[1] / r;
            };
            let _ = integrate(rhs, &norm, rb.ln(), start_b, *stops_b.last().unwrap(), &stops_b, &opts, |ev, y| {
                if let Some(j) = ev.stop {
                    record(bwd[j], y);
                }
                false
            });
        }
    }
    // Grid points past the last node follow the tail model.
    for i in 0..n {
        let r = i as f64 * TABLE_H;
        if r >= r_end {
            let (a, b) = p.tail_eval(r);
            w[i] = a;
            wp[i] = b;
        }
    }
}

/// K = 2π∫w² r dr: adaptive quadrature of the interpolated profile on the
/// domain plus the tail model out to where it is negligible.
pub fn particle_number(p: &VortexProfile) -> f64 {
    if p.is_degenerate() {
        return 0.0;
    }
    let density = |w: f64, _wp: f64, r: f64| w * w * r;
    let scale = p.max_w().powi(2) * p.r_max().powi(2);
    2.0 * PI * integrate_density(p, &density, scale)
}

/// Energy functional restricted to the vortex ansatz:
/// 2π∫[½(w′² + m²w²/r²) + ½r²w² + w⁴] r dr.
pub fn energy(p: &VortexProfile) -> f64 {
    if p.is_degenerate() {
        return 0.0;
    }
    let m2 = (p.m * p.m) as f64;
    let density = |w: f64, wp: f64, r: f64| {
        if r <= 0.0 {
            return 0.0;
        }
        let w2 = w * w;
        (0.5 * (wp * wp + m2 * w2 / (r * r)) + 0.5 * r * r * w2 + w2 * w2) * r
    };
    let scale = p.mu * p.max_w().powi(2) * p.r_max().powi(2);
    2.0 * PI * integrate_density(p, &density, scale)
}

fn integrate_density(p: &VortexProfile, density: &dyn Fn(f64, f64, f64) -> f64, scale: f64) -> f64 {
    let table = p.table();
    let r_end = table.r_end;
    let inner = adaptive_panels(
        &|r: f64| {
            let (w, wp) = table.sample(r);
            density(w, wp, r)
        },
        0.0,
        r_end,
        64,
        1e-14 * scale,
    );
    let outer = adaptive_panels(
        &|r: f64| {
            let (w, wp) = p.eval(r);
            density(w, wp, r)
        },
        r_end,
        r_end + 8.0,
        8,
        1e-16 * scale,
    );
    inner + outer
}

/// Physical constants of a condensate species and trap.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct SpeciesConstants {
    /// s-wave scattering length a [m].
    pub scattering_length: f64,
    /// Atomic mass M [kg].
    pub mass: f64,
    /// Axial trap frequency ω_z [rad/s].
    pub omega_z: f64,
    /// Transverse trap frequency ω_tr [rad/s].
    pub omega_tr: f64,
    /// Reduced Planck constant ħ [J s].
    pub hbar: f64,
}

impl SpeciesConstants {
    /// Sodium-23 in a pancake trap: a = 2.75 nm, M = 1e-26 kg,
    /// ω_z = 2π·200 Hz, ω_tr = 2π·10 Hz.
    pub fn sodium() -> Self {
        SpeciesConstants {
            scattering_length: 2.75e-9,
            mass: 1e-26,
            omega_z: 2.0 * PI * 200.0,
            omega_tr: 2.0 * PI * 10.0,
            hbar: 1.054_571_817e-34,
        }
    }

    /// K contributed per atom: 2|a|·sqrt(2πMω_z/ħ).
    pub fn k_per_atom(&self) -> f64 {
        2.0 * self.scattering_length.abs() * (2.0 * PI * self.mass * self.omega_z / self.hbar).sqrt()
    }
}

/// Atom number N corresponding to the norm K.
pub fn physical_n(k: f64, species: &SpeciesConstants) -> f64 {
    k / species.k_per_atom()
}

/// Norm K corresponding to the atom number N.
pub fn k_from_n(n: f64, species: &SpeciesConstants) -> f64 {
    n * species.k_per_atom()
}

/// Continuation and shooting parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContinuationSettings {
    pub n_nodes: usize,
    pub rtol: f64,
    pub newton_tol: f64,
    pub max_newton: usize,
    pub ds_init: f64,
    pub ds_max: f64,
    pub max_halvings: usize,
    pub growth: f64,
    pub successes_to_grow: usize,
}

impl Default for ContinuationSettings {
    fn default() -> Self {
        ContinuationSettings {
            n_nodes: 64,
            rtol: 1e-10,
            newton_tol: 1e-10,
            max_newton: 12,
            ds_init: 0.1,
            ds_max: 0.6,
            max_halvings: 12,
            growth: 1.3,
            successes_to_grow: 3,
        }
    }
}

/// One converged point of a continuation run.
#[derive(Debug, Clone)]
pub struct BranchPoint {
    pub mu: f64,
    pub profile: Arc<VortexProfile>,
    /// Arclength in the (μ, ln d0) plane from the first converged point.
    pub s: f64,
    /// Unit predictor tangent (dμ, d ln d0) used to reach this point.
    pub tangent: (f64, f64),
}

#[derive(Debug, Clone, Copy)]
enum Constraint {
    FixMu(f64),
    FixEll(f64),
    Arclength { mu0: f64, ell0: f64, t_mu: f64, t_ell: f64 },
}

/// Multiple-shooting discretization on a fixed mesh.
struct Shooter<'a> {
    m: u32,
    nodes: &'a [f64],
    rtol: f64,
}

struct SegmentFlow {
    end: [f64; 2],
    phi: [[f64; 2]; 2],
    dmu: [f64; 2],
}

impl Shooter<'_> {
    fn n(&self) -> usize {
        self.nodes.len()
    }

    fn frobenius(&self, ell: f64, mu: f64) -> ([f64; 2], [f64; 2]) {
        let m = self.m as f64;
        let r0 = self.nodes[0];
        let amp = ell.exp() * r0.powi(self.m as i32);
        let c = -mu / (2.0 * (m + 1.0));
        let dc = -1.0 / (2.0 * (m + 1.0));
        let r2 = r0 * r0;
        (
            [amp * (1.0 + c * r2), amp * (m + (m + 2.0) * c * r2)],
            [amp * dc * r2, amp * (m + 2.0) * dc * r2],
        )
    }

    fn segment(&self, k: usize, start: [f64; 2], mu: f64) -> Result<SegmentFlow, OdeError> {
        let m2 = (self.m * self.m) as f64;
        let groups = [(0usize, 2usize), (2, 6), (6, 8)];
        let norm = GroupedNorm { rtol: self.rtol, floor: 1e-300, groups: &groups };
        let y0 = [start[0], start[1], 1.0, 0.0, 0.0, 1.0, 0.0, 0.0];
        let out = integrate(
            |s, y: &[f64; 8], d: &mut [f64; 8]| {
                let r = s.exp();
                let r2 = r * r;
                let base = m2 + r2 * r2 - 2.0 * mu * r2;
                let w2 = y[0] * y[0];
                let j10 = base + 6.0 * r2 * w2;
                d[0] = y[1];
                d[1] = (base + 2.0 * r2 * w2) * y[0];
                d[2] = y[4];
                d[3] = y[5];
                d[4] = j10 * y[2];
                d[5] = j10 * y[3];
                d[6] = y[7];
                d[7] = j10 * y[6] - 2.0 * r2 * y[0];
            },
            &norm,
            self.nodes[k].ln(),
            y0,
            self.nodes[k + 1].ln(),
            &[],
            &OdeOptions { h_init: Some(0.02), ..OdeOptions::default() },
            |_, _| false,
        )?;
        let y = out.y;
        Ok(SegmentFlow { end: [y[0], y[1]], phi: [[y[2], y[3]], [y[4], y[5]]], dmu: [y[6], y[7]] })
    }

    /// Node magnitudes used for row and column equilibration.
    fn scales(&self, x: &[f64], gamma: f64) -> Vec<f64> {
        let n = self.n();
        let mut sig = vec![1.0; n];
        for j in 1..n - 1 {
            sig[j] = x[2 * j - 1].abs().max(x[2 * j].abs()).max(1e-300);
        }
        sig[n - 1] = (x[2 * n - 3].abs() * gamma.abs().max(1.0)).max(1e-300);
        sig
    }

    /// Residual and Jacobian of the shooting system with unknowns
    /// [ln d0, (w_k, q_k) for interior nodes, w_tail, μ].
    fn system(&self, x: &[f64], con: Constraint) -> Result<(DVector<f64>, DMatrix<f64>, f64), OdeError> {
        let n = self.n();
        let nu = 2 * n - 1;
        let ell = x[0];
        let mu = x[nu - 1];
        let w_t = x[2 * n - 3];
        let r_end = self.nodes[n - 1];
        let (_, gamma) = tail_shape(self.m, mu, r_end);
        let dmu_fd = 1e-6 * mu.max(1.0);
        let gamma_mu = (tail_shape(self.m, mu + dmu_fd, r_end).1 - tail_shape(self.m, mu - dmu_fd, r_end).1)
            / (2.0 * dmu_fd);
        let mut f = DVector::zeros(nu);
        let mut jac = DMatrix::zeros(nu, nu);
        let (frob, frob_mu) = self.frobenius(ell, mu);
        for k in 0..n - 1 {
            let start = if k == 0 { frob } else { [x[2 * k - 1], x[2 * k]] };
            let flow = self.segment(k, start, mu)?;
            let row = 2 * k;
            let target = if k + 1 < n - 1 { [x[2 * k + 1], x[2 * k + 2]] } else { [w_t, w_t * gamma] };
            for i in 0..2 {
                f[row + i] = flow.end[i] - target[i];
                if k == 0 {
                    jac[(row + i, 0)] = flow.phi[i][0] * frob[0] + flow.phi[i][1] * frob[1];
                    jac[(row + i, nu - 1)] += flow.phi[i][0] * frob_mu[0] + flow.phi[i][1] * frob_mu[1];
                } else {
                    jac[(row + i, 2 * k - 1)] = flow.phi[i][0];
                    jac[(row + i, 2 * k)] = flow.phi[i][1];
                }
                jac[(row + i, nu - 1)] += flow.dmu[i];
            }
            if k + 1 < n - 1 {
                jac[(row, 2 * k + 1)] = -1.0;
                jac[(row + 1, 2 * k + 2)] = -1.0;
            } else {
                jac[(row, 2 * n - 3)] = -1.0;
                jac[(row + 1, 2 * n - 3)] = -gamma;
                jac[(row + 1, nu - 1)] -= w_t * gamma_mu;
            }
        }
        let last = nu - 1;
        match con {
            Constraint::FixMu(v) => {
                f[last] = mu - v;
                jac[(last, nu - 1)] = 1.0;
            }
            Constraint::FixEll(v) => {
                f[last] = ell - v;
                jac[(last, 0)] = 1.0;
            }
            Constraint::Arclength { mu0, ell0, t_mu, t_ell } => {
                f[last] = t_mu * (mu - mu0) + t_ell * (ell - ell0);
                jac[(last, nu - 1)] = t_mu;
                jac[(last, 0)] = t_ell;
            }
        }
        Ok((f, jac, gamma))
    }

    fn scaled_residual(&self, f: &DVector<f64>, sig: &[f64]) -> f64 {
        let n = self.n();
        let mut worst = f[2 * n - 2].abs();
        for k in 0..n - 1 {
            let s = sig[k + 1];
            worst = worst.max(f[2 * k].abs() / s).max(f[2 * k + 1].abs() / s);
        }
        worst
    }

    /// Damped Newton iteration; returns the converged unknowns and the final
    /// scaled residual.
    fn solve(&self, mut x: Vec<f64>, con: Constraint, tol: f64, max_iter: usize) -> Result<(Vec<f64>, f64, f64), String> {
        let n = self.n();
        let nu = 2 * n - 1;
        let (mut f, mut jac, mut gamma) = self.system(&x, con).map_err(|e| e.to_string())?;
        let mut sig = self.scales(&x, gamma);
        let mut res = self.scaled_residual(&f, &sig);
        for _ in 0..max_iter {
            if !res.is_finite() {
                return Err("non-finite residual".into());
            }
            if res < tol {
                return Ok((x, res, gamma));
            }
            // Column scaling by node magnitudes, row scaling by target magnitudes.
            let mut col = vec![1.0; nu];
            for j in 1..n - 1 {
                col[2 * j - 1] = sig[j];
                col[2 * j] = sig[j];
            }
            col[2 * n - 3] = x[2 * n - 3].abs().max(1e-300);
            let mut a = jac.clone();
            let mut b = -f.clone();
            for k in 0..n - 1 {
                let s = 1.0 / sig[k + 1];
                for i in 0..2 {
                    a.row_mut(2 * k + i).scale_mut(s);
                    b[2 * k + i] *= s;
                }
            }
            for (j, c) in col.iter().enumerate() {
                a.column_mut(j).scale_mut(*c);
            }
            let dy = a.lu().solve(&b).ok_or_else(|| "singular shooting Jacobian".to_string())?;
            let dx: Vec<f64> = (0..nu).map(|j| dy[j] * col[j]).collect();
            let mut alpha = 1.0;
            let mut accepted = false;
            for _ in 0..8 {
                let trial: Vec<f64> = x.iter().zip(&dx).map(|(a, d)| a + alpha * d).collect();
                if let Ok((ft, jt, gt)) = self.system(&trial, con) {
                    let st = self.scales(&trial, gt);
                    let rt = self.scaled_residual(&ft, &st);
                    if rt.is_finite() && (rt < res || rt < tol) {
                        x = trial;
                        f = ft;
                        jac = jt;
                        gamma = gt;
                        sig = st;
                        res = rt;
                        accepted = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !accepted {
                return Err(format!("Newton stalled at scaled residual {res:.3e}"));
            }
        }
        if res < tol {
            Ok((x, res, gamma))
        } else {
            Err(format!("Newton did not converge (residual {res:.3e})"))
        }
    }
}

/// Node guesses (w, q = r·w′) on `mesh` sampled from an existing profile.
fn sample_nodes(p: &VortexProfile, mesh: &[f64]) -> Vec<(f64, f64)> {
    mesh.iter()
        .map(|&r| {
            let (w, wp) = if r > p.r_max() || p.kind != ProfileKind::Solution { p.eval(r) } else { p.sample(r) };
            let (w, wp) = if r < 4.0 * TABLE_H { p.eval(r) } else { (w, wp) };
            (w, r * wp)
        })
        .collect()
}

/// Extrapolates node states in (ln w, q/w), which stays accurate across the
/// exponentially small tail.
fn extrapolate_nodes(a: &[(f64, f64)], b: &[(f64, f64)], theta: f64) -> Vec<(f64, f64)> {
    a.iter()
        .zip(b)
        .map(|(&(wa, qa), &(wb, qb))| {
            if wa > 0.0 && wb > 0.0 {
                let lw = wb.ln() + theta * (wb.ln() - wa.ln());
                let g = qb / wb + theta * (qb / wb - qa / wa);
                let w = lw.exp();
                (w, g * w)
            } else {
                (wb + theta * (wb - wa), qb + theta * (qb - qa))
            }
        })
        .collect()
}

fn pack(ell: f64, mu: f64, states: &[(f64, f64)]) -> Vec<f64> {
    let n = states.len();
    let mut x = Vec::with_capacity(2 * n - 1);
    x.push(ell);
    for &(w, q) in &states[1..n - 1] {
        x.push(w);
        x.push(q);
    }
    x.push(states[n - 1].0);
    x.push(mu);
    x
}

fn unpack(m: u32, nodes: Vec<f64>, x: &[f64], gamma: f64) -> VortexProfile {
    let n = nodes.len();
    let nu = 2 * n - 1;
    let ell = x[0];
    let mu = x[nu - 1];
    let d0 = ell.exp();
    let shooter = Shooter { m, nodes: &nodes, rtol: 1e-10 };
    let (frob, _) = shooter.frobenius(ell, mu);
    let mut w = Vec::with_capacity(n);
    let mut wp = Vec::with_capacity(n);
    w.push(frob[0]);
    wp.push(frob[1] / nodes[0]);
    for j in 1..n - 1 {
        w.push(x[2 * j - 1]);
        wp.push(x[2 * j] / nodes[j]);
    }
    let w_t = x[2 * n - 3];
    let r_end = nodes[n - 1];
    w.push(w_t);
    wp.push(w_t * gamma / r_end);
    let (ln_t, _) = tail_shape(m, mu, r_end);
    let amplitude = (w_t.ln() - ln_t).exp();
    let mut p = VortexProfile {
        m,
        mu,
        nodes,
        w,
        w_prime: wp,
        d0,
        tail: TailModel { amplitude, exponent: mu - 1.0 },
        k: 0.0,
        kind: ProfileKind::Solution,
        table: OnceLock::new(),
    };
    p.k = particle_number(&p);
    p
}

fn solve_profile(
    m: u32,
    nodes: Vec<f64>,
    guess: &[(f64, f64)],
    ell: f64,
    mu: f64,
    con: Constraint,
    settings: &ContinuationSettings,
) -> Result<VortexProfile, String> {
    let shooter = Shooter { m, nodes: &nodes, rtol: settings.rtol };
    let x0 = pack(ell, mu, guess);
    let (x, _, gamma) = shooter.solve(x0, con, settings.newton_tol, settings.max_newton)?;
    Ok(unpack(m, nodes, &x, gamma))
}

fn profile_state(p: &VortexProfile) -> Vec<(f64, f64)> {
    p.w.iter().zip(&p.w_prime).zip(&p.nodes).map(|((&w, &wp), &r)| (w, r * wp)).collect()
}

/// Re-solves the shooting system at fixed μ on the profile's own mesh.
pub fn shoot_refine(p: &VortexProfile) -> Result<VortexProfile, ProfileError> {
    shoot_refine_with(p, &ContinuationSettings::default())
}

pub fn shoot_refine_with(p: &VortexProfile, settings: &ContinuationSettings) -> Result<VortexProfile, ProfileError> {
    if p.kind != ProfileKind::Solution {
        return Err(ProfileError::RefineFailed("only converged solutions can be refined".into()));
    }
    let state = profile_state(p);
    solve_profile(p.m, p.nodes.clone(), &state, p.d0.ln(), p.mu, Constraint::FixMu(p.mu), settings)
        .map_err(ProfileError::RefineFailed)
}

/// Scaled residual of the radial equation at segment midpoints, from
/// eighth-order nine-point finite differences of `eval`, divided by μ·max w.
pub fn midpoint_residual(p: &VortexProfile) -> f64 {
    midpoint_residuals(p).into_iter().map(|(_, v)| v).fold(0.0, f64::max)
}

/// Per-segment (midpoint radius, scaled residual) pairs; see [`midpoint_residual`].
pub fn midpoint_residuals(p: &VortexProfile) -> Vec<(f64, f64)> {
    const D1: [f64; 4] = [4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0];
    const D2: [f64; 4] = [8.0 / 5.0, -1.0 / 5.0, 8.0 / 315.0, -1.0 / 560.0];
    const D2_CENTER: f64 = -205.0 / 72.0;
    let m2 = (p.m * p.m) as f64;
    let scale = p.mu * p.max_w().max(1e-300);
    let mut out = Vec::with_capacity(p.nodes.len() - 1);
    for k in 0..p.nodes.len() - 1 {
        let r = 0.5 * (p.nodes[k] + p.nodes[k + 1]);
        let h = (0.1 / p.mu.sqrt()).min(r / 20.0);
        let f = |x: f64| p.eval_from_node(k, x).0;
        let w = f(r);
        let (mut wp, mut wpp) = (0.0, D2_CENTER * w);
        for (i, (c1, c2)) in D1.iter().zip(D2.iter()).enumerate() {
            let d = (i + 1) as f64 * h;
            let (fp, fm) = (f(r + d), f(r - d));
            wp += c1 * (fp - fm);
            wpp += c2 * (fp + fm);
        }
        wp /= h;
        wpp /= h * h;
        let res = -wpp - wp / r + (m2 / (r * r) + r * r + 2.0 * w * w - 2.0 * p.mu) * w;
        out.push((r, res.abs() / scale));
    }
    out
}

/// Continues the vortex branch from a bifurcation seed up to `mu_target`.
///
/// Returns the seed alone when `mu_target` equals the seed's μ; otherwise
/// the chain of converged profiles, the last one exactly at `mu_target`.
pub fn continue_branch(
    seed: &VortexProfile,
    mu_target: f64,
    settings: &ContinuationSettings,
) -> Result<Vec<BranchPoint>, ProfileError> {
    if mu_target == seed.mu {
        return Ok(vec![BranchPoint { mu: seed.mu, profile: Arc::new(seed.clone()), s: 0.0, tangent: (0.0, 1.0) }]);
    }
    if mu_target < seed.mu || seed.is_degenerate() {
        return Err(ProfileError::InvalidArgument(format!(
            "continuation needs a nondegenerate seed and mu_target > {}",
            seed.mu
        )));
    }
    let m = seed.m;
    let stall = |mu: f64, reason: String| ProfileError::BranchStall { last_mu: mu, reason };
    let ell0 = seed.d0.ln();
    let mesh0 = shooting_mesh(seed.mu, settings.n_nodes);
    let guess0 = sample_nodes(seed, &mesh0);
    // First point: fixed amplitude, solve for μ.
    let p1 = solve_profile(m, mesh0.clone(), &guess0, ell0, seed.mu, Constraint::FixEll(ell0), settings)
        .map_err(|e| stall(seed.mu, e))?;
    p1.check_invariants()?;
    let ell1 = ell0 + settings.ds_init;
    let guess1: Vec<(f64, f64)> = profile_state(&p1).iter().map(|&(w, q)| (w * settings.ds_init.exp(), q * settings.ds_init.exp())).collect();
    let p2 = solve_profile(m, mesh0, &guess1, ell1, p1.mu, Constraint::FixEll(ell1), settings)
        .map_err(|e| stall(p1.mu, e))?;
    p2.check_invariants()?;

    let mut points: Vec<BranchPoint> = Vec::new();
    let xy = |p: &VortexProfile| (p.mu, p.d0.ln());
    points.push(BranchPoint { mu: p1.mu, profile: Arc::new(p1), s: 0.0, tangent: (0.0, 1.0) });
    let d = {
        let (a, b) = (xy(&points[0].profile), xy(&p2));
        ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt()
    };
    let t2 = {
        let (a, b) = (xy(&points[0].profile), xy(&p2));
        ((b.0 - a.0) / d, (b.1 - a.1) / d)
    };
    points.push(BranchPoint { mu: p2.mu, profile: Arc::new(p2), s: d, tangent: t2 });
    if points[1].mu >= mu_target {
        let last = points[1].profile.clone();
        let state = profile_state(&last);
        let target = solve_profile(m, last.nodes.clone(), &state, last.d0.ln(), mu_target, Constraint::FixMu(mu_target), settings)
            .map_err(|e| stall(last.mu, e))?;
        points.push(BranchPoint { mu: mu_target, profile: Arc::new(target), s: d, tangent: t2 });
        return Ok(points);
    }

    let mut ds = settings.ds_init;
    let mut successes = 0usize;
    let mut halvings = 0usize;
    loop {
        let n = points.len();
        let (pa, pb) = (&points[n - 2], &points[n - 1]);
        let (xa, xb) = (xy(&pa.profile), xy(&pb.profile));
        let seg = ((xb.0 - xa.0).powi(2) + (xb.1 - xa.1).powi(2)).sqrt();
        let tangent = ((xb.0 - xa.0) / seg, (xb.1 - xa.1) / seg);
        let mut mu_p = xb.0 + ds * tangent.0;
        let mut ell_p = xb.1 + ds * tangent.1;
        let finishing = mu_p >= mu_target;
        let theta = if finishing {
            let frac = (mu_target - xb.0) / (mu_p - xb.0);
            mu_p = mu_target;
            ell_p = xb.1 + frac * ds * tangent.1;
            frac * ds / seg
        } else {
            ds / seg
        };
        let mesh = shooting_mesh(mu_p, settings.n_nodes);
        let ga = sample_nodes(&pa.profile, &mesh);
        let gb = sample_nodes(&pb.profile, &mesh);
        let guess = extrapolate_nodes(&ga, &gb, theta);
        let con = if finishing {
            Constraint::FixMu(mu_target)
        } else {
            Constraint::Arclength { mu0: mu_p, ell0: ell_p, t_mu: tangent.0, t_ell: tangent.1 }
        };
        match solve_profile(m, mesh, &guess, ell_p, mu_p, con, settings) {
            Ok(p) if p.mu > pb.mu => {
                p.check_invariants()?;
                let step = ((p.mu - xb.0).powi(2) + (p.d0.ln() - xb.1).powi(2)).sqrt();
                let s = pb.s + step;
                let mu = p.mu;
                points.push(BranchPoint { mu, profile: Arc::new(p), s, tangent });
                if finishing {
                    return Ok(points);
                }
                halvings = 0;
                successes += 1;
                if successes >= settings.successes_to_grow {
                    ds = (ds * settings.growth).min(settings.ds_max);
                    successes = 0;
                }
            }
            outcome => {
                successes = 0;
                halvings += 1;
                ds *= 0.5;
                if halvings > settings.max_halvings {
                    let reason = match outcome {
                        Err(e) => e,
                        Ok(p) => format!("corrector moved backwards to mu = {}", p.mu),
                    };
                    return Err(stall(pb.mu, reason));
                }
            }
        }
    }
}

/// A computed branch with on-demand profiles at arbitrary μ.
#[derive(Debug, Clone)]
pub struct Branch {
    pub m: u32,
    pub points: Vec<BranchPoint>,
    pub settings: ContinuationSettings,
}

impl Branch {
    /// Seeds at μ = m + 1 with ε = 0.1 and continues to `mu_max`.
    pub fn compute(m: u32, mu_max: f64, settings: &ContinuationSettings) -> Result<Branch, ProfileError> {
        let seed = seed_profile(m, 0.1);
        let points = continue_branch(&seed, mu_max, settings)?;
        Ok(Branch { m, points, settings: settings.clone() })
    }

    pub fn mu_range(&self) -> (f64, f64) {
        (self.points[0].mu, self.points[self.points.len() - 1].mu)
    }

    /// Converged profile at exactly `mu`, predicted by interpolation between
    /// the bracketing branch points and corrected at fixed μ.
    pub fn profile_at(&self, mu: f64) -> Result<VortexProfile, ProfileError> {
        let pts = &self.points;
        let (lo, hi) = self.mu_range();
        if mu < lo || mu > hi {
            // Allow a short extrapolation below the first point (towards the seed).
            if mu <= self.m as f64 + 1.0 || mu > hi {
                return Err(ProfileError::InvalidArgument(format!("mu = {mu} outside branch range [{lo}, {hi}]")));
            }
        }
        let first = pts.iter().position(|p| p.profile.kind == ProfileKind::Solution).unwrap_or(0);
        let i = pts.partition_point(|p| p.mu < mu).clamp(first + 1, pts.len() - 1);
        let (pa, pb) = (&pts[i - 1].profile, &pts[i].profile);
        for p in [pa, pb] {
            if (p.mu - mu).abs() < 1e-14 {
                return Ok((**p).clone());
            }
        }
        let mesh = shooting_mesh(mu, self.settings.n_nodes);
        let (guess, ell) = if mu >= pa.mu {
            let theta = (mu - pb.mu) / (pb.mu - pa.mu);
            let ga = sample_nodes(pa, &mesh);
            let gb = sample_nodes(pb, &mesh);
            (extrapolate_nodes(&ga, &gb, theta), pb.d0.ln() + theta * (pb.d0.ln() - pa.d0.ln()))
        } else {
            // Below the first solution the amplitude scales as √(μ − μ0).
            let mu0 = self.m as f64 + 1.0;
            let s = ((mu - mu0) / (pa.mu - mu0)).sqrt();
            let ga = sample_nodes(pa, &mesh);
            (ga.iter().map(|&(w, q)| (s * w, s * q)).collect(), (s * pa.d0).ln())
        };
        let p = solve_profile(self.m, mesh, &guess, ell, mu, Constraint::FixMu(mu), &self.settings)
            .map_err(|e| ProfileError::BranchStall { last_mu: pb.mu, reason: e })?;
        p.check_invariants()?;
        Ok(p)
    }
}
