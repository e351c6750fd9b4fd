use std::sync::OnceLock;
use vortex_core::evans::{polish_zero, EvansContext, EvansOptions};
use vortex_core::linearized::{eigenfunction_solve, ModeSystem};
use vortex_core::profile::{Branch, ContinuationSettings, VortexProfile};
use vortex_core::sim::{
    default_half_width, growth_rate, linear_fit, vortex_value, Equation, GridState, GrowthSettings,
};
use vortex_core::C64;

fn profile(m: u32, mu: f64) -> VortexProfile {
    static B1: OnceLock<Branch> = OnceLock::new();
    static B2: OnceLock<Branch> = OnceLock::new();
    let cell = if m == 1 { &B1 } else { &B2 };
    cell.get_or_init(|| Branch::compute(m, 12.0, &ContinuationSettings::default()).unwrap()).profile_at(mu).unwrap()
}

fn gaussian(x: f64, y: f64) -> C64 {
    C64::new((-0.5 * (x * x + y * y)).exp(), 0.0)
}

fn max_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max)
}

#[test]
fn free_gaussian_matches_closed_form() {
    // i ψ_t + ½Δψ = 0 with ψ(0) = e^{−r²/2} gives ψ = e^{−r²/(2(1+it))}/(1+it).
    let mut g = GridState::new(256, 10.0, 1e-3, Equation::FREE, gaussian).unwrap();
    g.run(1000);
    let s = C64::new(1.0, g.t);
    let n = g.n;
    let err = g
        .psi
        .iter()
        .enumerate()
        .map(|(idx, p)| {
            let (x, y) = (g.coords()[idx % n], g.coords()[idx / n]);
            (p - (-(x * x + y * y) / (2.0 * s)).exp() / s).norm()
        })
        .fold(0.0, f64::max);
    assert!(err < 1e-6, "error {err}");
}

#[test]
fn trapped_ground_state_rotates_at_unit_frequency() {
    let eq = Equation { omega2: 1.0, g: 0.0 };
    let mut g = GridState::new(128, 8.0, 1e-3, eq, gaussian).unwrap();
    let psi0 = g.psi.clone();
    g.run(500);
    let phase = C64::from_polar(1.0, -g.t);
    let expect: Vec<C64> = psi0.iter().map(|p| p * phase).collect();
    assert!(max_diff(&g.psi, &expect) < 1e-6);
}

#[test]
fn norm_is_conserved() {
    let p = profile(1, 6.0);
    let l = default_half_width(6.0);
    let mut g = GridState::new(128, l, 1e-3, Equation::GP, |x, y| vortex_value(&p, x, y) + 0.1 * gaussian(x - 1.0, y)).unwrap();
    let n0 = g.norm();
    g.run(1000);
    assert!(((g.norm() - n0) / n0).abs() < 1e-8);
}

#[test]
fn stationary_vortex_modulus_is_static() {
    let p = profile(2, 10.0);
    let mut g = GridState::new(256, default_half_width(10.0), 1e-3, Equation::GP, |x, y| vortex_value(&p, x, y)).unwrap();
    let a0: Vec<f64> = g.psi.iter().map(|c| c.norm()).collect();
    g.run(1000);
    let dev = g.psi.iter().zip(&a0).map(|(c, a)| (c.norm() - a).abs()).fold(0.0, f64::max);
    let top = a0.iter().cloned().fold(0.0, f64::max);
    assert!(dev < 1e-4 * top, "deviation {dev} of max {top}");
}

#[test]
fn strang_splitting_is_second_order() {
    let init = |x: f64, y: f64| C64::new(1.5, 0.0) * gaussian(x - 0.7, y + 0.3) * C64::from_polar(1.0, 0.4 * x);
    let run = |dt: f64| {
        let mut g = GridState::new(64, 6.0, dt, Equation::GP, init).unwrap();
        g.run((0.4 / dt).round() as usize);
        g.psi
    };
    let dt = 0.02;
    let reference = run(dt / 8.0);
    let e1 = max_diff(&run(dt), &reference);
    let e2 = max_diff(&run(dt / 2.0), &reference);
    // Against the dt/8 reference the expected ratio is (1 − 1/64)/(1/4 − 1/64) ≈ 4.2.
    let ratio = e1 / e2;
    assert!(ratio > 3.5 && ratio < 4.8, "error ratio {ratio} ({e1}, {e2})");
}

#[test]
fn energy_is_conserved() {
    let p = profile(1, 6.0);
    let mut g = GridState::new(128, default_half_width(6.0), 1e-3, Equation::GP, |x, y| {
        vortex_value(&p, x, y) * (1.0 + 0.05 * (-(x - 1.0).powi(2) - y * y).exp())
    })
    .unwrap();
    let e0 = g.energy();
    g.run(10_000);
    assert!(((g.energy() - e0) / e0).abs() < 1e-6, "energy drift {}", (g.energy() - e0) / e0);
}

#[test]
fn linear_fit_recovers_a_line() {
    let x: Vec<f64> = (0..20).map(|k| k as f64 * 0.3).collect();
    let y: Vec<f64> = x.iter().map(|t| 0.7 * t - 1.2).collect();
    let (s, i, r2) = linear_fit(&x, &y);
    assert!((s - 0.7).abs() < 1e-12 && (i + 1.2).abs() < 1e-12 && (r2 - 1.0).abs() < 1e-12);
}

#[test]
fn growth_rate_is_linear_in_the_perturbation() {
    let p = profile(2, 4.0);
    let ctx = EvansContext::new(&p, EvansOptions::default());
    let lambda = polish_zero(&ctx.mode(2), C64::new(0.147, -2.041), 1e-3).unwrap();
    assert!(lambda.re > 0.1);
    let eig = eigenfunction_solve(&ModeSystem::new(&p, 2, lambda)).unwrap();
    let settings = GrowthSettings { n: 128, dt: 2e-3, ..GrowthSettings::default() };
    let a = growth_rate(&p, 2, &eig, 3.0, 1e-4, &settings).unwrap();
    let b = growth_rate(&p, 2, &eig, 3.0, 1e-5, &settings).unwrap();
    assert!(!a.non_exponential && !b.non_exponential);
    assert!((a.slope - lambda.re).abs() < 0.2 * lambda.re, "slope {} vs {}", a.slope, lambda.re);
    assert!((a.slope - b.slope).abs() < 0.02 * a.slope.abs(), "slopes {} and {}", a.slope, b.slope);
}
