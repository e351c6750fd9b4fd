use std::f64::consts::PI;
use std::sync::OnceLock;
use vortex_core::profile::{
    continue_branch, energy, k_from_n, midpoint_residual, physical_n, seed_profile, shoot_refine,
    Branch, ContinuationSettings, ProfileKind, SpeciesConstants, VortexProfile,
};

fn branch(m: u32) -> &'static Branch {
    static B1: OnceLock<Branch> = OnceLock::new();
    static B2: OnceLock<Branch> = OnceLock::new();
    let cell = if m == 1 { &B1 } else { &B2 };
    cell.get_or_init(|| Branch::compute(m, 35.0, &ContinuationSettings::default()).unwrap())
}

/// Gaussian-moment oracle: 2π∫(ε r^m e^{−r²/2})² r dr = ε²·π·m!.
fn seed_norm(m: u32, eps: f64) -> f64 {
    eps * eps * PI * (1..=m).map(f64::from).product::<f64>()
}

#[test]
fn seed_matches_closed_form() {
    let p = seed_profile(2, 0.1);
    assert_eq!(p.mu, 3.0);
    assert_eq!(p.d0, 0.1);
    for &r in &[0.3, 1.0, 1.7, 3.2] {
        let expect = 0.1 * r * r * (-0.5 * r * r as f64).exp();
        assert!((p.eval(r).0 - expect).abs() < 1e-15);
        assert!((p.sample(r).0 - expect).abs() < 1e-12);
    }
}

#[test]
fn zero_seed_is_degenerate() {
    let p = seed_profile(1, 0.0);
    assert!(p.is_degenerate());
    assert_eq!(p.kind, ProfileKind::Zero);
    assert_eq!(p.particle_number(), 0.0);
    assert_eq!(energy(&p), 0.0);
}

#[test]
fn seed_residual_is_cubic_in_eps() {
    // The seed solves the linear equation; the residual is the cubic term 2w³.
    let p = seed_profile(1, 0.1);
    let scaled = midpoint_residual(&p);
    let absolute = scaled * p.mu * p.max_w();
    assert!(absolute < 1e-3 && absolute > 1e-6, "residual {absolute}");
}

#[test]
fn seed_norm_and_energy() {
    for m in 1..=3 {
        let p = seed_profile(m, 0.1);
        let k = seed_norm(m, 0.1);
        assert!((p.k - k).abs() < 1e-10 * k, "m={m} K={} expected {k}", p.k);
        // E = (m+1)K + 2π ε⁴∫r^{4m+1}e^{−2r²}dr, the quartic term being O(ε⁴).
        let e = energy(&p);
        let mu0 = m as f64 + 1.0;
        let fact2m: f64 = (1..=2 * m).map(f64::from).product();
        let quartic = 2.0 * PI * 1e-4 * fact2m / (2.0 * 2f64.powi(2 * m as i32 + 1));
        assert!((e - mu0 * k - quartic).abs() < 1e-10 * e, "m={m} E={e} expected {}", mu0 * k + quartic);
    }
}

#[test]
fn continuation_to_seed_mu_returns_seed() {
    let seed = seed_profile(2, 0.1);
    let pts = continue_branch(&seed, 3.0, &ContinuationSettings::default()).unwrap();
    assert_eq!(pts.len(), 1);
    assert_eq!(pts[0].profile.kind, ProfileKind::Seed);
    assert_eq!(pts[0].profile.w, seed.w);
    assert!(continue_branch(&seed, 2.5, &ContinuationSettings::default()).is_err());
}

#[test]
fn branch_points_satisfy_invariants() {
    for m in [1, 2] {
        let b = branch(m);
        let mut prev_mu = m as f64 + 1.0;
        let mut prev_e = 0.0;
        for pt in &b.points {
            let p = &pt.profile;
            assert!(p.mu > prev_mu, "chain not monotone in mu");
            prev_mu = p.mu;
            p.check_invariants().unwrap();
            assert!(p.max_w().powi(2) < p.mu - m as f64);
            let res = midpoint_residual(p);
            assert!(res < 1e-8, "m={m} mu={} residual {res}", p.mu);
            let e = energy(p);
            assert!(e > prev_e, "energy not increasing along the branch");
            prev_e = e;
        }
        assert_eq!(b.points.last().unwrap().mu, 35.0);
    }
}

#[test]
fn mu10_amplitude_bound() {
    let p = branch(2).profile_at(10.0).unwrap();
    let w2 = p.max_w().powi(2);
    assert!(w2 > 0.0 && w2 < 8.0);
}

#[test]
fn sodium_atom_number_at_mu35() {
    let sp = SpeciesConstants::sodium();
    let k = branch(1).points.last().unwrap().profile.k;
    let n = physical_n(k, &sp);
    assert!(n > 3e5 && n < 3e6, "N = {n}");
    let back = k_from_n(n, &sp);
    assert!((back - k).abs() < 1e-10 * k);
}

#[test]
fn refine_is_idempotent_with_small_residual() {
    let p = branch(2).profile_at(12.3).unwrap();
    let a = shoot_refine(&p).unwrap();
    let b = shoot_refine(&a).unwrap();
    for (x, y) in a.w.iter().zip(&b.w) {
        assert!((x - y).abs() <= 1e-12 * x.abs().max(1e-300) + 1e-300, "{x} vs {y}");
    }
    assert!(midpoint_residual(&b) < 1e-8);
}

#[test]
fn quadratic_origin_behaviour_for_m2() {
    let p = branch(2).points.last().unwrap().profile.clone();
    for &r in &[1e-4, 1e-3, 1e-2] {
        let (w, _) = p.eval(r);
        let rel = (w - p.d0 * r * r).abs() / w;
        // Next Frobenius term is −μ r²/(2(m+1)).
        assert!(rel < 35.0 / 6.0 * r * r * 1.01 + 1e-12, "r={r} rel={rel}");
    }
    assert_eq!(p.eval(0.0), (0.0, 0.0));
}

#[test]
fn maximizer_has_zero_slope() {
    let p = branch(1).profile_at(5.0).unwrap();
    let rp = p.peak_radius();
    assert!(p.eval(rp).1.abs() < 1e-6);
    assert!(rp > 1.0 / 10f64.sqrt() && rp < 10f64.sqrt());
}

#[test]
fn seam_continuity() {
    for m in [1, 2] {
        let p = branch(m).profile_at(20.0).unwrap();
        let r = p.r_max();
        let (a, da) = p.eval(r * (1.0 - 1e-13));
        let (b, db) = p.eval(r * (1.0 + 1e-13));
        assert!((a - b).abs() < 1e-9);
        assert!((da - db).abs() < 1e-9);
        let (c, _) = p.eval(vortex_core::profile::R_MIN * (1.0 - 1e-9));
        let (d, _) = p.eval(vortex_core::profile::R_MIN * (1.0 + 1e-9));
        assert!((c - d).abs() < 1e-9);
    }
}

#[test]
fn continuation_is_reproducible_under_step_halving() {
    let s1 = ContinuationSettings::default();
    let s2 = ContinuationSettings { ds_init: s1.ds_init / 2.0, ..s1.clone() };
    let a = Branch::compute(1, 8.0, &s1).unwrap();
    let b = Branch::compute(1, 8.0, &s2).unwrap();
    for &mu in &[4.0, 6.5, 8.0] {
        let (pa, pb) = (a.profile_at(mu).unwrap(), b.profile_at(mu).unwrap());
        for i in 1..=10 {
            let r = 0.4 * i as f64;
            assert!((pa.eval(r).0 - pb.eval(r).0).abs() < 1e-6);
        }
    }
}

#[test]
fn near_bifurcation_profile_is_linear_mode() {
    for m in [1u32, 2] {
        let mu = m as f64 + 1.0 + 1e-2;
        let p = branch(m).profile_at(mu).unwrap();
        let grid: Vec<f64> = (1..400).map(|i| i as f64 * 0.02).collect();
        let w: Vec<f64> = grid.iter().map(|&r| p.eval(r).0).collect();
        let w0: Vec<f64> = grid.iter().map(|&r| r.powi(m as i32) * (-0.5 * r * r).exp()).collect();
        let dot = |a: &[f64], b: &[f64]| grid.iter().enumerate().map(|(i, r)| a[i] * b[i] * r).sum::<f64>();
        let c = dot(&w, &w0) / dot(&w0, &w0);
        let diff: Vec<f64> = w.iter().zip(&w0).map(|(a, b)| a - c * b).collect();
        let rel = (dot(&diff, &diff) / dot(&w, &w)).sqrt();
        assert!(rel < 5e-2, "m={m} rel={rel}");
    }
}

#[test]
fn json_round_trip() {
    let p = branch(1).profile_at(7.0).unwrap();
    let text = p.to_json().unwrap();
    assert!(text.contains("\"K\"") && text.contains("\"A\""));
    let q = VortexProfile::from_json(&text).unwrap();
    assert_eq!(q.w, p.w);
    assert_eq!(q.sample(1.3), p.sample(1.3));
}
