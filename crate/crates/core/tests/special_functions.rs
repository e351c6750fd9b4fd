use proptest::prelude::*;
use vortex_core::special::{
    confluent_m, laguerre, linear_mode_eval, linear_radial_solutions, LinearMode,
};

/// Finite-difference Wronskian w1 w2' − w1' w2 from fourth-order central differences.
fn fd_wronskian(m: u32, mu: f64, r: f64) -> f64 {
    let h = 1e-3 * r;
    let eval = |x: f64| {
        let s = linear_radial_solutions(m, mu, x).unwrap();
        (s.w1, s.w2)
    };
    let (a2, b2) = eval(r + 2.0 * h);
    let (a1, b1) = eval(r + h);
    let (am1, bm1) = eval(r - h);
    let (am2, bm2) = eval(r - 2.0 * h);
    let d1 = (-a2 + 8.0 * a1 - 8.0 * am1 + am2) / (12.0 * h);
    let d2 = (-b2 + 8.0 * b1 - 8.0 * bm1 + bm2) / (12.0 * h);
    let (w1, w2) = eval(r);
    w1 * d2 - d1 * w2
}

fn off_spectrum(m: u32, mu: f64) -> bool {
    let k = (mu - (m as f64 + 1.0)) / 2.0;
    (k - k.round()).abs() > 0.03 || k < -0.1
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn wronskian_closed_form_matches_finite_differences(
        m in 1u32..=3,
        mu in 1.0f64..10.0,
        r in 0.1f64..5.0,
    ) {
        prop_assume!(off_spectrum(m, mu));
        let closed = linear_radial_solutions(m, mu, r).unwrap().wronskian;
        let fd = fd_wronskian(m, mu, r);
        prop_assert!((fd - closed).abs() < 1e-6 * closed.abs(), "fd={fd} closed={closed}");
    }
}

#[test]
fn wronskian_example_m1_mu3() {
    let closed = linear_radial_solutions(1, 3.0, 1.0).unwrap().wronskian;
    let fd = fd_wronskian(1, 3.0, 1.0);
    assert!((fd - closed).abs() < 1e-6 * closed.abs());
}

#[test]
fn linear_modes_solve_linear_equation() {
    // −w'' − w'/r + m²w/r² + r²w − 2μ_n w = 0 with μ_n = m + 1 + 2n.
    // Five-point stencils at h = 1e-3: the three-point stencil at h = 1e-4 has a
    // rounding floor of about 4·eps·|w|/h² ≈ 1e-7·|w|, above the 1e-8 target.
    let h = 1e-3;
    for m in 1..=3u32 {
        for n in 0..=3u32 {
            let mode = LinearMode::new(m, n);
            let mu = mode.frequency() as f64;
            for i in 0..20 {
                let r = 0.2 + 0.2 * i as f64;
                let w = mode.eval(r);
                let (p1, m1) = (mode.eval(r + h), mode.eval(r - h));
                let (p2, m2) = (mode.eval(r + 2.0 * h), mode.eval(r - 2.0 * h));
                let wp = (-p2 + 8.0 * p1 - 8.0 * m1 + m2) / (12.0 * h);
                let wpp = (-p2 + 16.0 * p1 - 30.0 * w + 16.0 * m1 - m2) / (12.0 * h * h);
                let pot = (m * m) as f64 / (r * r) + r * r;
                let res = -wpp - wp / r + pot * w - 2.0 * mu * w;
                assert!(res.abs() < 1e-8, "m={m} n={n} r={r} res={res}");
            }
        }
    }
}

#[test]
fn laguerre_zero_counts() {
    for m in 1..=3u32 {
        for n in 0..=4u32 {
            let mut count = 0;
            let mut prev = laguerre(n, m as f64, 1e-6);
            let steps = 20_000;
            for i in 1..=steps {
                let r = 8.0 * i as f64 / steps as f64;
                let v = laguerre(n, m as f64, r * r);
                if v.signum() != prev.signum() {
                    count += 1;
                }
                prev = v;
            }
            assert_eq!(count, n, "m={m} n={n}");
        }
    }
}

#[test]
fn ground_mode_maximizer_is_one() {
    // Bracketed scan of the derivative of r e^{−r²/2}.
    let mode = LinearMode::new(1, 0);
    assert_eq!(linear_mode_eval(mode, 0.0), 0.0);
    let (mut lo, mut hi) = (0.5, 1.5);
    let d = |r: f64| (linear_mode_eval(mode, r + 1e-6) - linear_mode_eval(mode, r - 1e-6)) / 2e-6;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if d(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    assert!((lo - 1.0).abs() < 1e-6);
}

#[test]
fn one_node_mode_has_one_zero() {
    let mode = LinearMode::new(2, 1);
    let mut sign_changes = 0;
    let mut prev = mode.eval(1e-3);
    for i in 1..4000 {
        let v = mode.eval(1e-3 + i as f64 * 2e-3);
        if v * prev < 0.0 {
            sign_changes += 1;
        }
        prev = v;
    }
    assert_eq!(sign_changes, 1);
}

#[test]
fn m_of_equal_parameters_is_exponential() {
    for &x in &[0.0, 1.0, 10.0, 45.0] {
        let v = confluent_m(1.7, 1.7, x).unwrap();
        assert!((v / x.exp() - 1.0).abs() < 1e-12);
    }
}
