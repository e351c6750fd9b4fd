use std::f64::consts::PI;
use std::sync::OnceLock;
use vortex_core::profile::{Branch, ContinuationSettings, VortexProfile};
use vortex_core::symmetry::{
    breather_direction, breather_eigen_check, breather_transform, field_residual, ggv_check, ggv_eigenfunction,
    mode_residual, phase_double_zero_check, residual_radii, symmetry_report, vortex_field, BoostDirection,
    BoostTransform, SymmetryError,
};
use vortex_core::C64;

fn profile(m: u32, mu: f64) -> VortexProfile {
    static B1: OnceLock<Branch> = OnceLock::new();
    static B2: OnceLock<Branch> = OnceLock::new();
    let cell = if m == 1 { &B1 } else { &B2 };
    cell.get_or_init(|| Branch::compute(m, 35.0, &ContinuationSettings::default()).unwrap()).profile_at(mu).unwrap()
}

fn times() -> Vec<f64> {
    (0..50).map(|k| -1.3 + 0.057 * k as f64).collect()
}

fn all_transforms() -> Vec<BoostTransform> {
    vec![
        BoostTransform::identity(1.0, 2),
        BoostTransform::talanov(0.2, 1.3, 2),
        BoostTransform::from_direction(BoostDirection::NlsToGp { nu: 0.5 }),
        BoostTransform::from_direction(BoostDirection::GpToNls { omega: 1.0 }),
        BoostTransform::from_direction(BoostDirection::GpToGp { amplitude: 0.4, omega: 1.0 }),
        BoostTransform::breather(-0.7, 1.5, 2),
        BoostTransform::compose(BoostTransform::gp_to_nls(1.0, 2), BoostTransform::nls_to_gp(1.0, 2)).unwrap(),
        BoostTransform::compose(BoostTransform::breather(0.3, 1.0, 2), BoostTransform::breather(-0.5, 1.0, 2)).unwrap(),
    ]
}

#[test]
fn coefficients_solve_their_ode() {
    for tr in all_transforms() {
        for t in times() {
            let res = tr.ode_residuals(t, 5e-4);
            // Relative to the size of the terms of the b equation.
            let (b, c, _) = tr.coefficients(t);
            let size = 1.0 + b * b + tr.omega2 * c.powi(4) + tr.nu2;
            assert!(res.iter().all(|r| r.abs() < 1e-10 * size), "{:?} at t={t}: {res:?}", tr.kind);
        }
    }
}

#[test]
fn identity_and_talanov_closed_forms() {
    let id = BoostTransform::identity(1.0, 2);
    let tal = BoostTransform::talanov(0.5, 2.0, 2);
    for t in times() {
        assert_eq!(id.coefficients(t), (0.0, 1.0, t));
        let (b, c, tau) = tal.coefficients(t);
        let d = 1.0 - 0.5 * t;
        assert!((b - 0.5 / d).abs() < 1e-14 && (c - 2.0 / d).abs() < 1e-14 && (tau - 4.0 * t / d).abs() < 1e-13);
    }
}

#[test]
fn breather_is_periodic() {
    let omega = 1.3;
    let tr = BoostTransform::breather(0.6, omega, 2);
    let period = PI / omega;
    for t in times() {
        let (b0, c0, t0) = tr.coefficients(t);
        let (b1, c1, t1) = tr.coefficients(t + period);
        assert!((b1 - b0).abs() < 1e-12 && (c1 - c0).abs() < 1e-12);
        assert!((t1 - t0 - period).abs() < 1e-12, "tau advance {}", t1 - t0);
    }
    // The map is the identity at t = 0 up to the dilation c(0)² = 1/(√(1+ε²)+ε).
    let (b, c, tau) = tr.coefficients(0.0);
    assert!(b.abs() < 1e-15 && tau.abs() < 1e-15);
    assert!((c.powi(-2) - ((1.0f64 + 0.36).sqrt() + 0.6)).abs() < 1e-14);
}

#[test]
fn composition_rejects_mismatched_traps() {
    let r = BoostTransform::compose(BoostTransform::nls_to_gp(1.0, 2), BoostTransform::nls_to_gp(1.0, 2));
    assert!(matches!(r, Err(SymmetryError::InvalidArgument(_))));
}

#[test]
fn transformed_vortex_solves_the_target_equation() {
    let p = profile(1, 6.0);
    let v = vortex_field(&p);
    let points: Vec<(f64, f64, f64)> =
        [(0.0, 1.1, 0.4), (0.3, -0.7, 1.6), (0.9, 2.0, -0.5), (1.7, 0.2, -1.2)].into_iter().collect();
    assert!(field_residual(&*v, 1.0, 1.0, 2.0, &points, 1e-3, 1e-3) < 1e-6);
    let gp_to_gp = [
        BoostTransform::breather(0.3, 1.0, 2),
        BoostTransform::compose(BoostTransform::gp_to_nls(1.0, 2), BoostTransform::nls_to_gp(1.0, 2)).unwrap(),
    ];
    for tr in &gp_to_gp {
        let u = breather_transform(&*v, tr, 2.0).unwrap();
        let r = field_residual(&*u, tr.nu2, 1.0, 2.0, &points, 1e-3, 1e-3);
        assert!(r < 1e-6, "{:?}: residual {r}", tr.kind);
    }
    let to_free = BoostTransform::gp_to_nls(1.0, 2);
    let u = breather_transform(&*v, &to_free, 2.0).unwrap();
    assert!(field_residual(&*u, 0.0, 1.0, 2.0, &points, 1e-3, 1e-3) < 1e-6);
}

#[test]
fn non_critical_nonlinearity_is_rejected() {
    let p = profile(1, 6.0);
    let v = vortex_field(&p);
    let tr = BoostTransform::breather(0.3, 1.0, 2);
    assert!(matches!(breather_transform(&*v, &tr, 3.0), Err(SymmetryError::NonCritical { .. })));
    assert!(breather_transform(&*v, &BoostTransform::identity(1.0, 2), 3.0).is_ok());
}

#[test]
fn breather_direction_matches_closed_form() {
    // Oracle: y± = −¼[w + r w′ ± (r² − μ) w].
    for (m, mu) in [(1, 5.0), (2, 12.0)] {
        let p = profile(m, mu);
        for r in [0.5, 1.4, 2.3, 3.1] {
            let (yp, ym) = breather_direction(&p, r);
            let (w, wp) = p.eval(r);
            let ep = -0.25 * (w + r * wp + (r * r - mu) * w);
            let em = -0.25 * (w + r * wp - (r * r - mu) * w);
            let scale = ep.abs() + em.abs();
            assert!((yp - ep).norm() < 1e-6 * scale, "m={m} r={r}: {yp} vs {ep}");
            assert!((ym - em).norm() < 1e-6 * scale, "m={m} r={r}: {ym} vs {em}");
        }
    }
}

#[test]
fn ggv_closed_form_solves_the_mode_system() {
    let p = profile(2, 15.0);
    let radii = residual_radii(&p, 40);
    for sign in [1, -1] {
        let y = |r: f64| {
            let (a, b) = ggv_eigenfunction(&p, sign, r);
            (C64::new(a, 0.0), C64::new(b, 0.0))
        };
        assert!(mode_residual(&p, 1, C64::new(0.0, sign as f64), &y, &radii, 1e-3) < 1e-6);
        // Using the wrong eigenvalue leaves an O(1) residual.
        assert!(mode_residual(&p, 1, C64::new(0.0, -sign as f64), &y, &radii, 1e-3) > 1e-2);
    }
}

#[test]
fn forced_eigenvalue_checks_pass() {
    for (m, mu) in [(1, 5.0), (1, 30.0), (2, 5.0), (2, 15.0)] {
        let p = profile(m, mu);
        let phase = phase_double_zero_check(&p).unwrap();
        assert!(phase.pass && phase.multiplicity == 2, "{phase:?}");
        let ggv = ggv_check(&p).unwrap();
        assert!(ggv.pass, "{ggv:?}");
        let br = breather_eigen_check(&p).unwrap();
        assert!(br.pass && br.residual < 1e-6, "{br:?}");
    }
    assert!(symmetry_report(&profile(2, 30.0)).unwrap().pass());
}
