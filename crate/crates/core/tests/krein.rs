use proptest::prelude::*;
use std::collections::BTreeMap;
use std::sync::OnceLock;
use vortex_core::evans::{EvansContext, EvansOptions};
use vortex_core::krein::{
    check_eigenvalue_bound, count_unstable, csv_header, default_grid, diagram_rows, fit_tail, negative_seeds,
    seed_table, seed_table_window, signature_at, track_branch, BranchTrack, EigRecord, EventKind, KreinError,
    ProfileCache, Signature, TrackEvent, TrackSettings,
};
use vortex_core::profile::{Branch, ContinuationSettings};
use vortex_core::C64;

fn cache(m: u32) -> &'static ProfileCache {
    static C1: OnceLock<ProfileCache> = OnceLock::new();
    static C2: OnceLock<ProfileCache> = OnceLock::new();
    let cell = if m == 1 { &C1 } else { &C2 };
    cell.get_or_init(|| ProfileCache::new(Branch::compute(m, 12.0, &ContinuationSettings::default()).unwrap()))
}

fn rec(j: i32, mu: f64, lambda: C64, signature: Signature) -> EigRecord {
    EigRecord { lambda, j, mu, multiplicity: 1, signature }
}

/// Linear-limit eigenvalues at μ = m + 1 for mode j > 0 with their energies,
/// enumerated directly from the two families: u-family −(j + 2n) with energy
/// j + 2n; v-family k + 2n with energy k + 2n, k = −j (j < m) or j − 2m.
fn family_oracle(m: i32, j: i32, y: i32) -> BTreeMap<(i32, i32), u32> {
    let mut out = BTreeMap::new();
    let k = if j < m { -j } else { j - 2 * m };
    for n in 0..=y {
        let e = j + 2 * n;
        if e <= y {
            *out.entry((-e, e.signum())).or_insert(0) += 1;
        }
        let e = k + 2 * n;
        if e.abs() <= y {
            *out.entry((e, e.signum())).or_insert(0) += 1;
        }
    }
    out
}

#[test]
fn seed_table_matches_the_two_families() {
    for m in 1..=3u32 {
        for j in 1..=2 * m as i32 + 1 {
            let mut got: BTreeMap<(i32, i32), u32> = BTreeMap::new();
            for r in seed_table_window(m, j..=j, 6.0) {
                assert_eq!(r.j, j);
                assert_eq!(r.mu, m as f64 + 1.0);
                let s = match r.signature {
                    Signature::Positive => 1,
                    Signature::Negative => -1,
                    Signature::AtOrigin => 0,
                    other => panic!("unexpected seed signature {other}"),
                };
                *got.entry((r.lambda.im as i32, s)).or_insert(0) += 1;
            }
            assert_eq!(got, family_oracle(m as i32, j, 6), "m={m} j={j}");
        }
    }
}

#[test]
fn negative_seed_sets() {
    let key = |v: Vec<EigRecord>| v.iter().map(|r| (r.j, r.lambda.im as i32)).collect::<Vec<_>>();
    assert_eq!(key(negative_seeds(1)), vec![(1, -1)]);
    assert_eq!(key(negative_seeds(2)), vec![(1, -1), (2, -2), (3, -1)]);
    assert_eq!(seed_table(2).iter().filter(|r| r.j == 2 && r.lambda.im == -2.0).count(), 2);
}

#[test]
fn signatures_flip_and_format() {
    assert_eq!(Signature::Positive.flipped(), Signature::Negative);
    assert_eq!(Signature::Zero.flipped(), Signature::Zero);
    assert_eq!(serde_json::to_string(&Signature::AtOrigin).unwrap(), "\"at-origin\"");
    assert_eq!(EventKind::ZeroCrossing.as_str(), "zero-crossing");
}

#[test]
fn eigenvalue_bound() {
    assert!(check_eigenvalue_bound(1, 5.0, C64::new(11.9, 0.0)).is_ok());
    assert!(matches!(check_eigenvalue_bound(1, 5.0, C64::new(-12.0, 1.0)), Err(KreinError::BoundViolation { .. })));
}

#[test]
fn grid_starts_just_above_the_linear_limit() {
    let g = default_grid(2, 4.0, 0.3);
    assert_eq!(g[0], 3.001);
    assert_eq!(*g.last().unwrap(), 4.0);
    assert!(g.windows(2).all(|w| w[1] > w[0]));
}

fn synthetic_track(f: impl Fn(f64) -> f64) -> BranchTrack {
    let records: Vec<EigRecord> =
        (0..=200).map(|k| 3.0 + 0.16 * k as f64).map(|mu| rec(1, mu, C64::new(0.0, f(mu)), Signature::Positive)).collect();
    BranchTrack { j: 1, seed: records[0], records, events: Vec::new() }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn fit_recovers_algebraic_tails(b in -4.0f64..4.0, c in 0.3f64..8.0, p in 0.3f64..2.5) {
        let t = synthetic_track(|mu| b - c * mu.powf(-p));
        let f = fit_tail(&t, 15.0).unwrap();
        prop_assert!((f.b - b).abs() < 1e-4 && (f.p - p).abs() < 1e-3 && (f.c - c).abs() < 1e-3 * c.max(1.0),
            "fit {f:?} vs ({b}, {c}, {p})");
        prop_assert!(!f.anomalous && !f.constant);
    }
}

#[test]
fn fit_flags_constant_and_anomalous_data() {
    let f = fit_tail(&synthetic_track(|_| -1.0), 15.0).unwrap();
    assert!(f.constant && f.b == -1.0);
    // Decay exponent 0.5 below μ = 25 and 3 above, matched continuously.
    let tail = |mu: f64| if mu < 25.0 { 1.0 - mu.powf(-0.5) } else { 1.0 - 25f64.powf(2.5) * mu.powi(-3) };
    let f = fit_tail(&synthetic_track(tail), 15.0).unwrap();
    assert!(f.anomalous, "{f:?}");
    assert!(fit_tail(&synthetic_track(|mu| mu), 40.0).is_err());
}

#[test]
fn diagram_rows_attach_events() {
    let seed = rec(2, 3.0, C64::new(0.0, -2.0), Signature::Negative);
    let a = rec(2, 3.05, C64::new(0.0, -2.01), Signature::Negative);
    let b = rec(2, 3.1, C64::new(0.01, -2.02), Signature::Zero);
    let partner = Some(rec(2, 3.1, C64::new(0.0, -2.02), Signature::Positive));
    let t = BranchTrack {
        j: 2,
        seed,
        records: vec![seed, a, b],
        events: vec![TrackEvent { mu: 3.1, kind: EventKind::Split, lambda: b.lambda, partner, tracked_signature: Signature::Negative }],
    };
    let rows = diagram_rows(&[t.clone()]);
    assert_eq!(csv_header(), "mu,j,re_lambda,im_lambda,signature,event");
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0], "3,2,0.000000000000e0,-2.000000000000e0,negative,");
    assert!(rows[2].ends_with(",zero,split"), "{}", rows[2]);
    assert!(t.parity_violations().is_empty());
    assert_eq!(t.bubbles(), vec![(3.1, 3.1)]);
}

#[test]
fn contour_counts_distinguish_stable_and_unstable_vortices() {
    let p1 = cache(1).get(5.0).unwrap();
    let c1 = count_unstable(&EvansContext::new(&p1, EvansOptions::default()).mode(1), 5.0, 1, 6.0, 0.02).unwrap();
    assert_eq!(c1.n_su, 0);
    let p2 = cache(2).get(4.0).unwrap();
    let c2 = count_unstable(&EvansContext::new(&p2, EvansOptions::default()).mode(2), 4.0, 2, 6.0, 0.02).unwrap();
    assert_eq!(c2.n_su, 2);
}

#[test]
fn signature_of_the_negative_m1_branch() {
    let p = cache(1).get(5.0).unwrap();
    let ctx = EvansContext::new(&p, EvansOptions::default());
    let scan = vortex_core::evans::axis_zero_scan(&ctx.mode(1), -1.0, 0.0, 201).unwrap();
    // At μ = 5 the branch from −i sits between −1 and 0; λ = −i itself is the positive GGV eigenvalue.
    let beta = scan.zeros.iter().map(|z| z.im).find(|&b| b > -0.95).unwrap();
    assert_eq!(signature_at(&p, 1, C64::new(0.0, beta)).unwrap().0, Signature::Negative);
    assert_eq!(signature_at(&p, 1, C64::new(0.0, -1.0)).unwrap().0, Signature::Positive);
}

#[test]
fn m2_mode2_track_has_a_bubble_with_parity() {
    let seed = negative_seeds(2).into_iter().find(|s| s.j == 2).unwrap();
    let grid = default_grid(2, 5.5, 0.05);
    let t = track_branch(cache(2), 2, &seed, &grid, &TrackSettings::default()).unwrap();
    let bubbles = t.bubbles();
    assert!(!bubbles.is_empty(), "{:?}", t.events);
    assert!((bubbles[0].1 - 4.69).abs() < 0.1, "{bubbles:?}");
    assert_eq!(t.complete_cycles(), 1);
    assert!(t.parity_violations().is_empty() && t.signature_violations().is_empty());
}

#[test]
fn m1_mode1_track_stays_on_the_axis() {
    let seed = negative_seeds(1)[0];
    let grid = default_grid(1, 6.0, 0.1);
    let t = track_branch(cache(1), 1, &seed, &grid, &TrackSettings::default()).unwrap();
    assert!(t.bubbles().is_empty());
    assert!(t.records.iter().all(|r| r.on_axis() && r.signature == Signature::Negative));
    assert_eq!(t.records.last().unwrap().mu, 6.0);
}
