//! Acceptance checks. Each criterion prints one PASS/FAIL line; the process
//! exits non-zero if any criterion fails that is not marked as an expected
//! failure or as extended.

use proptest::strategy::{Strategy, ValueTree};
use proptest::test_runner::TestRunner;
use std::time::Instant;
use vortex_core::evans::{axis_zero_scan, polish_zero, AxisZero, EvansContext, EvansOptions};
use vortex_core::krein::{
    completeness_certificate, count_unstable, default_grid, fit_tail, negative_seeds, seed_signatures, seed_table,
    track_all, BranchTrack, CertificateReport, CertificateSettings, EigRecord, EventKind, ProfileCache, Signature,
    TrackSettings, DEFAULT_FIT_MU_MIN,
};
use vortex_core::linearized::{
    adjoint_start_radius, eigenfunction_solve, infinity_init_adjoint, integrate_scaled, origin_init, plucker_defect,
    Direction, ModeSystem,
};
use vortex_core::profile::{Branch, ContinuationSettings, VortexProfile};
use vortex_core::sim::{growth_rate, GrowthSettings};
use vortex_core::special::linear_radial_solutions;
use vortex_core::symmetry::symmetry_report;
use vortex_core::C64;

const MU_MAX: f64 = 35.0;
const STEP: f64 = 0.05;

#[derive(Clone, Copy, PartialEq)]
enum Kind {
    Required,
    /// Known failure with an analysis on record.
    Expected,
    /// Optional criterion.
    Extended,
}

struct Outcome {
    id: &'static str,
    pass: bool,
    kind: Kind,
    detail: String,
}

fn report(out: &mut Vec<Outcome>, id: &'static str, pass: bool, kind: Kind, detail: String) {
    let tag = match (pass, kind) {
        (true, _) => "PASS",
        (false, Kind::Required) => "FAIL",
        (false, Kind::Expected) => "FAIL (expected)",
        (false, Kind::Extended) => "FAIL (extended)",
    };
    println!("criterion {id:>2}: {tag} {detail}");
    out.push(Outcome { id, pass, kind, detail });
}

fn draw<S: Strategy>(runner: &mut TestRunner, s: S) -> S::Value {
    s.new_tree(runner).expect("strategy").current()
}

/// Eigenvalues of the zero profile at μ for mode j with |Im λ| ≤ y.
fn linear_eigenvalues(m: u32, j: i32, mu: f64, y: f64) -> Vec<f64> {
    let m = m as i32;
    let mut out: Vec<f64> = (0..40)
        .flat_map(|n| [mu - (j + m + 1 + 2 * n) as f64, ((j - m).abs() + 1 + 2 * n) as f64 - mu])
        .filter(|v| v.abs() <= y)
        .collect();
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    out
}

fn expand(zeros: &[AxisZero]) -> Vec<f64> {
    zeros.iter().flat_map(|z| std::iter::repeat_n(z.im, z.mult as usize)).collect()
}

fn criterion_1(out: &mut Vec<Outcome>) {
    let t0 = Instant::now();
    let mut worst: f64 = 0.0;
    let mut mismatched = Vec::new();
    for m in 1..=2u32 {
        for j in 0..=4 {
            for mu in [m as f64 + 1.37, m as f64 + 3.71] {
                let p = VortexProfile::zero(m, mu);
                let ctx = EvansContext::new(&p, EvansOptions::default());
                let got = match axis_zero_scan(&ctx.mode(j), -6.0, 6.0, 601) {
                    Ok(s) => expand(&s.zeros),
                    Err(e) => {
                        mismatched.push(format!("m={m} j={j} mu={mu}: {e}"));
                        continue;
                    }
                };
                let expect = linear_eigenvalues(m, j, mu, 6.0);
                if got.len() != expect.len() {
                    mismatched.push(format!("m={m} j={j} mu={mu}: {} zeros, expected {}", got.len(), expect.len()));
                    continue;
                }
                worst = got.iter().zip(&expect).map(|(g, e)| (g - e).abs()).fold(worst, f64::max);
            }
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    let pass = mismatched.is_empty() && worst < 5e-6 && secs < 60.0;
    report(out, "1", pass, Kind::Required, format!("max |dλ| = {worst:.2e}, {secs:.1} s {mismatched:?}"));
}

fn criterion_2(out: &mut Vec<Outcome>) {
    let mut runner = TestRunner::deterministic();
    let mut worst: f64 = 0.0;
    let mut n = 0;
    while n < 100 {
        let (m, mu, r) = draw(&mut runner, (1u32..=3, 1.0f64..10.0, 0.1f64..5.0));
        let k = (mu - (m as f64 + 1.0)) / 2.0;
        if (k - k.round()).abs() < 0.03 && k > -0.1 {
            continue;
        }
        n += 1;
        let eval = |x: f64| {
            let s = linear_radial_solutions(m, mu, x).unwrap();
            (s.w1, s.w2)
        };
        let h = 1e-3 * r;
        let (a2, b2) = eval(r + 2.0 * h);
        let (a1, b1) = eval(r + h);
        let (am1, bm1) = eval(r - h);
        let (am2, bm2) = eval(r - 2.0 * h);
        let d1 = (-a2 + 8.0 * a1 - 8.0 * am1 + am2) / (12.0 * h);
        let d2 = (-b2 + 8.0 * b1 - 8.0 * bm1 + bm2) / (12.0 * h);
        let (w1, w2) = eval(r);
        let closed = linear_radial_solutions(m, mu, r).unwrap().wronskian;
        worst = worst.max(((w1 * d2 - d1 * w2) - closed).abs() / closed.abs());
    }
    report(out, "2", worst < 1e-6, Kind::Required, format!("max relative difference {worst:.2e} over 100 cases"));
}

fn criterion_3(out: &mut Vec<Outcome>, caches: &[ProfileCache; 2]) {
    let t0 = Instant::now();
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    for cache in caches {
        for mu in [5.0, 15.0, 30.0] {
            let m = cache.m();
            match cache.get(mu).map_err(|e| e.to_string()).and_then(|p| symmetry_report(&p).map_err(|e| e.to_string())) {
                Ok(r) => {
                    let values = [r.phase.value, r.ggv.values[0], r.ggv.values[1], r.breather.values[0], r.breather.values[1]];
                    worst = values.iter().chain(&r.ggv.residuals).fold(worst, |a, &b| a.max(b));
                    let ok = r.phase.multiplicity == 2
                        && r.phase.pass
                        && values.iter().all(|&v| v < 1e-6)
                        && r.ggv.residuals.iter().all(|&v| v < 1e-6)
                        && r.pass();
                    if !ok {
                        failures.push(format!("m={m} mu={mu}"));
                    }
                }
                Err(e) => failures.push(format!("m={m} mu={mu}: {e}")),
            }
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    let pass = failures.is_empty() && secs < 300.0;
    report(out, "3", pass, Kind::Required, format!("max mantissa/residual {worst:.2e}, {secs:.1} s {failures:?}"));
}

fn tracks_for(cache: &ProfileCache, seeds: &[EigRecord]) -> Vec<Result<BranchTrack, String>> {
    let grid = default_grid(cache.m(), MU_MAX, STEP);
    track_all(cache, seeds, &grid, &TrackSettings::default()).into_iter().map(|r| r.map_err(|e| e.to_string())).collect()
}

fn criterion_4(out: &mut Vec<Outcome>, cache: &ProfileCache, tracks: &[BranchTrack], errors: &[String]) {
    let m = cache.m() as f64;
    let mut violations = Vec::new();
    let mut profiles: Vec<std::sync::Arc<VortexProfile>> =
        cache.branch().points.iter().filter(|bp| !bp.profile.is_degenerate()).map(|bp| bp.profile.clone()).collect();
    for k in 1..=((MU_MAX - m - 1.0) / 0.25) as usize {
        match cache.get(m + 1.0 + 0.25 * k as f64) {
            Ok(p) => profiles.push(p),
            Err(e) => violations.push(e.to_string()),
        }
    }
    let checked = profiles.len();
    for p in &profiles {
        let w2 = p.max_w().powi(2);
        if !(p.mu > m + 1.0 && w2 < p.mu - m) {
            violations.push(format!("profile mu={} max w^2={w2}", p.mu));
        }
    }
    let mut n_eig = 0;
    for r in tracks.iter().flat_map(|t| &t.records) {
        n_eig += 1;
        if r.lambda.re.abs() >= 3.0 * (r.mu - m) {
            violations.push(format!("eigenvalue {} at mu={}", r.lambda, r.mu));
        }
    }
    // Bound violations inside the tracker surface as track errors.
    violations.extend(errors.iter().cloned());
    report(
        out,
        "4",
        violations.is_empty(),
        Kind::Required,
        format!("{checked} profiles, {n_eig} eigenvalues, {} violations {violations:?}", violations.len()),
    );
}

fn criterion_5(out: &mut Vec<Outcome>, cache: &ProfileCache) {
    let settings = CertificateSettings::default();
    let mut counts = Vec::new();
    for mu in [5.0, 15.0, 25.0, 35.0] {
        let n = cache
            .get(mu)
            .map_err(|e| e.to_string())
            .and_then(|p| {
                let ctx = EvansContext::new(&p, EvansOptions::default());
                count_unstable(&ctx.mode(1), mu, 1, settings.y_min, settings.axis_spacing).map_err(|e| e.to_string())
            })
            .map(|c| c.n_su);
        counts.push((mu, n));
    }
    let pass = counts.iter().all(|(_, n)| matches!(n, Ok(0)));
    report(out, "5", pass, Kind::Required, format!("n_su by mu: {counts:?}"));
}

fn criterion_6(out: &mut Vec<Outcome>, tracks: &[BranchTrack], cert: Option<&CertificateReport>) {
    let mut problems = Vec::new();
    let j2 = tracks.iter().find(|t| t.j == 2);
    let cycles = j2.map_or(0, |t| t.complete_cycles());
    if cycles < 2 {
        problems.push(format!("{cycles} complete cycles"));
    }
    match cert {
        Some(c) => {
            for s in &c.counts {
                let inside = s.j == 2 && j2.is_some_and(|t| t.off_axis_at(s.mu));
                let expected = if inside { 2 } else { 0 };
                if s.n_su != expected {
                    problems.push(format!("mu={:.3} j={}: n_su={} expected {expected}", s.mu, s.j, s.n_su));
                }
            }
        }
        None => problems.push("no certificate counts".into()),
    }
    let j3 = tracks.iter().find(|t| t.j == 3);
    let crossing = j3.and_then(|t| {
        t.events.iter().find(|e| e.kind == EventKind::ZeroCrossing && (e.mu - 5.0).abs() < 1.0).map(|e| {
            let before = t.records.iter().rev().find(|r| r.mu < e.mu).map(|r| r.signature);
            let after = t.records.iter().find(|r| r.mu > e.mu).map(|r| r.signature);
            (e.mu, before, after)
        })
    });
    match crossing {
        Some((_, Some(b), Some(a))) if b.is_definite() && a == b.flipped() => {}
        other => problems.push(format!("j=3 zero crossing {other:?}")),
    }
    if let Some(t) = j3 {
        if t.records.iter().any(|r| !r.on_axis()) {
            problems.push("j=3 track leaves the axis".into());
        }
    }
    let splits: usize = tracks.iter().map(|t| t.events.iter().filter(|e| e.kind == EventKind::Split).count()).sum();
    let parity: usize = tracks.iter().map(|t| t.parity_violations().len()).sum();
    if parity > 0 {
        problems.push(format!("{parity} parity violations"));
    }
    let bubbles: Vec<(f64, f64)> = j2.map(|t| t.bubbles()).unwrap_or_default();
    let detail = format!(
        "{cycles} cycles, bubbles {:?}, j=3 crossing at {:?}, {splits} splits {problems:?}",
        bubbles.iter().map(|(a, b)| format!("({a:.2}, {b:.2})")).collect::<Vec<_>>(),
        crossing.map(|c| (c.0 * 100.0).round() / 100.0)
    );
    report(out, "6", problems.is_empty(), Kind::Required, detail);
}

fn criterion_7(out: &mut Vec<Outcome>, caches: &[ProfileCache; 2]) {
    for cache in caches {
        let m = cache.m();
        let mu = m as f64 + 1.0 + 1e-3;
        let (id, kind) = if m == 1 { ("7", Kind::Required) } else { ("7", Kind::Expected) };
        let result = cache.get(mu).map_err(|e| e.to_string()).and_then(|p| {
            seed_signatures(&p, &seed_table(m)).map_err(|e| e.to_string())
        });
        match result {
            Ok(matches) => {
                let bad: Vec<String> = matches
                    .iter()
                    .filter(|s| !s.matches())
                    .map(|s| {
                        format!(
                            "(j={}, {}i, {}) -> {:?}",
                            s.seed.j,
                            s.seed.lambda.im,
                            s.seed.signature,
                            s.computed.map(|c| c.signature.as_str())
                        )
                    })
                    .collect();
                let negative: Vec<(i32, f64)> = matches
                    .iter()
                    .filter_map(|s| s.computed.filter(|c| c.signature == Signature::Negative).map(|c| (s.seed.j, c.lambda.im)))
                    .collect();
                let expected: Vec<(i32, f64)> = negative_seeds(m).iter().map(|s| (s.j, s.lambda.im)).collect();
                let neg_ok = negative.len() == expected.len()
                    && negative.iter().zip(&expected).all(|(a, b)| a.0 == b.0 && (a.1 - b.1).abs() < 0.01);
                let pass = bad.is_empty() && neg_ok;
                report(
                    out,
                    id,
                    pass,
                    if pass { Kind::Required } else { kind },
                    format!("m={m}: {} seeds, mismatches {bad:?}, negative set {negative:?}", matches.len()),
                );
            }
            Err(e) => report(out, id, false, kind, format!("m={m}: {e}")),
        }
    }
}

fn criterion_8(out: &mut Vec<Outcome>, m: u32, cert: &Result<CertificateReport, String>, secs: f64) {
    match cert {
        Ok(c) => report(
            out,
            "8",
            c.pass,
            Kind::Required,
            format!("m={m}: {} contour samples, {} splits, {} zero crossings, {secs:.0} s {:?}", c.counts.len(), c.splits, c.zero_crossings, c.exceptions),
        ),
        Err(e) => report(out, "8", false, Kind::Required, format!("m={m}: {e}")),
    }
}

struct TableRow {
    m: u32,
    j: i32,
    lambda0: f64,
    b: f64,
    p: f64,
}

const TABLE: [TableRow; 12] = [
    TableRow { m: 1, j: 1, lambda0: -3.0, b: -2.64, p: 1.02 },
    TableRow { m: 1, j: 1, lambda0: -1.0, b: 0.01, p: 0.80 },
    TableRow { m: 1, j: 1, lambda0: 3.0, b: 2.73, p: 0.14 },
    TableRow { m: 1, j: 2, lambda0: -2.0, b: -1.41, p: 1.04 },
    TableRow { m: 1, j: 2, lambda0: 0.0, b: 1.41, p: 1.04 },
    TableRow { m: 1, j: 2, lambda0: 2.0, b: 3.16, p: 1.02 },
    TableRow { m: 2, j: 2, lambda0: -4.0, b: -1.41, p: 0.96 },
    TableRow { m: 2, j: 2, lambda0: 0.0, b: 1.38, p: 1.39 },
    TableRow { m: 2, j: 2, lambda0: 2.0, b: 3.11, p: 1.59 },
    TableRow { m: 2, j: 3, lambda0: -3.0, b: -1.74, p: 1.06 },
    TableRow { m: 2, j: 3, lambda0: -1.0, b: 1.73, p: 1.02 },
    TableRow { m: 2, j: 3, lambda0: 1.0, b: 3.61, p: 0.97 },
];

fn criterion_9(out: &mut Vec<Outcome>, caches: &[ProfileCache; 2], negative_tracks: &[Vec<BranchTrack>; 2]) {
    let mut hits = 0;
    let mut rows = Vec::new();
    for cache in caches {
        let m = cache.m();
        let table: Vec<&TableRow> = TABLE.iter().filter(|r| r.m == m).collect();
        // One seed per row: the eigenvalue of the linear limit with Im λ = λ0,
        // preferring the negative family already tracked.
        let seeds: Vec<EigRecord> = table
            .iter()
            .filter_map(|r| {
                let all: Vec<EigRecord> =
                    seed_table(m).into_iter().filter(|s| s.j == r.j && s.lambda.im == r.lambda0).collect();
                all.iter().find(|s| s.signature == Signature::Negative).or(all.first()).copied()
            })
            .collect();
        let todo: Vec<EigRecord> = seeds
            .iter()
            .filter(|s| !negative_tracks[m as usize - 1].iter().any(|t| t.seed == **s))
            .copied()
            .collect();
        let fresh = tracks_for(cache, &todo);
        for (r, s) in table.iter().zip(&seeds) {
            let track = negative_tracks[m as usize - 1].iter().find(|t| t.seed == *s).cloned().map(Ok).unwrap_or_else(|| {
                let k = todo.iter().position(|x| x == s).unwrap();
                fresh[k].clone()
            });
            match track.and_then(|t| fit_tail(&t, DEFAULT_FIT_MU_MIN).map_err(|e| e.to_string())) {
                Ok(f) => {
                    let ok = (f.b - r.b).abs() <= 0.1 && (f.p - r.p).abs() <= 0.2;
                    hits += ok as usize;
                    rows.push(format!("m={m} j={} {}i: b={:.2} p={:.2}{}", r.j, r.lambda0, f.b, f.p, if ok { "" } else { " x" }));
                }
                Err(e) => rows.push(format!("m={m} j={} {}i: {e}", r.j, r.lambda0)),
            }
        }
    }
    report(out, "9", hits >= 4, Kind::Extended, format!("{hits}/12 rows within tolerance {rows:?}"));
}

fn simulate(cache: &ProfileCache, j: i32, guess: &EigRecord, t_end: f64) -> Result<(C64, f64), String> {
    let p = cache.get(guess.mu).map_err(|e| e.to_string())?;
    let ctx = EvansContext::new(&p, EvansOptions::default());
    let lambda = polish_zero(&ctx.mode(j), guess.lambda, 1e-3).map_err(|e| e.to_string())?;
    let eig = eigenfunction_solve(&ModeSystem::new(&p, j, lambda)).map_err(|e| e.to_string())?;
    let g = growth_rate(&p, j, &eig, t_end, 1e-4, &GrowthSettings::default()).map_err(|e| e.to_string())?;
    Ok((lambda, g.slope))
}

fn nearest(track: Option<&BranchTrack>, mu: f64, off_axis: bool) -> Option<EigRecord> {
    track?
        .records
        .iter()
        .filter(|r| r.on_axis() != off_axis)
        .min_by(|a, b| (a.mu - mu).abs().partial_cmp(&(b.mu - mu).abs()).unwrap())
        .copied()
}

fn criterion_10(out: &mut Vec<Outcome>, caches: &[ProfileCache; 2], tracks: &[Vec<BranchTrack>; 2]) {
    let unstable = match nearest(tracks[1].iter().find(|t| t.j == 2), 4.0, true) {
        Some(r) => simulate(&caches[1], 2, &r, 5.0).map(|(l, s)| (r.mu, l, s)),
        None => Err("no off-axis j=2 eigenvalue".into()),
    };
    let stable = match nearest(tracks[0].iter().find(|t| t.j == 1), 10.0, false) {
        Some(r) => simulate(&caches[0], 1, &r, 5.0).map(|(l, s)| (r.mu, l, s)),
        None => Err("no j=1 eigenvalue".into()),
    };
    let pass = matches!(unstable, Ok((_, l, s)) if (s - l.re).abs() < 0.2 * l.re)
        && matches!(stable, Ok((_, _, s)) if s.abs() < 0.01);
    let fmt = |r: &Result<(f64, C64, f64), String>| match r {
        Ok((mu, l, s)) => format!("mu={mu:.2} lambda={l:.5} slope={s:.5}"),
        Err(e) => e.clone(),
    };
    report(out, "10", pass, Kind::Required, format!("m=2 j=2: {}; m=1 j=1: {}", fmt(&unstable), fmt(&stable)));
}

fn criterion_11(out: &mut Vec<Outcome>, caches: &[ProfileCache; 2]) {
    let mut runner = TestRunner::deterministic();
    let (mut sym, mut rmid, mut plucker) = (0.0f64, 0.0f64, 0.0f64);
    let mut errors = Vec::new();
    for cache in caches {
        for mu in [cache.m() as f64 + 1.5, 12.0, 28.0] {
            let p = match cache.get(mu) {
                Ok(p) => p,
                Err(e) => {
                    errors.push(e.to_string());
                    continue;
                }
            };
            let ctx = EvansContext::new(&p, EvansOptions::default());
            for _ in 0..6 {
                let (re, im, j, shift) = draw(&mut runner, (-2.0f64..2.0, -4.0f64..4.0, 0i32..4, -0.5f64..0.5));
                let l = C64::new(re, im);
                let moved = EvansContext::new(&p, EvansOptions { r_mid: Some(ctx.r_mid + shift), ..EvansOptions::default() });
                let vals = (ctx.eval(j, l), ctx.eval(-j, -l), ctx.eval(j, -l.conj()), moved.eval(j, l));
                match vals {
                    (Ok(e), Ok(e_index), Ok(e_conj), Ok(e_moved)) => {
                        sym = sym.max((e.ratio(&e_index) - 1.0).norm());
                        sym = sym.max((e_conj.ratio(&e) - e.mantissa.conj() / e.mantissa).norm());
                        rmid = rmid.max((e.ratio(&e_moved) - 1.0).norm());
                    }
                    other => errors.push(format!("{:?}", other.0.err())),
                }
                let sys = ModeSystem::new(&p, j, l);
                let r0 = 1e-7;
                let primal = integrate_scaled(&sys, &origin_init(&sys, r0), Direction::Primal, r0, ctx.r_mid);
                let adjoint = adjoint_start_radius(&sys, ctx.r_far_min)
                    .and_then(|r| integrate_scaled(&sys, &infinity_init_adjoint(&sys, r)?, Direction::Adjoint, r, ctx.r_mid));
                for v in [primal, adjoint] {
                    match v {
                        Ok(v) => {
                            let n = v.v.iter().map(|c| c.norm()).fold(0.0, f64::max);
                            plucker = plucker.max(plucker_defect(&v.v).norm() / (n * n));
                        }
                        Err(e) => errors.push(e.to_string()),
                    }
                }
            }
        }
    }
    let pass = errors.is_empty() && sym < 1e-8 && rmid < 1e-6 && plucker < 1e-8;
    report(
        out,
        "11",
        pass,
        Kind::Required,
        format!("symmetry {sym:.1e}, r_mid {rmid:.1e}, Plucker {plucker:.1e} {errors:?}"),
    );
}

fn main() {
    let start = Instant::now();
    let mut out = Vec::new();
    criterion_1(&mut out);
    criterion_2(&mut out);

    let caches = [1u32, 2].map(|m| {
        ProfileCache::new(Branch::compute(m, MU_MAX, &ContinuationSettings::default()).expect("profile branch"))
    });
    criterion_3(&mut out, &caches);

    let mut tracks: [Vec<BranchTrack>; 2] = [Vec::new(), Vec::new()];
    let mut track_errors: [Vec<String>; 2] = [Vec::new(), Vec::new()];
    let mut certs = Vec::new();
    for (k, cache) in caches.iter().enumerate() {
        let m = cache.m();
        let t0 = Instant::now();
        for r in tracks_for(cache, &negative_seeds(m)) {
            match r {
                Ok(t) => tracks[k].push(t),
                Err(e) => track_errors[k].push(e),
            }
        }
        let cert = if track_errors[k].is_empty() {
            completeness_certificate(cache, (m as f64 + 1.0, MU_MAX), &tracks[k], &CertificateSettings::default())
                .map_err(|e| e.to_string())
        } else {
            Err(format!("tracking failed: {:?}", track_errors[k]))
        };
        certs.push((cert, t0.elapsed().as_secs_f64()));
    }

    criterion_4(&mut out, &caches[1], &tracks[1], &track_errors[1]);
    criterion_5(&mut out, &caches[0]);
    criterion_6(&mut out, &tracks[1], certs[1].0.as_ref().ok());
    criterion_7(&mut out, &caches);
    for (k, (cert, secs)) in certs.iter().enumerate() {
        criterion_8(&mut out, k as u32 + 1, cert, *secs);
    }
    criterion_9(&mut out, &caches, &tracks);
    criterion_10(&mut out, &caches, &tracks);
    criterion_11(&mut out, &caches);

    let failed: Vec<&Outcome> = out.iter().filter(|o| !o.pass && o.kind == Kind::Required).collect();
    let tolerated = out.iter().filter(|o| !o.pass && o.kind != Kind::Required).count();
    println!(
        "acceptance: {} checks, {} required failures, {tolerated} expected or extended failures, {:.0} s",
        out.len(),
        failed.len(),
        start.elapsed().as_secs_f64()
    );
    if !failed.is_empty() {
        for o in &failed {
            eprintln!("criterion {} failed: {}", o.id, o.detail);
        }
        std::process::exit(1);
    }
}
