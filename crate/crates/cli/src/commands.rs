//! Subcommand implementations. Each returns whether its check passed.

use crate::config::{FileConfig, Overrides, RunConfig, SeedSet, UsageError};
use crate::{Cli, Command, EvansArgs, FitArgs, ProfileArgs, ScanArgs, SimulateArgs, SweepArgs};
use anyhow::{Context, Result};
use serde::Serialize;
use std::io::Write;
use std::path::Path;
use vortex_core::evans::{
    axis_zero_scan_with, refine_unstable, unstable_count, winding_number, AxisZero, ContourPath,
    EvansContext, EvansOptions,
};
use vortex_core::krein::{
    completeness_certificate, count_unstable, csv_header, default_grid, diagram_rows, fit_tail, negative_seeds, seed_signatures,
    seed_table, seed_table_window, track_all, BranchTrack, CertificateReport, CertificateSettings, EigRecord,
    ProfileCache, SeedMatch, Signature, TrackSettings,
};
use vortex_core::linearized::{eigenfunction_solve, ModeSystem};
use vortex_core::profile::{Branch, ContinuationSettings, VortexProfile};
use vortex_core::sim::{growth_rate, GrowthResult, GrowthSettings};
use vortex_core::symmetry::{symmetry_report, SymmetryReport};
use vortex_core::C64;

pub fn dispatch(cli: &Cli) -> Result<bool> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    match &cli.command {
        Command::Profile(a) => profile_cmd(&file, a),
        Command::Evans(a) => evans_cmd(a),
        Command::Scan(a) => scan_cmd(a),
        Command::Track(a) => track_cmd(&file, a),
        Command::Certify(a) => certify_cmd(&file, a),
        Command::Simulate(a) => simulate_cmd(a),
        Command::Fit(a) => fit_cmd(&file, a),
        Command::Run(a) => run_cmd(&file, a),
    }
}

/// Complex number as a JSON object.
#[derive(Debug, Clone, Copy, Serialize)]
struct Complex {
    re: f64,
    im: f64,
}

impl From<C64> for Complex {
    fn from(z: C64) -> Self {
        Complex { re: z.re, im: z.im }
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match path {
        Some(p) => write_file(p, &text),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn load_profile(path: &Path) -> Result<VortexProfile> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading profile {}", path.display()))?;
    VortexProfile::from_json(&text).with_context(|| format!("parsing profile {}", path.display()))
}

fn sweep_overrides(a: &SweepArgs) -> Overrides {
    Overrides {
        m: a.m,
        mu_range: a.mu_range,
        mu_step: a.step,
        js: a.j.clone(),
        contour_height: a.contour_height,
        seeds: a.seeds.clone(),
        out_dir: a.out_dir.clone(),
        simulate: a.simulate.then_some(true),
        ..Overrides::default()
    }
}

fn build_cache(m: u32, mu_max: f64) -> Result<ProfileCache> {
    let branch = Branch::compute(m, mu_max, &ContinuationSettings::default()).context("profile stage")?;
    Ok(ProfileCache::new(branch))
}

/// Seeds selected by the configuration, in mode then Im λ order.
fn select_seeds(cfg: &RunConfig) -> Vec<EigRecord> {
    match cfg.seeds {
        SeedSet::Negative => negative_seeds(cfg.m).into_iter().filter(|s| cfg.js.contains(&s.j)).collect(),
        SeedSet::All => cfg.js.iter().flat_map(|&j| seed_table_window(cfg.m, j..=j, cfg.contour_height)).collect(),
    }
}

fn run_tracks(cache: &ProfileCache, cfg: &RunConfig, seeds: &[EigRecord]) -> Result<Vec<BranchTrack>> {
    let grid = default_grid(cfg.m, cfg.mu_range.1, cfg.mu_step);
    let results = track_all(cache, seeds, &grid, &TrackSettings::default());
    seeds
        .iter()
        .zip(results)
        .map(|(s, r)| {
            r.with_context(|| format!("track stage: j={} seed {}i ({})", s.j, s.lambda.im, s.signature))
        })
        .collect()
}

/// Diagram CSV restricted to μ ≥ `mu_min`.
fn diagram_csv(tracks: &[BranchTrack], mu_min: f64) -> String {
    let clipped: Vec<BranchTrack> = tracks
        .iter()
        .map(|t| {
            let mut t = t.clone();
            t.records.retain(|r| r.mu >= mu_min - 1e-12);
            t
        })
        .collect();
    let mut out = String::from(csv_header());
    out.push('\n');
    for row in diagram_rows(&clipped) {
        out.push_str(&row);
        out.push('\n');
    }
    out
}

fn certificate_settings(cfg: &RunConfig) -> CertificateSettings {
    CertificateSettings {
        contour_spacing: cfg.contour_spacing,
        y_min: cfg.contour_height,
        ..CertificateSettings::default()
    }
}

fn profile_cmd(file: &FileConfig, a: &ProfileArgs) -> Result<bool> {
    let flags = Overrides { m: a.m, profile: a.out.clone(), ..Overrides::default() };
    let mut file = file.clone();
    if let Some(mu_max) = a.mu_max {
        file.mu_max = Some(mu_max);
    }
    let cfg = RunConfig::resolve(&file, &flags)?;
    let mu = a.mu.unwrap_or(cfg.mu_range.1);
    let mu0 = cfg.m as f64 + 1.0;
    if !(mu > mu0 && mu <= cfg.mu_range.1) {
        return Err(UsageError(format!("mu = {mu} must lie in ({mu0}, {}]", cfg.mu_range.1)).into());
    }
    let branch = Branch::compute(cfg.m, cfg.mu_range.1, &ContinuationSettings::default()).context("profile stage")?;
    let profile = branch.profile_at(mu).context("profile stage")?;
    write_file(&cfg.profile, &(profile.to_json()? + "\n"))?;
    eprintln!("wrote {} (m = {}, mu = {mu}, K = {:.6})", cfg.profile.display(), cfg.m, profile.k);
    Ok(true)
}

#[derive(Serialize)]
struct EvansOutput {
    j: i32,
    mu: f64,
    lambda: Complex,
    mantissa: Complex,
    log_scale: f64,
}

fn evans_cmd(a: &EvansArgs) -> Result<bool> {
    let profile = load_profile(&a.profile)?;
    let lambda = C64::new(a.lambda.0, a.lambda.1);
    let v = EvansContext::new(&profile, EvansOptions::default()).eval(a.j, lambda).context("evans stage")?;
    write_json(
        None,
        &EvansOutput { j: a.j, mu: profile.mu, lambda: lambda.into(), mantissa: v.mantissa.into(), log_scale: v.log_scale },
    )?;
    Ok(true)
}

#[derive(Serialize)]
struct ScanReport {
    j: i32,
    mu: f64,
    contour: [f64; 4],
    winding: i64,
    axis_zeros: Vec<AxisZero>,
    n_su: i64,
    unstable: Vec<Complex>,
}

/// Zero count and unstable eigenvalues of mode j at one profile, inside
/// the rectangle `contour` or the standard contour of half-height `y`.
fn scan_mode(profile: &VortexProfile, j: i32, contour: Option<[f64; 4]>, y: f64) -> Result<ScanReport> {
    let ctx = EvansContext::new(profile, EvansOptions::default());
    let f = ctx.mode(j);
    let (rect, winding, axis_zeros, n_su) = match contour {
        None => {
            let c = count_unstable(&f, profile.mu, profile.m, y, 0.02).context("scan stage")?;
            let x = 3.0 * (profile.mu - profile.m as f64);
            ([-x, x, -c.y, c.y], c.winding, c.axis, c.n_su)
        }
        Some([x0, x1, y0, y1]) => {
            let w = winding_number(&f, &ContourPath::rectangle(x0, x1, y0, y1, 0.05)).context("scan stage")?;
            let axis = if x0 < 0.0 && x1 > 0.0 {
                let n = ((y1 - y0) / 0.02).ceil() as usize + 1;
                axis_zero_scan_with(&f, y0, y1, n, 1e-3).context("scan stage")?.zeros
            } else {
                Vec::new()
            };
            let on_axis: i64 = axis.iter().map(|z| z.mult as i64).sum();
            let n_su = if x0 < 0.0 && x1 > 0.0 && (x1 + x0).abs() < 1e-12 && (y1 + y0).abs() < 1e-12 {
                unstable_count(w.winding, &axis).context("scan stage")?
            } else {
                w.winding - on_axis
            };
            ([x0, x1, y0, y1], w.winding, axis, n_su)
        }
    };
    let unstable = if n_su > 0 && rect[1] > 0.0 {
        let y = rect[2].abs().max(rect[3].abs());
        refine_unstable(&f, rect[0].max(1e-4), rect[1], y, n_su)
            .context("scan stage")?
            .into_iter()
            .filter(|z| z.im >= rect[2] && z.im <= rect[3])
            .map(Complex::from)
            .collect()
    } else {
        Vec::new()
    };
    Ok(ScanReport { j, mu: profile.mu, contour: rect, winding, axis_zeros, n_su, unstable })
}

fn scan_cmd(a: &ScanArgs) -> Result<bool> {
    let profile = load_profile(&a.profile)?;
    let contour = match &a.contour {
        None => None,
        Some(s) => {
            let v: Vec<f64> = s
                .split(',')
                .map(|x| x.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| UsageError(format!("contour {s:?}: {e}")))?;
            match v[..] {
                [x0, x1, y0, y1] if x0 < x1 && y0 < y1 => Some([x0, x1, y0, y1]),
                _ => return Err(UsageError(format!("contour {s:?} must be x0,x1,y0,y1 with x0 < x1 and y0 < y1")).into()),
            }
        }
    };
    let report = scan_mode(&profile, a.j, contour, 6.0)?;
    write_json(a.out.as_deref(), &report)?;
    Ok(true)
}

fn track_cmd(file: &FileConfig, a: &SweepArgs) -> Result<bool> {
    let flags = Overrides { branches: a.out.clone(), ..sweep_overrides(a) };
    let cfg = RunConfig::resolve(file, &flags)?;
    let cache = build_cache(cfg.m, cfg.mu_range.1)?;
    let tracks = run_tracks(&cache, &cfg, &select_seeds(&cfg))?;
    write_file(&cfg.branches, &diagram_csv(&tracks, cfg.mu_range.0))?;
    for t in &tracks {
        eprintln!(
            "j={} seed {}i ({}): {} records, {} bubbles",
            t.j,
            t.seed.lambda.im,
            t.seed.signature,
            t.records.len(),
            t.bubbles().len()
        );
    }
    Ok(true)
}

fn certify(cache: &ProfileCache, cfg: &RunConfig) -> Result<(Vec<BranchTrack>, CertificateReport)> {
    let seeds: Vec<EigRecord> = negative_seeds(cfg.m).into_iter().filter(|s| cfg.js.contains(&s.j)).collect();
    let tracks = run_tracks(cache, cfg, &seeds)?;
    let report =
        completeness_certificate(cache, cfg.mu_range, &tracks, &certificate_settings(cfg)).context("certificate stage")?;
    Ok((tracks, report))
}

fn certify_cmd(file: &FileConfig, a: &SweepArgs) -> Result<bool> {
    let flags = Overrides { report: a.out.clone(), ..sweep_overrides(a) };
    let cfg = RunConfig::resolve(file, &flags)?;
    let cache = build_cache(cfg.m, cfg.mu_range.1)?;
    let (_, report) = certify(&cache, &cfg)?;
    write_json(Some(&cfg.report), &report)?;
    println!("{}", if report.pass { "PASS" } else { "FAIL" });
    for e in &report.exceptions {
        eprintln!("  {e}");
    }
    Ok(report.pass)
}

#[derive(Serialize)]
struct SimulationOutput {
    j: i32,
    mu: f64,
    lambda: Complex,
    slope: f64,
    r_squared: f64,
    non_exponential: bool,
    relative_error: f64,
}

/// Growth of a perturbation along the eigenfunction of mode j at the zero
/// of E_j nearest to `lambda`.
fn simulate(profile: &VortexProfile, j: i32, lambda: C64, t: f64, amplitude: f64, settings: &GrowthSettings) -> Result<(C64, GrowthResult)> {
    let ctx = EvansContext::new(profile, EvansOptions::default());
    let lambda = vortex_core::evans::polish_zero(&ctx.mode(j), lambda, 1e-3).context("simulate stage")?;
    let eig = eigenfunction_solve(&ModeSystem::new(profile, j, lambda)).context("simulate stage")?;
    let g = growth_rate(profile, j, &eig, t, amplitude, settings).context("simulate stage")?;
    Ok((lambda, g))
}

fn growth_csv(g: &GrowthResult) -> String {
    let mut out = String::from("t,amplitude\n");
    for (t, a) in g.times.iter().zip(&g.amplitudes) {
        out.push_str(&format!("{t},{a:.12e}\n"));
    }
    out
}

fn simulate_cmd(a: &SimulateArgs) -> Result<bool> {
    if !(a.t > 0.0 && a.amplitude > 0.0 && a.dt > 0.0 && a.n >= 4 && a.n % 2 == 0) {
        return Err(UsageError("T, amplitude and dt must be positive and n even".into()).into());
    }
    let profile = load_profile(&a.profile)?;
    let settings = GrowthSettings { n: a.n, dt: a.dt, ..GrowthSettings::default() };
    let (lambda, g) = simulate(&profile, a.j, C64::new(a.lambda.0, a.lambda.1), a.t, a.amplitude, &settings)?;
    write_file(&a.out, &growth_csv(&g))?;
    write_json(
        None,
        &SimulationOutput {
            j: a.j,
            mu: profile.mu,
            lambda: lambda.into(),
            slope: g.slope,
            r_squared: g.r_squared,
            non_exponential: g.non_exponential,
            relative_error: relative_error(g.slope, lambda.re),
        },
    )?;
    Ok(true)
}

fn relative_error(slope: f64, re: f64) -> f64 {
    if re.abs() > 1e-12 {
        (slope - re).abs() / re.abs()
    } else {
        slope.abs()
    }
}

fn fit_cmd(file: &FileConfig, a: &FitArgs) -> Result<bool> {
    let flags = Overrides { fit_mu_min: a.fit_mu_min, ..sweep_overrides(&a.sweep) };
    let cfg = RunConfig::resolve(file, &flags)?;
    if !(a.window > 0.0) {
        return Err(UsageError("window must be positive".into()).into());
    }
    let out = match &a.sweep.out {
        Some(p) => p.clone(),
        None => cfg.out_dir.join("fits.csv"),
    };
    let cache = build_cache(cfg.m, cfg.mu_range.1)?;
    let seeds: Vec<EigRecord> = cfg.js.iter().flat_map(|&j| seed_table_window(cfg.m, j..=j, a.window)).collect();
    let grid = default_grid(cfg.m, cfg.mu_range.1, cfg.mu_step);
    let results = track_all(&cache, &seeds, &grid, &TrackSettings::default());
    let mut csv = String::from("j,lambda0_im,signature,b,c,p,residual,anomalous,constant,n_points\n");
    for (s, r) in seeds.iter().zip(results) {
        let fit = r.map_err(anyhow::Error::from).and_then(|t| Ok(fit_tail(&t, cfg.fit_mu_min)?));
        match fit {
            Ok(f) => csv.push_str(&format!(
                "{},{},{},{:.6},{:.6},{:.6},{:.3e},{},{},{}\n",
                s.j, s.lambda.im, s.signature, f.b, f.c, f.p, f.residual, f.anomalous, f.constant, f.n_points
            )),
            Err(e) => log::warn!("fit stage: j={} seed {}i ({}): {e}", s.j, s.lambda.im, s.signature),
        }
    }
    write_file(&out, &csv)?;
    Ok(true)
}

#[derive(Serialize)]
struct Instability {
    j: i32,
    seed_im: f64,
    mu_start: f64,
    mu_end: f64,
    mu_at_max: f64,
    max_lambda: Complex,
}

#[derive(Serialize)]
struct SeedCheck {
    j: i32,
    seed_im: f64,
    expected: Signature,
    computed: Option<Complex>,
    computed_signature: Option<Signature>,
    matches: bool,
}

impl From<&SeedMatch> for SeedCheck {
    fn from(s: &SeedMatch) -> Self {
        SeedCheck {
            j: s.seed.j,
            seed_im: s.seed.lambda.im,
            expected: s.seed.signature,
            computed: s.computed.map(|c| c.lambda.into()),
            computed_signature: s.computed.map(|c| c.signature),
            matches: s.matches(),
        }
    }
}

#[derive(Serialize)]
struct SymmetryAt {
    mu: f64,
    pass: bool,
    checks: SymmetryReport,
}

#[derive(Serialize)]
struct RunReport {
    m: u32,
    mu_range: (f64, f64),
    pass: bool,
    instabilities: Vec<Instability>,
    scans: Vec<ScanReport>,
    seeds: Vec<SeedCheck>,
    symmetry: Vec<SymmetryAt>,
    certificate: CertificateReport,
    simulation: Option<SimulationOutput>,
}

fn instabilities(tracks: &[BranchTrack], mu_min: f64) -> Vec<Instability> {
    let mut out = Vec::new();
    for t in tracks {
        for (a, b) in t.bubbles() {
            if b < mu_min {
                continue;
            }
            let Some(peak) = t
                .records
                .iter()
                .filter(|r| r.mu >= a && r.mu <= b && !r.on_axis())
                .max_by(|x, y| x.lambda.re.partial_cmp(&y.lambda.re).unwrap())
            else {
                continue;
            };
            out.push(Instability {
                j: t.j,
                seed_im: t.seed.lambda.im,
                mu_start: a,
                mu_end: b,
                mu_at_max: peak.mu,
                max_lambda: peak.lambda.into(),
            });
        }
    }
    out
}

fn run_cmd(file: &FileConfig, a: &SweepArgs) -> Result<bool> {
    let cfg = RunConfig::resolve(file, &sweep_overrides(a))?;
    let search: Vec<i32> = cfg.js.iter().copied().filter(|&j| j >= 1 && j < 2 * cfg.m as i32).collect();
    if search.is_empty() {
        return Err(UsageError(format!("no mode of the instability search lies in 1..{}", 2 * cfg.m - 1)).into());
    }
    let cache = build_cache(cfg.m, cfg.mu_range.1)?;
    let top = cache.get(cfg.mu_range.1).context("profile stage")?;
    write_file(&cfg.profile, &(top.to_json()? + "\n"))?;

    let scans = search
        .iter()
        .map(|&j| scan_mode(&top, j, None, cfg.contour_height))
        .collect::<Result<Vec<_>>>()?;
    let mu0 = cfg.m as f64 + 1.0;
    let near = cache.get(mu0 + 1e-3).context("profile stage")?;
    let seeds: Vec<SeedCheck> =
        seed_signatures(&near, &seed_table(cfg.m)).context("seed stage")?.iter().map(SeedCheck::from).collect();
    let mut symmetry = Vec::new();
    for &mu in &cfg.symmetry_mu {
        let p = cache.get(mu).context("symmetry stage")?;
        let checks = symmetry_report(&p).with_context(|| format!("symmetry stage at mu = {mu}"))?;
        symmetry.push(SymmetryAt { mu, pass: checks.pass(), checks });
    }

    let cfg_search = RunConfig { js: search, ..cfg.clone() };
    let (tracks, certificate) = certify(&cache, &cfg_search)?;
    let mut diagram_tracks = tracks.clone();
    if cfg.seeds == SeedSet::All {
        let extra: Vec<EigRecord> = select_seeds(&cfg)
            .into_iter()
            .filter(|s| !tracks.iter().any(|t| t.j == s.j && t.seed.lambda == s.lambda && t.seed.signature == s.signature))
            .collect();
        diagram_tracks.extend(run_tracks(&cache, &cfg, &extra)?);
        diagram_tracks.sort_by(|x, y| (x.j, x.seed.lambda.im).partial_cmp(&(y.j, y.seed.lambda.im)).unwrap());
    }
    write_file(&cfg.branches, &diagram_csv(&diagram_tracks, cfg.mu_range.0))?;

    let found = instabilities(&tracks, cfg.mu_range.0);
    let simulation = match found.iter().max_by(|x, y| x.max_lambda.re.partial_cmp(&y.max_lambda.re).unwrap()) {
        Some(inst) if cfg.simulate => {
            let p = cache.get(inst.mu_at_max).context("simulate stage")?;
            let settings = GrowthSettings { n: cfg.sim_n, dt: cfg.sim_dt, ..GrowthSettings::default() };
            let guess = C64::new(inst.max_lambda.re, inst.max_lambda.im);
            let (lambda, g) = simulate(&p, inst.j, guess, cfg.sim_time, cfg.sim_amplitude, &settings)?;
            Some(SimulationOutput {
                j: inst.j,
                mu: p.mu,
                lambda: lambda.into(),
                slope: g.slope,
                r_squared: g.r_squared,
                non_exponential: g.non_exponential,
                relative_error: relative_error(g.slope, lambda.re),
            })
        }
        _ => None,
    };

    let pass = certificate.pass;
    let report = RunReport {
        m: cfg.m,
        mu_range: cfg.mu_range,
        pass,
        instabilities: found,
        scans,
        seeds,
        symmetry,
        certificate,
        simulation,
    };
    write_json(Some(&cfg.report), &report)?;
    println!("{}: {} instability interval(s)", if pass { "PASS" } else { "FAIL" }, report.instabilities.len());
    for i in &report.instabilities {
        println!("  j={} mu in ({:.3}, {:.3}) max Re lambda {:.6}", i.j, i.mu_start, i.mu_end, i.max_lambda.re);
    }
    Ok(pass)
}
