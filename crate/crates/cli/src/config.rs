//! Flat TOML run configuration; command-line flags override file values.

use serde::Deserialize;
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Errors in the configuration or the command line; reported with exit code 2.
#[derive(Debug, Error)]
#[error("{0}")]
pub struct UsageError(pub String);

/// Keys accepted in the configuration file. Unknown keys are rejected.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub m: Option<u32>,
    pub mu_min: Option<f64>,
    pub mu_max: Option<f64>,
    pub mu_step: Option<f64>,
    pub j: Option<Vec<i32>>,
    pub contour_height: Option<f64>,
    pub contour_spacing: Option<f64>,
    pub seeds: Option<String>,
    pub out_dir: Option<PathBuf>,
    pub branches: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub profile: Option<PathBuf>,
    pub fit_mu_min: Option<f64>,
    pub symmetry_mu: Option<Vec<f64>>,
    pub simulate: Option<bool>,
    pub sim_time: Option<f64>,
    pub sim_amplitude: Option<f64>,
    pub sim_n: Option<usize>,
    pub sim_dt: Option<f64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, UsageError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| UsageError(format!("malformed config {}: {}", path.display(), e.0)))
    }

    pub fn parse(text: &str) -> Result<Self, UsageError> {
        toml::from_str(text).map_err(|e| UsageError(e.to_string().trim_end().to_string()))
    }
}

/// Which seeds are tracked.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedSet {
    /// Negative-signature seeds with 0 < j < 2m.
    Negative,
    /// All seeds of the selected modes.
    All,
}

/// Fully resolved settings of a run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub m: u32,
    pub mu_range: (f64, f64),
    pub mu_step: f64,
    pub js: Vec<i32>,
    pub contour_height: f64,
    pub contour_spacing: f64,
    pub seeds: SeedSet,
    pub out_dir: PathBuf,
    pub branches: PathBuf,
    pub report: PathBuf,
    pub profile: PathBuf,
    pub fit_mu_min: f64,
    pub symmetry_mu: Vec<f64>,
    pub simulate: bool,
    pub sim_time: f64,
    pub sim_amplitude: f64,
    pub sim_n: usize,
    pub sim_dt: f64,
}

/// Values given on the command line, each overriding the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub m: Option<u32>,
    pub mu_range: Option<(f64, f64)>,
    pub mu_step: Option<f64>,
    pub js: Option<Vec<i32>>,
    pub contour_height: Option<f64>,
    pub seeds: Option<String>,
    pub out_dir: Option<PathBuf>,
    pub branches: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub profile: Option<PathBuf>,
    pub fit_mu_min: Option<f64>,
    pub simulate: Option<bool>,
}

impl RunConfig {
    pub fn resolve(file: &FileConfig, flags: &Overrides) -> Result<Self, UsageError> {
        let m = flags.m.or(file.m).unwrap_or(1);
        if m == 0 {
            return Err(UsageError("m must be at least 1".into()));
        }
        let mu0 = m as f64 + 1.0;
        let (lo, hi) = flags.mu_range.unwrap_or((file.mu_min.unwrap_or(mu0), file.mu_max.unwrap_or(35.0)));
        if !(lo.is_finite() && hi.is_finite() && lo >= mu0 && hi > lo) {
            return Err(UsageError(format!("mu range {lo}:{hi} must satisfy {mu0} <= min < max")));
        }
        let mu_step = flags.mu_step.or(file.mu_step).unwrap_or(0.05);
        if !(mu_step > 0.0 && mu_step <= hi - lo) {
            return Err(UsageError(format!("mu step {mu_step} must be positive and at most the range width")));
        }
        let js = flags.js.clone().or_else(|| file.j.clone()).unwrap_or_else(|| (1..2 * m as i32).collect());
        if js.is_empty() || js.iter().any(|&j| j < 0 || j > 2 * m as i32 + 1) {
            return Err(UsageError(format!("mode indices {js:?} must lie in 0..={}", 2 * m + 1)));
        }
        let contour_height = flags.contour_height.or(file.contour_height).unwrap_or(6.0);
        let contour_spacing = file.contour_spacing.unwrap_or(1.0);
        if !(contour_height > 0.0 && contour_spacing > 0.0) {
            return Err(UsageError("contour height and spacing must be positive".into()));
        }
        let seeds = match flags.seeds.as_deref().or(file.seeds.as_deref()).unwrap_or("negative") {
            "negative" => SeedSet::Negative,
            "all" => SeedSet::All,
            other => return Err(UsageError(format!("seeds must be \"negative\" or \"all\", not {other:?}"))),
        };
        let out_dir = flags.out_dir.clone().or_else(|| file.out_dir.clone()).unwrap_or_else(|| PathBuf::from("."));
        let place = |flag: &Option<PathBuf>, key: &Option<PathBuf>, default: &str| {
            let p = flag.clone().or_else(|| key.clone()).unwrap_or_else(|| PathBuf::from(default));
            if p.is_absolute() {
                p
            } else {
                out_dir.join(p)
            }
        };
        let branches = place(&flags.branches, &file.branches, "branches.csv");
        let report = place(&flags.report, &file.report, "report.json");
        let profile = place(&flags.profile, &file.profile, "profile.json");
        let symmetry_mu = file
            .symmetry_mu
            .clone()
            .unwrap_or_else(|| [5.0, 15.0, 30.0].into_iter().filter(|&mu| mu > lo && mu <= hi).collect());
        let sim_time = file.sim_time.unwrap_or(10.0);
        let sim_amplitude = file.sim_amplitude.unwrap_or(1e-4);
        let sim_n = file.sim_n.unwrap_or(256);
        let sim_dt = file.sim_dt.unwrap_or(1e-3);
        if !(sim_time > 0.0 && sim_amplitude > 0.0 && sim_dt > 0.0 && sim_n >= 4 && sim_n % 2 == 0) {
            return Err(UsageError("simulation settings must be positive with an even grid size".into()));
        }
        Ok(RunConfig {
            m,
            mu_range: (lo, hi),
            mu_step,
            js,
            contour_height,
            contour_spacing,
            seeds,
            out_dir,
            branches,
            report,
            profile,
            fit_mu_min: flags.fit_mu_min.or(file.fit_mu_min).unwrap_or(vortex_core::krein::DEFAULT_FIT_MU_MIN),
            symmetry_mu,
            simulate: flags.simulate.or(file.simulate).unwrap_or(false),
            sim_time,
            sim_amplitude,
            sim_n,
            sim_dt,
        })
    }
}

/// Parses "a:b".
pub fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("expected a:b, got {s:?}"))?;
    let a: f64 = a.trim().parse().map_err(|e| format!("{a:?}: {e}"))?;
    let b: f64 = b.trim().parse().map_err(|e| format!("{b:?}: {e}"))?;
    Ok((a, b))
}

/// Parses a complex number written as "re+imi", "re-imi", "imi" or "re".
pub fn parse_complex(s: &str) -> Result<(f64, f64), String> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || format!("cannot parse complex number {s:?}");
    let Some(body) = t.strip_suffix('i') else {
        return t.parse::<f64>().map(|re| (re, 0.0)).map_err(|_| bad());
    };
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    let part = |x: &str| -> Result<f64, String> {
        match x {
            "" | "+" => Ok(1.0),
            "-" => Ok(-1.0),
            _ => x.parse().map_err(|_| bad()),
        }
    };
    match split {
        Some(k) => Ok((body[..k].parse().map_err(|_| bad())?, part(&body[k..])?)),
        None => Ok((0.0, part(body)?)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_forms() {
        assert_eq!(parse_complex("0.1-2.04i").unwrap(), (0.1, -2.04));
        assert_eq!(parse_complex("2i").unwrap(), (0.0, 2.0));
        assert_eq!(parse_complex("-i").unwrap(), (0.0, -1.0));
        assert_eq!(parse_complex("1e-3+1e-2i").unwrap(), (1e-3, 1e-2));
        assert_eq!(parse_complex("3").unwrap(), (3.0, 0.0));
        assert!(parse_complex("abc").is_err());
    }

    #[test]
    fn ranges() {
        assert_eq!(parse_range("3:35").unwrap(), (3.0, 35.0));
        assert!(parse_range("3-35").is_err());
    }

    #[test]
    fn flags_override_file() {
        let file = FileConfig::parse("m = 2\nmu_max = 20.0\nmu_step = 0.1\n").unwrap();
        let flags = Overrides { mu_step: Some(0.2), ..Default::default() };
        let c = RunConfig::resolve(&file, &flags).unwrap();
        assert_eq!(c.m, 2);
        assert_eq!(c.mu_range, (3.0, 20.0));
        assert_eq!(c.mu_step, 0.2);
        assert_eq!(c.js, vec![1, 2, 3]);
    }

    #[test]
    fn rejects_bad_files() {
        assert!(FileConfig::parse("m = \"two\"").is_err());
        assert!(FileConfig::parse("unknown_key = 1").is_err());
        let file = FileConfig::parse("m = 1\nmu_min = 1.5").unwrap();
        assert!(RunConfig::resolve(&file, &Overrides::default()).is_err());
    }
}
