//! `vortex-evans` command-line tool: profiles, Evans functions, eigenvalue tracks,
//! the completeness certificate and time-domain growth checks.

mod commands;
mod config;

use clap::{Args, Parser, Subcommand};
use config::UsageError;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, Parser)]
#[command(name = "vortex-evans", version, about = "Spectral stability of trapped two-dimensional vortices")]
pub struct Cli {
    /// Flat TOML configuration file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute the vortex profile at one chemical potential and write it as JSON.
    Profile(ProfileArgs),
    /// Evaluate the Evans function of one mode.
    Evans(EvansArgs),
    /// Count and locate the eigenvalues of one mode inside a contour.
    Scan(ScanArgs),
    /// Track eigenvalue branches in μ and write the diagram CSV.
    Track(SweepArgs),
    /// Track the negative seeds and certify that no instability escapes.
    Certify(SweepArgs),
    /// Measure the growth of a perturbation along an eigenfunction.
    Simulate(SimulateArgs),
    /// Fit the large-μ behaviour of the eigenvalue branches.
    Fit(FitArgs),
    /// Full pipeline: profile, scans, tracks, certificate, optional simulation.
    Run(SweepArgs),
}

#[derive(Debug, Args)]
pub struct ProfileArgs {
    #[arg(long)]
    pub m: Option<u32>,
    /// End of the continuation.
    #[arg(long = "mu-max")]
    pub mu_max: Option<f64>,
    /// Chemical potential of the written profile (default: the end of the continuation).
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvansArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub j: i32,
    #[arg(long)]
    pub profile: PathBuf,
    /// Spectral parameter, e.g. 0.1-2i.
    #[arg(long, allow_hyphen_values = true, value_parser = config::parse_complex)]
    pub lambda: (f64, f64),
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub j: i32,
    #[arg(long)]
    pub profile: PathBuf,
    /// Rectangle x0,x1,y0,y1 (default: the standard contour of half-height 6).
    #[arg(long, allow_hyphen_values = true)]
    pub contour: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Default)]
pub struct SweepArgs {
    #[arg(long)]
    pub m: Option<u32>,
    /// μ interval a:b.
    #[arg(long = "mu-range", value_parser = config::parse_range)]
    pub mu_range: Option<(f64, f64)>,
    #[arg(long)]
    pub step: Option<f64>,
    /// Comma-separated mode indices.
    #[arg(long, value_delimiter = ',')]
    pub j: Option<Vec<i32>>,
    /// Contour half-height.
    #[arg(long = "contour-height")]
    pub contour_height: Option<f64>,
    /// Seeds to track: "negative" or "all".
    #[arg(long)]
    pub seeds: Option<String>,
    /// Output directory for files given by relative paths.
    #[arg(long = "out-dir")]
    pub out_dir: Option<PathBuf>,
    /// Output file (branches.csv for track, report.json for certify).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Run the growth-rate simulation (run only).
    #[arg(long)]
    pub simulate: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub profile: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    pub j: i32,
    #[arg(long, allow_hyphen_values = true, value_parser = config::parse_complex)]
    pub lambda: (f64, f64),
    /// Final time.
    #[arg(long = "T")]
    pub t: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub amplitude: f64,
    #[arg(long, default_value_t = vortex_core::sim::DEFAULT_N)]
    pub n: usize,
    #[arg(long, default_value_t = vortex_core::sim::DEFAULT_DT)]
    pub dt: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub sweep: SweepArgs,
    /// Lower end of the fit window.
    #[arg(long = "fit-mu-min")]
    pub fit_mu_min: Option<f64>,
    /// Largest |Im λ| of the seeds that are fitted.
    #[arg(long, default_value_t = 4.0)]
    pub window: f64,
}

fn init_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("VORTEX_EVANS_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| UsageError(format!("VORTEX_EVANS_THREADS must be a positive integer, not {v:?}")))?;
        if n == 0 {
            return Err(UsageError("VORTEX_EVANS_THREADS must be positive".into()).into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = init_threads().and_then(|_| commands::dispatch(&cli));
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
