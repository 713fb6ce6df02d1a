//! The `blowup` command line: config resolution, dispatch and exit codes.

mod commands;
mod report;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::integrator::IntegrationConfig;

pub use report::{Artifact, Manifest};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_NUMERIC: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;

/// Output directory when neither the flag, the config file nor `OUTPUT_DIR` give one.
pub const DEFAULT_OUTPUT_DIR: &str = "blowup-out";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Profile,
    ScanEta,
    Orbit,
    FamilyScan,
    Bifurcate,
    RegimeMap,
    ClassifyPoints,
    Validate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Overrides applied on top of [`IntegrationConfig::default`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NumericOverrides {
    pub rel_tol: Option<f64>,
    pub abs_tol: Option<f64>,
    pub max_step: Option<f64>,
    pub max_arc: Option<f64>,
    pub attractor_radius: Option<f64>,
    pub divergence_cap: Option<f64>,
    pub event_refine_tol: Option<f64>,
    pub max_steps: Option<usize>,
}

impl NumericOverrides {
    pub fn apply(&self, base: IntegrationConfig) -> IntegrationConfig {
        IntegrationConfig {
            rel_tol: self.rel_tol.unwrap_or(base.rel_tol),
            abs_tol: self.abs_tol.unwrap_or(base.abs_tol),
            max_step: self.max_step.unwrap_or(base.max_step),
            max_arc: self.max_arc.unwrap_or(base.max_arc),
            attractor_radius: self.attractor_radius.unwrap_or(base.attractor_radius),
            divergence_cap: self.divergence_cap.unwrap_or(base.divergence_cap),
            event_refine_tol: self.event_refine_tol.unwrap_or(base.event_refine_tol),
            max_steps: self.max_steps.unwrap_or(base.max_steps),
        }
    }
}

/// Everything a run depends on. Read from JSON, then overridden by flags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<Command>,
    pub m: Option<f64>,
    pub p: Option<f64>,
    pub sigma: Option<f64>,
    pub eta: Option<f64>,
    pub k: Option<f64>,
    pub sigma_lo: Option<f64>,
    pub sigma_hi: Option<f64>,
    pub tol: Option<f64>,
    pub numeric: NumericOverrides,
    pub grid: Option<Vec<f64>>,
    pub output_dir: Option<PathBuf>,
    pub formats: Option<Vec<Format>>,
    pub jobs: Option<usize>,
}

impl RunConfig {
    pub fn integration(&self) -> IntegrationConfig {
        self.numeric.apply(IntegrationConfig::default())
    }

    pub fn wants(&self, f: Format) -> bool {
        self.formats.as_ref().map_or(true, |v| v.contains(&f))
    }
}

#[derive(Debug, Parser)]
#[command(name = "blowup", version, about = "Self-similar blow-up profiles with a weighted reaction term")]
pub struct Cli {
    /// What to run.
    #[arg(value_enum)]
    pub command: Option<Command>,
    /// JSON run config; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub m: Option<f64>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub k: Option<f64>,
    #[arg(long = "sigma-lo")]
    pub sigma_lo: Option<f64>,
    #[arg(long = "sigma-hi")]
    pub sigma_hi: Option<f64>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long = "rel-tol")]
    pub rel_tol: Option<f64>,
    #[arg(long = "abs-tol")]
    pub abs_tol: Option<f64>,
    /// `a,b,c`, `lo:hi:n` (linear), `log:lo:hi:n`, or a file of numbers.
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Comma-separated subset of `csv,json`.
    #[arg(long, value_delimiter = ',')]
    pub format: Option<Vec<Format>>,
}

/// A failure with the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Domain(_)
            | Error::Config(_)
            | Error::InvalidInput(_)
            | Error::BadFamilyParam(_)
            | Error::BadDelta(_)
            | Error::Json(_) => EXIT_CONFIG,
            _ => EXIT_NUMERIC,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

/// Parses a grid spec: a comma list, `lo:hi:n`, `log:lo:hi:n`, or a path to a file of numbers.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>, Failure> {
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| Failure::config(format!("bad number {s:?} in grid {spec:?}")))
    };
    let count = |s: &str| {
        s.trim()
            .parse::<usize>()
            .map_err(|_| Failure::config(format!("bad count {s:?} in grid {spec:?}")))
    };
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        ["log", lo, hi, n] => {
            let (lo, hi) = (num(lo)?, num(hi)?);
            if !(lo > 0.0 && hi > 0.0) {
                return Err(Failure::config("log grid needs positive ends"));
            }
            Ok(crate::orbits::log_grid(lo, hi, count(n)?))
        }
        [lo, hi, n] => {
            let (lo, hi, n) = (num(lo)?, num(hi)?, count(n)?);
            Ok(match n {
                0 => Vec::new(),
                1 => vec![lo],
                _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
            })
        }
        [_] if Path::new(spec).is_file() => {
            let text = std::fs::read_to_string(spec).map_err(|e| Failure::config(format!("{spec}: {e}")))?;
            text.split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .map(num)
                .collect()
        }
        [_] => spec.split(',').filter(|s| !s.trim().is_empty()).map(num).collect(),
        _ => Err(Failure::config(format!("unrecognized grid spec {spec:?}"))),
    }
}

/// Merges the config file (if any), flags and the `OUTPUT_DIR` fallback.
pub fn resolve(cli: Cli, env_output_dir: Option<PathBuf>) -> Result<RunConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
            serde_json::from_str::<RunConfig>(&text)
                .map_err(|e| Failure::config(format!("{}: {e}", path.display())))?
        }
        None => RunConfig::default(),
    };
    macro_rules! set {
        ($($field:ident),*) => { $( if cli.$field.is_some() { cfg.$field = cli.$field; } )* };
    }
    set!(command, m, p, sigma, eta, k, sigma_lo, sigma_hi, tol, jobs);
    if cli.rel_tol.is_some() {
        cfg.numeric.rel_tol = cli.rel_tol;
    }
    if cli.abs_tol.is_some() {
        cfg.numeric.abs_tol = cli.abs_tol;
    }
    if let Some(spec) = &cli.grid {
        cfg.grid = Some(parse_grid(spec)?);
    }
    if let Some(out) = cli.out {
        cfg.output_dir = Some(out);
    }
    if cfg.output_dir.is_none() {
        cfg.output_dir = env_output_dir;
    }
    if let Some(f) = cli.format {
        cfg.formats = Some(f);
    }
    if cfg.command.is_none() {
        return Err(Failure::config("no command given"));
    }
    cfg.integration().validate()?;
    Ok(cfg)
}

/// Runs a resolved config and returns the process exit code.
pub fn run(cfg: &RunConfig) -> i32 {
    match commands::dispatch(cfg) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

/// Entry point for the binary.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let env_out = std::env::var_os("OUTPUT_DIR").map(PathBuf::from);
    match resolve(cli, env_out) {
        Ok(cfg) => run(&cfg),
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}
