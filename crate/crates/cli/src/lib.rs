//! `lrq` command-line driver.

pub mod commands;
pub mod config;
pub mod output;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use thiserror::Error;

use config::{read_config, ConfigError, Settings};
use output::{write_json, ErrorInfo, RunSummary};

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] lrq_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_VALIDATION,
            CliError::Core(e) if e.is_numerical() => EXIT_NUMERICAL,
            CliError::Core(_) => EXIT_VALIDATION,
            CliError::Io(_) => EXIT_IO,
        }
    }

    fn kind(&self) -> &'static str {
        match self.exit_code() {
            EXIT_VALIDATION => "validation",
            EXIT_NUMERICAL => "numerical",
            _ => "io",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "lrq", version, about = "Quench dynamics of strong long-range O(n) rotor chains")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Finite-N dispersion table.
    Dispersion(Params),
    /// Ground state of the gap equation.
    GroundState(Params),
    /// Quench or prepared-state evolution with optional interval entropy.
    Quench(Params),
    /// (epsilon, mu0) phase diagram of the resonant classes.
    PhaseDiagram(Params),
    /// Floquet stability of each mode along a classical orbit.
    Floquet(Params),
    /// Entropy time series for several interval lengths.
    EntropySeries(Params),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Dispersion(_) => "dispersion",
            Command::GroundState(_) => "ground-state",
            Command::Quench(_) => "quench",
            Command::PhaseDiagram(_) => "phase-diagram",
            Command::Floquet(_) => "floquet",
            Command::EntropySeries(_) => "entropy-series",
        }
    }

    pub fn params(&self) -> &Params {
        match self {
            Command::Dispersion(p)
            | Command::GroundState(p)
            | Command::Quench(p)
            | Command::PhaseDiagram(p)
            | Command::Floquet(p)
            | Command::EntropySeries(p) => p,
        }
    }
}

/// Flags shared by all subcommands. Every parameter flag can also be given
/// as `key = value` in the `--config` file; flags win.
#[derive(Debug, Clone, clap::Args)]
pub struct Params {
    /// Flat `key = value` config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Worker threads, 0 for one per core.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    /// Time step.
    #[arg(long, allow_negative_numbers = true)]
    pub dt: Option<String>,
    /// Coupling: slr, flat or nn.
    #[arg(long, allow_negative_numbers = true)]
    pub coupling: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: Option<String>,
    /// Chain length.
    #[arg(long, allow_negative_numbers = true)]
    pub n: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub lambda: Option<String>,
    /// Bare mass (ground-state, phase-diagram, floquet).
    #[arg(long, allow_negative_numbers = true)]
    pub r: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub r_pre: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub r_post: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub mu0: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub mudot0: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub epsilon: Option<String>,
    /// Occupation policy for prepared states: physical or subunit.
    #[arg(long, allow_negative_numbers = true)]
    pub policy: Option<String>,
    /// Track modes m <= this value and lump the rest into one entry.
    #[arg(long, allow_negative_numbers = true)]
    pub bundle_m: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub t_max: Option<String>,
    /// Integrator: verlet, yoshida4 or yoshida6.
    #[arg(long, allow_negative_numbers = true)]
    pub scheme: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub sample_every: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub burst_threshold: Option<String>,
    /// Interval length for the entropy column (0 disables it).
    #[arg(long, allow_negative_numbers = true)]
    pub ell: Option<String>,
    /// Comma-separated interval lengths.
    #[arg(long, allow_negative_numbers = true)]
    pub ells: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub m_max: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub eta: Option<String>,
    /// Mode frequencies for Floquet analysis: continuum or finite.
    #[arg(long, allow_negative_numbers = true)]
    pub frequencies: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub eps_min: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub eps_max: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub mu0_min: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub mu0_max: Option<String>,
    /// Grid points per axis.
    #[arg(long, allow_negative_numbers = true)]
    pub resolution: Option<String>,
}

impl Params {
    fn flag_map(&self) -> BTreeMap<String, String> {
        let pairs = [
            ("dt", &self.dt),
            ("coupling", &self.coupling),
            ("alpha", &self.alpha),
            ("n", &self.n),
            ("lambda", &self.lambda),
            ("r", &self.r),
            ("r_pre", &self.r_pre),
            ("r_post", &self.r_post),
            ("mu0", &self.mu0),
            ("mudot0", &self.mudot0),
            ("epsilon", &self.epsilon),
            ("policy", &self.policy),
            ("bundle_m", &self.bundle_m),
            ("t_max", &self.t_max),
            ("scheme", &self.scheme),
            ("sample_every", &self.sample_every),
            ("burst_threshold", &self.burst_threshold),
            ("ell", &self.ell),
            ("ells", &self.ells),
            ("m_max", &self.m_max),
            ("eta", &self.eta),
            ("frequencies", &self.frequencies),
            ("eps_min", &self.eps_min),
            ("eps_max", &self.eps_max),
            ("mu0_min", &self.mu0_min),
            ("mu0_max", &self.mu0_max),
            ("resolution", &self.resolution),
        ];
        pairs
            .into_iter()
            .filter_map(|(k, v)| v.clone().map(|v| (k.to_string(), v)))
            .collect()
    }
}

/// What a subcommand hands back to the driver.
#[derive(Debug, Default)]
pub struct Outcome {
    pub outputs: Vec<PathBuf>,
    pub diagnostics: BTreeMap<String, serde_json::Value>,
    pub resonant_modes: Vec<usize>,
    pub t_q: Option<f64>,
}

/// Runs one invocation and returns the process exit code. A `summary.json`
/// is written to the output directory whenever the directory is usable.
pub fn run(cli: Cli) -> i32 {
    let start = Instant::now();
    let name = cli.command.name();
    let params = cli.command.params().clone();
    if params.threads > 0 {
        // fails only if a pool already exists, in which case it is reused
        let _ = rayon::ThreadPoolBuilder::new().num_threads(params.threads).build_global();
    }
    if let Err(e) = std::fs::create_dir_all(&params.out) {
        eprintln!("lrq: cannot create {}: {e}", params.out.display());
        return EXIT_IO;
    }
    let file = match params.config.as_deref().map(read_config).transpose() {
        Ok(file) => file.unwrap_or_default(),
        Err(e) => return finish(name, &params.out, &Settings::default(), Err(e.into()), start),
    };
    let settings = Settings::merged(file, params.flag_map());
    let result = commands::dispatch(&cli.command, &settings, &params.out);
    finish(name, &params.out, &settings, result, start)
}

fn finish(
    name: &str,
    out_dir: &Path,
    settings: &Settings,
    result: Result<Outcome, Failure>,
    start: Instant,
) -> i32 {
    let echo = settings.echo();
    let config_hash = config::config_hash(name, &echo);
    let (outcome, error) = match result {
        Ok(o) => (o, None),
        Err(f) => (f.partial, Some(f.error)),
    };
    let code = error.as_ref().map_or(EXIT_OK, CliError::exit_code);
    if let Some(e) = &error {
        eprintln!("lrq {name}: {e}");
    }
    let summary = RunSummary {
        artifact_version: ARTIFACT_VERSION,
        command: name.to_string(),
        config: echo,
        config_hash,
        status: if error.is_none() { "ok" } else { "error" },
        error: error.as_ref().map(|e| ErrorInfo {
            kind: e.kind(),
            message: e.to_string(),
        }),
        diagnostics: outcome.diagnostics,
        resonant_modes: outcome.resonant_modes,
        t_q: outcome.t_q,
        outputs: outcome
            .outputs
            .iter()
            .filter_map(|p| p.file_name().map(|f| f.to_string_lossy().into_owned()))
            .collect(),
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    };
    match write_json(&out_dir.join("summary.json"), &summary) {
        Ok(()) => code,
        Err(e) => {
            eprintln!("lrq {name}: cannot write summary: {e}");
            if code == EXIT_OK {
                EXIT_IO
            } else {
                code
            }
        }
    }
}

/// A failed run together with whatever it produced before failing.
#[derive(Debug)]
pub struct Failure {
    pub partial: Outcome,
    pub error: CliError,
}

impl Failure {
    pub fn with_partial(partial: Outcome, error: impl Into<CliError>) -> Self {
        Self {
            partial,
            error: error.into(),
        }
    }
}

macro_rules! failure_from {
    ($($t:ty),*) => {$(
        impl From<$t> for Failure {
            fn from(e: $t) -> Self {
                Failure::with_partial(Outcome::default(), e)
            }
        }
    )*};
}

failure_from!(ConfigError, lrq_core::Error, std::io::Error);
