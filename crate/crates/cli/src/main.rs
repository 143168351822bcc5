//! `equimorse`: catalog listing, spectra, sweeps, local-model oracles and
//! verification runs. Exit codes: 0 pass, 1 fail, 2 usage or configuration.

mod commands;
mod config;
mod output;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use equimorse_core::spectral::PhiKind;

use config::RunConfig;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(equimorse_core::Error),
    Io { path: PathBuf, source: std::io::Error },
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io { path, source } => write!(f, "{}: {source}", path.display()),
        }
    }
}

impl From<equimorse_core::Error> for CliError {
    fn from(e: equimorse_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use equimorse_core::Error as E;
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(
                E::Config(_) | E::UnknownCase(_) | E::Degenerate { .. } | E::AmbiguousKernel { .. },
            ) => 2,
            _ => 1,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "equimorse", version, about = "Equivariant Witten deformation and Morse inequality checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// List the catalog cases and their expected sequences.
    Catalog {
        #[arg(long)]
        json: bool,
    },
    /// Betti numbers, both inequalities and Euler checks for one case.
    Verify(RunArgs),
    /// Spectrum of the deformed equivariant Laplacian in one degree.
    Spectrum(RunArgs),
    /// Eigenvalues, gaps and traces along a list of deformation parameters (CSV).
    Sweep(RunArgs),
    /// Closed-form local-model spectra against their grid oracles.
    Local(LocalArgs),
    /// Flatten verification reports into plot-ready CSV.
    Report {
        #[arg(long = "input", required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PhiArg {
    Exp,
    Gaussian,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    case: Option<String>,
    #[arg(long = "n-grid")]
    n_grid: Option<usize>,
    #[arg(long)]
    weight: Option<u32>,
    /// One value (spectrum) or a comma-separated list (verify, sweep).
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    s: Option<Vec<f64>>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    kmax: Option<usize>,
    #[arg(long)]
    count: Option<usize>,
    #[arg(long, value_enum)]
    phi: Option<PhiArg>,
    #[arg(long = "phi-scale")]
    phi_scale: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Eigenvalue CSV path (spectrum).
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct LocalArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    weights: Option<Vec<u32>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    eps: Option<Vec<i8>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, num_args = 0..)]
    lambdas: Option<Vec<i8>>,
    #[arg(long)]
    orbit: bool,
    #[arg(long)]
    s: Option<f64>,
    #[arg(long = "ho-a")]
    ho_a: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn base_config(path: &Option<PathBuf>) -> Result<RunConfig, CliError> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

fn run_config(a: &RunArgs, single_s: bool) -> Result<RunConfig, CliError> {
    let mut c = base_config(&a.config)?;
    if let Some(v) = &a.case {
        c.case = v.clone();
    }
    if let Some(v) = a.n_grid {
        c.geometry.grid = v;
    }
    if let Some(v) = a.weight {
        c.geometry.weight = v;
    }
    if let Some(v) = &a.s {
        if single_s {
            match v.as_slice() {
                [s] => c.spectral.s = *s,
                _ => return Err(CliError::Usage("--s takes a single value here".to_string())),
            }
        } else {
            c.spectral.s_list = v.clone();
        }
    }
    if let Some(v) = a.k {
        c.spectral.k = v;
    }
    if let Some(v) = a.kmax {
        c.spectral.kmax = Some(v);
    }
    if let Some(v) = a.count {
        c.spectral.count = Some(v);
    }
    if let Some(p) = a.phi {
        c.trace.kind = match p {
            PhiArg::Exp => PhiKind::ExpDecay,
            PhiArg::Gaussian => PhiKind::Gaussian,
        };
    }
    if let Some(v) = a.phi_scale {
        c.trace.scale = v;
    }
    if let Some(v) = &a.out {
        c.output.path = Some(v.clone());
    }
    if let Some(v) = &a.csv {
        c.output.csv = Some(v.clone());
    }
    c.validate()?;
    Ok(c)
}

fn local_config(a: &LocalArgs) -> Result<RunConfig, CliError> {
    let mut c = base_config(&a.config)?;
    let l = &mut c.local;
    if let Some(v) = &a.weights {
        l.weights = v.clone();
    }
    if let Some(v) = &a.eps {
        l.eps = v.clone();
    }
    if let Some(v) = &a.lambdas {
        l.lambdas = v.clone();
    }
    if a.orbit {
        l.kind = config::LocalKind::Orbit;
        if a.eps.is_none() {
            l.eps.clear();
        }
    }
    if let Some(v) = a.s {
        l.s = v;
    }
    if let Some(v) = a.ho_a {
        l.ho_a = v;
    }
    if let Some(v) = &a.out {
        c.output.path = Some(v.clone());
    }
    Ok(c)
}

fn init_threads() -> Result<(), CliError> {
    if let Ok(v) = std::env::var("EQUIMORSE_THREADS") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError::Usage(format!("EQUIMORSE_THREADS={v} is not a positive integer")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<bool, CliError> {
    init_threads()?;
    match cli.command {
        Command::Catalog { json } => commands::catalog(json),
        Command::Verify(a) => commands::verify(&run_config(&a, false)?),
        Command::Spectrum(a) => commands::spectrum(&run_config(&a, true)?),
        Command::Sweep(a) => commands::sweep(&run_config(&a, false)?),
        Command::Local(a) => commands::local(&local_config(&a)?),
        Command::Report { inputs, out } => commands::report(&inputs, out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
