//! `kahler`: command-line driver for the weak-geodesic numerics.
//!
//! Exit codes: 0 on success, 1 for invalid input or configuration, 2 when a
//! numerical procedure fails (non-convergence, quadrature, builder search).

mod commands;
mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kahler_core::QuadratureSpec;

use crate::config::MatrixInput;
use crate::output::{resolve_target, Format, OUT_DIR_ENV};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error(transparent)]
    Core(#[from] kahler_core::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_numerical() => 2,
            CliError::Internal(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "kahler",
    version,
    about = "Weak geodesics between Kähler potentials: strip asymptotics, the Hessian obstruction, and a discrete envelope solver"
)]
struct Cli {
    /// Output file, or just `csv`/`json` to pick the format. Without a path the
    /// result goes to $KAHLER_OUT_DIR/<command>.<ext> if set, else stdout.
    #[arg(long, global = true)]
    out: Option<String>,

    /// Output format; defaults to the --out extension, then to the command's default.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    /// Master seed for randomized procedures.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Worker threads for parallel sweeps and the sampler (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Tabulate I, J, K of the comparison function f_λ against 2λ. Every λ must be positive.
    StripAsymptotics(StripArgs),
    /// Decide the Hessian obstruction for (Ω, P, Q) at the fixed point. Requires Ω ≻ 0 and Ω + P ≻ 0.
    CheckObstruction(ObstructionArgs),
    /// Discrete checks of the sharp family on a patch plus the ε → 0 sharpness table. Requires ε > 0.
    VerifySharpFamily(FamilyArgs),
    /// Solve the discrete envelope problem described by a JSON config.
    SolveGeodesic(SolveArgs),
    /// Blowup, linear-trace and log-Levi diagnostics across grid levels.
    ProbeRegularity(ProbeArgs),
}

#[derive(Debug, Args)]
struct StripArgs {
    /// Comma-separated λ values (> 0).
    #[arg(long, value_delimiter = ',', default_value = "5,10,20,40")]
    lambdas: Vec<f64>,
    /// Absolute quadrature tolerance (> 0).
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// Subdivision budget of the adaptive quadrature (> 0).
    #[arg(long, default_value_t = 1 << 20)]
    max_subdivisions: usize,
    /// Truncation radius of the real line beyond the core window (> 0).
    #[arg(long, default_value_t = 40.0)]
    truncation_radius: f64,
}

#[derive(Debug, Args)]
struct ObstructionArgs {
    /// ω_{jk}(x₀): a number, [re, im], or an m×m array of rows; Hermitian positive definite.
    #[arg(long, allow_hyphen_values = true)]
    omega: String,
    /// v_{z_j z̄_k}(x₀), same shape; Hermitian with Ω + P positive definite.
    #[arg(long, allow_hyphen_values = true)]
    p: String,
    /// v_{z_j z_k}(x₀), same shape; complex symmetric.
    #[arg(long, allow_hyphen_values = true)]
    q: String,
    /// Also estimate the margin by seeded sampling over unit vectors.
    #[arg(long)]
    sampled: bool,
    /// Samples for --sampled (at least 10000).
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
}

#[derive(Debug, Args)]
struct FamilyArgs {
    /// ε > 0.
    #[arg(long, default_value_t = 1.0)]
    epsilon: f64,
    /// Cells per axis of the patch (≥ 2).
    #[arg(long, default_value_t = 64)]
    grid: usize,
    /// ε values for the sharpness table (each > 0).
    #[arg(long, value_delimiter = ',', default_value = "1,0.1,0.01,0.001,0.0001,0.000001")]
    eps_sequence: Vec<f64>,
}

#[derive(Debug, Args)]
struct SolveArgs {
    /// JSON problem: n, nt (≥ 3, default n+1), omega11 (> 0), v, and optional
    /// scheme, mode, directions, tol_sweep, max_sweeps, relaxation (in (0,2)), nested, uniqueness_probe.
    #[arg(long)]
    config: PathBuf,
    /// Also write the solution u as a grid CSV here.
    #[arg(long)]
    grid_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ProbeArgs {
    /// A solve-geodesic result or config; its potential is re-solved at each level.
    #[arg(long)]
    solution: PathBuf,
    /// Torus sizes n (even; nt = n + 1).
    #[arg(long, value_delimiter = ',', default_value = "32,64,128")]
    levels: Vec<usize>,
    /// Radii around x₀ for the u_{zz̄} statistics (≥ 0).
    #[arg(long, value_delimiter = ',', default_value = "0,0.05,0.1,0.2")]
    radii: Vec<f64>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Validation(format!("--threads: {e}")))?;
    }
    let out_dir = std::env::var_os(OUT_DIR_ENV).map(PathBuf::from);
    let target =
        |default: Format, stem: &str| resolve_target(cli.out.as_deref(), cli.format, default, stem, out_dir.as_deref());
    match cli.command {
        Command::StripAsymptotics(a) => {
            let cfg = commands::StripConfig {
                lambdas: a.lambdas,
                quadrature: QuadratureSpec {
                    tolerance: a.tol,
                    max_subdivisions: a.max_subdivisions,
                    truncation_radius: a.truncation_radius,
                },
            };
            commands::strip(&cfg, &target(Format::Csv, "strip-asymptotics")?)
        }
        Command::CheckObstruction(a) => {
            let cfg = commands::ObstructionConfig {
                omega: MatrixInput::parse("omega", &a.omega)?,
                p: MatrixInput::parse("p", &a.p)?,
                q: MatrixInput::parse("q", &a.q)?,
                sampled: a.sampled,
                samples: a.samples,
                seed: cli.seed,
            };
            commands::obstruction(&cfg, &target(Format::Json, "check-obstruction")?)
        }
        Command::VerifySharpFamily(a) => {
            let cfg = commands::FamilyConfig {
                epsilon: a.epsilon,
                grid: a.grid,
                eps_sequence: a.eps_sequence,
            };
            commands::family(&cfg, &target(Format::Json, "verify-sharp-family")?)
        }
        Command::SolveGeodesic(a) => commands::solve(
            &a.config,
            &target(Format::Json, "solve-geodesic")?,
            a.grid_out.as_deref(),
        ),
        Command::ProbeRegularity(a) => commands::probe(
            &a.solution,
            &a.levels,
            &a.radii,
            &target(Format::Csv, "probe-regularity")?,
        ),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
