mod commands;
mod table;

use std::path::PathBuf;
use std::process::ExitCode;

use balanced_spectral::format::parse_complex;
use balanced_spectral::linalg::C64;
use balanced_spectral::Error;
use clap::{Args, Parser, Subcommand};

/// Spectral computations for Ju' + qu = wf with measure coefficients.
///
/// Exit codes: 0 success, 1 numeric failure, 2 validation failure, 3 parse failure.
#[derive(Debug, Parser)]
#[command(name = "bspec", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the coefficients, the forbidden set Λ, the endpoints and the boundary matrix.
    Validate(Common),
    /// Fundamental matrix U(x, λ), or the solution through --u0, on an x-grid.
    SolveIvp {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "0", value_parser = complex)]
        lambda: C64,
        /// Comma-separated initial vector at x0.
        #[arg(long, value_delimiter = ',', value_parser = complex)]
        u0: Option<Vec<C64>>,
    },
    /// Points of Λ with the atom that produces each.
    LambdaSet(Common),
    /// Eigenvalues in the window with multiplicities and spectral weights Δν.
    Eigs(Common),
    /// M(λ) along t + i·imag for t on the window grid.
    Mfun {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        imag: f64,
    },
    /// Green kernel samples G(x, y, λ) on an x-by-y grid.
    Green {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "0+1j", value_parser = complex)]
        lambda: C64,
    },
    /// Transform coefficients of the file's f, its reconstruction and the Parseval residual.
    Transform(Common),
    /// Limit-point / limit-circle verdicts for 2×2 real systems, and m(λ) with --alpha.
    Weyl {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "0+1j", value_parser = complex)]
        lambda: C64,
    },
}

#[derive(Debug, Clone, Args)]
struct Common {
    /// Problem file (TOML).
    file: PathBuf,
    /// Spectral window.
    #[arg(long, num_args = 2, value_names = ["LO", "HI"], allow_negative_numbers = true)]
    window: Option<Vec<f64>>,
    /// Acceptance threshold of the eigenvalue indicator.
    #[arg(long, allow_negative_numbers = true)]
    tol_eig: Option<f64>,
    /// Relative and absolute quadrature tolerance.
    #[arg(long, allow_negative_numbers = true)]
    tol_quad: Option<f64>,
    /// Boundary angle for the Weyl m-function.
    #[arg(long, allow_negative_numbers = true)]
    alpha: Option<f64>,
    /// Number of grid intervals (eigenvalue scan, λ-grid or x-grid).
    #[arg(long)]
    grid: Option<usize>,
    /// Output file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn complex(s: &str) -> Result<C64, String> {
    parse_complex(s).ok_or_else(|| format!("`{s}` is not a complex number (expected re+imj)"))
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Parse { .. } => 3,
        Error::NonConforming(_) | Error::BoundaryConditions(_) | Error::InvalidMeasure(_) | Error::Domain { .. } | Error::Usage(_) | Error::Unsupported(_) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(3) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("bspec: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
