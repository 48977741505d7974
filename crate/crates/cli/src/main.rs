use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::Serialize;

use natcon_cli::commands::{
    chart_cmd, classify_cmd, decompose_cmd, family_cmd, fixture_cmd, ChartArgs, FamilyArgs,
    FileArgs, FixtureArgs, FixtureKind, Report, CHART_CLASS_TOL,
};
use natcon_cli::verify::{self, VerifyArgs};
use natcon_cli::{exit, CliError};

/// Natural connections on Riemannian almost product manifolds.
///
/// Exit codes: 0 pass, 1 property failure, 2 usage or parse error,
/// 3 invariant violation in the input.
#[derive(Debug, Parser)]
#[command(name = "natcon", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Classify the structure tensor F of a tensor file.
    Classify {
        file: PathBuf,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// Split the torsion T of a tensor file into its four components.
    Decompose {
        file: PathBuf,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// Evaluate a member of the two-parameter torsion family on a W1 structure.
    Family {
        /// Half dimension n (total dimension 2n).
        #[arg(long)]
        n: usize,
        /// Lee form θ, comma separated.
        #[arg(long, value_parser = parse_list, allow_hyphen_values = true)]
        theta: List,
        #[arg(long, allow_hyphen_values = true)]
        lambda: f64,
        #[arg(long, allow_hyphen_values = true)]
        mu: f64,
        /// Tensor file providing g and P (default: g = I, P = diag(I, -I)).
        #[arg(long)]
        g: Option<PathBuf>,
        /// Write the resulting tensor file here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the property suite.
    Verify {
        /// Total dimensions 2n, comma separated.
        #[arg(long, default_value = "4,6", value_parser = parse_dims)]
        dims: Dims,
        #[arg(long, default_value_t = 20)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// Finite-difference structure tensor and checks on a built-in chart.
    Chart {
        /// flat_product, conformal_product or rotated_p.
        #[arg(long)]
        chart: String,
        /// Evaluation point, comma separated (default: origin of 2n = 4).
        #[arg(long, value_parser = parse_list, allow_hyphen_values = true)]
        point: Option<List>,
        #[arg(long, default_value_t = 1e-5)]
        h: f64,
        #[arg(long, default_value_t = CHART_CLASS_TOL)]
        tol: f64,
    },
    /// Print a fixture tensor file.
    Fixture {
        #[arg(long, value_enum)]
        kind: FixtureKind,
        /// Half dimension n.
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long, value_parser = parse_list, allow_hyphen_values = true)]
        theta: Option<List>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Use a random metric and product structure instead of the standard ones.
        #[arg(long)]
        random_geometry: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

// aliases keep clap from treating the lists as repeated flags
type List = ::std::vec::Vec<f64>;
type Dims = ::std::vec::Vec<usize>;

fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| format!("'{v}': {e}")))
        .collect()
}

fn parse_dims(s: &str) -> Result<Vec<usize>, String> {
    s.split(',')
        .map(|v| v.trim().parse::<usize>().map_err(|e| format!("'{v}': {e}")))
        .collect()
}

fn emit<T: Serialize>(value: &T) -> Result<(), CliError> {
    let mut json = serde_json::to_string_pretty(value).expect("reports always serialize");
    json.push('\n');
    let mut out = std::io::stdout().lock();
    out.write_all(json.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|source| CliError::Write {
            path: PathBuf::from("<stdout>"),
            source,
        })
}

fn run(command: Command) -> Result<u8, CliError> {
    match command {
        Command::Classify { file, tol } => emit(&classify_cmd(FileArgs { file, tol })?)?,
        Command::Decompose { file, tol } => emit(&decompose_cmd(FileArgs { file, tol })?)?,
        Command::Family {
            n,
            theta,
            lambda,
            mu,
            g,
            out,
        } => emit(&family_cmd(FamilyArgs {
            n,
            theta,
            lambda,
            mu,
            g,
            out,
        })?)?,
        Command::Chart {
            chart,
            point,
            h,
            tol,
        } => {
            let point = point.unwrap_or_else(|| vec![0.0; 4]);
            emit(&chart_cmd(ChartArgs {
                chart,
                point,
                h,
                tol,
            })?)?
        }
        Command::Fixture {
            kind,
            n,
            theta,
            seed,
            random_geometry,
            out,
        } => {
            let file = fixture_cmd(&FixtureArgs {
                kind,
                n,
                theta,
                seed,
                random_geometry,
            })?;
            match out {
                Some(path) => file.write(&path)?,
                None => emit(&file)?,
            }
        }
        Command::Verify {
            dims,
            trials,
            seed,
            tol,
        } => {
            let args = VerifyArgs {
                dims,
                trials,
                seed,
                tol,
            };
            let result = verify::run(&args)?;
            let failing = result.failing();
            let input_sha256 = natcon_cli::commands::sha256_hex(
                serde_json::to_string(&args)
                    .expect("arguments serialize")
                    .as_bytes(),
            );
            emit(&Report {
                command: "verify",
                args,
                input_sha256,
                result,
            })?;
            if !failing.is_empty() {
                return Err(CliError::PropertyFailure(failing));
            }
        }
    }
    Ok(exit::PASS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() {
                exit::USAGE
            } else {
                exit::PASS
            });
        }
    };
    let start = Instant::now();
    let code = match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    eprintln!("runtime: {:.3}s", start.elapsed().as_secs_f64());
    ExitCode::from(code)
}
