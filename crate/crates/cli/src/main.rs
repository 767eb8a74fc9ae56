use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use smooth_phi::asymptotics::{
    sigma_estimate, sigma_estimate_with, solve_xi_with, SaddleForm, XiResult,
};
use smooth_phi::counting::{
    build_pk_tower, correction_factor, phi_k_smooth_count, pi_smooth_shifted, psi_smooth,
    CountRecord,
};
use smooth_phi::harness::{
    cmd_compare, cmd_eh, cmd_identities, cmd_shifted_density, read_prime_list, write_prime_list,
    ComparisonRow, EhReport, ExperimentConfig, IdentityConfig, ShiftedDensityReport, SuiteResult,
};
use smooth_phi::sieve::{SpfTable, TotientTable, DEFAULT_CAP};
use smooth_phi::volterra::{
    dickman_rho, iterate_sigma, solve_sigma_with, GridFunction, StepMismatch, DEFAULT_HORIZON,
};
use smooth_phi::Error;

const EXIT_FAILURE: u8 = 1;
const EXIT_IDENTITY: u8 = 2;
const EXIT_NONCONVERGENCE: u8 = 3;
const EXIT_RANGE: u8 = 4;

/// Smooth values of iterated Euler phi: sieve counts, the delay-equation
/// solver and saddle-point estimates.
#[derive(Debug, Parser)]
#[command(name = "smooth-phi", version)]
struct Cli {
    /// Largest sieve table that may be built.
    #[arg(long, global = true, default_value_t = DEFAULT_CAP)]
    cap: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Dickman's ρ on the grid [0, u].
    Rho {
        #[arg(long)]
        u: f64,
        #[arg(long, value_parser = parse_step, default_value = "1/256")]
        step: f64,
    },
    /// σ_k on [0, umax], or k applications of the solver to a χ grid file.
    Sigma {
        #[arg(long, default_value_t = 1)]
        k: u32,
        #[arg(long, default_value_t = DEFAULT_HORIZON)]
        umax: f64,
        #[arg(long, value_parser = parse_step, default_value = "1/256")]
        step: f64,
        #[arg(long)]
        chi: Option<PathBuf>,
        /// Treat the χ file as zero beyond its last sample.
        #[arg(long, requires = "chi")]
        compact: bool,
        /// Resample a χ file whose step differs from --step.
        #[arg(long, requires = "chi")]
        resample: bool,
    },
    /// Saddle point ξ(u) and the resulting σ estimate.
    Xi {
        #[arg(long, required = true, value_delimiter = ',')]
        u: Vec<f64>,
        #[arg(long, conflicts_with = "indicator")]
        chi: Option<PathBuf>,
        #[arg(long, requires = "chi")]
        compact: bool,
        /// Use χ = 1 on [0, T].
        #[arg(long)]
        indicator: Option<f64>,
        #[arg(long, value_parser = parse_step, default_value = "1/256")]
        step: f64,
        /// Integrate the saddle-point equation over [0, ∞) instead of [1, ∞).
        #[arg(long)]
        full: bool,
    },
    /// Ψ(x, y) for k = 0, Φ_k(x, y) otherwise, or π(x, y) with --shifted.
    Count {
        #[arg(long, value_parser = parse_int)]
        x: u64,
        #[arg(long, value_parser = parse_int)]
        y: u64,
        #[arg(long, default_value_t = 0)]
        k: u32,
        #[arg(long, conflicts_with = "k")]
        shifted: bool,
    },
    /// The primes of P_k(x, y), or per-level sizes with --summary.
    Pset {
        #[arg(long, value_parser = parse_int)]
        x: u64,
        #[arg(long, value_parser = parse_int)]
        y: u64,
        #[arg(long)]
        k: u32,
        #[arg(long)]
        summary: bool,
    },
    /// Empirical Φ_k(x, y)/x against σ_k(u) for a list of x.
    Compare(CompareArgs),
    /// π(x, y)/π(x) against Ψ(x, y)/x, plus the prime-set variant.
    Conjecture1 {
        #[arg(long, value_parser = parse_int)]
        x: u64,
        #[arg(long, value_parser = parse_int)]
        y: u64,
        /// CSV file of primes with header `p`; defaults to the primes <= y.
        #[arg(long)]
        pset: Option<PathBuf>,
    },
    /// Divisor-weighted shifted-prime discrepancy up to x^(1-ε).
    Eh {
        #[arg(long, value_parser = parse_int)]
        x: u64,
        #[arg(long)]
        epsilon: f64,
    },
    /// Run the identity suites; exits with 2 if any fails.
    Identities,
}

#[derive(Debug, Args)]
struct CompareArgs {
    /// Comma-separated x values; `1e6` notation is accepted.
    #[arg(long, required = true, value_delimiter = ',', value_parser = parse_int)]
    x: Vec<u64>,
    #[arg(long, default_value_t = 2.0)]
    u: f64,
    /// Use this y for every x instead of round(x^(1/u)).
    #[arg(long, value_parser = parse_int)]
    y: Option<u64>,
    #[arg(long, default_value_t = 1)]
    k: u32,
    #[arg(long, value_parser = parse_step, default_value = "1/256")]
    step: f64,
    #[arg(long, default_value_t = DEFAULT_HORIZON)]
    umax: f64,
    /// Worker threads; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

fn parse_int(s: &str) -> Result<u64, String> {
    if let Ok(v) = s.parse::<u64>() {
        return Ok(v);
    }
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not an integer"))?;
    if v >= 0.0 && v.fract() == 0.0 && v < u64::MAX as f64 {
        Ok(v as u64)
    } else {
        Err(format!("`{s}` is not a non-negative integer"))
    }
}

/// Accepts a decimal or a fraction such as `1/256`.
fn parse_step(s: &str) -> Result<f64, String> {
    let v = match s.split_once('/') {
        Some((n, d)) => {
            let n: f64 = n
                .trim()
                .parse()
                .map_err(|_| format!("bad numerator in `{s}`"))?;
            let d: f64 = d
                .trim()
                .parse()
                .map_err(|_| format!("bad denominator in `{s}`"))?;
            n / d
        }
        None => s.parse().map_err(|_| format!("`{s}` is not a number"))?,
    };
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("step `{s}` must be positive"))
    }
}

enum Failure {
    Lib(Error),
    Identity(Vec<SuiteResult>),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Lib(Error::Io(e))
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::NonConvergence(_) => EXIT_NONCONVERGENCE,
        Error::Range { .. } | Error::Size { .. } => EXIT_RANGE,
        _ => EXIT_FAILURE,
    }
}

fn open_grid(path: &PathBuf, compact: bool) -> Result<GridFunction, Error> {
    GridFunction::read_csv(File::open(path)?, compact)
}

fn run(cli: Cli, out: &mut dyn Write) -> Result<(), Failure> {
    let cap = cli.cap;
    match cli.command {
        Command::Rho { u, step } => dickman_rho(u, step)?.write_csv(out)?,
        Command::Sigma {
            k,
            umax,
            step,
            chi,
            compact,
            resample,
        } => {
            let grid = match chi {
                None => iterate_sigma(k, umax, step)?.pop().expect("σ_k"),
                Some(path) => {
                    let mismatch = if resample {
                        StepMismatch::Resample
                    } else {
                        StepMismatch::Reject
                    };
                    let mut grid = open_grid(&path, compact)?;
                    for _ in 0..k {
                        grid = solve_sigma_with(&grid, umax, step, mismatch)?;
                    }
                    grid
                }
            };
            grid.write_csv(out)?;
        }
        Command::Xi {
            u,
            chi,
            compact,
            indicator,
            step,
            full,
        } => {
            let chi = match (chi, indicator) {
                (Some(path), _) => open_grid(&path, compact)?,
                (None, Some(t)) => GridFunction::indicator(t, step)?,
                (None, None) => GridFunction::indicator(1.0, step)?,
            };
            writeln!(out, "{},log_sigma_estimate", XiResult::CSV_HEADER)?;
            for u in u {
                let (xi, estimate) = if full {
                    (
                        solve_xi_with(&chi, u, SaddleForm::Full)?,
                        sigma_estimate_with(&chi, u, SaddleForm::Full)?,
                    )
                } else {
                    (
                        solve_xi_with(&chi, u, SaddleForm::Tail)?,
                        sigma_estimate(&chi, u)?,
                    )
                };
                writeln!(
                    out,
                    "{},{}",
                    xi.csv_row(),
                    smooth_phi::format::g12(estimate)
                )?;
            }
        }
        Command::Count { x, y, k, shifted } => {
            let spf = SpfTable::with_cap(x.max(2), cap)?;
            let record = if shifted {
                pi_smooth_shifted(x, y, &spf)?
            } else if k == 0 {
                psi_smooth(x, y, &spf)?
            } else {
                let totient = TotientTable::from_spf(&spf, x.max(2));
                phi_k_smooth_count(x, y, k, &spf, &totient)?
            };
            writeln!(out, "{}", CountRecord::CSV_HEADER)?;
            writeln!(out, "{}", record.csv_row())?;
        }
        Command::Pset { x, y, k, summary } => {
            let spf = SpfTable::with_cap(x.max(2), cap)?;
            let tower = build_pk_tower(x, y, k, &spf)?;
            if summary {
                writeln!(out, "level,size,correction,reciprocal_sum_outside")?;
                for (level, set) in tower.iter().enumerate() {
                    writeln!(
                        out,
                        "{level},{},{},{}",
                        set.len(),
                        smooth_phi::format::g12(correction_factor(set)),
                        smooth_phi::format::g12(set.reciprocal_sum_outside())
                    )?;
                }
            } else {
                write_prime_list(tower.last().expect("P_k"), out)?;
            }
        }
        Command::Compare(args) => {
            let config = ExperimentConfig {
                x_list: args.x,
                u: args.u,
                y_override: args.y,
                k: args.k,
                step: args.step,
                horizon: args.umax,
                jobs: args.jobs,
                cap,
            };
            let rows = cmd_compare(&config)?;
            let mut file;
            let sink: &mut dyn Write = match &args.output {
                Some(path) => {
                    file = BufWriter::new(File::create(path)?);
                    &mut file
                }
                None => out,
            };
            writeln!(sink, "{}", ComparisonRow::CSV_HEADER)?;
            for row in &rows {
                writeln!(sink, "{}", row.csv_row())?;
            }
            sink.flush()?;
        }
        Command::Conjecture1 { x, y, pset } => {
            let primes = match pset {
                Some(path) => Some(read_prime_list(File::open(path)?)?),
                None => None,
            };
            let report = cmd_shifted_density(x, y, primes.as_deref(), cap)?;
            writeln!(out, "{}", ShiftedDensityReport::CSV_HEADER)?;
            writeln!(out, "{}", report.csv_row())?;
        }
        Command::Eh { x, epsilon } => {
            let report = cmd_eh(x, epsilon, cap)?;
            writeln!(out, "{}", EhReport::CSV_HEADER)?;
            writeln!(out, "{}", report.csv_row())?;
        }
        Command::Identities => {
            let results = cmd_identities(&IdentityConfig::default())?;
            writeln!(out, "{}", SuiteResult::CSV_HEADER)?;
            for r in &results {
                writeln!(out, "{}", r.csv_row())?;
            }
            if results.iter().any(|r| !r.passed) {
                return Err(Failure::Identity(results));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_FAILURE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    let result = run(cli, &mut out);
    let _ = out.flush();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Identity(results)) => {
            for r in results.iter().filter(|r| !r.passed) {
                eprintln!(
                    "identity suite {} failed: worst {} > {}",
                    r.name, r.worst, r.threshold
                );
            }
            ExitCode::from(EXIT_IDENTITY)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_integers_and_steps() {
        assert_eq!(parse_int("1000000"), Ok(1_000_000));
        assert_eq!(parse_int("1e6"), Ok(1_000_000));
        assert!(parse_int("1.5").is_err());
        assert!(parse_int("-3").is_err());
        assert_eq!(parse_step("1/256"), Ok(1.0 / 256.0));
        assert_eq!(parse_step("0.0625"), Ok(0.0625));
        assert!(parse_step("0").is_err());
        assert!(parse_step("1/x").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn error_classes_map_to_exit_codes() {
        assert_eq!(exit_code(&Error::NonConvergence("x".into())), 3);
        assert_eq!(exit_code(&Error::Range { value: 5, limit: 2 }), 4);
        assert_eq!(
            exit_code(&Error::Size {
                limit: 5,
                min: 2,
                cap: 3
            }),
            4
        );
        assert_eq!(exit_code(&Error::Domain("x".into())), 1);
    }
}
