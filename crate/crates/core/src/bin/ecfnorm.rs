use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ecfnorm::harness::{
    self, CriticalSource, Format, PowerStudySpec, DEFAULT_CRITVAL_REPS, DEFAULT_POWER_REPS,
};
use ecfnorm::null::{critical_values_limit_with, critical_values_mc, NystromNodes, SampleSize};
use ecfnorm::{load_sample, parse_alternative, Error};

#[derive(Parser)]
#[command(
    name = "ecfnorm",
    version,
    about = "Weighted L2 test for multivariate normality"
)]
struct Cli {
    /// Worker threads (0 = all cores). Results do not depend on this.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,

    /// Write the result here instead of stdout.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Test a CSV sample for normality.
    Test {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        a: f64,
        #[arg(long, default_value_t = DEFAULT_POWER_REPS)]
        reps: usize,
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "json")]
        format: Format,
    },
    /// Critical values of the table-normalized statistic.
    Critvals {
        #[arg(long)]
        d: usize,
        /// Sample size, or "inf" for the limit law.
        #[arg(long)]
        n: SampleSize,
        #[arg(long, value_delimiter = ',', required = true)]
        a: Vec<f64>,
        /// Replications (limit-law simulations when n = inf).
        #[arg(long, default_value_t = DEFAULT_CRITVAL_REPS)]
        reps: usize,
        /// Nystrom size for n = inf.
        #[arg(long, default_value_t = 2000)]
        m: usize,
        /// Nystrom nodes for n = inf: sampled or gauss-hermite.
        #[arg(long, default_value = "sampled")]
        nodes: NystromNodes,
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "json")]
        format: Format,
    },
    /// Empirical power against an alternative.
    Power {
        /// Alternative label, e.g. "NMix(0.5,1,4)" or "S3(Exp(1))".
        #[arg(long)]
        alt: String,
        #[arg(long)]
        d: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, value_delimiter = ',', required = true)]
        a: Vec<f64>,
        #[arg(long, default_value_t = DEFAULT_POWER_REPS)]
        reps: usize,
        /// Replications for freshly simulated critical values.
        #[arg(long, default_value_t = DEFAULT_CRITVAL_REPS)]
        critval_reps: usize,
        /// Critical-value cache: read if present, else simulated and written.
        #[arg(long)]
        critvals: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "csv")]
        format: Format,
    },
    /// Limit-law quantiles from a Nystrom approximation.
    Limit {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        a: f64,
        #[arg(long, default_value_t = 2000)]
        m: usize,
        #[arg(long, default_value_t = 100_000)]
        sims: usize,
        #[arg(long, default_value = "sampled")]
        nodes: NystromNodes,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "json")]
        format: Format,
    },
    /// Compare the closed form with numerical quadrature.
    OracleCheck {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, value_delimiter = ',', required = true)]
        a: Vec<f64>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "json")]
        format: Format,
    },
}

enum Failure {
    Usage(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Usage(e.to_string())
        }
    }
}

fn render<T: serde::Serialize>(
    value: &T,
    format: Format,
    csv: impl Fn(&T) -> ecfnorm::Result<String>,
) -> ecfnorm::Result<String> {
    match format {
        Format::Json => harness::to_json(value),
        Format::Csv => csv(value),
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let out = cli.output.as_deref();
    match cli.command {
        Command::Test {
            input,
            a,
            reps,
            common,
            format,
        } => {
            let sample = load_sample(&input)?;
            let report = harness::run_test(&sample, a, common.alpha, reps, common.seed)?;
            harness::write_output(out, &render(&report, format, harness::test_report_csv)?)?;
        }
        Command::Critvals {
            d,
            n,
            a,
            reps,
            m,
            nodes,
            common,
            format,
        } => {
            let table = match n {
                SampleSize::Finite(n) => {
                    critical_values_mc(n, d, &a, common.alpha, reps, common.seed)?
                }
                SampleSize::Infinite => {
                    critical_values_limit_with(d, &a, common.alpha, m, reps, common.seed, nodes)?
                }
            };
            harness::write_output(out, &render(&table, format, harness::critical_table_csv)?)?;
        }
        Command::Power {
            alt,
            d,
            n,
            a,
            reps,
            critval_reps,
            critvals,
            common,
            format,
        } => {
            let alternative = parse_alternative(&alt)?;
            if alternative.d != d {
                return Err(Failure::Usage(format!(
                    "alternative {alt:?} has dimension {} but --d is {d}",
                    alternative.d
                )));
            }
            let critical_values = match critvals {
                Some(path) => CriticalSource::Table {
                    table: harness::cached_critical_values(
                        &path,
                        n,
                        d,
                        &a,
                        common.alpha,
                        critval_reps,
                        common.seed,
                    )?,
                },
                None => CriticalSource::Simulate { reps: critval_reps },
            };
            let spec = PowerStudySpec {
                alternative,
                n,
                d,
                a_grid: a,
                alpha: common.alpha,
                reps,
                seed: common.seed,
                critical_values,
            };
            let table = harness::power_study(&spec)?;
            harness::write_output(out, &render(&table, format, harness::power_table_csv)?)?;
        }
        Command::Limit {
            d,
            a,
            m,
            sims,
            seed,
            nodes,
            format,
        } => {
            let report = harness::limit_report(d, a, m, sims, seed, nodes)?;
            if report.significant_negative > 0 {
                eprintln!(
                    "warning: {} Nystrom eigenvalues below -1e-8 * lambda_1 were clipped",
                    report.significant_negative
                );
            }
            harness::write_output(out, &render(&report, format, harness::limit_report_csv)?)?;
        }
        Command::OracleCheck {
            d,
            n,
            a,
            seed,
            format,
        } => {
            let report = harness::oracle_check(d, n, &a, seed)?;
            harness::write_output(out, &render(&report, format, harness::oracle_report_csv)?)?;
            if !report.passed {
                return Err(Failure::Numerical(format!(
                    "closed form and quadrature disagree beyond {}",
                    report.tolerance
                )));
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
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.workers)
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return ExitCode::from(1);
        }
    };
    match pool.install(|| run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
