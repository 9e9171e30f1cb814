use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use benford_chain::contfrac::NamedConstant;
use benford_chain::report::{to_json, AnalyzeOptions};
use benford_chain::sequences::{ClassicSequence, SeriesKind};
use benford_chain::SearchBounds;
use benford_chain_cli::*;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "benford-chain", version, about = "First-digit behaviour of finite Markov chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Copy)]
struct BoundArgs {
    /// Largest denominator / coefficient searched for resonance witnesses.
    #[arg(long, default_value_t = 100)]
    qmax: i64,
    /// Tolerance for accepting a witness.
    #[arg(long, default_value_t = 1e-10)]
    eps: f64,
}

impl From<BoundArgs> for SearchBounds {
    fn from(b: BoundArgs) -> Self {
        SearchBounds { qmax: b.qmax, eps: b.eps }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    PnMinusPstar,
    SuccessiveDiff,
}

#[derive(Clone, Copy, ValueEnum)]
enum SeqKind {
    Pow2,
    Factorial,
    Fibonacci,
    All,
}

#[derive(Subcommand)]
enum Command {
    /// Classify a chain and predict which components follow the first-digit law.
    Analyze {
        matrix: PathBuf,
        #[command(flatten)]
        bounds: BoundArgs,
        /// Also tabulate empirical frequencies over this many terms.
        #[arg(long)]
        n: Option<u64>,
        /// Print error payloads as JSON on stdout.
        #[arg(long)]
        json: bool,
    },
    /// Write first-digit frequencies of every component to a CSV.
    Simulate {
        matrix: PathBuf,
        #[arg(long)]
        n: u64,
        #[arg(long, value_enum, default_value = "pn-minus-pstar")]
        kind: Kind,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long)]
        full_precision: bool,
    },
    /// First-digit frequencies of 2ⁿ, n! and Fibonacci numbers.
    Seqdigits {
        #[arg(long, value_enum, default_value = "all")]
        kind: SeqKind,
        #[arg(long, default_value_t = 1000)]
        n: u64,
        #[arg(long)]
        full_precision: bool,
    },
    /// Monte Carlo over random chains with independent uniform rows.
    Sample {
        #[arg(long, default_value_t = 3)]
        d: usize,
        #[arg(long, default_value_t = 1000)]
        count: u64,
        #[arg(long, default_value_t = 10_000)]
        n: u64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[command(flatten)]
        bounds: BoundArgs,
        /// Also write per-sample rows to this CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Continued-fraction expansion of a number or a named constant.
    Contfrac {
        #[arg(long, conflicts_with = "expr", required_unless_present = "expr", allow_hyphen_values = true)]
        value: Option<String>,
        /// One of: log10(0.3), ex12.log_abs_lambda2, golden_ratio,
        /// ex13.arg_lambda2_over_2pi, ex13.log_abs_lambda2.
        #[arg(long)]
        expr: Option<String>,
        #[arg(long, default_value_t = 50)]
        terms: usize,
        #[arg(long)]
        json: bool,
    },
    /// Estimate a chain from observed states and check it against the law.
    Detect {
        sequence: PathBuf,
        #[arg(long)]
        states: usize,
        #[arg(long, default_value_t = 1000)]
        n: u64,
        #[command(flatten)]
        bounds: BoundArgs,
        #[arg(long)]
        json: bool,
    },
    /// Simulate a trajectory of one-based state labels.
    Trajectory {
        matrix: PathBuf,
        #[arg(long)]
        len: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

fn report_error(e: &anyhow::Error, json: bool) -> i32 {
    if json {
        print!("{}", error_json(e, None));
    } else {
        eprintln!("error: {e:#}");
    }
    error_exit_code(e)
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Analyze { matrix, bounds, n, json } => {
            match cmd_analyze(&matrix, AnalyzeOptions { bounds: bounds.into(), empirical_n: n }) {
                Ok(r) => {
                    print!("{}", to_json(&r));
                    Ok(r.exit_code())
                }
                Err(e) => {
                    let m = benford_chain::io::read_matrix(&matrix).ok();
                    if json {
                        print!("{}", error_json(&e, m.as_ref()));
                    } else {
                        eprintln!("error: {e:#}");
                    }
                    Ok(error_exit_code(&e))
                }
            }
        }
        Command::Simulate { matrix, n, kind, out, full_precision } => {
            let kind = match kind {
                Kind::PnMinusPstar => SeriesKind::PnMinusPstar,
                Kind::SuccessiveDiff => SeriesKind::SuccessiveDiff,
            };
            let (path, _) = cmd_simulate(&matrix, n, kind, &out, full_precision)?;
            println!("{}", path.display());
            Ok(EXIT_NONRESONANT)
        }
        Command::Seqdigits { kind, n, full_precision } => {
            let kinds: Vec<ClassicSequence> = match kind {
                SeqKind::Pow2 => vec![ClassicSequence::Pow2],
                SeqKind::Factorial => vec![ClassicSequence::Factorial],
                SeqKind::Fibonacci => vec![ClassicSequence::Fibonacci],
                SeqKind::All => vec![ClassicSequence::Factorial, ClassicSequence::Pow2, ClassicSequence::Fibonacci],
            };
            print!("{}", cmd_seqdigits(&kinds, n, full_precision)?);
            Ok(EXIT_NONRESONANT)
        }
        Command::Sample { d, count, n, seed, bounds, csv } => {
            let r = cmd_sample(d, count, n, seed, bounds.into())?;
            if let Some(path) = csv {
                std::fs::write(&path, sample_csv(&r)).with_context(|| format!("writing {}", path.display()))?;
            }
            print!("{}", to_json(&r));
            Ok(EXIT_NONRESONANT)
        }
        Command::Contfrac { value, expr, terms, json } => {
            let source = match (value, expr) {
                (Some(v), _) => ContFracSource::Value(v),
                (None, Some(e)) => ContFracSource::Named(e.parse::<NamedConstant>().map_err(benford_chain::Error::from)?),
                (None, None) => unreachable!("clap requires one of --value, --expr"),
            };
            let cf = cmd_contfrac(&source, terms)?;
            if json {
                print!("{}", to_json(&cf));
            } else {
                print!("{}", contfrac_listing(&cf));
            }
            Ok(EXIT_NONRESONANT)
        }
        Command::Detect { sequence, states, n, bounds, json } => match cmd_detect(&sequence, states, n, bounds.into()) {
            Ok(r) => {
                print!("{}", to_json(&r));
                Ok(r.exit_code())
            }
            Err(e) => Ok(report_error(&e, json)),
        },
        Command::Trajectory { matrix, len, seed } => {
            print!("{}", cmd_trajectory(&matrix, len, seed)?);
            Ok(EXIT_NONRESONANT)
        }
    }
}

fn main() -> ExitCode {
    let code = match run(Cli::parse()) {
        Ok(c) => c,
        Err(e) => report_error(&e, false),
    };
    ExitCode::from(code as u8)
}
