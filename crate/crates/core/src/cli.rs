//! Command-line driver behind the `latrel` binary.
//!
//! Exit codes: 0 success, 2 input or usage error, 3 the intact system
//! already fails, 4 the evaluator failed (a partial report is still written).

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::baselines::{self, BaselineError, McsSettings};
use crate::csilp::{Criteria, Csilp, CsilpError};
use crate::report::{Method, OutputFormat, Report};
use crate::system::{resolve_system, System};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_BASE_STATE: i32 = 3;
pub const EXIT_EVALUATOR: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "latrel",
    version,
    about = "Loss-of-load probability via critical-state identification"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Critical-state identification with LOLP bounds.
    Assess {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        stop: StopArgs,
        /// Also subtract certified-normal cells from the upper bound.
        #[arg(long)]
        tight_upper: bool,
    },
    /// Level-by-level state enumeration baseline.
    Enumerate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        stop: StopArgs,
    },
    /// Monte Carlo sampling baseline.
    Mcs {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Target coefficient of variation.
        #[arg(long, default_value_t = 0.01)]
        cov: f64,
        #[arg(long, default_value_t = 10_000_000)]
        max_samples: u64,
    },
    /// Exhaustive enumeration: exact LOLP and minimal cut sets.
    Oracle {
        #[command(flatten)]
        common: Common,
    },
    /// Pretty-print a saved report.json.
    Report {
        file: PathBuf,
        /// Re-emit in a machine format instead of the text summary.
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
}

#[derive(Debug, Args)]
pub struct Common {
    /// System file path, or the name of a bundled system (sys5, test3, rbts, ...).
    #[arg(long)]
    pub system: String,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// Write outputs into this directory instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Record wall-clock times (the report is then not reproducible byte for byte).
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Args)]
pub struct StopArgs {
    /// Highest failure level to resolve.
    #[arg(long)]
    pub k_max: Option<usize>,
    /// Evaluation budget, checked between rounds.
    #[arg(long)]
    pub max_evals: Option<u64>,
    /// Stop once upper - lower is at most this.
    #[arg(long)]
    pub delta: Option<f64>,
}

impl StopArgs {
    fn criteria(&self) -> Criteria {
        Criteria {
            max_evaluations: self.max_evals,
            min_gap: self.delta,
            max_level: self.k_max,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Json => OutputFormat::Json,
            Format::Csv => OutputFormat::Csv,
        }
    }
}

struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn input(e: impl std::fmt::Display) -> Self {
        Failure {
            code: EXIT_INPUT,
            message: e.to_string(),
        }
    }
}

impl From<CsilpError> for Failure {
    fn from(e: CsilpError) -> Self {
        let code = match e {
            CsilpError::BaseStateFailure => EXIT_BASE_STATE,
            CsilpError::Evaluator(_) => EXIT_EVALUATOR,
            _ => EXIT_INPUT,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<BaselineError> for Failure {
    fn from(e: BaselineError) -> Self {
        let code = match e {
            BaselineError::BaseStateFailure => EXIT_BASE_STATE,
            BaselineError::Evaluator(_) => EXIT_EVALUATOR,
            _ => EXIT_INPUT,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with_args<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(stderr, "{}", e.render());
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    match execute(cli, stdout) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message);
            f.code
        }
    }
}

fn load(common: &Common) -> Result<System, Failure> {
    if common.workers == 0 {
        return Err(Failure::input("--workers must be at least 1"));
    }
    resolve_system(&common.system).map_err(Failure::input)
}

fn execute(cli: Cli, stdout: &mut dyn Write) -> Result<i32, Failure> {
    let (report, common) = match cli.command {
        Command::Report { file, format } => {
            let report = Report::load(&file).map_err(Failure::input)?;
            let text = match format {
                None => report.render(),
                Some(Format::Json) => report.to_json(),
                Some(Format::Csv) => {
                    let mut t = report.trace_csv().map_err(Failure::input)?;
                    if report.critical_table().is_some() {
                        t.push('\n');
                        t.push_str(&report.critical_csv().map_err(Failure::input)?);
                    }
                    t
                }
            };
            stdout.write_all(text.as_bytes()).map_err(Failure::input)?;
            return Ok(EXIT_OK);
        }
        Command::Assess {
            common,
            stop,
            tight_upper,
        } => {
            let sys = load(&common)?;
            let criteria = stop.criteria();
            let t0 = Instant::now();
            let run = Csilp::new(sys.evaluator(), &sys.reliability)
                .criteria(criteria)
                .workers(common.workers)
                .tight_upper(tight_upper)
                .timing(common.timing)
                .run()?;
            let wall = common.timing.then(|| elapsed_ms(t0));
            (
                Report::from_csilp(&sys, &run, criteria, tight_upper, wall),
                common,
            )
        }
        Command::Enumerate { common, stop } => {
            let sys = load(&common)?;
            let criteria = stop.criteria();
            let t0 = Instant::now();
            let run = baselines::enumerate_assess(
                sys.evaluator(),
                &sys.reliability,
                criteria,
                common.workers,
            )?;
            let wall = common.timing.then(|| elapsed_ms(t0));
            (Report::from_enumeration(&sys, &run, criteria, wall), common)
        }
        Command::Mcs {
            common,
            seed,
            cov,
            max_samples,
        } => {
            let sys = load(&common)?;
            let settings = McsSettings {
                seed,
                max_samples,
                target_cov: Some(cov),
                ..Default::default()
            };
            let t0 = Instant::now();
            let run = baselines::monte_carlo_assess(
                sys.evaluator(),
                &sys.reliability,
                settings,
                common.workers,
            )?;
            let wall = common.timing.then(|| elapsed_ms(t0));
            (Report::from_mcs(&sys, &run, settings, wall), common)
        }
        Command::Oracle { common } => {
            let sys = load(&common)?;
            let t0 = Instant::now();
            let res =
                baselines::brute_force_oracle(sys.evaluator(), &sys.reliability, common.workers)?;
            let wall = common.timing.then(|| elapsed_ms(t0));
            (Report::from_oracle(&sys, &res, wall), common)
        }
    };
    emit(&report, &common, stdout)?;
    Ok(if report.aborted.is_some() {
        EXIT_EVALUATOR
    } else {
        EXIT_OK
    })
}

fn emit(report: &Report, common: &Common, stdout: &mut dyn Write) -> Result<(), Failure> {
    let text = match (&common.out, common.format) {
        (Some(dir), format) => {
            let files = report
                .write_to(dir, format.into())
                .map_err(Failure::input)?;
            let mut t = report.render();
            for f in files {
                t.push_str(&format!("wrote {}\n", f.display()));
            }
            t
        }
        (None, Format::Json) => report.to_json(),
        (None, Format::Csv) => match report.method {
            Method::MonteCarlo => report.convergence_csv(),
            Method::Oracle => report.critical_csv(),
            _ => report.trace_csv(),
        }
        .map_err(Failure::input)?,
    };
    stdout.write_all(text.as_bytes()).map_err(Failure::input)
}

fn elapsed_ms(t0: Instant) -> f64 {
    t0.elapsed().as_secs_f64() * 1e3
}

/// Entry point used by the binary.
pub fn main() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    main_with_args(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}
