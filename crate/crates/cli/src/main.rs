use std::io::Write;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rigidity_lab::commands::{self, CommonArgs, FlexSpec};
use rigidity_lab::{exit, THREADS_ENV};

#[derive(Parser)]
#[command(name = "rigidity-lab", version, about = "Local rigidity analysis of polyhedral surfaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the document and that its state closes.
    Validate(CommonArgs),
    /// Run the rigidity classification.
    Analyze {
        #[command(flatten)]
        common: CommonArgs,
        /// Record wall time in the report (breaks byte-for-byte reproducibility).
        #[arg(long)]
        timing: bool,
    },
    /// Compare analytic derivative tensors with central differences.
    DerivsCheck {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u8).range(1..=3))]
        order: u8,
    },
    /// Fit unstressed energy growth exponents along flexes.
    Growth {
        #[command(flatten)]
        common: CommonArgs,
        /// Certificate index (default: all).
        #[arg(long)]
        cert: Option<usize>,
        /// Machine report of a prior analyze run.
        #[arg(long)]
        report: Option<std::path::PathBuf>,
        /// Explicit jet as JSON, e.g. '[[1,0,0],[0,0,0]]'.
        #[arg(long, conflicts_with_all = ["cert", "report"])]
        jet: Option<String>,
    },
}

fn configure_threads() -> Result<(), String> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("{THREADS_ENV} must be a positive integer, got {v:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit::USAGE as u8 } else { 0 });
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(exit::USAGE as u8);
    }
    let out = match &cli.command {
        Command::Validate(c) => commands::validate(c),
        Command::Analyze { common, timing } => commands::analyze(common, *timing),
        Command::DerivsCheck { common, order } => commands::derivs_check(common, *order as usize),
        Command::Growth {
            common,
            cert,
            report,
            jet,
        } => commands::growth(
            common,
            &FlexSpec {
                cert: *cert,
                report: report.clone(),
                jet: jet.clone(),
            },
        ),
    };
    let _ = std::io::stdout().write_all(out.stdout.as_bytes());
    let _ = std::io::stderr().write_all(out.stderr.as_bytes());
    ExitCode::from(out.code as u8)
}
