use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use scoregan_bench::checks::property_checks;
use scoregan_bench::report::{export, read_json, write_csv, write_json, Format};
use scoregan_bench::runner::merge_sweep;
use scoregan_bench::spec::Profile;
use scoregan_bench::{run_experiment, scaling_sweep, Axis, BenchError, ExperimentSpec, TrialReport};

#[derive(Parser)]
#[command(name = "bench", about = "Robust scatter estimation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment from a key = value config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        output: Output,
    },
    /// Run the config once per value of one field.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// One of n, p, eps, s, v.
        #[arg(long)]
        axis: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[command(flatten)]
        output: Output,
    },
    /// Run the property checks; exit status 1 if any fails.
    Check {
        /// Also write the results as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Convert a saved JSON report.
    Export {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "csv")]
        format: String,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(clap::Args)]
struct Output {
    /// Report format.
    #[arg(long, default_value = "csv")]
    format: String,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Use the full-scale hyperparameters for the GAN estimators.
    #[arg(long)]
    full: bool,
}

fn load_spec(path: &Path, full: bool) -> Result<ExperimentSpec, BenchError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| BenchError::Config(format!("{}: {e}", path.display())))?;
    let mut spec = ExperimentSpec::parse(&text)?;
    if full {
        spec.profile = Profile::Full;
    }
    Ok(spec)
}

fn emit(report: &TrialReport, output: &Output) -> Result<(), BenchError> {
    let format: Format = output.format.parse()?;
    match &output.out {
        Some(path) => export(report, path, format),
        None => {
            let stdout = std::io::stdout().lock();
            match format {
                Format::Csv => write_csv(report, stdout),
                Format::Json => write_json(report, stdout),
            }
        }
    }
}

fn summarize(report: &TrialReport) {
    for a in &report.aggregates {
        let loc = match (a.mean_loc, a.std_loc) {
            (Some(m), Some(s)) => format!("  loc {m:.4} ({s:.4})"),
            _ => String::new(),
        };
        eprintln!(
            "{:<28} {:<20} op {:.4} ({:.4}){loc}  failures {}/{}",
            a.experiment_id, a.estimator, a.mean_op, a.std_op, a.failures, a.trials
        );
    }
}

fn run(cli: Cli) -> Result<ExitCode, BenchError> {
    match cli.command {
        Command::Run { config, output } => {
            let spec = load_spec(&config, output.full)?;
            output.format.parse::<Format>()?;
            let report = run_experiment(&spec)?;
            summarize(&report);
            emit(&report, &output)?;
        }
        Command::Sweep { config, axis, values, output } => {
            let spec = load_spec(&config, output.full)?;
            let axis: Axis = axis.parse()?;
            output.format.parse::<Format>()?;
            for &v in &values {
                spec.with_axis(axis, v)?;
            }
            let report = merge_sweep(&scaling_sweep(&spec, axis, &values)?);
            summarize(&report);
            emit(&report, &output)?;
        }
        Command::Check { json } => {
            let results = property_checks();
            let mut stdout = std::io::stdout().lock();
            for r in &results {
                writeln!(stdout, "{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail)?;
            }
            if let Some(path) = json {
                std::fs::write(path, serde_json::to_string_pretty(&results)?)?;
            }
            if results.iter().any(|r| !r.passed) {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Export { input, format, out } => {
            let format: Format = format.parse()?;
            export(&read_json(&input)?, &out, format)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
