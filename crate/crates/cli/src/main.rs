//! `kets run` / `kets sweep`: exit 0 on success, 1 on invalid input, 2 when
//! an experiment fails at runtime.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use kets_cli::{run_and_report, ConfigError, ReportError, Settings};

#[derive(Parser)]
#[command(name = "kets", about = "Federated poisoning experiments with trust-score defenses")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its report bundle.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the `seed` key of the config file.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run one experiment per value of a key, each into `<out>/<key>_<value>`.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        key: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the `seed` key of the config file.
        #[arg(long)]
        seed: Option<u64>,
    },
}

enum Failure {
    Invalid(String),
    Runtime(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io { .. } => Failure::Runtime(e.to_string()),
            e => Failure::Invalid(e.to_string()),
        }
    }
}

impl From<ReportError> for Failure {
    fn from(e: ReportError) -> Self {
        match e {
            ReportError::Config(e) => e.into(),
            e => Failure::Runtime(e.to_string()),
        }
    }
}

fn load(config: &Path, seed: Option<u64>) -> Result<Settings, Failure> {
    let mut settings = Settings::from_file(config)?;
    if let Some(seed) = seed {
        settings.set("seed", &seed.to_string())?;
    }
    Ok(settings)
}

fn execute(settings: &Settings, out: &Path) -> Result<(), Failure> {
    let (bundle, run) = run_and_report(settings, out)?;
    let last = run.reports.last().map_or("n/a".to_string(), |r| format!("{:.4}", r.accuracy));
    println!(
        "{}: {} rounds, final accuracy {last}",
        out.display(),
        run.reports.len()
    );
    match run.aborted {
        Some(e) => Err(Failure::Runtime(format!(
            "run aborted after {} rounds: {e} (partial report in {})",
            run.reports.len(),
            bundle.summary.display()
        ))),
        None => Ok(()),
    }
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run { config, out, seed } => {
            let settings = load(&config, seed)?;
            execute(&settings, &out)
        }
        Command::Sweep {
            config,
            key,
            values,
            out,
            seed,
        } => {
            let base = load(&config, seed)?;
            let mut runs = Vec::with_capacity(values.len());
            for value in &values {
                let mut settings = base.clone();
                settings.set(&key, value)?;
                settings.validate()?;
                runs.push((out.join(format!("{key}_{value}")), settings));
            }
            for (dir, settings) in &runs {
                execute(settings, dir)?;
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
