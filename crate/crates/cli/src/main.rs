//! Batch front-end: read experiment configs, run replica predictions and/or
//! Monte Carlo validations, and emit CSV tables.
//!
//! Exit codes: 0 success, 1 config error, 2 solver non-convergence,
//! 3 comparison failure.

mod commands;
mod config;
mod csvio;
mod presets;

use clap::{Parser, Subcommand};
use std::fmt;
use std::path::PathBuf;

#[derive(Debug)]
pub struct CliError {
    code: i32,
    message: String,
}

impl CliError {
    pub fn config(message: String) -> Self {
        CliError { code: 1, message }
    }
    pub fn solver(message: String) -> Self {
        CliError { code: 2, message }
    }
    pub fn comparison(message: String) -> Self {
        CliError { code: 3, message }
    }
    pub fn message(&self) -> String {
        self.message.clone()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.message)
    }
}

#[derive(Parser)]
#[command(
    name = "replica-cs",
    version,
    about = "Replica predictions and Monte Carlo validation for sparse linear estimation"
)]
struct Cli {
    /// Worker threads for sweeps and trials (default: all cores). Results
    /// are byte-identical for any worker count.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the fixed points and write prediction CSVs.
    Predict {
        file: PathBuf,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Run the Monte Carlo sections and write summary CSVs.
    Simulate {
        file: PathBuf,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        /// Override every experiment's master seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Join a prediction CSV with a simulation CSV and report gaps.
    Compare {
        predict_csv: PathBuf,
        simulate_csv: PathBuf,
        /// Fail (exit 3) when any |gap| exceeds this many dB.
        #[arg(long)]
        tolerance_db: Option<f64>,
        /// Also write the JSON summary here.
        #[arg(long)]
        json_out: Option<PathBuf>,
    },
    /// List or print the built-in experiment presets.
    Presets {
        #[command(subcommand)]
        action: PresetsAction,
    },
}

#[derive(Subcommand)]
enum PresetsAction {
    List,
    Show { name: String },
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // help/version print and exit cleanly; usage errors are config errors
            if e.use_stderr() {
                eprintln!("{e}");
                std::process::exit(1);
            } else {
                print!("{e}");
                std::process::exit(0);
            }
        }
    };
    if let Some(workers) = cli.workers {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global();
    }
    match run(cli.command) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.code);
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Predict { file, out_dir } => {
            let parsed = load_file(&file)?;
            commands::predict_command(&parsed, &out_dir)
        }
        Command::Simulate { file, out_dir, seed } => {
            let parsed = load_file(&file)?;
            commands::simulate_command(&parsed, &out_dir, seed)
        }
        Command::Compare {
            predict_csv,
            simulate_csv,
            tolerance_db,
            json_out,
        } => commands::compare_command(
            &predict_csv,
            &simulate_csv,
            tolerance_db,
            json_out.as_deref(),
        ),
        Command::Presets { action } => match action {
            PresetsAction::List => {
                for p in &presets::PRESETS {
                    println!("{:8} {}", p.name, p.description);
                }
                Ok(())
            }
            PresetsAction::Show { name } => match presets::find(&name) {
                Some(p) => {
                    print!("{}", p.content);
                    Ok(())
                }
                None => Err(CliError::config(format!(
                    "no preset `{name}`; available: {}",
                    presets::PRESETS
                        .iter()
                        .map(|p| p.name)
                        .collect::<Vec<_>>()
                        .join(", ")
                ))),
            },
        },
    }
}

fn load_file(path: &PathBuf) -> Result<config::ExperimentFile, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    config::ExperimentFile::parse(&text)
}
