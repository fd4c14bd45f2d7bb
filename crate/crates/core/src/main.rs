use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dflsim::experiment::{self, ExperimentConfig, ExperimentError, RunOptions};

#[derive(Parser)]
#[command(name = "dflsim", version, about = "Decentralised federated learning simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write CSV files.
    Run(RunArgs),
    /// Report every problem with a configuration without running it.
    Validate(Source),
    /// List the built-in presets, or print one.
    Presets { name: Option<String> },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// Experiment description in TOML.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in experiment by name (see `dflsim presets`).
    #[arg(long)]
    preset: Option<String>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    source: Source,
    /// Replace the configured seed list; repeatable.
    #[arg(long = "seed")]
    seeds: Vec<u64>,
    /// Output directory (default: the config's `output`, else `results`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seeds run concurrently.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long)]
    quiet: bool,
    /// Omit the timestamp line so repeated runs give identical files.
    #[arg(long)]
    no_timestamp: bool,
}

fn load(source: &Source) -> Result<ExperimentConfig, ExperimentError> {
    match (&source.config, &source.preset) {
        (Some(path), _) => experiment::load_config(path),
        (None, Some(name)) => experiment::preset(name),
        (None, None) => unreachable!("clap requires one source"),
    }
}

fn fail(e: &ExperimentError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(if e.is_config_error() { 2 } else { 3 })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Presets { name: None } => {
            for name in experiment::preset_names() {
                println!("{name}");
            }
            ExitCode::SUCCESS
        }
        Command::Presets { name: Some(name) } => match experiment::preset_source(&name) {
            Some(text) => {
                print!("{text}");
                ExitCode::SUCCESS
            }
            None => fail(&ExperimentError::UnknownPreset(name)),
        },
        Command::Validate(source) => {
            let config = match load(&source) {
                Ok(c) => c,
                Err(e) => return fail(&e),
            };
            let diagnostics = experiment::validate(&config);
            if diagnostics.is_empty() {
                println!("ok");
                ExitCode::SUCCESS
            } else {
                for d in &diagnostics {
                    println!("{d}");
                }
                ExitCode::from(2)
            }
        }
        Command::Run(args) => {
            let mut config = match load(&args.source) {
                Ok(c) => c,
                Err(e) => return fail(&e),
            };
            if !args.seeds.is_empty() {
                config.seeds = args.seeds;
            }
            let opts = RunOptions {
                out_dir: args
                    .out
                    .or_else(|| config.output.clone())
                    .unwrap_or_else(|| PathBuf::from("results")),
                timestamp: !args.no_timestamp,
                quiet: args.quiet,
                jobs: args.jobs.max(1),
            };
            match experiment::run(&config, &opts) {
                Ok(report) => {
                    if !args.quiet {
                        for f in &report.files {
                            println!("{}", f.display());
                        }
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => fail(&e),
            }
        }
    }
}
