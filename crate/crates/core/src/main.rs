use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use spdhg::cli::{exit_code, oracle_report, run_experiment, validate, ExperimentConfig};

#[derive(Parser)]
#[command(name = "spdhg", version, about = "PDHG/SPDHG experiments on synthetic parallel MRI")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// key = value config file; omitted keys take their defaults
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides as `--key value` pairs
    #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Tune gamma, run the solvers and write CSV, images and manifest
    Run(Common),
    /// Build the instance and check the step-size condition
    Validate(Common),
    /// Solve the quadratic model densely and print fixed-point residuals
    Oracle(Common),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(c) => ExperimentConfig::load(c.config.as_deref(), &c.overrides)
            .and_then(|cfg| run_experiment(&cfg))
            .map(|s| {
                for r in &s.results {
                    if let Some(last) = r.records.last() {
                        println!(
                            "{}: gamma={} objective={} relative_objective={}",
                            r.algorithm,
                            r.steps.gamma,
                            last.objective,
                            last.relative_objective.map_or("n/a".into(), |v| v.to_string())
                        );
                    }
                }
                println!("wrote {}", s.output_dir.display());
                true
            }),
        Command::Validate(c) => ExperimentConfig::load(c.config.as_deref(), &c.overrides)
            .and_then(|cfg| validate(&cfg))
            .map(|report| {
                print!("{}", report.to_text());
                report.satisfied()
            }),
        Command::Oracle(c) => ExperimentConfig::load(c.config.as_deref(), &c.overrides)
            .and_then(|cfg| oracle_report(&cfg))
            .map(|report| {
                print!("{}", report.to_text());
                true
            }),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
