use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use kpzlab_cli::{run, CliError, Experiment, ExperimentConfig, Overrides};

#[derive(Debug, Parser)]
#[command(name = "kpzlab", version, about = "Monte-Carlo experiments on Brownian last passage percolation")]
struct Cli {
    #[command(subcommand)]
    experiment: Experiment,
    /// TOML file with configuration keys; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Replica threads (0 = all cores). Outputs do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    #[command(flatten)]
    overrides: Overrides,
}

fn resolve(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let mut cfg = ExperimentConfig::from_env()?;
    if let Some(p) = &cli.config {
        cfg = cfg.with_file(p)?;
    }
    Ok(cfg.with_overrides(&cli.overrides)?.resolved())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = resolve(&cli).and_then(|cfg| run(cli.experiment, &cfg, cli.workers));
    match outcome {
        Ok(out) => {
            for c in &out.criteria {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            ExitCode::from(if out.passed() { 0 } else { 1 })
        }
        Err(e) => {
            eprintln!("kpzlab {}: {e}", cli.experiment.name());
            ExitCode::from(e.exit_code())
        }
    }
}
