//! `fpl`: run experiment configs and built-in verification scenarios.
//!
//! Exit status: 0 when every check passes, 1 when a check fails (the failure
//! list goes to stderr and `failures.json`), 2 for usage or configuration errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fpl::config::{ExperimentConfig, OutputSpec, RunOutput};
use fpl::scenarios::{self, Overrides};
use fpl::FplError;

#[derive(Parser)]
#[command(name = "fpl", version, about = "Follow the Perturbed Leader experiments and bound checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run {
        #[arg(long, short)]
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run a built-in scenario by name.
    Scenario {
        name: String,
        #[command(flatten)]
        common: Common,
    },
    /// List the built-in scenarios.
    Scenarios {
        /// Print the catalog as JSON.
        #[arg(long)]
        json: bool,
    },
}

#[derive(clap::Args)]
struct Common {
    /// Directory for traces and reports.
    #[arg(long, env = "FPL_OUT_DIR", default_value = ".")]
    out_dir: PathBuf,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the replica count (instance or sample count for suite scenarios).
    #[arg(long)]
    replicas: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Result<ExitCode, FplError> {
    match command {
        Command::Scenarios { json } => {
            if json {
                println!("{}", serde_json::to_string_pretty(scenarios::catalog())?);
            } else {
                for s in scenarios::catalog() {
                    println!("{:<28} {}", s.name, s.claim);
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Run { config, common } => {
            let mut cfg = ExperimentConfig::from_path(&config)?;
            if let Some(seed) = common.seed {
                cfg = cfg.with_seed(seed);
            }
            if let Some(r) = common.replicas {
                cfg = cfg.with_replicas(r);
            }
            let out = fpl::config::run_experiment(&cfg, None)?;
            finish(&out, &cfg.output, &common.out_dir)
        }
        Command::Scenario { name, common } => {
            let overrides = Overrides {
                seed: common.seed,
                replicas: common.replicas,
            };
            let out = scenarios::run_scenario(&name, overrides)?;
            let output = OutputSpec {
                trace: Some(PathBuf::from(format!("{name}.trace.csv"))),
                report: PathBuf::from(format!("{name}.report.json")),
            };
            finish(&out, &output, &common.out_dir)
        }
    }
}

fn finish(out: &RunOutput, output: &OutputSpec, out_dir: &Path) -> Result<ExitCode, FplError> {
    for p in out.write(output, out_dir)? {
        println!("wrote {}", p.display());
    }
    for c in &out.report.checks {
        let verdict = if c.passed() { "PASS" } else { "FAIL" };
        println!(
            "[{verdict}] {}: lhs {:.6} rhs {:.6} slack {:.6} (stderr {:.6})",
            c.theorem, c.lhs, c.rhs, c.slack, c.slack_stderr
        );
    }
    if out.report.passed {
        return Ok(ExitCode::SUCCESS);
    }
    let failures = out.report.failures_json()?;
    std::fs::write(out_dir.join("failures.json"), &failures)?;
    eprintln!("{failures}");
    Ok(ExitCode::from(1))
}
