//! Command line front end for the tree KdV solvers.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use kdv_tree::config::{RunConfig, SolverChoice};
use kdv_tree::error::exit;
use kdv_tree::runner::{run_scenario, RunOptions};
use kdv_tree::selfcheck::run_seed_check;
use log::error;

const EXIT_CODES: &str = "\
Exit codes:
  0  success
  1  a --seed-check property failed
  2  invalid command line
  3  configuration error
  4  well-posedness gate failed (singular vertex block)
  5  numerical failure
  6  input/output error";

/// Solves the linearised KdV equation on a seven-bond tree by the potential
/// method and/or a finite-difference oracle.
#[derive(Debug, Parser)]
#[command(name = "kdv-tree", version, about, after_help = EXIT_CODES)]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, required_unless_present = "seed_check")]
    config: Option<PathBuf>,

    /// Output directory; overrides output.directory.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Which solver to run; overrides scenario.solver.
    #[arg(long, value_parser = parse_solver)]
    solver: Option<SolverChoice>,

    /// Multiplies every grid resolution.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..=64))]
    refine: u32,

    /// Run the built-in property suite instead of a scenario.
    #[arg(long)]
    seed_check: bool,

    /// Only report errors.
    #[arg(long)]
    quiet: bool,
}

fn parse_solver(s: &str) -> Result<SolverChoice, String> {
    s.parse()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "error" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    ExitCode::from(run(&cli) as u8)
}

fn run(cli: &Cli) -> i32 {
    if cli.seed_check {
        let mut failed = 0;
        for c in run_seed_check(20_240_611) {
            if !c.passed {
                failed += 1;
            }
            if !cli.quiet || !c.passed {
                println!(
                    "{} {}: {:.3e} (tolerance {:.1e})",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.value,
                    c.tolerance
                );
            }
        }
        return if failed == 0 { exit::SUCCESS } else { exit::CHECK_FAILED };
    }
    let Some(path) = &cli.config else { return 2 };
    let config = match RunConfig::from_path(path) {
        Ok(c) => c,
        Err(e) => {
            error!("{e}");
            return e.exit_code();
        }
    };
    let options = RunOptions { out_dir: cli.out.clone(), solver: cli.solver, refine: cli.refine as usize };
    match run_scenario(&config, &options) {
        Ok(m) => {
            if !cli.quiet {
                for (k, v) in &m.metrics {
                    println!("{k} = {v:.6e}");
                }
                for w in &m.warnings {
                    println!("warning: {w}");
                }
            }
            exit::SUCCESS
        }
        Err(e) => {
            error!("{e}");
            e.exit_code()
        }
    }
}
