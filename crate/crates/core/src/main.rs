use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use ctd::exec::Execution;
use ctd::harness::emit::{self, Assertion};
use ctd::harness::scenario::{parse_scenario, Scenario};
use ctd::harness::suite::{load_scenarios, run_suite, MEAN_LEVEL_FACTOR};
use ctd::harness::tune::tune_judges;
use ctd::harness::{compare_variants, run_scenario};

#[derive(Parser)]
#[command(name = "ctd", version, about = "Run trajectory-detection scenarios through spiking circuits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario and write its traces.
    Run {
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run both depth-layer variants on identical sensing and compare their potentials.
    Compare {
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run every scenario in a directory; exits non-zero if any suite assertion fails.
    Suite {
        dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Run scenarios one after another instead of on the thread pool.
        #[arg(long)]
        sequential: bool,
    },
    /// Grid-search judge weights over the scripted scenarios in a directory.
    TuneJudges {
        dir: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn load(path: &Path, seed: Option<u64>) -> Result<Scenario, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let s = parse_scenario(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(match seed {
        Some(seed) => s.with_seed(seed),
        None => s,
    })
}

fn report(assertions: &[Assertion]) {
    for a in assertions {
        println!("{} {}: {}", if a.passed { "PASS" } else { "FAIL" }, a.name, a.detail);
    }
}

fn execute(cli: Cli) -> Result<bool, String> {
    match cli.command {
        Command::Run { scenario, out, seed } => {
            let s = load(&scenario, seed)?;
            let a = run_scenario(&s).map_err(|e| e.to_string())?;
            let assertions = emit::run_assertions(&a);
            emit::emit_outputs(&a, &out, &assertions).map_err(|e| e.to_string())?;
            let d = emit::dominant_reading(&a);
            println!("{}: direction {} depth {}", s.name, d.direction, d.depth);
            report(&assertions);
            Ok(true)
        }
        Command::Compare { scenario, out, seed } => {
            let s = load(&scenario, seed)?;
            let (r, ddm, weights) = compare_variants(&s).map_err(|e| e.to_string())?;
            let assertions = vec![
                Assertion::new(
                    "max_step_ordering",
                    r.smoother_steps(),
                    format!("ddm {} vs weights {}", r.ddm.metrics.max_step, r.weights.metrics.max_step),
                ),
                Assertion::new(
                    "total_variation_ordering",
                    r.smoother_variation(),
                    format!("ddm {} vs weights {}", r.ddm.metrics.total_variation, r.weights.metrics.total_variation),
                ),
                Assertion::new(
                    "mean_level_kept",
                    r.level_kept(MEAN_LEVEL_FACTOR),
                    format!("ddm {} vs weights {}", r.ddm.metrics.mean_level, r.weights.metrics.mean_level),
                ),
            ];
            emit::emit_comparison(&r, &ddm, &weights, &out, &assertions).map_err(|e| e.to_string())?;
            println!("{}: ddm {} / weights {}", s.name, r.ddm.depth, r.weights.depth);
            report(&assertions);
            Ok(true)
        }
        Command::Suite { dir, out, seed, sequential } => {
            let scenarios = load_scenarios(&dir, seed).map_err(|e| e.to_string())?;
            let exec = if sequential { Execution::Sequential } else { Execution::default() };
            let r = run_suite(&scenarios, Some(&out), exec).map_err(|e| e.to_string())?;
            for o in &r.outcomes {
                println!("{}: direction {} depth {}", o.name, o.direction, o.depth);
            }
            report(&r.assertions);
            Ok(r.passed())
        }
        Command::TuneJudges { dir, seed } => {
            let scenarios = load_scenarios(&dir, seed).map_err(|e| e.to_string())?;
            let t = tune_judges(&scenarios, Execution::default()).map_err(|e| e.to_string())?;
            println!("{}", emit::pretty(&json!(t)));
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
