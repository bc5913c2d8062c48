//! Batch front-end: run a declarative experiment file, or list the builtin
//! payoff/dynamics/risk catalog.
//!
//! Exit codes: 0 when every configured check passes, 1 when a check fails,
//! 2 on usage, parse, validation or solver-refusal errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dynkin::experiment::{run, ExperimentSpec, RunOptions};
use dynkin::model::{Builtin, DYNAMICS_BUILTINS, PAYOFF_BUILTINS, RISK_BUILTINS};

#[derive(Parser)]
#[command(name = "dynkin", version, about = "Constrained risk-sensitive Dynkin game solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute an experiment file and write its artifacts.
    Run {
        /// Path to the experiment TOML document.
        spec: PathBuf,
        /// Master seed override.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory override.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (must not change any result).
        #[arg(long)]
        jobs: Option<usize>,
        /// Emit one CSV row per simulated game path.
        #[arg(long)]
        emit_paths: bool,
    },
    /// Print the builtin payoff, dynamics and risk catalog.
    ListBuiltins,
}

fn print_builtins(kind: &str, list: &[Builtin]) {
    println!("{kind}:");
    for b in list {
        let params: Vec<String> = b.params.iter().map(|p| p.name.to_string()).collect();
        if params.is_empty() {
            println!("  {:<12} {}", b.name, b.description);
        } else {
            println!("  {:<12} {}  [params: {}]", b.name, b.description, params.join(", "));
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::ListBuiltins => {
            print_builtins("payoffs", PAYOFF_BUILTINS);
            print_builtins("dynamics", DYNAMICS_BUILTINS);
            print_builtins("risk", RISK_BUILTINS);
            ExitCode::SUCCESS
        }
        Command::Run {
            spec,
            seed,
            out,
            jobs,
            emit_paths,
        } => {
            if let Some(n) = jobs {
                // Thread count is a throughput knob only; reductions are
                // sequenced in path order so results cannot depend on it.
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    eprintln!("warning: could not size the worker pool: {e}");
                }
            }
            let spec = match ExperimentSpec::load(&spec) {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            let options = RunOptions {
                seed_override: seed,
                out_dir: out,
                emit_paths,
            };
            match run(&spec, &options) {
                Ok(outcome) => {
                    let summary = &outcome.summary;
                    println!(
                        "solver[{}] value = {:.12}  (qbar0 = {:.12})",
                        summary.solver.mode, summary.solver.value, summary.solver.qbar0
                    );
                    for (name, check) in &summary.checks {
                        println!(
                            "check {:<12} {}  value = {:+.6e}  reference = {:+.6e}  \
                             margin = {:+.3e}  stderr = {:.3e}",
                            name,
                            if check.pass { "PASS" } else { "FAIL" },
                            check.value,
                            check.reference,
                            check.margin,
                            check.stderr,
                        );
                    }
                    println!("artifacts written to {}", outcome.out_dir.display());
                    if outcome.all_passed {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(1)
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(2)
                }
            }
        }
    }
}
