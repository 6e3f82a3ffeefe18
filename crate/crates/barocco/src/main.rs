//! Command-line entry point: training runs, the matrix-game λ sweep, and
//! the analytic verification suite.
//!
//! Exit codes: 0 on success, 1 on configuration or usage errors, 2 when
//! verification checks fail.

use barocco::harness::{mpd_sweep_table, parse_grid, run, run_verification, ExperimentConfig};
use clap::{Parser, Subcommand};
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "barocco",
    version,
    about = "Selfish/social mixed-incentive multi-agent RL experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one configuration and append evaluation metrics to its log.
    Run {
        /// Path to a flat TOML experiment config.
        #[arg(long)]
        config: PathBuf,
        /// Override the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Metric log path; defaults to $BAROCCO_OUT_DIR (or ./runs) plus a
        /// name derived from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep λ on the Modified Prisoner's Dilemma and print the final
    /// greedy actions as a CSV table.
    MpdSweep {
        /// λ grid as start:end:step.
        #[arg(long, default_value = "0:1:0.1")]
        grid: String,
        /// Number of seeds (runs seeds 0..n).
        #[arg(long, default_value_t = 3)]
        seeds: u64,
    },
    /// Run every analytic oracle check and report pass/fail per check.
    Verify,
}

fn main() {
    std::process::exit(real_main());
}

fn real_main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version land here too; only genuine usage
            // errors are failures.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match cli.command {
        Command::Run { config, seed, out } => {
            let cfg = match ExperimentConfig::from_path(&config) {
                Ok(cfg) => cfg,
                Err(e) => {
                    eprintln!("error: {e}");
                    return 1;
                }
            };
            let cfg = match seed {
                Some(seed) => ExperimentConfig { seed, ..cfg },
                None => cfg,
            };
            match run(&cfg, out.as_deref()) {
                Ok(art) => {
                    println!(
                        "config {} | {} evaluation rows -> {}",
                        &art.config_hash[..12],
                        art.rows.len(),
                        art.log_path.display()
                    );
                    0
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    1
                }
            }
        }
        Command::MpdSweep { grid, seeds } => {
            let grid = match parse_grid(&grid) {
                Ok(grid) => grid,
                Err(e) => {
                    eprintln!("error: {e}");
                    return 1;
                }
            };
            let seed_list: Vec<u64> = (0..seeds).collect();
            print!("{}", mpd_sweep_table(&grid, &seed_list));
            0
        }
        Command::Verify => {
            let mut failures = 0;
            for check in run_verification() {
                let status = if check.passed { "PASS" } else { "FAIL" };
                println!("{status} {} - {}", check.name, check.detail);
                failures += usize::from(!check.passed);
            }
            if failures > 0 {
                eprintln!("{failures} verification check(s) failed");
                2
            } else {
                0
            }
        }
    }
}
