//! Command-line front end: run seeded simulation campaigns and compare
//! their summaries.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use flysafe::harness::{self, ScenarioConfig};

#[derive(Parser)]
#[command(name = "flysafe", version, about = "UAV location-sharing swarm simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a campaign of seeded simulations and write result files.
    Simulate {
        /// Scenario file (JSON). Defaults are filled for missing fields.
        #[arg(long, value_name = "PATH", conflicts_with = "preset")]
        config: Option<PathBuf>,
        /// Built-in scenario: `baseline` or `baseattk`.
        #[arg(long, value_name = "NAME")]
        preset: Option<String>,
        /// Output directory for CSVs, summary.json, and manifest.json.
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// Override the number of runs.
        #[arg(long, value_name = "N")]
        runs: Option<u32>,
        /// Override the base seed; runs use seed, seed+1, ...
        #[arg(long, value_name = "S")]
        seed: Option<u64>,
    },
    /// Compare two campaign summaries metric by metric.
    Compare {
        a: PathBuf,
        b: PathBuf,
        /// Emit the report as JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<(), String> {
    match cli.command {
        Command::Simulate {
            config,
            preset,
            out,
            runs,
            seed,
        } => {
            let mut cfg = match (config, preset) {
                (Some(path), None) => harness::load_config(&path).map_err(|e| e.to_string())?,
                (None, Some(name)) => ScenarioConfig::preset(&name)
                    .ok_or_else(|| format!("unknown preset `{name}`; try baseline or baseattk"))?,
                (None, None) => {
                    return Err("either --config or --preset is required".to_string())
                }
                (Some(_), Some(_)) => unreachable!("clap rejects the combination"),
            };
            if let Some(runs) = runs {
                cfg.runs = runs;
            }
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let summary = harness::run_campaign(&cfg, &out).map_err(|e| e.to_string())?;
            println!(
                "{} runs of {} UAVs over {} s written to {}",
                summary.runs,
                cfg.n_uavs,
                cfg.sim_time_s,
                out.display()
            );
            for key in ["psi_s", "aoi_mean_s", "gamma_mean", "omega_mean_m", "phi"] {
                if let Some(stats) = summary.metrics.get(key) {
                    println!(
                        "  {key:<14} mean {:>12.4}  min {:>12.4}  max {:>12.4}",
                        stats.mean, stats.min, stats.max
                    );
                }
            }
            Ok(())
        }
        Command::Compare { a, b, json } => {
            let sa = harness::load_summary(&a).map_err(|e| e.to_string())?;
            let sb = harness::load_summary(&b).map_err(|e| e.to_string())?;
            let report = harness::compare(&sa, &sb).map_err(|e| e.to_string())?;
            if json {
                println!(
                    "{}",
                    serde_json::to_string_pretty(&report).map_err(|e| e.to_string())?
                );
            } else {
                print!("{}", report.to_text());
            }
            Ok(())
        }
    }
}
