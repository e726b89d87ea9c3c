use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mavsim::config::{load_config, SweepConfig};
use mavsim::sweep::{self, SweepOptions};
use mavsim::{engine, HarnessError};

#[derive(Parser)]
#[command(
    name = "simulate",
    version,
    about = "Two-lane mixed traffic with modular autonomous vehicles"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the single point described by the config.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Write the flow series to DIR/series.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the density x penetration x scenario grid.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads (SIM_WORKERS takes precedence).
        #[arg(long)]
        workers: Option<usize>,
        /// Reuse a non-empty output directory.
        #[arg(long)]
        force: bool,
        #[arg(long, short)]
        quiet: bool,
    },
    /// Validate the schemas and invariants of a sweep directory.
    Check {
        #[arg(long)]
        out: PathBuf,
    },
    /// Redraw the SVG charts of a sweep directory.
    Render {
        #[arg(long)]
        out: PathBuf,
    },
}

fn config_from(path: Option<&Path>) -> Result<SweepConfig, HarnessError> {
    match path {
        Some(p) => load_config(p),
        None => Ok(SweepConfig::default()),
    }
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Run { config, seed, out } => {
            let mut params = config_from(config.as_deref())?.base;
            if let Some(seed) = seed {
                params.seed = seed;
            }
            let output = engine::run(&params)?;
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir).map_err(|e| HarnessError::io(&dir, e))?;
                sweep::write_series(&dir.join("series.csv"), &output.series)?;
            }
            let s = &output.summary;
            println!(
                "scenario={} p_mav={} density={} seed={} mean_flow={:.1} veh/h/lane mean_speed={:.2} m/s",
                s.scenario, s.p_mav, s.density, s.seed, s.mean_flow, s.mean_speed
            );
        }
        Command::Sweep {
            config,
            out,
            workers,
            force,
            quiet,
        } => {
            let config = config_from(config.as_deref())?;
            let options = SweepOptions {
                force,
                workers,
                progress: !quiet,
            };
            let report = sweep::run_sweep(&config, &out, &options)?;
            println!("{} runs written to {}", report.results.len(), report.dir.display());
        }
        Command::Check { out } => {
            let report = sweep::check_dir(&out)?;
            for p in &report.problems {
                eprintln!("{p}");
            }
            if !report.ok() {
                return Err(HarnessError::Schema {
                    path: out,
                    column: "-".into(),
                    reason: format!("{} problems", report.problems.len()),
                });
            }
            println!("ok: {} files, {} rows", report.files, report.rows);
        }
        Command::Render { out } => {
            for path in sweep::render_dir(&out)? {
                println!("{}", path.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
