//! Batch front end: `ecfm run|scan|gen-data|verify`.
//!
//! Exit codes: 0 success, 2 config error, 3 solver failure, 4 infeasible.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ecfm::experiments::{self, parse_grid, ExperimentConfig};
use ecfm::io::CsvTable;

#[derive(Parser)]
#[command(name = "ecfm", version, about = "Standard and constraint-force inverse problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one experiment and write report.json plus CSV side files.
    Run { config: PathBuf },
    /// Evaluate a Burgers objective over an (eps1, eps2) grid.
    Scan {
        config: PathBuf,
        /// `lo:hi:n,lo:hi:n`
        #[arg(long, default_value = "1.0:2.5:31,0.5:1.5:21")]
        grid: String,
    },
    /// Write the synthetic measurements only.
    GenData { config: PathBuf },
    /// Run the derivative, moment, consistency and quantile checks.
    Verify {
        /// Print the checks as JSON instead of one line each.
        #[arg(long)]
        json: bool,
    },
}

fn execute(cmd: Command) -> ecfm::Result<u8> {
    match cmd {
        Command::Run { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let out = experiments::run(&cfg)?;
            let dir = experiments::run_directory(&cfg)?;
            experiments::write_run(&dir, &out)?;
            let r = &out.report;
            println!("{} converged={} iterations={}", cfg.experiment.name(), r.converged, r.iterations);
            println!("params {:?}", r.recovered_params);
            for (k, v) in &r.error_metrics {
                println!("  {k} = {v:.6e}");
            }
            for f in &r.flags {
                println!("  flag: {f}");
            }
            println!("{}", dir.display());
        }
        Command::Scan { config, grid } => {
            let cfg = ExperimentConfig::load(&config)?;
            let (a, b) = parse_grid(&grid)?;
            let (table, failed) = experiments::scan_loss_surface(&cfg, a, b)?;
            let dir = experiments::run_directory(&cfg)?;
            let mut tables = vec![("surface.csv".to_string(), table)];
            if !failed.is_empty() {
                let mut t = CsvTable::new(&["eps1", "eps2"]);
                for p in &failed {
                    t.push(p.to_vec())?;
                }
                eprintln!("{} grid points failed to solve", failed.len());
                tables.push(("failed.csv".into(), t));
            }
            experiments::write_tables(&dir, &tables)?;
            std::fs::write(dir.join("config.json"), cfg.to_json()?)?;
            println!("{}", dir.display());
        }
        Command::GenData { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let tables = experiments::generate_data(&cfg)?;
            let dir = experiments::run_directory(&cfg)?;
            experiments::write_tables(&dir, &tables)?;
            std::fs::write(dir.join("config.json"), cfg.to_json()?)?;
            println!("{}", dir.display());
        }
        Command::Verify { json } => {
            let checks = ecfm::verify::run_all();
            if json {
                println!("{}", serde_json::to_string_pretty(&checks)?);
            } else {
                for c in &checks {
                    println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                }
            }
            if checks.iter().any(|c| !c.passed) {
                return Ok(3);
            }
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
