use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use scouple_cli::{compare_report, run_experiment, ExperimentConfig, Manifest};

#[derive(Parser)]
#[command(name = "scouple", version, about = "Threshold saturation experiments for spatially coupled models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment described by a `key = value` configuration file.
    Run {
        config: PathBuf,
        /// Overrides the seed in the configuration.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads.
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Output directory; defaults to the `out` key, then `out/<kind>`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulate threshold runs from their manifests.
    Report {
        #[arg(required = true)]
        manifests: Vec<PathBuf>,
        /// Write the table here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            seed,
            workers,
            out,
        } => {
            let mut cfg = match ExperimentConfig::read(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("config error: {e}");
                    return ExitCode::from(1);
                }
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let dir = out
                .or_else(|| cfg.out.as_ref().map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("out").join(cfg.kind.as_str()));
            match run_experiment(&cfg, &dir, workers) {
                Ok(summary) => {
                    for (k, v) in &summary.manifest.results {
                        println!("{k} = {v}");
                    }
                    println!("wrote {}", summary.out_dir.display());
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("{e}");
                    ExitCode::from(e.exit_code() as u8)
                }
            }
        }
        Command::Report { manifests, out } => {
            let runs: Result<Vec<_>, _> = manifests.iter().map(|p| Manifest::read(p)).collect();
            let table = match runs.and_then(|r| compare_report(&r)) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("config error: {e}");
                    return ExitCode::from(1);
                }
            };
            let text = table.to_csv_string();
            match out {
                Some(path) => {
                    if let Err(e) = std::fs::write(&path, text) {
                        eprintln!("i/o error: {e}");
                        return ExitCode::from(2);
                    }
                }
                None => print!("{text}"),
            }
            ExitCode::SUCCESS
        }
    }
}
