use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ect_core::error::EctError;
use ect_core::experiment::{calibrate, default_cache_dir, run_experiment, ExperimentConfig, RunOptions};

#[derive(Parser)]
#[command(name = "ect", about = "Capacitance tomography calibration and reconstruction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute (or load from cache) the calibration for a config's geometry.
    Calibrate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the configured solvers and write images, metrics and a manifest.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated solver labels; all solvers when omitted.
        #[arg(long, value_delimiter = ',')]
        solvers: Option<Vec<String>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    Version,
}

fn exit_code(e: &EctError) -> ExitCode {
    match e {
        EctError::Config(_) | EctError::Json(_) | EctError::Geometry(_) => ExitCode::from(2),
        _ => ExitCode::from(1),
    }
}

fn load(path: &Path) -> Result<ExperimentConfig, EctError> {
    let cfg = ExperimentConfig::load(path)?;
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Version => {
            println!("ect {}", env!("CARGO_PKG_VERSION"));
            return ExitCode::SUCCESS;
        }
        Command::Calibrate { config } => load(&config).and_then(|cfg| {
            let c = calibrate(&cfg, &default_cache_dir())?;
            println!("geometry_hash {}", c.hash);
            println!("cache_dir {}", c.dir.display());
            println!("cache_hit {}", c.cache_hit);
            Ok(true)
        }),
        Command::Run { config, solvers, out } => load(&config).and_then(|mut cfg| {
            if let Some(labels) = solvers {
                cfg.select_solvers(&labels)?;
            }
            let summary = run_experiment(&cfg, &RunOptions { out_dir: out, cache_dir: None })?;
            for s in &summary.manifest.solvers {
                match &s.error {
                    None => println!("{:<16} ok", s.label),
                    Some(e) => println!("{:<16} FAILED: {e}", s.label),
                }
            }
            println!("output {}", summary.out_dir.display());
            Ok(summary.all_ok())
        }),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
