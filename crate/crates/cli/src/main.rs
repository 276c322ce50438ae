use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mohrcoulomb::config::{preset, reference_toml, RunConfig, PRESETS};
use mohrcoulomb::driver::{self, DriverError};

#[derive(Parser)]
#[command(name = "mohrcoulomb", version, about = "Mohr-Coulomb incremental limit analysis of slopes")]
struct Cli {
    /// Worker threads for assembly and constitutive updates (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the analysis described by a configuration file.
    Run { config: PathBuf },
    /// Check a configuration and print derived quantities without running.
    Validate { config: PathBuf },
    /// Export the configured mesh (text and VTK) without running.
    Mesh { config: PathBuf },
    /// Print a benchmark preset as a documented configuration file.
    Preset {
        /// Preset name; lists the available presets when omitted.
        name: Option<String>,
    },
}

fn load(path: &PathBuf) -> Result<RunConfig, DriverError> {
    let cfg = RunConfig::load(path).map_err(DriverError::Config)?;
    cfg.validate().map_err(DriverError::Config)?;
    for w in cfg.warnings() {
        eprintln!("warning: {w}");
    }
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<(), DriverError> {
    match cli.command {
        Command::Run { config } => {
            let cfg = load(&config)?;
            let summary = driver::run(&cfg, cli.workers)?;
            print!("{}", summary.to_text());
            println!("output_dir = {:?}", summary.output_dir.display().to_string());
        }
        Command::Validate { config } => {
            let cfg = load(&config)?;
            print!("{}", cfg.report().map_err(DriverError::Config)?);
        }
        Command::Mesh { config } => {
            let cfg = load(&config)?;
            for f in driver::export_mesh(&cfg)? {
                println!("{}", f.display());
            }
        }
        Command::Preset { name: None } => {
            for p in PRESETS {
                println!("{p}");
            }
        }
        Command::Preset { name: Some(name) } => {
            let cfg = preset(&name).map_err(DriverError::Config)?;
            print!("{}", reference_toml(&cfg));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
