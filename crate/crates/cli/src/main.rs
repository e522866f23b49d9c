use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use peacock_cli::{cmd_explore, cmd_export, cmd_genworld, cmd_precompute, exit_code, ExportFormat};
use peacock_core::config::RunConfig;
use peacock_core::sensor_world::MazeKind;

#[derive(Parser)]
#[command(name = "peacock", version, about = "Simulated quadrotor exploration with precomputed trajectory fans")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the trajectory fan, dump its samples as CSV and report timing.
    Precompute {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one exploration mission and write its artifacts.
    Explore {
        #[arg(long)]
        world: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides mission.seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a maze world file.
    Genworld {
        /// desk (20x20x4 m) or full (90x90x8 m).
        kind: MazeKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Convert a map.csv written by `explore` to PLY or CSV.
    Export {
        map: PathBuf,
        #[arg(long, default_value = "ply")]
        format: ExportFormat,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print every configuration key with its default.
    Defaults,
}

fn run(cli: Cli) -> anyhow::Result<i32> {
    match cli.command {
        Command::Precompute { config, out } => {
            let report = cmd_precompute(config.as_deref(), &out)?;
            println!("{report}");
            Ok(0)
        }
        Command::Explore { world, config, seed, out } => {
            let outcome = cmd_explore(&world, config.as_deref(), seed, &out)?;
            println!("outcome: {outcome}");
            println!("artifacts: {}", out.display());
            Ok(exit_code(outcome))
        }
        Command::Genworld { kind, seed, out } => {
            cmd_genworld(kind, seed, &out)?;
            Ok(0)
        }
        Command::Export { map, format, out } => {
            let n = cmd_export(&map, format, &out)?;
            println!("exported {n} voxels to {}", out.display());
            Ok(0)
        }
        Command::Defaults => {
            print!("{}", RunConfig::default().to_text());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
