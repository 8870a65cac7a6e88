mod artifacts;
mod campaign;
mod plan_debug;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "shopbot", version, about = "Grocery-picking robot: roadmaps, campaigns, reports and plan inspection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a roadmap for a robot and index it against a voxel grid.
    BuildRoadmap {
        #[arg(long)]
        robot: PathBuf,
        #[arg(long, default_value_t = 50_000)]
        nodes: usize,
        #[arg(long, default_value_t = 10)]
        neighbors: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Voxel edge length of the collision map, m.
        #[arg(long, default_value_t = 0.1)]
        resolution: f64,
        /// Sampling step along edges, rad.
        #[arg(long, default_value_t = 0.05)]
        edge_step: f64,
    },
    /// Run a seeded campaign of shopping tasks.
    Campaign {
        #[arg(long)]
        config: PathBuf,
        /// Runs executed concurrently. Results do not depend on it.
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Recompute the campaign report from run logs.
    Report {
        /// Directory of run logs; repeat to pool several campaigns.
        #[arg(long, required = true)]
        logs: Vec<PathBuf>,
        #[arg(long, value_enum, default_value_t = campaign::Format::Json)]
        format: campaign::Format,
    },
    /// Run a single arm query and audit the result.
    PlanDebug {
        #[arg(long)]
        robot: PathBuf,
        #[arg(long)]
        roadmap: PathBuf,
        /// JSON obstacles in the robot base frame.
        #[arg(long)]
        world: PathBuf,
        /// Comma-separated joint values.
        #[arg(long, allow_hyphen_values = true)]
        start: String,
        /// x,y,z for a position target or x,y,z,roll,pitch,yaw for a full pose.
        #[arg(long, allow_hyphen_values = true)]
        target: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Planner parameters as JSON.
        #[arg(long)]
        params: Option<PathBuf>,
        /// Write the waypoints as CSV.
        #[arg(long)]
        export: Option<PathBuf>,
    },
    /// Write a synthetic store layout.
    GenerateStore {
        #[arg(long, default_value_t = 4)]
        rows: usize,
        #[arg(long, default_value_t = 6)]
        units: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 0.0)]
        out_of_stock: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a built-in robot description.
    RobotPreset {
        #[arg(long, value_enum)]
        name: artifacts::Preset,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::BuildRoadmap { robot, nodes, neighbors, seed, out, resolution, edge_step } => {
            artifacts::build_roadmap(&robot, nodes, neighbors, seed, &out, resolution, edge_step)
        }
        Command::Campaign { config, workers } => campaign::run_campaign(&config, workers),
        Command::Report { logs, format } => campaign::report(&logs, format),
        Command::PlanDebug { robot, roadmap, world, start, target, seed, params, export } => plan_debug::plan_debug(
            &plan_debug::Query { robot, roadmap, world, start, target, seed, params, export },
        ),
        Command::GenerateStore { rows, units, seed, out_of_stock, out } => {
            artifacts::generate_store(rows, units, seed, out_of_stock, &out)
        }
        Command::RobotPreset { name, out } => artifacts::robot_preset(name, &out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
