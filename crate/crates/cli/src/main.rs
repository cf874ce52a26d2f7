//! `objnav`: run episodes and sweeps, plot trajectories, tabulate metrics.

mod plot;
mod report;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "objnav",
    version,
    about = "Object-goal navigation in box-world scenes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run episodes from scene files or a procedural batch.
    Run(run::RunArgs),
    /// Draw one episode log over its scene as SVG.
    Plot {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Affordance field CSV (`x,y,z,score,masked`) drawn under the trajectory.
        #[arg(long)]
        heatmap: Option<PathBuf>,
    },
    /// Print SR / SPL / DTG for one or more run directories or metrics CSVs.
    Report {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run::run(args),
        Command::Plot {
            log,
            scene,
            out,
            heatmap,
        } => plot::plot(&log, &scene, &out, heatmap.as_deref()),
        Command::Report { inputs } => report::report(&inputs).map(|table| print!("{table}")),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
