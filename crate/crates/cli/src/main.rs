use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use csec_cli::commands::{cmd_correlate, cmd_evaluate, cmd_prepare, cmd_serve, EvalOverrides};
use csec_cli::fixture::{write_fixture, FixtureOptions};
use csec_cli::sweep::FlowMethod;
use csec_cli::CliError;

#[derive(Parser)]
#[command(name = "csec", version, about = "Crowd simulation evaluation through composition")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Toggle {
    On,
    Off,
}

#[derive(Subcommand)]
enum Command {
    /// Extract the mean background of a frame directory.
    Prepare {
        frames_dir: PathBuf,
        #[arg(long, default_value_t = 25.0)]
        fps: f64,
        /// Defaults to background.png inside the frame directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a parameter sweep against a source video and write result tables.
    Evaluate {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        frames: PathBuf,
        /// Defaults to the full 3x4 sweep over both simulators.
        #[arg(long)]
        sweep: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        weber: Option<Toggle>,
        #[arg(long)]
        window: Option<usize>,
        #[arg(long)]
        flow: Option<String>,
    },
    /// Pearson correlation of result distances against ratings.
    Correlate {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        ratings: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// HTTP service used by the annotation tool.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// Directory of scene files whose backgrounds are served.
        #[arg(long)]
        scenes: Option<PathBuf>,
    },
    /// Write a synthetic walkway scene with a composited source video.
    Fixture {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        frames: usize,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Prepare { frames_dir, fps, out } => {
            let out = out.unwrap_or_else(|| frames_dir.join("background.png"));
            cmd_prepare(&frames_dir, fps, &out)?;
            println!("{}", out.display());
        }
        Command::Evaluate { scene, frames, sweep, out, seed, weber, window, flow } => {
            let overrides = EvalOverrides {
                seed,
                weber: weber.map(|t| matches!(t, Toggle::On)),
                window,
                flow: flow.as_deref().map(FlowMethod::parse).transpose()?,
            };
            let (table, written) = cmd_evaluate(&scene, &frames, sweep.as_deref(), &out, &overrides)?;
            for p in written {
                println!("{}", p.display());
            }
            if let Some(best) = table.argmin() {
                eprintln!(
                    "lowest combined distance {:.6} at {}/{}/{}",
                    best.d_combined,
                    best.simulator.name(),
                    best.agent_level.name(),
                    best.speed_level.name()
                );
            }
        }
        Command::Correlate { results, ratings, out } => {
            let c = cmd_correlate(&results, &ratings, out.as_deref())?;
            println!("{}", serde_json::to_string_pretty(&c).expect("plain struct"));
        }
        Command::Serve { port, scenes } => cmd_serve(port, scenes.as_deref())?,
        Command::Fixture { out, seed, frames } => {
            write_fixture(&out, &FixtureOptions::default(), seed, frames)?;
            println!("{}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
