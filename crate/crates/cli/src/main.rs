use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pilotcluster_cli::commands::{cmd_plot, cmd_run, cmd_stability_check, cmd_validate};

/// Coalition-based pilot clustering simulator for massive MIMO uplinks.
///
/// Thread count is controlled by the RAYON_NUM_THREADS environment
/// variable; outputs are byte-identical for any thread count.
#[derive(Parser)]
#[command(name = "pilotcluster", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment sweep and write CSV/SVG outputs.
    Run {
        /// Flat key=value config file.
        config: PathBuf,
        /// Override config entries, e.g. --set seed=7.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Render an aggregated CSV into an SVG chart.
    Plot {
        /// Aggregated CSV written by `run`.
        csv: PathBuf,
        /// Plot spec (key=value: metric, out, title, x_label, y_label, schemes).
        spec: PathBuf,
    },
    /// Compare the closed-form utilities against the channel-level Monte
    /// Carlo estimate on one deployment.
    Validate {
        config: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Re-check individual stability of recorded final structures.
    StabilityCheck {
        /// structures_<scheme>.csv written by `run`.
        csv: PathBuf,
        /// The config that produced it.
        config: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run { config, set } => cmd_run(&config, &set).map(|()| true),
        Command::Plot { csv, spec } => cmd_plot(&csv, &spec).map(|()| true),
        Command::Validate { config, set } => cmd_validate(&config, &set),
        Command::StabilityCheck { csv, config, set } => {
            cmd_stability_check(&csv, &config, &set).map(|_counts| true)
        }
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
