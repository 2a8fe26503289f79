//! `indrnn-har`: synthesize, featurize, train, evaluate, transfer, predict
//! and locate from the command line.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::TaskChoice;

#[derive(Parser, Debug)]
#[command(
    name = "indrnn-har",
    version,
    about = "Activity recognition with dense IndRNNs"
)]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run seed (overrides the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads; 1 gives byte-identical reruns on any machine.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic dataset in the ingestion layout.
    Synth,
    /// Featurize a dataset directory into a binary feature file.
    Features {
        #[arg(long)]
        input: PathBuf,
    },
    /// Train a model; inputs are dataset directories or feature files.
    Train {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        val: PathBuf,
        #[arg(long, value_enum)]
        task: Option<TaskArg>,
        /// Keep only samples from this location group.
        #[arg(long, value_enum)]
        group: Option<GroupArg>,
    },
    /// Score a model on labelled data.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Fine-tune on two stratified halves of new-user data and fuse.
    Transfer {
        #[arg(long)]
        model: PathBuf,
        /// Labelled data from the target users, split into the two halves.
        #[arg(long)]
        val: PathBuf,
        /// Held-out data for the reports (defaults to `--val`).
        #[arg(long)]
        test: Option<PathBuf>,
    },
    /// Write one predicted label per input sample.
    Predict {
        /// Checkpoint or fused-model manifest.
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Decide the location group of a dataset by majority vote.
    Locate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
}

#[derive(clap::ValueEnum, Clone, Copy, Debug)]
enum TaskArg {
    Activity,
    LocationGroup,
}

#[derive(clap::ValueEnum, Clone, Copy, Debug)]
enum GroupArg {
    BagHand,
    HipsTorso,
}

impl From<TaskArg> for TaskChoice {
    fn from(t: TaskArg) -> Self {
        match t {
            TaskArg::Activity => TaskChoice::Activity,
            TaskArg::LocationGroup => TaskChoice::LocationGroup,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.class());
            ExitCode::FAILURE
        }
    }
}
