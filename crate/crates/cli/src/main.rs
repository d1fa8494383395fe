//! `aerogh`: simulate the greenhouse, serve its telemetry, train and
//! evaluate the leaf classifier, replay data logs.

mod fail;
mod replay;
mod sim;
mod vision;

use std::path::PathBuf;
use std::process::ExitCode;

use aerogh_server::ServeOptions;
use aerogh_vision::TrainConfig;
use clap::{Parser, Subcommand};

use fail::CliResult;
use vision::{DataSource, Subset};

#[derive(Parser)]
#[command(name = "aerogh", version, about = "Aeroponic greenhouse simulator, telemetry server and leaf classifier")]
struct Cli {
    /// More log output (repeat for debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-loop simulation.
    Sim {
        #[command(subcommand)]
        action: SimAction,
    },
    /// Run the greenhouse in real time (scaled by the manifest's
    /// acceleration) with TCP and/or HTTP telemetry until interrupted.
    Serve {
        #[arg(long)]
        manifest: PathBuf,
        /// NDJSON telemetry, e.g. 127.0.0.1:7070
        #[arg(long)]
        listen_tcp: Option<String>,
        /// HTTP API and event stream, e.g. 127.0.0.1:8080
        #[arg(long)]
        listen_http: Option<String>,
    },
    /// Write a synthetic leaf dataset as <out>/<class>/<class>-<i>.<format>.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 400)]
        per_class: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "ppm")]
        format: String,
    },
    /// Split 75/15/10, optionally augment the training part, train, and
    /// report test-set results.
    Train {
        /// A <class>/<image> directory or synthetic:N (N per class).
        #[arg(long)]
        data: DataSource,
        /// Checkpoint to write.
        #[arg(long, default_value = "model.ghckpt")]
        model: PathBuf,
        #[arg(long, default_value_t = 30)]
        epochs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Epochs at the start that train only the classifier head.
        #[arg(long, default_value_t = 0)]
        freeze_epochs: usize,
        #[arg(long, default_value_t = 32)]
        batch_size: usize,
        #[arg(long, default_value_t = 0.01)]
        learning_rate: f64,
        /// Grow the training part to this many images by augmentation.
        #[arg(long)]
        augment_to: Option<usize>,
        /// JSON report with confusion matrix and learning curves.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Evaluate a checkpoint: confusion matrix, per-class recall, accuracy.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: DataSource,
        #[arg(long, value_enum, default_value = "test")]
        subset: Subset,
        /// Split seed; match the one given to `train`.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Read a data log (a day file or a log directory) and summarize it.
    Replay {
        log: PathBuf,
        /// Echo every record.
        #[arg(long)]
        print: bool,
        /// Energy per device between two simulated instants (s).
        #[arg(long, num_args = 2, value_names = ["FROM", "TO"])]
        energy: Option<Vec<f64>>,
    },
}

#[derive(Subcommand)]
enum SimAction {
    /// Run a manifest unpaced, write its data log, print a summary.
    Run {
        #[arg(long)]
        manifest: PathBuf,
    },
}

fn dispatch(cmd: Command) -> CliResult {
    match cmd {
        Command::Sim { action: SimAction::Run { manifest } } => sim::run(&manifest),
        Command::Serve { manifest, listen_tcp, listen_http } => sim::serve(&manifest, ServeOptions { listen_tcp, listen_http }),
        Command::Synth { out, per_class, seed, format } => vision::synth(&out, per_class, seed, &format),
        Command::Train { data, model, epochs, seed, freeze_epochs, batch_size, learning_rate, augment_to, report } => {
            let config = TrainConfig {
                epochs,
                batch_size,
                learning_rate,
                seed,
                freeze_backbone_epochs: freeze_epochs,
                parallel: true,
                ..TrainConfig::default()
            };
            vision::train(vision::TrainArgs { data, model, report, augment_to, config })
        }
        Command::Eval { model, data, subset, seed, report } => {
            vision::eval(&model, &data, subset, seed, report.as_deref()).map(|_| ())
        }
        Command::Replay { log, print, energy } => {
            let energy = energy.map(|v| (v[0], v[1]));
            replay::run(replay::ReplayArgs { log: &log, print, energy })
        }
    }
}

/// The error and its causes, skipping causes the message already quotes.
fn describe(e: &anyhow::Error) -> String {
    let mut text = e.to_string();
    for cause in e.chain().skip(1) {
        let c = cause.to_string();
        if !text.contains(&c) {
            text = format!("{text}: {c}");
        }
    }
    text
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", describe(&f.error));
            ExitCode::from(f.code)
        }
    }
}
