//! `semnav`: scene generation, sentence-encoder building, training,
//! evaluation and plotting.

mod commands;
mod config;
mod error;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use commands::{EvalAgent, EvalTaskKind};
use config::RunConfig;
use error::CliError;

#[derive(Parser)]
#[command(name = "semnav", version, about = "Target-driven navigation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Task {
    T1,
    T2,
}

impl From<Task> for EvalTaskKind {
    fn from(t: Task) -> Self {
        match t {
            Task::T1 => EvalTaskKind::T1,
            Task::T2 => EvalTaskKind::T2,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a scene inventory: JSON files plus a manifest.
    GenScenes {
        #[arg(long, default_value_t = 5)]
        count_per_type: usize,
        #[arg(long, default_value_t = 24)]
        width: usize,
        #[arg(long, default_value_t = 24)]
        height: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the caption corpus and train the sentence encoder.
    BuildSemantics {
        #[arg(long)]
        scenes: PathBuf,
        #[arg(long, default_value_t = 64)]
        dim: usize,
        #[arg(long, default_value_t = 200)]
        epochs: usize,
        #[arg(long, default_value_t = 0.05)]
        lr: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Perception settings are read from here.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Checkpoint path; the vocabulary goes next to it as `.vocab`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a policy with asynchronous actor-critic.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        variant: Option<String>,
        /// random, object or top-semantic
        #[arg(long)]
        targets: Option<String>,
        #[arg(long)]
        encoder: Option<PathBuf>,
        #[arg(long)]
        scenes: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        frames: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a checkpoint, the random baseline or the BFS oracle.
    Eval {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, required_unless_present_any = ["oracle", "random"])]
        checkpoint: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "t1")]
        task: Task,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        cap: Option<u32>,
        /// greedy or sample
        #[arg(long)]
        selection: Option<String>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        encoder: Option<PathBuf>,
        #[arg(long)]
        scenes: Option<PathBuf>,
        /// Follow BFS shortest paths instead of a network.
        #[arg(long, conflicts_with_all = ["checkpoint", "random"])]
        oracle: bool,
        /// Uniform random actions instead of a network.
        #[arg(long, conflicts_with = "checkpoint")]
        random: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train every configured model and print a comparison table.
    Experiment {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "t1")]
        task: Task,
        #[arg(long)]
        out: PathBuf,
    },
    /// Plot a reward log as an SVG moving-average curve.
    Plot {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 500)]
        window: usize,
    },
    /// Write every pose's annotations, one tab-separated line per pose.
    DumpAnnotations {
        #[arg(long)]
        scenes: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config(path: Option<&PathBuf>) -> Result<RunConfig, CliError> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::GenScenes { count_per_type, width, height, seed, out } => {
            commands::gen_scenes(&commands::GenScenes { count_per_type, width, height, seed, out })
        }
        Command::BuildSemantics { scenes, dim, epochs, lr, seed, config, out } => {
            let cfg = load_config(config.as_ref())?;
            commands::build_semantics(&commands::BuildSemantics { scenes, dim, epochs, lr, seed, out }, &cfg)
        }
        Command::Train { config, variant, targets, encoder, scenes, workers, seed, frames, out } => {
            let mut cfg = load_config(config.as_ref())?;
            if let Some(v) = variant {
                cfg.train.variant = v;
            }
            if let Some(t) = targets {
                cfg.targets.mode = t;
            }
            if let Some(e) = encoder {
                cfg.semantics.encoder = Some(e);
            }
            if let Some(s) = scenes {
                cfg.scenes.dir = s;
            }
            if let Some(w) = workers {
                cfg.train.workers = w;
            }
            if let Some(s) = seed {
                cfg.train.seed = s;
            }
            if let Some(f) = frames {
                cfg.train.total_frames = f;
            }
            cfg.check()?;
            commands::train(&cfg, &out)
        }
        Command::Eval {
            config,
            checkpoint,
            task,
            episodes,
            cap,
            selection,
            workers,
            seed,
            encoder,
            scenes,
            oracle,
            random,
            out,
        } => {
            let mut cfg = load_config(config.as_ref())?;
            if let Some(e) = episodes {
                cfg.eval.episodes = e;
            }
            if let Some(c) = cap {
                cfg.eval.cap = c;
            }
            if let Some(s) = selection {
                cfg.eval.selection = s;
            }
            if let Some(w) = workers {
                cfg.eval.workers = w;
            }
            if let Some(s) = seed {
                cfg.eval.seed = s;
            }
            if let Some(e) = encoder {
                cfg.semantics.encoder = Some(e);
            }
            if let Some(s) = scenes {
                cfg.scenes.dir = s;
            }
            cfg.check()?;
            let agent = match (oracle, random, checkpoint) {
                (true, _, _) => EvalAgent::Oracle,
                (_, true, _) => EvalAgent::Random,
                (_, _, Some(p)) => EvalAgent::Checkpoint(p),
                _ => return Err(CliError::config("one of --checkpoint, --oracle or --random is required")),
            };
            commands::eval(&cfg, task.into(), &agent, &out)
        }
        Command::Experiment { config, task, out } => {
            let cfg = load_config(config.as_ref())?;
            commands::experiment(&cfg, task.into(), &out)
        }
        Command::Plot { log, out, window } => commands::plot(&log, &out, window),
        Command::DumpAnnotations { scenes, config, out } => {
            let cfg = load_config(config.as_ref())?;
            commands::dump_annotations(&cfg, &scenes, &out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
