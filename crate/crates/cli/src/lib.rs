//! Command-line front end for the spiking audio feature pipeline.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or format error,
//! 3 constraint violation.

pub mod bench;
pub mod layout;
pub mod render;
pub mod stages;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use cochlea_feast::error::{Error, Result};
use cochlea_feast::io::{self, PipelineConfig};

use crate::layout::Layout;
use crate::stages::Run;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_CONSTRAINT: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "cochlea-feast", version, about = "Event-driven audio feature extraction and classification")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML configuration; defaults apply to absent keys.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// CSV manifest with columns path,label,split,speaker.
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Master seed; every stage seed derives from it.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Encode manifest audio into spike event files.
    Encode,
    /// Train one FEAST model per scale on the training split.
    FeastTrain,
    /// Apply trained FEAST models, writing feature-map event files.
    FeastApply,
    /// Time-bin feature maps (or raw spikes with --baseline) into CSV tables.
    Featurize {
        #[arg(long)]
        baseline: bool,
    },
    /// Train linear classifiers on every feature table.
    TrainClassifier,
    /// Evaluate classifiers on the test split and write reports.
    Evaluate,
    /// Run every stage in order.
    Pipeline,
    /// Write PGM/CSV images of audio, spikes, feature maps or neuron weights.
    Render {
        #[arg(long)]
        wav: Option<PathBuf>,
        #[arg(long)]
        events: Option<PathBuf>,
        #[arg(long)]
        maps: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Image width in time columns.
        #[arg(long, default_value_t = 512)]
        width: usize,
        /// Time span in samples for event images (default: last event + 1).
        #[arg(long)]
        duration: Option<u64>,
    },
    /// Measure encoder and FEAST inference throughput.
    Bench {
        /// Only use the first N utterances.
        #[arg(long)]
        limit: Option<usize>,
    },
}

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Usage(_) => EXIT_USAGE,
        Error::Config { .. } => EXIT_CONSTRAINT,
        Error::ConfigParse { .. }
        | Error::Input(_)
        | Error::Processing(_)
        | Error::UnsupportedFormat { .. }
        | Error::Format { .. }
        | Error::Version { .. }
        | Error::Checksum { .. }
        | Error::Io { .. } => EXIT_DATA,
    }
}

fn load_config(path: Option<&PathBuf>) -> Result<PipelineConfig> {
    match path {
        Some(p) => io::load_config(p),
        None => Ok(PipelineConfig::default()),
    }
}

fn manifest(g: &GlobalArgs) -> Result<PathBuf> {
    g.manifest
        .clone()
        .ok_or_else(|| Error::Usage("this subcommand needs --manifest".into()))
}

/// Runs a parsed command line; returns a line to print on success.
pub fn execute(cli: Cli) -> Result<String> {
    let g = &cli.global;
    let run = Run {
        cfg: load_config(g.config.as_ref())?,
        out: Layout::new(&g.out),
        seed: g.seed,
    };
    let msg = match &cli.command {
        Command::Encode => {
            let index = stages::encode(&run, &manifest(g)?)?;
            format!("encoded {} utterances ({})", index.utterances.len(), index.mode)
        }
        Command::FeastTrain => {
            let reports = stages::feast_train(&run)?;
            let parts: Vec<String> = reports
                .iter()
                .map(|r| format!("s{}: {} contexts", r.scale, r.training_contexts))
                .collect();
            format!("trained FEAST models ({})", parts.join(", "))
        }
        Command::FeastApply => {
            let n = stages::feast_apply(&run)?;
            format!("wrote feature maps ({n} events)")
        }
        Command::Featurize { baseline } => {
            let files = stages::featurize(&run, *baseline)?;
            format!("wrote {} feature tables", files.len())
        }
        Command::TrainClassifier => {
            let t = stages::train_classifiers(&run)?;
            format!("trained {} classifiers", t.len())
        }
        Command::Evaluate => to_json(&stages::evaluate(&run)?),
        Command::Pipeline => to_json(&stages::pipeline(&run, &manifest(g)?)?),
        Command::Render {
            wav,
            events,
            maps,
            model,
            width,
            duration,
        } => {
            let req = render::RenderRequest {
                wav: wav.clone(),
                events: events.clone(),
                maps: maps.clone(),
                model: model.clone(),
                width: *width,
                duration: *duration,
            };
            let files = render::render(&run.cfg, &run.out.render_dir(), &req)?;
            let names: Vec<String> = files.iter().map(|p| p.display().to_string()).collect();
            names.join("\n")
        }
        Command::Bench { limit } => to_json(&bench::bench(&run, *limit)?),
    };
    Ok(msg)
}

fn to_json<S: serde::Serialize>(value: &S) -> String {
    serde_json::to_string_pretty(value).unwrap_or_default()
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    if let Some(n) = cli.global.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return EXIT_USAGE;
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure thread pool: {e}");
            return EXIT_USAGE;
        }
    }
    match execute(cli) {
        Ok(msg) => {
            if !msg.is_empty() {
                println!("{msg}");
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
