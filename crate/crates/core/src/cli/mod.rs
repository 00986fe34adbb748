//! `f0kit` command-line interface.
//!
//! Every subcommand is deterministic given its flags and `--seed`. Failures exit
//! nonzero and print a single JSON diagnostic line to standard error.

mod commands;
pub mod report;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::audio::{DEFAULT_HOP_S, DEFAULT_WINDOW_S};
use crate::metrics::{DEFAULT_BINS, DEFAULT_EPSILON};
use crate::pitch::PitchConfig;
use crate::predictor::TrainConfig;
use crate::{Error, Result};

pub use commands::{
    cmd_compare, cmd_dist, cmd_extract, cmd_predict, cmd_rescale, cmd_stats, cmd_synth_traj,
    cmd_train, CompareRow, DistRow, ExtractSummary,
};

#[derive(Debug, Parser)]
#[command(
    name = "f0kit",
    version,
    about = "F0 extraction, conditioning, prediction and evaluation"
)]
pub struct Cli {
    /// Seed for every random stream.
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract per-utterance F0 tracks and per-speaker statistics.
    Extract(ExtractArgs),
    /// RMSE / correlation between two track directories.
    Compare(CompareArgs),
    /// F0 and delta-F0 KL divergences of systems against a target.
    Dist(DistArgs),
    /// Write a synthetic flat, sine or linear log-F0 trajectory.
    SynthTraj(SynthArgs),
    /// Train the frame-level F0 predictor.
    Train(TrainArgs),
    /// Predict log-F0 tracks for a corpus.
    Predict(PredictArgs),
    /// Shift tracks from a source speaker mean to a target speaker mean.
    Rescale(RescaleArgs),
    /// Speaker statistics over a track directory.
    Stats(StatsArgs),
}

#[derive(Debug, Clone, Args)]
pub struct PitchArgs {
    #[arg(long, default_value_t = DEFAULT_HOP_S)]
    pub hop: f64,
    #[arg(long, default_value_t = DEFAULT_WINDOW_S)]
    pub window: f64,
    #[arg(long, default_value_t = 50.0)]
    pub fmin: f64,
    #[arg(long, default_value_t = 600.0)]
    pub fmax: f64,
    #[arg(long, default_value_t = 0.1)]
    pub threshold: f64,
}

impl PitchArgs {
    pub fn config(&self) -> PitchConfig {
        PitchConfig {
            fmin_hz: self.fmin,
            fmax_hz: self.fmax,
            hop_s: self.hop,
            window_s: self.window,
            voicing_threshold: self.threshold,
        }
    }

    /// Checks everything except the Nyquist bound, which needs the audio.
    fn validate(&self) -> Result<()> {
        self.config().validate(u32::MAX)?;
        Ok(())
    }
}

impl Default for PitchArgs {
    fn default() -> Self {
        let cfg = PitchConfig::default();
        Self {
            hop: cfg.hop_s,
            window: cfg.window_s,
            fmin: cfg.fmin_hz,
            fmax: cfg.fmax_hz,
            threshold: cfg.voicing_threshold,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ExtractArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Speaker-role file; defaults to speakers.json next to the manifest.
    #[arg(long)]
    pub speakers: Option<PathBuf>,
    /// Output directory for `<id>.track.json` files and `summary.json`.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub pitch: PitchArgs,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    pub track_a_dir: PathBuf,
    pub track_b_dir: PathBuf,
    /// Output directory for compare.csv and compare.json.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct DistArgs {
    pub target_dir: PathBuf,
    #[arg(required = true)]
    pub system_dirs: Vec<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_BINS)]
    pub bins: usize,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    pub epsilon: f64,
    /// Output directory for kld.csv and kld.json.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TrajKind {
    Flat,
    Sine,
    Linear,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum)]
    pub kind: TrajKind,
    #[arg(long)]
    pub n_frames: usize,
    #[arg(long, default_value_t = DEFAULT_HOP_S)]
    pub hop: f64,
    /// Flat level in Hz.
    #[arg(long, default_value_t = 150.0)]
    pub level_hz: f64,
    /// Sine center in Hz.
    #[arg(long, default_value_t = 150.0)]
    pub center_hz: f64,
    /// Sine amplitude in log-Hz.
    #[arg(long, default_value_t = 0.2)]
    pub amplitude: f64,
    /// Sine period in frames.
    #[arg(long, default_value_t = 100)]
    pub period: usize,
    /// Ramp start in Hz.
    #[arg(long, default_value_t = 100.0)]
    pub start_hz: f64,
    /// Ramp end in Hz.
    #[arg(long, default_value_t = 200.0)]
    pub end_hz: f64,
    /// Output track file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub speakers: Option<PathBuf>,
    /// Use pre-extracted `<id>.track.json` oracles instead of running pitch extraction.
    #[arg(long)]
    pub tracks: Option<PathBuf>,
    /// Model output file.
    #[arg(long)]
    pub out: PathBuf,
    /// Loss curve CSV; defaults to the model path with a `.loss.csv` extension.
    #[arg(long)]
    pub loss_out: Option<PathBuf>,
    #[arg(long, default_value_t = 2000)]
    pub joint_steps: usize,
    #[arg(long, default_value_t = 2000)]
    pub finetune_steps: usize,
    #[arg(long, default_value_t = 8)]
    pub batch: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 64)]
    pub channels: usize,
    #[arg(long, default_value_t = 5)]
    pub kernel: usize,
    #[command(flatten)]
    pub pitch: PitchArgs,
}

impl TrainArgs {
    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            joint_steps: self.joint_steps,
            finetune_steps: self.finetune_steps,
            batch_size: self.batch,
            learning_rate: self.lr,
            seed,
            channels: self.channels,
            kernel: self.kernel,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub speakers: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct RescaleArgs {
    pub track_dir: PathBuf,
    /// SpeakerStats JSON of the source speaker.
    #[arg(long)]
    pub source_stats: PathBuf,
    /// SpeakerStats JSON of the target speaker.
    #[arg(long)]
    pub target_stats: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct StatsArgs {
    pub track_dir: PathBuf,
    /// Restrict to utterances of `--speaker` listed in this manifest.
    #[arg(long, requires = "speaker")]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub speaker: Option<String>,
    #[arg(long)]
    pub speakers: Option<PathBuf>,
    /// Output SpeakerStats JSON file.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Extract(args) => {
            args.pitch.validate()?;
            let summary = cmd_extract(args)?;
            println!(
                "extracted {} utterances into {}",
                summary.utterances.len(),
                args.out.display()
            );
        }
        Command::Compare(args) => {
            let rows = cmd_compare(args)?;
            if let Some(mean) = rows.last() {
                println!(
                    "{} utterances: mean rmse_hz {} rmse_log {} correlation {}",
                    rows.len() - 1,
                    report::sig6(mean.rmse_hz),
                    report::sig6(mean.rmse_log),
                    report::sig6(mean.correlation)
                );
            }
        }
        Command::Dist(args) => {
            let rows = cmd_dist(args)?;
            println!("system | F0 | delta-F0");
            for r in rows {
                println!(
                    "{} | {} | {}",
                    r.system,
                    report::sig6(r.kld_f0),
                    report::sig6(r.kld_delta)
                );
            }
        }
        Command::SynthTraj(args) => {
            let track = cmd_synth_traj(args)?;
            println!("wrote {} frames to {}", track.len(), args.out.display());
        }
        Command::Train(args) => {
            args.pitch.validate()?;
            args.train_config(cli.seed).validate()?;
            let outcome = cmd_train(args, cli.seed)?;
            if let Some(last) = outcome.losses.last() {
                println!(
                    "trained {} steps, final loss {}",
                    last.step,
                    report::sig6(last.loss)
                );
            }
        }
        Command::Predict(args) => {
            let n = cmd_predict(args)?;
            println!("predicted {n} utterances into {}", args.out.display());
        }
        Command::Rescale(args) => {
            let n = cmd_rescale(args)?;
            println!("rescaled {n} tracks into {}", args.out.display());
        }
        Command::Stats(args) => {
            let stats = cmd_stats(args)?;
            println!(
                "mean {} Hz, variance {} Hz^2 over {} voiced frames",
                report::sig6(stats.mean_hz),
                report::sig6(stats.variance_hz2),
                stats.n_frames
            );
        }
    }
    Ok(())
}

/// JSON diagnostic printed on failure.
pub fn diagnostic(err: &Error) -> serde_json::Value {
    json!({
        "error": err.kind(),
        "message": err.to_string(),
        "utterance": err.utterance_id(),
    })
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            eprintln!(
                "{}",
                json!({ "error": "UsageError", "message": e.to_string().trim_end(), "utterance": null })
            );
            return 2;
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("{}", diagnostic(&err));
            1
        }
    }
}
