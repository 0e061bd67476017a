//! `priorseg` command implementations. Each command takes a config struct
//! and returns an [`Outcome`]; `main` only parses arguments and maps the
//! outcome to an exit status.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use priorseg_core::StrategyKind;
use serde::Serialize;

pub mod encode;
pub mod evaluate;
pub mod fairness;
pub mod phantom;
pub mod render;

pub const THREADS_ENV: &str = "PRIORSEG_THREADS";
pub const ERRORS_FILE: &str = "errors.json";

#[derive(Debug, Parser)]
#[command(name = "priorseg", version, about = "Anatomical-prior encoding, CTV evaluation and sex-stratified fairness reports")]
pub struct Cli {
    /// Worker threads (default: PRIORSEG_THREADS, else all cores).
    #[arg(long, global = true, env = THREADS_ENV, value_parser = clap::value_parser!(u32).range(1..))]
    pub threads: Option<u32>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Encode structure masks into prior channels for every patient.
    Encode(EncodeArgs),
    /// DSC / HD / HD95 per patient, whole volume and per region.
    Evaluate(EvaluateArgs),
    /// AGD, MGD and QD per region from a metrics CSV.
    Fairness(FairnessArgs),
    /// Axial slice of a CT with mask contours, as a PPM image.
    Render(RenderArgs),
    /// Generate a synthetic phantom cohort.
    Phantom(PhantomArgs),
}

#[derive(Debug, Clone, Args)]
pub struct EncodeArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// mi-z, eq-z (alias ei-z), crop-z, mi or mi-ts
    #[arg(long)]
    pub strategy: StrategyKind,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Also score the HN, THX, ABDM and PELV crops.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub regions: bool,
    /// Percentile for the hd95_mm column.
    #[arg(long, default_value_t = 95.0)]
    pub percentile: f64,
}

#[derive(Debug, Clone, Args)]
pub struct FairnessArgs {
    /// metrics.csv written by `evaluate`.
    #[arg(long)]
    pub metrics: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Row label used in the markdown tables.
    #[arg(long, default_value = "run")]
    pub label: String,
}

#[derive(Debug, Clone, Args)]
pub struct RenderArgs {
    /// Take the CT, GT and prediction of `--patient` from this manifest.
    #[arg(long, requires = "patient", conflicts_with = "ct")]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub patient: Option<String>,
    #[arg(long, required_unless_present = "manifest")]
    pub ct: Option<PathBuf>,
    /// Up to three masks, drawn in red, green, blue.
    #[arg(long = "mask")]
    pub masks: Vec<PathBuf>,
    /// Axial slice index.
    #[arg(long)]
    pub slice: usize,
    /// Output .ppm path.
    #[arg(long)]
    pub out: PathBuf,
    /// Window level (HU).
    #[arg(long, default_value_t = 40.0, allow_hyphen_values = true)]
    pub level: f64,
    /// Window width (HU).
    #[arg(long, default_value_t = 400.0)]
    pub width: f64,
}

#[derive(Debug, Clone, Args)]
pub struct PhantomArgs {
    /// Phantom spec JSON; missing fields take defaults.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Overrides the spec's error-model seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

/// Exit status and a one-line summary for stdout.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub failures: usize,
    pub summary: String,
}

impl Outcome {
    pub fn exit_code(&self) -> u8 {
        u8::from(self.failures > 0)
    }
}

/// One failed patient, as written to `errors.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, serde::Deserialize)]
pub struct ItemError {
    pub patient_id: String,
    pub error: String,
}

pub fn default_threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Run `f` inside a rayon pool of `threads` workers.
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .context("building thread pool")?;
    Ok(pool.install(f))
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))
}

pub fn run(cli: Cli) -> Result<Outcome> {
    let threads = cli.threads.map_or_else(default_threads, |n| n as usize);
    match cli.command {
        Command::Encode(a) => encode::run(&a, threads),
        Command::Evaluate(a) => evaluate::run(&a, threads),
        Command::Fairness(a) => fairness::run(&a),
        Command::Render(a) => render::run(&a),
        Command::Phantom(a) => phantom::run(&a, threads),
    }
}
