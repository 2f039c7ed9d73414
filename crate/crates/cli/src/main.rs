//! `fepe` — batch front end: label generation, reconstruction, evaluation,
//! gradient checks, visualization and benchmarks.
//!
//! Exit codes: 0 success, 1 data failure, 2 usage error.

mod commands;
mod viz;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fepe_core::ingest::AnnotationFormat;

#[derive(Debug, Parser)]
#[command(name = "fepe", version, about = "Text kernel label generation and reconstruction toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate label containers from an annotated dataset.
    GenLabels(GenLabelsArgs),
    /// Turn score-map containers into detection JSON files.
    Reconstruct(ReconstructArgs),
    /// Score detections against ground truth; prints the report as JSON.
    Evaluate(EvaluateArgs),
    /// Compare analytic loss gradients with finite differences.
    Gradcheck(GradcheckArgs),
    /// Render label containers or detections as PNG.
    Viz(VizArgs),
    /// Time naive vs integral-image surrounding maps.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Icdar15,
    Polycsv,
    Td500,
}

impl From<FormatArg> for AnnotationFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Icdar15 => AnnotationFormat::Icdar15Quad,
            FormatArg::Polycsv => AnnotationFormat::PolyCsv,
            FormatArg::Td500 => AnnotationFormat::Td500RotRect,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LossArg {
    Bce,
    Dice,
    Ratio,
    All,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum IgnoreRuleArg {
    Iou,
    DetArea,
}

fn parse_size(s: &str) -> Result<(usize, usize), String> {
    let (h, w) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected HxW, got {s:?}"))?;
    let h: usize = h.trim().parse().map_err(|_| format!("bad height in {s:?}"))?;
    let w: usize = w.trim().parse().map_err(|_| format!("bad width in {s:?}"))?;
    if h == 0 || w == 0 {
        return Err(format!("size must be positive, got {s:?}"));
    }
    Ok((h, w))
}

#[derive(Debug, Args)]
struct PoolArgs {
    /// Worker threads (0 = logical CPU count).
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

#[derive(Debug, Args)]
struct GenLabelsArgs {
    /// Directory of annotation files (gt_<id>.txt).
    #[arg(long)]
    gts: PathBuf,
    /// Directory of images (<id>.jpg); sizes are read from the headers.
    /// Defaults to the annotation directory; a sizes.json sidecar also works.
    #[arg(long)]
    images: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "icdar15")]
    ann_format: FormatArg,
    /// Resize labels to HxW.
    #[arg(long, value_parser = parse_size)]
    size: Option<(usize, usize)>,
    #[arg(long, default_value_t = 0.4)]
    delta: f64,
    /// Kernels with area at or below this (px²) are discarded.
    #[arg(long, default_value_t = 16.0)]
    min_area: f64,
    #[arg(long, default_value_t = 5)]
    mu: usize,
    #[arg(long)]
    strict: bool,
    #[command(flatten)]
    pool: PoolArgs,
}

#[derive(Debug, Args)]
struct ReconstructArgs {
    /// A container directory, or a directory of containers.
    #[arg(long)]
    maps: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0.3)]
    bin_thresh: f64,
    #[arg(long, default_value_t = 1.45)]
    expand_ratio: f64,
    /// Kernels with area at or below this (px²) are discarded.
    #[arg(long, default_value_t = 16.0)]
    min_area: f64,
    #[arg(long, default_value_t = 0.7)]
    score_thresh: f64,
    #[command(flatten)]
    pool: PoolArgs,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// Directory of detection JSON files.
    #[arg(long)]
    dets: PathBuf,
    #[arg(long)]
    gts: PathBuf,
    #[arg(long, value_enum, default_value = "icdar15")]
    ann_format: FormatArg,
    #[arg(long, default_value_t = 0.5)]
    iou: f64,
    /// Overlap measure used to discard detections on ignore regions.
    #[arg(long, value_enum, default_value = "iou")]
    ignore_rule: IgnoreRuleArg,
    #[arg(long)]
    strict: bool,
}

#[derive(Debug, Args)]
struct GradcheckArgs {
    #[arg(long, value_enum, default_value = "all")]
    loss: LossArg,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct VizArgs {
    /// Label container to render.
    #[arg(long, conflicts_with = "dets", required_unless_present = "dets")]
    labels: Option<PathBuf>,
    /// Detection JSON to draw over --image.
    #[arg(long, requires = "image")]
    dets: Option<PathBuf>,
    /// Background image.
    #[arg(long)]
    image: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Comma-separated HxW list.
    #[arg(long, value_delimiter = ',', value_parser = parse_size, default_value = "256x256,512x512")]
    sizes: Vec<(usize, usize)>,
    #[arg(long, value_delimiter = ',', default_value = "3,5,7")]
    mus: Vec<usize>,
    #[arg(long, default_value_t = 5)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also time the fast path across images on all cores.
    #[arg(long)]
    parallel: bool,
    /// Write the report here as well as to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Failure class; decides the exit code.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Data(String),
}

impl From<fepe_core::Error> for Failure {
    fn from(e: fepe_core::Error) -> Self {
        match e {
            fepe_core::Error::Config(_) => Failure::Usage(e.to_string()),
            _ => Failure::Data(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("FEPE_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenLabels(a) => commands::gen_labels(a),
        Command::Reconstruct(a) => commands::reconstruct(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Gradcheck(a) => commands::gradcheck(a),
        Command::Viz(a) => viz::run(a),
        Command::Bench(a) => commands::bench(a),
    };
    match result {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
