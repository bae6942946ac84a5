//! `lowlight`: batch front-end for the lowlight-core pipelines.

mod commands;
mod config;
mod error;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lowlight_core::annotations::ExtremeFilter;
use lowlight_core::eval::CurveMode;

#[derive(Debug, Parser)]
#[command(name = "lowlight", version, about = "Low-light data generation, augmentation and evaluation")]
pub struct Cli {
    /// TOML file with defaults; keys are flag names with underscores.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores). Never affects output bytes.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate posterize + shot-noise restoration pairs.
    Corrupt(CorruptArgs),
    /// Apply patch-wise light jitter and/or object block shuffling.
    Augment(AugmentArgs),
    /// Per-channel histogram equalization of a file or directory.
    Equalize(EqualizeArgs),
    /// MSE, SSIM and restoration loss as CSV on stdout.
    Metrics(MetricsArgs),
    /// Instance counts per annotation file.
    Stats(StatsArgs),
    /// Detection AP and precision-recall curves.
    Eval(EvalArgs),
    /// Plot the curves of a saved evaluation report as SVG.
    Prcurve(PrcurveArgs),
}

#[derive(Debug, Args)]
pub struct CorruptArgs {
    /// Directory of clean source images.
    #[arg(long)]
    pub src: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub count: Option<u64>,
    #[arg(long)]
    pub k_min: Option<u32>,
    #[arg(long)]
    pub k_max: Option<u32>,
    #[arg(long)]
    pub photon_scale_min: Option<f64>,
    #[arg(long)]
    pub photon_scale_max: Option<f64>,
    #[arg(long)]
    pub patch_side: Option<u32>,
}

#[derive(Debug, Args, Default)]
pub struct AttrArgs {
    /// Object holding the lighting flags in each annotation; "" for top-level keys.
    #[arg(long)]
    pub attr_container: Option<String>,
    #[arg(long)]
    pub attr_extreme: Option<String>,
    #[arg(long)]
    pub attr_truncated: Option<String>,
    #[arg(long)]
    pub attr_occluded: Option<String>,
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    #[arg(long)]
    pub src: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// light, shuffle or both.
    #[arg(long)]
    pub mode: Option<String>,
    /// Annotations whose boxes are the shuffle regions, matched by file name.
    #[arg(long)]
    pub ann: Option<PathBuf>,
    #[arg(long)]
    pub alpha_limit: Option<f64>,
    #[arg(long)]
    pub delta_limit: Option<f64>,
    #[arg(long)]
    pub patch_frac_min: Option<f64>,
    #[arg(long)]
    pub patch_frac_max: Option<f64>,
    #[arg(long)]
    pub block: Option<u32>,
    #[arg(long)]
    pub prob: Option<f64>,
    #[command(flatten)]
    pub attr: AttrArgs,
}

#[derive(Debug, Args)]
pub struct EqualizeArgs {
    /// Image file or directory.
    #[arg(long)]
    pub input: PathBuf,
    /// Output file, or directory when the input is a directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// Reference image file or directory.
    #[arg(long)]
    pub reference: PathBuf,
    /// Restored image file or directory, paired by file name.
    #[arg(long)]
    pub restored: PathBuf,
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub k1: Option<f64>,
    #[arg(long)]
    pub k2: Option<f64>,
    #[arg(long)]
    pub dynamic_range: Option<f64>,
    #[arg(long)]
    pub lambda1: Option<f64>,
    #[arg(long)]
    pub lambda2: Option<f64>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// One or more annotation files.
    #[arg(long, required = true, num_args = 1..)]
    pub ann: Vec<PathBuf>,
    /// Print JSON instead of a table.
    #[arg(long)]
    pub json: bool,
    #[command(flatten)]
    pub attr: AttrArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub dets: PathBuf,
    #[arg(long)]
    pub ann: PathBuf,
    /// Report JSON path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Curve CSV path.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Curve SVG path.
    #[arg(long)]
    pub svg: Option<PathBuf>,
    /// Add the extreme/other elimination curves.
    #[arg(long)]
    pub extreme_analysis: bool,
    #[arg(long)]
    pub attribution_iou: Option<f64>,
    /// Ground-truth filter on the extreme flag: all, only or exclude.
    #[arg(long)]
    pub extreme: Option<ExtremeFilter>,
    #[arg(long)]
    pub exclude_truncated: bool,
    #[arg(long)]
    pub exclude_occluded: bool,
    /// pooled or per-class-mean.
    #[arg(long)]
    pub curve_mode: Option<CurveMode>,
    #[command(flatten)]
    pub attr: AttrArgs,
}

#[derive(Debug, Args)]
pub struct PrcurveArgs {
    /// Report JSON written by `eval`.
    #[arg(long)]
    pub report: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Also draw the per-class curves.
    #[arg(long)]
    pub per_class: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::new()
        .filter_level(log::LevelFilter::Warn)
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
