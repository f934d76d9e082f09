//! `specklab`: synthesize speckled data, run classical and learned despeckling,
//! score the results and benchmark methods against each other.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use specklab_core::Error;

mod commands;
mod config;
mod dataset;

#[derive(Parser, Debug)]
#[command(name = "specklab", version, about = "Laser speckle reduction benchmark toolkit")]
struct Cli {
    /// Flat `key = value` file with the same keys as the flags; flags win.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Add synthetic speckle to clean images and write side-by-side pairs.
    Synth(SynthArgs),
    /// Resize and histogram-match paired images and write a group-held-out manifest.
    Prep(PrepArgs),
    /// Run a classical denoiser on an image or a directory.
    Denoise(DenoiseArgs),
    /// Train the adversarial despeckling network.
    Train(TrainArgs),
    /// Apply a trained generator checkpoint.
    Infer(InferArgs),
    /// Score predictions against ground truth (PSNR, SSIM).
    Eval(EvalArgs),
    /// Slanted-edge MTF of a region of interest.
    Mtf(MtfArgs),
    /// Grid-search denoiser parameters for the PSNR/SSIM Pareto front.
    Tune(TuneArgs),
    /// Convert a CSV benchmark report to markdown or back.
    Report(ReportArgs),
    /// Benchmark methods on paired data.
    Bench(BenchArgs),
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Directory (or file) of clean images. Without it, procedural test scenes are generated.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 2.0)]
    pub grain: f64,
    #[arg(long, default_value_t = 0.6)]
    pub contrast: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Use one speckle field for all three channels.
    #[arg(long)]
    pub shared_field: bool,
    /// Number of procedural scenes when no --input is given.
    #[arg(long, default_value_t = 10)]
    pub scenes: usize,
    /// Side of procedural scenes.
    #[arg(long, default_value_t = 256)]
    pub size: usize,
    /// Accept halves that are not square powers of two.
    #[arg(long)]
    pub allow_any_size: bool,
}

#[derive(Args, Debug)]
pub struct PrepArgs {
    #[arg(long)]
    pub dataroot: PathBuf,
    /// Side each half is resized to (bicubic). Defaults to the original size.
    #[arg(long)]
    pub load_size: Option<usize>,
    /// Training crop size; checked against the load size.
    #[arg(long)]
    pub fine_size: Option<usize>,
    #[arg(long, default_value_t = 0.1)]
    pub test_fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub allow_any_size: bool,
    /// Skip matching the speckled half's histogram to the target's.
    #[arg(long)]
    pub no_histmatch: bool,
    /// Output directory (default: <dataroot>/prepared).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct DenoiseArgs {
    #[arg(long)]
    pub method: String,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// `key=value,...` overrides of the method defaults.
    #[arg(long, default_value = "")]
    pub params: String,
    /// Inputs are side-by-side pairs; denoise the left half.
    #[arg(long)]
    pub paired: bool,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub dataroot: PathBuf,
    #[arg(long)]
    pub name: String,
    #[arg(long, default_value = "checkpoints")]
    pub checkpoints_dir: PathBuf,
    #[arg(long, default_value_t = 70.0)]
    pub lambda_l1: f64,
    #[arg(long, default_value_t = 0.0002)]
    pub lr: f64,
    #[arg(long, default_value_t = 200)]
    pub niter: usize,
    #[arg(long, default_value_t = 200)]
    pub niter_decay: usize,
    #[arg(long, default_value_t = 64)]
    pub pool_size: usize,
    #[arg(long, default_value_t = 256)]
    pub load_size: usize,
    #[arg(long, default_value_t = 256)]
    pub fine_size: usize,
    #[arg(long, default_value_t = 1)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// vanilla | lsgan
    #[arg(long, default_value = "vanilla")]
    pub gan_mode: String,
    #[arg(long, default_value_t = 0)]
    pub save_every: usize,
    /// Generator stride-2 stages.
    #[arg(long, default_value_t = 4)]
    pub depth: usize,
    #[arg(long, default_value_t = 32)]
    pub ngf: usize,
    #[arg(long, default_value_t = 64)]
    pub ndf: usize,
    /// Discriminator stride-2 layers.
    #[arg(long, default_value_t = 3)]
    pub n_layers_d: usize,
    #[arg(long)]
    pub no_skip: bool,
    /// Spectral normalization in the generator too.
    #[arg(long)]
    pub sn_generator: bool,
    /// Disable spectral normalization in the discriminator.
    #[arg(long)]
    pub no_sn_discriminator: bool,
}

#[derive(Args, Debug)]
pub struct InferArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Inputs are side-by-side pairs; use the left half.
    #[arg(long)]
    pub paired: bool,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub pred: PathBuf,
    /// Ground truth images; side-by-side pairs contribute their right half.
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct MtfArgs {
    #[arg(long)]
    pub roi: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// luminance | r | g | b
    #[arg(long, default_value = "luminance")]
    pub channel: String,
    #[arg(long, default_value_t = 4)]
    pub oversample: usize,
}

#[derive(Args, Debug)]
pub struct TuneArgs {
    #[arg(long)]
    pub dataroot: PathBuf,
    #[arg(long)]
    pub method: String,
    /// `key=v1,v2;key2=v3,...`
    #[arg(long)]
    pub grid: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// CSV report written by `bench`.
    #[arg(long)]
    pub input: PathBuf,
    /// Output; `.md` gives markdown, anything else CSV.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[arg(long)]
    pub dataroot: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "median,nlm,ksvd,cbm3d")]
    pub methods: Vec<String>,
    /// Generator checkpoint for the `deeplsr` method.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Output; `.md` gives markdown, anything else CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// CBM3D noise level on the 0-255 scale, or `auto` for the per-image RMS of input minus target.
    #[arg(long, default_value = "auto")]
    pub cbm3d_sigma: String,
    /// K-SVD noise level on the [0, 1] scale, or `auto` for the per-image RMS of input minus target.
    #[arg(long, default_value = "auto")]
    pub ksvd_sigma: String,
    /// Per-method overrides, `method:key=value,...`; repeatable.
    #[arg(long = "method-params")]
    pub method_params: Vec<String>,
    /// Record wall time per image (makes the report nondeterministic).
    #[arg(long)]
    pub timing: bool,
    /// Evaluate every pair, not just the manifest's test split.
    #[arg(long)]
    pub all_splits: bool,
}

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => EXIT_USAGE,
        Error::Numerical { .. } => EXIT_NUMERICAL,
        _ => EXIT_DATA,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let argv = match config::expand_config(std::env::args().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code(&e));
        }
    };
    let cmd = Cli::command().mut_subcommands(|s| s.args_override_self(true));
    let cli = match cmd.try_get_matches_from(argv).and_then(|m| Cli::from_arg_matches(&m)) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    let _ = &cli.config;
    let result = match cli.command {
        Command::Synth(a) => commands::synth(&a),
        Command::Prep(a) => commands::prep(&a),
        Command::Denoise(a) => commands::denoise(&a),
        Command::Train(a) => commands::train(&a),
        Command::Infer(a) => commands::infer(&a),
        Command::Eval(a) => commands::eval(&a),
        Command::Mtf(a) => commands::mtf(&a),
        Command::Tune(a) => commands::tune(&a),
        Command::Report(a) => commands::report(&a),
        Command::Bench(a) => commands::bench(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
