//! `wmctl`: command-line access to the watermark membership-inference toolkit.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "wmctl", version, about = "Watermark-based membership inference against generative models")]
pub struct Cli {
    /// Seed for every random choice; runs with the same seed are bit-identical
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Suppress informational messages on stderr
    #[arg(long, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print a fresh 64-bit watermark key
    Keygen,
    /// Write a random payload of d bits
    PayloadGen {
        #[arg(long, default_value_t = 100)]
        d: usize,
        /// Output file (stdout if omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Embed a payload into a PGM/PPM image
    Embed {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        key: u64,
        /// Payload file (one line of 0/1 characters)
        #[arg(long)]
        payload: PathBuf,
        #[command(flatten)]
        codec: CodecArgs,
    },
    /// Decode the payload bits and per-bit scores of an image
    Decode {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        key: u64,
        /// Payload length
        #[arg(long, default_value_t = 100)]
        d: usize,
        /// Payload to compare against; prints the bitwise accuracy
        #[arg(long)]
        expect: Option<PathBuf>,
        #[command(flatten)]
        codec: CodecArgs,
    },
    /// Peak signal-to-noise ratio between two images of the same layout
    Psnr {
        #[arg(long)]
        reference: PathBuf,
        #[arg(long)]
        test: PathBuf,
    },
    /// Generate a labelled synthetic corpus and its manifest
    DatasetSynth {
        /// Output directory (manifest.txt and images/)
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        n: usize,
        #[arg(long, default_value_t = 64)]
        width: usize,
        #[arg(long, default_value_t = 64)]
        height: usize,
        /// Attributes as name:prevalence pairs
        #[arg(long, default_value = "disc:0.455,stripes:0.205,checker:0.047")]
        attributes: String,
    },
    /// Watermark every record of a manifest that carries an attribute
    DatasetMark {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        attribute: String,
        #[arg(long)]
        payload: PathBuf,
        #[arg(long)]
        key: u64,
        #[command(flatten)]
        codec: CodecArgs,
    },
    /// Estimate the null bias p_w from the unmarked images of a manifest
    Calibrate {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        key: u64,
        #[arg(long)]
        payload: PathBuf,
        /// Also report the null restricted to images with this attribute
        #[arg(long)]
        attribute: Option<String>,
    },
    /// Run an attack and print its detection report
    Attack {
        /// Attack configuration (WMCTL-ATTACK 1)
        #[arg(long)]
        config: PathBuf,
        /// Proxy configuration (WMCTL-PROXY 1)
        #[arg(long)]
        proxy: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        /// Output file (stdout if omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an attack over a parameter grid and print one CSV row per cell
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Bit-channel proxy supplying marginals and the null bias
        #[arg(long)]
        proxy: PathBuf,
        /// Overall carrier rates
        #[arg(long, value_delimiter = ',', required = true)]
        carrier_rate: Vec<f64>,
        /// Per-bit fidelities of carriers
        #[arg(long, value_delimiter = ',', required = true)]
        beta: Vec<f64>,
        /// Query budgets
        #[arg(long, value_delimiter = ',', default_value = "100")]
        n: Vec<usize>,
        /// Predictor flip probabilities
        #[arg(long, value_delimiter = ',', default_value = "0")]
        epsilon: Vec<f64>,
        /// Marginals of the condition attribute
        #[arg(long, value_delimiter = ',', required = true)]
        marginal: Vec<f64>,
        /// Seeds per cell
        #[arg(long, default_value_t = 20)]
        seeds: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact p-value of an observed bit-match statistic
    Pvalue {
        #[arg(long, value_enum)]
        mode: PMode,
        /// Total correct bits over all samples (avg mode)
        #[arg(long = "K")]
        total: Option<u64>,
        /// Best per-sample correct bits (max mode)
        #[arg(long)]
        k_max: Option<u32>,
        /// Number of samples
        #[arg(long)]
        n: usize,
        /// Payload length
        #[arg(long)]
        d: usize,
        /// Null per-bit agreement probability
        #[arg(long)]
        pw: f64,
    },
}

/// Watermark strength and robustness settings.
#[derive(Debug, Clone, Args)]
pub struct CodecArgs {
    /// Minimum coefficient-pair margin in luma levels
    #[arg(long, default_value_t = 6.0)]
    pub alpha: f64,
    /// Minimum coefficient pairs per payload bit
    #[arg(long, default_value_t = 8)]
    pub redundancy: usize,
    /// Embedding passes to absorb rounding and clamping
    #[arg(long, default_value_t = 3)]
    pub max_passes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PMode {
    Avg,
    Max,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
