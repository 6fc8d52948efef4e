//! `spectraforge` command line: dataset generation, spectra, encodings,
//! training, modelling operations, evaluation and the inference service.

use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod serve;

/// Environment variable capping worker threads.
pub const THREADS_ENV: &str = "SPECTRAFORGE_THREADS";

#[derive(Debug)]
pub enum CliError {
    /// Bad invocation; exit code 2.
    Usage(String),
    /// Pipeline failure; exit code 1.
    Pipeline(spectraforge::Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Pipeline(e) => write!(f, "{e}"),
        }
    }
}

impl From<spectraforge::Error> for CliError {
    fn from(e: spectraforge::Error) -> Self {
        CliError::Pipeline(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Pipeline(e.into())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Pipeline(e.into())
    }
}

#[derive(Debug, Parser)]
#[command(name = "spectraforge", version, about = "Shapes from global and local Laplacian spectra")]
pub struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the synthetic cube dataset.
    GenCube(GenCubeArgs),
    /// Eigenvalues of the global or a localized operator of one shape.
    Spectrum(SpectrumArgs),
    /// Spectral encoding of one shape or a whole dataset.
    Encode(EncodeArgs),
    /// Train a decoder on a dataset.
    Train(TrainArgs),
    /// Decode an encoding into a shape.
    Reconstruct(ReconstructArgs),
    /// Replace segments of encoding A with those of B.
    Swap(SwapArgs),
    /// Interpolate selected segments between two encodings.
    Interpolate(InterpolateArgs),
    /// Per-dimension min/max over a set of encodings.
    Stats(StatsArgs),
    /// Evaluate a decoder on the test split of a dataset.
    Evaluate(EvaluateArgs),
    /// Serve a decoder over HTTP.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct GenCubeArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Grid cells along each cube edge.
    #[arg(long, default_value_t = 20)]
    pub face_res: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of depth factors per pattern.
    #[arg(long, default_value_t = 8)]
    pub depths: usize,
    #[arg(long, default_value_t = 0.6)]
    pub depth_min: f64,
    #[arg(long, default_value_t = 2.0)]
    pub depth_max: f64,
    /// Extrusion height in units of the cube edge.
    #[arg(long, default_value_t = 0.15)]
    pub height: f64,
    /// Use only the first N patterns of the catalog.
    #[arg(long)]
    pub patterns: Option<usize>,
}

/// Operator and truncation flags shared by the spectral commands.
#[derive(Debug, Args, Default)]
pub struct EncodingFlags {
    /// lbo, pat, ham or lmh.
    #[arg(long)]
    pub op: Option<String>,
    /// Global eigenvalues.
    #[arg(long)]
    pub k: Option<usize>,
    /// Eigenvalues per region.
    #[arg(long)]
    pub h: Option<usize>,
    /// Potential height for ham/lmh.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Orthogonality weight for lmh.
    #[arg(long)]
    pub mu: Option<f64>,
    /// Global eigenvectors penalised by lmh.
    #[arg(long)]
    pub basis: Option<usize>,
    /// Neighbourhood size for point clouds.
    #[arg(long)]
    pub k_neighbors: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    #[arg(long)]
    pub mesh: PathBuf,
    /// Region for a localized operator.
    #[arg(long)]
    pub region: Option<PathBuf>,
    #[command(flatten)]
    pub encoding: EncodingFlags,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EncodeArgs {
    /// Single shape (OFF, OBJ or XYZ).
    #[arg(long, conflicts_with = "dataset")]
    pub mesh: Option<PathBuf>,
    /// Region files for `--mesh`, in encoding order.
    #[arg(long)]
    pub region: Vec<PathBuf>,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[command(flatten)]
    pub encoding: EncodingFlags,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Precomputed encodings from `encode --dataset`.
    #[arg(long)]
    pub encodings: Option<PathBuf>,
    /// Checkpoint to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Continue from this checkpoint instead of a fresh model.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    #[arg(long)]
    pub loss_csv: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub late_lr: Option<f64>,
    /// First epoch trained with the late learning rate.
    #[arg(long)]
    pub lr_switch: Option<usize>,
    #[arg(long)]
    pub train_seed: Option<u64>,
    #[arg(long)]
    pub dropout: Option<f64>,
    /// frobenius or chamfer.
    #[arg(long)]
    pub loss: Option<String>,
    /// Hidden widths, e.g. `258,1024,2048`.
    #[arg(long, value_delimiter = ',')]
    pub hidden: Option<Vec<usize>>,
    #[command(flatten)]
    pub encoding: EncodingFlags,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub encoding: PathBuf,
    /// Output shape; format from the extension.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SwapArgs {
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    /// Segment labels taken from B.
    #[arg(long, value_delimiter = ',')]
    pub take: Vec<String>,
    #[arg(long)]
    pub out: PathBuf,
    /// Also decode the result with this model.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, requires = "model")]
    pub shape_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InterpolateArgs {
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    #[arg(long)]
    pub t: f64,
    /// Segment labels to interpolate; all segments when omitted.
    #[arg(long, value_delimiter = ',')]
    pub segments: Vec<String>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, requires = "model")]
    pub shape_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Encodings file from `encode --dataset`.
    #[arg(long)]
    pub encodings: Option<PathBuf>,
    /// Restrict to the training split of this dataset's manifest.
    #[arg(long)]
    pub train_only: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub encodings: Option<PathBuf>,
    /// Geodesic sources per shape; 0 skips the metric columns.
    #[arg(long)]
    pub metric_samples: Option<usize>,
    /// JSON report path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
}

/// Applies `SPECTRAFORGE_THREADS` to the global rayon pool.
pub fn configure_threads() -> Result<(), CliError> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError::Usage(format!("{THREADS_ENV} must be a positive integer, got `{v}`")))?;
        // a pool may already exist when embedded; keep it
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    let cfg = match &cli.config {
        Some(p) => config::RunConfig::load(p)?,
        None => config::RunConfig::default(),
    };
    match cli.command {
        Command::GenCube(a) => commands::gen_cube(&a),
        Command::Spectrum(a) => commands::spectrum(&a, &cfg),
        Command::Encode(a) => commands::encode(&a, &cfg),
        Command::Train(a) => commands::train(&a, &cfg),
        Command::Reconstruct(a) => commands::reconstruct(&a, &cfg),
        Command::Swap(a) => commands::swap(&a),
        Command::Interpolate(a) => commands::interpolate(&a),
        Command::Stats(a) => commands::stats(&a, &cfg),
        Command::Evaluate(a) => commands::evaluate(&a, &cfg),
        Command::Serve(a) => commands::serve(&a, &cfg),
    }
}

/// Parses `args`, runs the command and maps the outcome to an exit code.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let result = configure_threads().and_then(|()| execute(cli));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(CliError::Pipeline(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

pub(crate) fn display(p: &Path) -> String {
    p.display().to_string()
}
