//! Command-line front end.
//!
//! Exit codes: 0 success, 1 bad input (flags, files, parse errors),
//! 2 numerical or capability failure, 3 some splits failed.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use ldg_core::data::remove_zero_variance;
use ldg_core::pipeline::{self, PipelineConfig};
use ldg_core::{Method, Normalization};
use serde::Serialize;

use crate::experiment::{
    run_experiment, transfer_report, ExperimentConfig, TransferExperimentConfig, DEFAULT_TARGET_PER_CLASS,
    DEFAULT_TRAIN_FRACTION,
};
use crate::io::{self, parse_delimiter, IoError, LabelColumn, LoadedDataset};
use crate::report::ExperimentReport;

#[derive(Debug, Parser)]
#[command(
    name = "ldg",
    version,
    about = "Local discriminative Gaussian dimensionality reduction"
)]
pub struct Cli {
    /// More log output on stderr (repeat for debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    /// Only log errors.
    #[arg(short, long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit one projection on a whole dataset.
    Reduce(ReduceArgs),
    /// Repeated random-split benchmark.
    Bench(BenchArgs),
    /// Few-labeled-example transfer between two datasets.
    Transfer(TransferArgs),
}

#[derive(Debug, Args)]
struct InputArgs {
    /// Label column: `first`, `last` or a zero-based index.
    #[arg(long, default_value = "last")]
    label_col: LabelColumn,

    /// Field delimiter (`tab` and `space` are accepted).
    #[arg(long, default_value = ",", value_parser = parse_delimiter)]
    delimiter: char,
}

#[derive(Debug, Args)]
struct SelectionArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Use exactly this many output dimensions instead of scanning.
    #[arg(long)]
    dim: Option<usize>,

    /// Upper end of the dimension scan (default: classes + 15).
    #[arg(long)]
    max_dim: Option<usize>,

    /// Neighborhood sizes tried by cross-validation.
    #[arg(long, value_delimiter = ',', default_value = "4,8,16,32,64")]
    k_grid: Vec<usize>,

    #[arg(long, value_delimiter = ',', default_value = "0.2,0.4,0.6,0.8,1")]
    gamma_grid: Vec<f64>,
}

impl SelectionArgs {
    fn pipeline(&self) -> PipelineConfig {
        let mut cfg = PipelineConfig {
            k_grid: self.k_grid.clone(),
            gamma_grid: self.gamma_grid.clone(),
            max_dim: self.max_dim,
            fixed_dim: self.dim,
            ..PipelineConfig::default()
        };
        cfg.protocol.seed = self.seed;
        cfg
    }
}

#[derive(Debug, Args)]
struct ReduceArgs {
    #[arg(long, default_value = "ldg")]
    method: Method,

    #[arg(long)]
    data: PathBuf,

    #[command(flatten)]
    input: InputArgs,

    #[command(flatten)]
    selection: SelectionArgs,

    /// Subsample every class to the smallest class size first.
    #[arg(long)]
    balance: bool,

    /// Projection file; printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Write the kept feature columns here when constant columns were dropped.
    #[arg(long)]
    mask_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long, default_value = "ldg")]
    method: Method,

    #[arg(long)]
    data: PathBuf,

    #[command(flatten)]
    input: InputArgs,

    #[command(flatten)]
    selection: SelectionArgs,

    #[arg(long, default_value_t = 10)]
    splits: usize,

    #[arg(long, default_value_t = DEFAULT_TRAIN_FRACTION)]
    train_fraction: f64,

    #[arg(long)]
    balance: bool,

    /// JSON report file; printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Flat per-split CSV table.
    #[arg(long)]
    table: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TransferArgs {
    #[arg(long, default_value = "transfer-ldg")]
    method: Method,

    #[arg(long)]
    source: PathBuf,

    #[arg(long)]
    target: PathBuf,

    #[command(flatten)]
    input: InputArgs,

    #[command(flatten)]
    selection: SelectionArgs,

    #[arg(long, value_delimiter = ',', default_value = "0,0.1,0.3,0.5")]
    alpha_grid: Vec<f64>,

    #[arg(long, default_value_t = DEFAULT_TARGET_PER_CLASS)]
    target_per_class: usize,

    #[arg(long, default_value_t = 10)]
    splits: usize,

    #[arg(long)]
    out: Option<PathBuf>,

    #[arg(long)]
    table: Option<PathBuf>,

    /// Projection fitted on the first successful split.
    #[arg(long)]
    projection: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Numeric(String),
    #[error("{failed} of {total} splits failed")]
    Partial { failed: usize, total: usize },
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Input(_) => 1,
            CliError::Numeric(_) => 2,
            CliError::Partial { .. } => 3,
        }
    }
}

impl From<ldg_core::Error> for CliError {
    fn from(e: ldg_core::Error) -> Self {
        if e.is_numeric() {
            CliError::Numeric(e.to_string())
        } else {
            CliError::Input(e.to_string())
        }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        match e {
            IoError::Core(c) => c.into(),
            other => CliError::Input(other.to_string()),
        }
    }
}

/// Parses the process arguments, runs the command, and returns the exit code.
pub fn main() -> i32 {
    run(std::env::args_os())
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    init_logging(cli.verbose, cli.quiet);
    let result = match &cli.command {
        Command::Reduce(a) => reduce(a),
        Command::Bench(a) => bench(a),
        Command::Transfer(a) => transfer(a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.code()
        }
    }
}

fn init_logging(verbose: u8, quiet: bool) {
    let level = match (quiet, verbose) {
        (true, _) => log::LevelFilter::Error,
        (false, 0) => log::LevelFilter::Warn,
        (false, 1) => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .target(env_logger::Target::Stderr)
        .try_init();
}

/// Fails early when an output file could not be created after compute.
fn check_outputs(paths: &[Option<&Path>]) -> Result<(), CliError> {
    for path in paths.iter().flatten() {
        let parent = path.parent().filter(|p| !p.as_os_str().is_empty());
        if let Some(dir) = parent {
            if !dir.is_dir() {
                return Err(CliError::Input(format!(
                    "{}: output directory does not exist",
                    path.display()
                )));
            }
        }
    }
    Ok(())
}

fn load(path: &Path, input: &InputArgs) -> Result<LoadedDataset, CliError> {
    let loaded = io::load_dataset(path, input.delimiter, input.label_col)?;
    log::info!(
        "{}: {} examples, {} features, {} classes",
        path.display(),
        loaded.dataset.len(),
        loaded.dataset.dim(),
        loaded.dataset.classes()
    );
    Ok(loaded)
}

fn dataset_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    io::write_file(path, text.as_bytes()).map_err(CliError::from)
}

#[derive(Serialize)]
struct ReduceSummary {
    dataset: String,
    method: String,
    examples: usize,
    features: usize,
    classes: usize,
    dropped_features: Vec<usize>,
    k_gauss: Option<usize>,
    gamma: Option<f64>,
    dim: usize,
    dim_scan: Vec<f64>,
    eigenvalues: Vec<f64>,
    seed: u64,
    k_grid: Vec<usize>,
    gamma_grid: Vec<f64>,
}

fn reduce(a: &ReduceArgs) -> Result<(), CliError> {
    if a.method == Method::TransferLdg {
        return Err(CliError::Input(
            "reduce supports ldg, pca and fda; use `transfer` for transfer-ldg".into(),
        ));
    }
    check_outputs(&[a.out.as_deref(), a.mask_out.as_deref()])?;
    let loaded = load(&a.data, &a.input)?;
    let mut data = loaded.dataset;
    if a.balance {
        data = ldg_core::data::balance_classes(&data, a.selection.seed);
    }
    let (_, mask) = remove_zero_variance(&[data.features()])?;
    let dropped: Vec<usize> = (0..mask.original_dim).filter(|c| !mask.kept.contains(c)).collect();
    if !dropped.is_empty() {
        log::warn!("dropping constant feature columns {dropped:?}");
    }
    let data = mask.apply_dataset(&data)?;
    let data = Normalization::fit(data.features())?.apply_dataset(&data)?;
    let cfg = a.selection.pipeline();
    let model = pipeline::fit(&data, a.method, &cfg)?;
    let p = &model.projection;
    log::info!(
        "selected k = {:?}, gamma = {:?}, dim = {}",
        model.selection.k_gauss,
        model.selection.gamma,
        p.output_dim()
    );
    if let Some(path) = &a.mask_out {
        write_text(path, &io::format_mask(&mask))?;
    }
    match &a.out {
        Some(path) => {
            io::save_projection(path, p)?;
            let summary = ReduceSummary {
                dataset: dataset_name(&a.data),
                method: a.method.to_string(),
                examples: data.len(),
                features: data.dim(),
                classes: data.classes(),
                dropped_features: dropped,
                k_gauss: model.selection.k_gauss,
                gamma: model.selection.gamma,
                dim: p.output_dim(),
                dim_scan: model.selection.dim_scan.clone(),
                eigenvalues: p.eigenvalues().to_vec(),
                seed: a.selection.seed,
                k_grid: cfg.k_grid.clone(),
                gamma_grid: cfg.gamma_grid.clone(),
            };
            println!(
                "{}",
                serde_json::to_string_pretty(&summary).expect("summary serializes")
            );
        }
        None => print!("{}", io::format_projection(p)),
    }
    Ok(())
}

fn emit(report: &ExperimentReport, out: Option<&Path>, table: Option<&Path>) -> Result<(), CliError> {
    match out {
        Some(path) => write_text(path, &report.to_json())?,
        None => println!("{}", report.to_json()),
    }
    if let Some(path) = table {
        write_text(path, &report.to_table())?;
    }
    let failed = report.failed_splits();
    if failed == report.splits.len() && failed > 0 {
        let reason = report.splits[0].error.clone().unwrap_or_default();
        return Err(CliError::Numeric(format!("every split failed; first error: {reason}")));
    }
    if failed > 0 {
        return Err(CliError::Partial {
            failed,
            total: report.splits.len(),
        });
    }
    Ok(())
}

fn bench(a: &BenchArgs) -> Result<(), CliError> {
    if a.method == Method::TransferLdg {
        return Err(CliError::Input("bench supports ldg, pca and fda".into()));
    }
    if !(a.train_fraction > 0.0 && a.train_fraction < 1.0) {
        return Err(CliError::Input(
            "--train-fraction must lie strictly between 0 and 1".into(),
        ));
    }
    if a.splits == 0 {
        return Err(CliError::Input("--splits must be positive".into()));
    }
    check_outputs(&[a.out.as_deref(), a.table.as_deref()])?;
    let loaded = load(&a.data, &a.input)?;
    let (_, mask) = remove_zero_variance(&[loaded.dataset.features()])?;
    let data = mask.apply_dataset(&loaded.dataset)?;
    let cfg = ExperimentConfig {
        pipeline: a.selection.pipeline(),
        splits: a.splits,
        seed: a.selection.seed,
        train_fraction: a.train_fraction,
        balance: a.balance,
    };
    let mut report = run_experiment(&dataset_name(&a.data), &data, a.method, &cfg);
    report.config.dropped_features = (0..mask.original_dim).filter(|c| !mask.kept.contains(c)).collect();
    emit(&report, a.out.as_deref(), a.table.as_deref())
}

fn transfer(a: &TransferArgs) -> Result<(), CliError> {
    if a.method == Method::Ldg {
        return Err(CliError::Input("transfer supports transfer-ldg, pca and fda".into()));
    }
    if a.splits == 0 {
        return Err(CliError::Input("--splits must be positive".into()));
    }
    check_outputs(&[a.out.as_deref(), a.table.as_deref(), a.projection.as_deref()])?;
    let source = load(&a.source, &a.input)?;
    let target = load(&a.target, &a.input)?;
    if source.dataset.dim() != target.dataset.dim() {
        return Err(CliError::Input(format!(
            "source has {} features, target has {}",
            source.dataset.dim(),
            target.dataset.dim()
        )));
    }
    let target_data = io::align_classes(&source, &target)?;
    let mut pipeline = a.selection.pipeline();
    pipeline.alpha_grid = a.alpha_grid.clone();
    let cfg = TransferExperimentConfig {
        pipeline,
        splits: a.splits,
        seed: a.selection.seed,
        target_per_class: a.target_per_class,
    };
    let name = format!("{}->{}", dataset_name(&a.source), dataset_name(&a.target));
    let mut first = None;
    let report = transfer_report(&name, &source.dataset, &target_data, a.method, &cfg, &mut |out| {
        if first.is_none() {
            first = out.model.as_ref().map(|m| m.projection.clone());
        }
    });
    if let (Some(path), Some(p)) = (&a.projection, &first) {
        io::save_projection(path, p)?;
    }
    emit(&report, a.out.as_deref(), a.table.as_deref())
}
