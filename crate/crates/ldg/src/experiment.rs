//! Repeated-split experiments. Every split normalizes on its own training
//! rows, runs the selection protocol, and scores 3-NN accuracy in the
//! reduced space. A failing split is recorded and skipped.

use std::time::Instant;

use ldg_core::data::{balance_classes, remove_zero_variance, sample_per_class, split};
use ldg_core::pipeline::{self, FittedModel, PipelineConfig};
use ldg_core::{LabeledDataset, Method, Normalization, SplitSpec};

use crate::report::{ExperimentReport, RunConfig, SplitRecord};

pub const DEFAULT_TRAIN_FRACTION: f64 = 0.7;
pub const DEFAULT_TARGET_PER_CLASS: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub pipeline: PipelineConfig,
    pub splits: usize,
    pub seed: u64,
    pub train_fraction: f64,
    pub balance: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            pipeline: PipelineConfig::default(),
            splits: 10,
            seed: 0,
            train_fraction: DEFAULT_TRAIN_FRACTION,
            balance: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransferExperimentConfig {
    pub pipeline: PipelineConfig,
    pub splits: usize,
    pub seed: u64,
    pub target_per_class: usize,
}

impl Default for TransferExperimentConfig {
    fn default() -> Self {
        TransferExperimentConfig {
            pipeline: PipelineConfig::default(),
            splits: 10,
            seed: 0,
            target_per_class: DEFAULT_TARGET_PER_CLASS,
        }
    }
}

/// Outcome of one split: the record plus the model when fitting succeeded.
#[derive(Debug, Clone)]
pub struct SplitOutcome {
    pub record: SplitRecord,
    pub model: Option<FittedModel>,
}

fn protocol_seed(seed: u64, split: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(split as u64)
}

fn record_from(
    dataset: &str,
    method: Method,
    split: usize,
    seed: u64,
    result: ldg_core::Result<(FittedModel, f64, f64)>,
) -> SplitOutcome {
    match result {
        Ok((model, accuracy, secs)) => {
            let s = &model.selection;
            let record = SplitRecord {
                dataset: dataset.to_string(),
                method: method.to_string(),
                split,
                seed,
                k_gauss: s.k_gauss,
                gamma: s.gamma,
                alpha: s.alpha,
                dim: Some(model.projection.output_dim()),
                accuracy: Some(accuracy),
                train_seconds: Some(secs),
                error: None,
            };
            SplitOutcome {
                record,
                model: Some(model),
            }
        }
        Err(e) => {
            log::warn!("{dataset} split {split}: {e}");
            SplitOutcome {
                record: SplitRecord::failed(dataset, &method.to_string(), split, seed, e.to_string()),
                model: None,
            }
        }
    }
}

/// One train/test split of a single-domain experiment.
pub fn run_split(
    name: &str,
    dataset: &LabeledDataset,
    method: Method,
    cfg: &ExperimentConfig,
    split_index: usize,
) -> SplitOutcome {
    let result = (|| {
        let spec = SplitSpec::new(cfg.train_fraction, cfg.seed, split_index as u64);
        let (train, test) = split(dataset, &spec)?;
        let norm = Normalization::fit(train.features())?;
        let train = norm.apply_dataset(&train)?;
        let test = norm.apply_dataset(&test)?;
        let mut pcfg = cfg.pipeline.clone();
        pcfg.protocol.seed = protocol_seed(cfg.seed, split_index);
        let start = Instant::now();
        let model = pipeline::fit(&train, method, &pcfg)?;
        let secs = start.elapsed().as_secs_f64();
        let acc = pipeline::score(&model.projection, &train, &test, pcfg.protocol.knn_k)?;
        log::info!(
            "{name} split {split_index}: accuracy {acc:.4}, dim {}, {secs:.2}s",
            model.projection.output_dim()
        );
        Ok((model, acc, secs))
    })();
    record_from(name, method, split_index, cfg.seed, result)
}

pub fn run_experiment(
    name: &str,
    dataset: &LabeledDataset,
    method: Method,
    cfg: &ExperimentConfig,
) -> ExperimentReport {
    let data = if cfg.balance {
        balance_classes(dataset, cfg.seed)
    } else {
        dataset.clone()
    };
    let records = (0..cfg.splits)
        .map(|s| run_split(name, &data, method, cfg, s).record)
        .collect();
    let config = RunConfig {
        command: "bench".into(),
        method: method.to_string(),
        seed: cfg.seed,
        splits: cfg.splits,
        train_fraction: Some(cfg.train_fraction),
        target_per_class: None,
        balance: cfg.balance,
        knn_k: cfg.pipeline.protocol.knn_k,
        cv_folds: cfg.pipeline.protocol.folds,
        k_grid: cfg.pipeline.k_grid.clone(),
        gamma_grid: cfg.pipeline.gamma_grid.clone(),
        alpha_grid: Vec::new(),
        max_dim: Some(cfg.pipeline.max_dim_for(data.classes(), data.dim())),
        fixed_dim: cfg.pipeline.fixed_dim,
        examples: data.len(),
        features: data.dim(),
        classes: data.classes(),
        dropped_features: Vec::new(),
    };
    ExperimentReport::new(name, &method.to_string(), config, records)
}

/// One repetition of a transfer experiment: `target_per_class` labeled
/// target rows per class train alongside the source; the remaining target
/// rows are the test set, classified against source and target-train rows.
pub fn run_transfer_split(
    name: &str,
    source: &LabeledDataset,
    target: &LabeledDataset,
    method: Method,
    cfg: &TransferExperimentConfig,
    split_index: usize,
) -> SplitOutcome {
    let result = (|| {
        let idx = sample_per_class(
            target.labels(),
            target.classes(),
            cfg.target_per_class,
            cfg.seed,
            split_index as u64,
        )?;
        let target_train = target.subset(&idx.train);
        let target_test = target.subset(&idx.test);
        let (_, mask) = remove_zero_variance(&[source.features(), target_train.features()])?;
        let source = mask.apply_dataset(source)?;
        let target_train = mask.apply_dataset(&target_train)?;
        let target_test = mask.apply_dataset(&target_test)?;

        let source = Normalization::fit(source.features())?.apply_dataset(&source)?;
        let tnorm = Normalization::fit(target_train.features())?;
        let target_train = tnorm.apply_dataset(&target_train)?;
        let target_test = tnorm.apply_dataset(&target_test)?;

        let mut pcfg = cfg.pipeline.clone();
        pcfg.protocol.seed = protocol_seed(cfg.seed, split_index);
        let start = Instant::now();
        let model = pipeline::fit_transfer(&source, &target_train, method, &pcfg)?;
        let secs = start.elapsed().as_secs_f64();
        let reference = source.concat(&target_train)?;
        let acc = pipeline::score(&model.projection, &reference, &target_test, pcfg.protocol.knn_k)?;
        log::info!(
            "{name} split {split_index}: accuracy {acc:.4}, alpha {:?}",
            model.selection.alpha
        );
        Ok((model, acc, secs))
    })();
    record_from(name, method, split_index, cfg.seed, result)
}

pub fn run_transfer_experiment(
    name: &str,
    source: &LabeledDataset,
    target: &LabeledDataset,
    method: Method,
    cfg: &TransferExperimentConfig,
) -> ExperimentReport {
    transfer_report(name, source, target, method, cfg, &mut |_| {})
}

/// Like [`run_transfer_experiment`], handing each split's outcome to `sink`.
pub fn transfer_report(
    name: &str,
    source: &LabeledDataset,
    target: &LabeledDataset,
    method: Method,
    cfg: &TransferExperimentConfig,
    sink: &mut dyn FnMut(&SplitOutcome),
) -> ExperimentReport {
    let records = (0..cfg.splits)
        .map(|s| {
            let out = run_transfer_split(name, source, target, method, cfg, s);
            sink(&out);
            out.record
        })
        .collect();
    let config = RunConfig {
        command: "transfer".into(),
        method: method.to_string(),
        seed: cfg.seed,
        splits: cfg.splits,
        train_fraction: None,
        target_per_class: Some(cfg.target_per_class),
        balance: false,
        knn_k: cfg.pipeline.protocol.knn_k,
        cv_folds: cfg.pipeline.protocol.folds,
        k_grid: cfg.pipeline.k_grid.clone(),
        gamma_grid: cfg.pipeline.gamma_grid.clone(),
        alpha_grid: cfg.pipeline.alpha_grid.clone(),
        max_dim: None,
        fixed_dim: cfg.pipeline.fixed_dim,
        examples: source.len() + target.len(),
        features: source.dim(),
        classes: source.classes(),
        dropped_features: Vec::new(),
    };
    ExperimentReport::new(name, &method.to_string(), config, records)
}
