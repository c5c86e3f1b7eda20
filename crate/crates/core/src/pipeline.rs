//! One split's worth of fitting: hyperparameter selection followed by the
//! final projection. Inputs are expected to be normalized already; timing
//! and IO belong to the caller.

use alloc::format;
use alloc::vec::Vec;

use crate::baselines::{fda_fit, pca_fit, pooled_fit};
use crate::data::{class_priors, LabeledDataset};
use crate::error::{Error, Result};
use crate::eval::{knn_accuracy, select_dimension, select_gamma, select_k_gauss, selection_dim, CvProtocol};
use crate::ldg::{ldg_solve, scatter_matrices, DEFAULT_GAMMA_GRID, DEFAULT_K_GRID};
use crate::localgauss::NeighborhoodConfig;
use crate::projection::{Method, Projection};
use crate::transfer::{select_alpha, transfer_scatter, transfer_solve, DomainPair, TransferConfig, DEFAULT_ALPHA_GRID};

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub protocol: CvProtocol,
    pub k_grid: Vec<usize>,
    pub gamma_grid: Vec<f64>,
    pub alpha_grid: Vec<f64>,
    /// Largest dimension considered by the dimension scan; default `min(d, m + 15)`.
    pub max_dim: Option<usize>,
    /// Skip the dimension scan and use this many columns.
    pub fixed_dim: Option<usize>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            protocol: CvProtocol::default(),
            k_grid: DEFAULT_K_GRID.to_vec(),
            gamma_grid: DEFAULT_GAMMA_GRID.to_vec(),
            alpha_grid: DEFAULT_ALPHA_GRID.to_vec(),
            max_dim: None,
            fixed_dim: None,
        }
    }
}

impl PipelineConfig {
    pub fn max_dim_for(&self, classes: usize, d: usize) -> usize {
        self.max_dim.unwrap_or(classes + 15).min(d).max(1)
    }
}

/// Hyperparameters chosen for one fit.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Selection {
    pub k_gauss: Option<usize>,
    pub gamma: Option<f64>,
    pub alpha: Option<f64>,
    pub dim: usize,
    /// Leave-one-out accuracies seen by the dimension scan.
    pub dim_scan: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel {
    pub projection: Projection,
    pub selection: Selection,
}

fn check_fixed(fixed: usize, d: usize) -> Result<()> {
    if fixed == 0 || fixed > d {
        return Err(Error::Capability(format!(
            "requested dimension {fixed} outside 1..={d}"
        )));
    }
    Ok(())
}

/// Runs the full selection protocol for `method` on a normalized training set.
pub fn fit(train: &LabeledDataset, method: Method, cfg: &PipelineConfig) -> Result<FittedModel> {
    let d = train.dim();
    let m = train.classes();
    let mut selection = Selection::default();
    let full = match method {
        Method::Ldg => {
            let k = select_k_gauss(train, &cfg.k_grid, &cfg.protocol)?.k;
            let priors = class_priors(train);
            let pair = scatter_matrices(train, &NeighborhoodConfig::new(k, true)?, &priors)?;
            let gamma = select_gamma(train, &pair, &cfg.gamma_grid, k, &cfg.protocol)?.gamma;
            selection.k_gauss = Some(k);
            selection.gamma = Some(gamma);
            let l = match cfg.fixed_dim {
                Some(f) => {
                    check_fixed(f, d)?;
                    f
                }
                None => cfg.max_dim_for(m, d),
            };
            ldg_solve(&pair, gamma, l, k)?
        }
        Method::Pca => {
            let l = match cfg.fixed_dim {
                Some(f) => {
                    check_fixed(f, d)?;
                    f
                }
                None => cfg.max_dim_for(m, d),
            };
            pca_fit(train.features(), l)?
        }
        Method::Fda => {
            let bound = m.saturating_sub(1);
            let l = match cfg.fixed_dim {
                Some(f) => f,
                None => cfg.max_dim_for(m, d).min(bound).max(1),
            };
            fda_fit(train, l)?
        }
        Method::TransferLdg => {
            return Err(Error::param(
                "method",
                "transfer-ldg needs separate source and target data",
            ))
        }
    };
    finish(train, full, selection, cfg)
}

fn finish(
    scan_data: &LabeledDataset,
    full: Projection,
    mut selection: Selection,
    cfg: &PipelineConfig,
) -> Result<FittedModel> {
    if cfg.fixed_dim.is_some() {
        selection.dim = full.output_dim();
        return Ok(FittedModel {
            projection: full,
            selection,
        });
    }
    let scan = select_dimension(scan_data, &full, &cfg.protocol)?;
    selection.dim = scan.dim;
    selection.dim_scan = scan.accuracies;
    Ok(FittedModel {
        projection: full.truncate(scan.dim)?,
        selection,
    })
}

/// Transfer fit on normalized, feature-aligned source and target training data.
///
/// `TransferLdg` picks `k` and `gamma` on the source data, then `alpha` on
/// the target. `Pca` and `Fda` pool both domains. The output dimension is
/// `fixed_dim` when given, otherwise `min(m + 5, d)`.
pub fn fit_transfer(
    source: &LabeledDataset,
    target_train: &LabeledDataset,
    method: Method,
    cfg: &PipelineConfig,
) -> Result<FittedModel> {
    let pair = DomainPair::new(target_train.clone(), source.clone())?;
    let d = pair.dim();
    let m = pair.classes();
    if let Some(j) = source.class_counts().iter().position(|&c| c < 2) {
        return Err(Error::Capability(format!(
            "class {} has fewer than two source examples",
            j + 1
        )));
    }
    let l = match cfg.fixed_dim {
        Some(f) => {
            check_fixed(f, d)?;
            f
        }
        None => selection_dim(m, d),
    };
    let mut selection = Selection {
        dim: l,
        ..Selection::default()
    };
    let projection = match method {
        Method::TransferLdg => {
            let k = select_k_gauss(source, &cfg.k_grid, &cfg.protocol)?.k;
            let source_priors = class_priors(source);
            let source_pair = scatter_matrices(source, &NeighborhoodConfig::new(k, true)?, &source_priors)?;
            let gamma = select_gamma(source, &source_pair, &cfg.gamma_grid, k, &cfg.protocol)?.gamma;
            let priors = pair.pooled_priors();
            let mut tcfg = TransferConfig::new(gamma, k, selection_dim(m, d));
            tcfg.alpha_grid = cfg.alpha_grid.clone();
            let alpha = select_alpha(&pair, &tcfg, &priors, cfg.protocol.knn_k)?.alpha;
            let (t, s) = transfer_scatter(&pair, k, &priors)?;
            selection.k_gauss = Some(k);
            selection.gamma = Some(gamma);
            selection.alpha = Some(alpha);
            transfer_solve(&t, &s, alpha, gamma, l, k)?
        }
        Method::Pca => pooled_fit(Method::Pca, &[source, target_train], l)?,
        Method::Fda => {
            let l = l.min(m.saturating_sub(1)).max(1);
            selection.dim = l;
            pooled_fit(Method::Fda, &[source, target_train], l)?
        }
        Method::Ldg => {
            return Err(Error::param("method", "use transfer-ldg, pca or fda for transfer runs"));
        }
    };
    Ok(FittedModel { projection, selection })
}

/// k-NN accuracy of `test` against `reference`, both mapped by `projection`.
pub fn score(projection: &Projection, reference: &LabeledDataset, test: &LabeledDataset, knn_k: usize) -> Result<f64> {
    let r = projection.project(reference.features())?;
    let t = projection.project(test.features())?;
    knn_accuracy(&r, reference.labels(), &t, test.labels(), knn_k)
}
