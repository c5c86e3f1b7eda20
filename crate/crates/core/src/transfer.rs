//! LDG for transfer learning.
//!
//! Target points get their class-local Gaussians from the `k` nearest
//! *source* examples of each class; source points use the ordinary
//! source-only scatter. The two terms are blended as
//! `(1 − α)(V_t − γA_t) + α(V_s − γA_s)` and solved like plain LDG.

use alloc::format;
use alloc::vec::Vec;

use crate::data::{FeatureMask, LabeledDataset};
use crate::error::{Error, Result};
use crate::eval::{knn_vote, KnnScratch};
use crate::ldg::{scatter_against, smallest_eigenvectors, ScatterPair};
use crate::linalg::Matrix;
use crate::projection::{Method, Projection};

pub const DEFAULT_ALPHA_GRID: [f64; 4] = [0.0, 0.1, 0.3, 0.5];

#[derive(Debug, Clone, PartialEq)]
pub struct TransferConfig {
    pub alpha: f64,
    pub alpha_grid: Vec<f64>,
    pub gamma: f64,
    pub k: usize,
    pub l: usize,
}

impl TransferConfig {
    pub fn new(gamma: f64, k: usize, l: usize) -> Self {
        TransferConfig {
            alpha: 0.5,
            alpha_grid: DEFAULT_ALPHA_GRID.to_vec(),
            gamma,
            k,
            l,
        }
    }

    /// The grid sorted ascending without duplicates, checked to lie in `[0, 1]`.
    pub fn sorted_grid(&self) -> Result<Vec<f64>> {
        normalized_grid(&self.alpha_grid, "alpha_grid")
    }
}

pub(crate) fn normalized_grid(grid: &[f64], name: &'static str) -> Result<Vec<f64>> {
    if grid.is_empty() {
        return Err(Error::param(name, "grid is empty"));
    }
    if let Some(bad) = grid.iter().find(|v| !(**v >= 0.0 && **v <= 1.0)) {
        return Err(Error::param(name, format!("value {bad} outside [0, 1]")));
    }
    let mut g = grid.to_vec();
    g.sort_by(f64::total_cmp);
    g.dedup();
    Ok(g)
}

/// Target and source training data over one feature space and class universe.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainPair {
    pub target: LabeledDataset,
    pub source: LabeledDataset,
    pub mask: FeatureMask,
}

impl DomainPair {
    pub fn new(target: LabeledDataset, source: LabeledDataset) -> Result<Self> {
        if target.dim() != source.dim() {
            return Err(Error::Dimension {
                context: "target/source feature dimension",
                expected: source.dim(),
                found: target.dim(),
            });
        }
        if target.classes() != source.classes() {
            return Err(Error::Dimension {
                context: "target/source class universe",
                expected: source.classes(),
                found: target.classes(),
            });
        }
        let mask = FeatureMask::identity(source.dim());
        Ok(DomainPair { target, source, mask })
    }

    pub fn with_mask(mut self, mask: FeatureMask) -> Self {
        self.mask = mask;
        self
    }

    pub fn classes(&self) -> usize {
        self.source.classes()
    }

    pub fn dim(&self) -> usize {
        self.source.dim()
    }

    /// Priors from the pooled labelled data.
    pub fn pooled_priors(&self) -> Vec<f64> {
        let mut counts = self.source.class_counts();
        for (c, t) in counts.iter_mut().zip(self.target.class_counts()) {
            *c += t;
        }
        let n = (self.source.len() + self.target.len()) as f64;
        counts.into_iter().map(|c| c as f64 / n).collect()
    }
}

/// `(target terms, source terms)`.
///
/// Target terms use source neighbourhoods with no self-exclusion (the target
/// point is not in the source set); source terms are the standard
/// self-excluding scatter of the source data.
pub fn transfer_scatter(pair: &DomainPair, k: usize, priors: &[f64]) -> Result<(ScatterPair, ScatterPair)> {
    let target = if pair.target.is_empty() {
        ScatterPair::zeros(pair.dim())
    } else {
        scatter_against(&pair.target, &pair.source, false, k, priors)?
    };
    let source = scatter_against(&pair.source, &pair.source, true, k, priors)?;
    Ok((target, source))
}

/// `(1 − α)(V_t − γA_t) + α(V_s − γA_s)`.
pub fn transfer_matrix(target: &ScatterPair, source: &ScatterPair, alpha: f64, gamma: f64) -> Matrix {
    target
        .combined(gamma)
        .scaled(1.0 - alpha)
        .add_scaled(&source.combined(gamma), alpha)
        .expect("scatter shapes agree")
}

pub fn transfer_solve(
    target: &ScatterPair,
    source: &ScatterPair,
    alpha: f64,
    gamma: f64,
    l: usize,
    k: usize,
) -> Result<Projection> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::param("alpha", "must lie in [0, 1]"));
    }
    Ok(
        smallest_eigenvectors(&transfer_matrix(target, source, alpha, gamma), l, Method::TransferLdg)?
            .with_gamma(gamma)
            .with_k(k)
            .with_alpha(alpha),
    )
}

pub fn transfer_fit(pair: &DomainPair, cfg: &TransferConfig, priors: &[f64]) -> Result<Projection> {
    let (t, s) = transfer_scatter(pair, cfg.k, priors)?;
    transfer_solve(&t, &s, cfg.alpha, cfg.gamma, cfg.l, cfg.k)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlphaSelection {
    pub alpha: f64,
    /// `(alpha, leave-one-out accuracy on the target points)` per grid value.
    pub scores: Vec<(f64, f64)>,
}

/// Picks α by leave-one-out k-NN accuracy over the target points at
/// `cfg.l` dimensions; each target point is classified against the mapped
/// source data plus the other target points. Ties go to the largest α.
pub fn select_alpha(pair: &DomainPair, cfg: &TransferConfig, priors: &[f64], knn_k: usize) -> Result<AlphaSelection> {
    if pair.target.is_empty() {
        return Err(Error::param("target", "alpha selection needs target training data"));
    }
    if let Some(j) = pair.target.class_counts().iter().position(|&c| c < 2) {
        log::warn!("target class {} has fewer than two training examples", j + 1);
    }
    let grid = cfg.sorted_grid()?;
    let (t, s) = transfer_scatter(pair, cfg.k, priors)?;
    let pooled = pair.target.concat(&pair.source)?;
    let n_t = pair.target.len();

    let mut best = (f64::NEG_INFINITY, grid[0]);
    let mut scores = Vec::with_capacity(grid.len());
    let mut scratch = KnnScratch::default();
    for &alpha in &grid {
        let b = transfer_solve(&t, &s, alpha, cfg.gamma, cfg.l, cfg.k)?;
        let mapped = b.project(pooled.features())?;
        let correct = (0..n_t)
            .filter(|&i| {
                knn_vote(&mapped, pooled.labels(), mapped.row(i), knn_k, Some(i), &mut scratch)
                    == Some(pair.target.label(i))
            })
            .count();
        let acc = correct as f64 / n_t as f64;
        scores.push((alpha, acc));
        if acc >= best.0 {
            best = (acc, alpha);
        }
    }
    Ok(AlphaSelection { alpha: best.1, scores })
}
