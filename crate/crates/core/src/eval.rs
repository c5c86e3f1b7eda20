//! k-NN scoring and hyperparameter selection.
//!
//! Three selections, each on the training split only:
//!
//! * neighbourhood size `k` for the local Gaussians, by stratified k-fold
//!   local-QDA accuracy on the un-reduced features (ties: smaller `k`);
//! * `gamma`, by leave-one-out k-NN error at `min(m + 5, d)` dimensions
//!   (ties: larger `gamma`);
//! * the output dimension, by growing `l` until the leave-one-out k-NN
//!   accuracy strictly drops.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::data::{stratified_folds, LabeledDataset};
use crate::error::{Error, Result};
use crate::ldg::{ldg_solve, ScatterPair};
use crate::linalg::{squared_distance, Matrix};
use crate::localgauss::LocalGaussianModel;
use crate::projection::Projection;
use crate::transfer::normalized_grid;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CvProtocol {
    pub knn_k: usize,
    pub folds: usize,
    pub seed: u64,
}

impl Default for CvProtocol {
    fn default() -> Self {
        CvProtocol {
            knn_k: 3,
            folds: 5,
            seed: 0,
        }
    }
}

impl CvProtocol {
    pub fn validate(&self) -> Result<()> {
        if self.knn_k == 0 {
            return Err(Error::param("knn_k", "must be positive"));
        }
        if self.folds < 2 {
            return Err(Error::param("folds", "need at least two folds"));
        }
        if self.knn_k.is_multiple_of(2) {
            log::warn!("even knn_k = {} makes vote ties more likely", self.knn_k);
        }
        Ok(())
    }
}

/// Dimension at which `gamma` and `alpha` are chosen: number of classes plus five, capped at `d`.
pub fn selection_dim(classes: usize, d: usize) -> usize {
    (classes + 5).min(d)
}

#[derive(Debug, Default)]
pub struct KnnScratch {
    dist: Vec<(f64, usize)>,
    votes: Vec<usize>,
}

fn by_distance(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// Majority vote of the `knn_k` rows of `points` nearest to `x`, skipping
/// row `skip`. Distance ties go to the lower row, vote ties to the smaller
/// class id. `None` when there are no usable rows.
pub(crate) fn knn_vote(
    points: &Matrix,
    labels: &[usize],
    x: &[f64],
    knn_k: usize,
    skip: Option<usize>,
    scratch: &mut KnnScratch,
) -> Option<usize> {
    scratch.dist.clear();
    scratch.dist.extend(
        (0..points.rows())
            .filter(|&i| Some(i) != skip)
            .map(|i| (squared_distance(points.row(i), x), i)),
    );
    if scratch.dist.is_empty() {
        return None;
    }
    let k = knn_k.min(scratch.dist.len());
    if k < scratch.dist.len() {
        scratch.dist.select_nth_unstable_by(k - 1, by_distance);
    }
    let max_label = labels.iter().copied().max().unwrap_or(0);
    scratch.votes.clear();
    scratch.votes.resize(max_label + 1, 0);
    for &(_, i) in &scratch.dist[..k] {
        scratch.votes[labels[i]] += 1;
    }
    let mut best = 0;
    for (c, &v) in scratch.votes.iter().enumerate() {
        if v > scratch.votes[best] {
            best = c;
        }
    }
    Some(best)
}

/// k-NN prediction for `x` against a labelled reference set.
pub fn knn_classify(reference: &Matrix, labels: &[usize], x: &[f64], knn_k: usize) -> Result<usize> {
    check_reference(reference, labels, x.len())?;
    if knn_k == 0 {
        return Err(Error::param("knn_k", "must be positive"));
    }
    let mut scratch = KnnScratch::default();
    knn_vote(reference, labels, x, knn_k, None, &mut scratch)
        .ok_or_else(|| Error::param("reference", "reference set is empty"))
}

fn check_reference(reference: &Matrix, labels: &[usize], dim: usize) -> Result<()> {
    if reference.rows() == 0 {
        return Err(Error::param("reference", "reference set is empty"));
    }
    if labels.len() != reference.rows() {
        return Err(Error::Dimension {
            context: "reference labels",
            expected: reference.rows(),
            found: labels.len(),
        });
    }
    if dim != reference.cols() {
        return Err(Error::Dimension {
            context: "query dimension",
            expected: reference.cols(),
            found: dim,
        });
    }
    Ok(())
}

/// Number of rows misclassified when each is scored against all the others.
pub fn loo_errors(points: &Matrix, labels: &[usize], knn_k: usize) -> Result<usize> {
    if points.rows() <= knn_k {
        return Err(Error::param(
            "points",
            format!("leave-one-out needs more than {knn_k} rows, got {}", points.rows()),
        ));
    }
    check_reference(points, labels, points.cols())?;
    let mut scratch = KnnScratch::default();
    Ok((0..points.rows())
        .filter(|&i| knn_vote(points, labels, points.row(i), knn_k, Some(i), &mut scratch) != Some(labels[i]))
        .count())
}

/// Leave-one-out k-NN accuracy.
pub fn loo_accuracy(points: &Matrix, labels: &[usize], knn_k: usize) -> Result<f64> {
    let errors = loo_errors(points, labels, knn_k)?;
    Ok(1.0 - errors as f64 / points.rows() as f64)
}

/// Accuracy of k-NN on `test` rows against a `reference` set.
pub fn knn_accuracy(
    reference: &Matrix,
    reference_labels: &[usize],
    test: &Matrix,
    test_labels: &[usize],
    knn_k: usize,
) -> Result<f64> {
    check_reference(reference, reference_labels, test.cols())?;
    if test.rows() == 0 {
        return Err(Error::param("test", "no test rows"));
    }
    let mut scratch = KnnScratch::default();
    let correct = (0..test.rows())
        .filter(|&r| {
            knn_vote(reference, reference_labels, test.row(r), knn_k, None, &mut scratch) == Some(test_labels[r])
        })
        .count();
    Ok(correct as f64 / test.rows() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct KSelection {
    pub k: usize,
    /// `(k, mean fold accuracy)` for every feasible grid value.
    pub scores: Vec<(usize, f64)>,
}

/// Chooses the local-Gaussian neighbourhood size by stratified k-fold local
/// QDA accuracy on `train`. A grid value is feasible when every class keeps
/// at least that many members in every training fold.
pub fn select_k_gauss(train: &LabeledDataset, k_grid: &[usize], protocol: &CvProtocol) -> Result<KSelection> {
    protocol.validate()?;
    let mut grid: Vec<usize> = k_grid.iter().copied().filter(|&k| k >= 2).collect();
    grid.sort_unstable();
    grid.dedup();
    if grid.is_empty() {
        return Err(Error::Selection("k grid has no value >= 2".into()));
    }
    let m = train.classes();
    let folds = stratified_folds(train.labels(), m, protocol.folds, protocol.seed)?;
    let present: Vec<bool> = train.class_counts().iter().map(|&c| c > 0).collect();

    let mut fold_sets = Vec::with_capacity(protocol.folds);
    let mut min_count = usize::MAX;
    for f in 0..protocol.folds {
        let fit_idx: Vec<usize> = (0..train.len()).filter(|&i| folds[i] != f).collect();
        let test_idx: Vec<usize> = (0..train.len()).filter(|&i| folds[i] == f).collect();
        let fit = train.subset(&fit_idx);
        for (j, &c) in fit.class_counts().iter().enumerate() {
            if present[j] {
                min_count = min_count.min(c);
            }
        }
        fold_sets.push((fit, test_idx));
    }
    let feasible: Vec<usize> = grid.iter().copied().filter(|&k| k <= min_count).collect();
    if feasible.is_empty() {
        return Err(Error::Selection(format!(
            "no neighbourhood size in {grid:?} fits the smallest class fold ({min_count} examples)"
        )));
    }
    let k_max = *feasible.last().expect("non-empty");

    let priors = crate::data::class_priors(train);
    let d = train.dim() as f64;
    let mut correct = vec![vec![0usize; protocol.folds]; feasible.len()];
    let mut sizes = vec![0usize; protocol.folds];
    for (f, (fit, test_idx)) in fold_sets.iter().enumerate() {
        let mut model = LocalGaussianModel::new(fit, k_max)?;
        sizes[f] = test_idx.len();
        let mut scores = vec![f64::NEG_INFINITY; m];
        for &t in test_idx {
            let x = train.row(t);
            // Per class, neighbours sorted once; every k reuses the prefix.
            let ordered: Vec<Option<Vec<usize>>> = (1..=m)
                .map(|j| present[j - 1].then(|| model.sorted_class_neighbors(x, j, None)))
                .collect();
            for (ki, &k) in feasible.iter().enumerate() {
                for j in 1..=m {
                    scores[j - 1] = match &ordered[j - 1] {
                        Some(idx) if priors[j - 1] > 0.0 => {
                            let g = model.gaussian(&idx[..k], x);
                            let r2: f64 = g.delta.iter().map(|v| v * v).sum();
                            libm::log(priors[j - 1]) - 0.5 * d * libm::log(g.var) - r2 / (2.0 * g.var)
                        }
                        _ => f64::NEG_INFINITY,
                    };
                }
                let mut best = 0;
                for j in 1..m {
                    if scores[j] > scores[best] {
                        best = j;
                    }
                }
                if best + 1 == train.label(t) {
                    correct[ki][f] += 1;
                }
            }
        }
    }

    let mut scores = Vec::with_capacity(feasible.len());
    let mut best = (f64::NEG_INFINITY, feasible[0]);
    for (ki, &k) in feasible.iter().enumerate() {
        let used: Vec<usize> = (0..protocol.folds).filter(|&f| sizes[f] > 0).collect();
        let mean = used
            .iter()
            .map(|&f| correct[ki][f] as f64 / sizes[f] as f64)
            .sum::<f64>()
            / used.len().max(1) as f64;
        scores.push((k, mean));
        if mean > best.0 {
            best = (mean, k);
        }
    }
    Ok(KSelection { k: best.1, scores })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GammaSelection {
    pub gamma: f64,
    pub dim: usize,
    /// `(gamma, leave-one-out error count)` per grid value.
    pub errors: Vec<(f64, usize)>,
}

/// Chooses `gamma` by leave-one-out k-NN error of the mapped training data
/// at [`selection_dim`] dimensions. Ties go to the largest `gamma`.
pub fn select_gamma(
    train: &LabeledDataset,
    pair: &ScatterPair,
    gamma_grid: &[f64],
    k: usize,
    protocol: &CvProtocol,
) -> Result<GammaSelection> {
    let grid = normalized_grid(gamma_grid, "gamma_grid")?;
    let dim = selection_dim(train.classes(), train.dim());
    let mut errors = Vec::with_capacity(grid.len());
    let mut best = (usize::MAX, grid[0]);
    for &gamma in &grid {
        let b = ldg_solve(pair, gamma, dim, k)?;
        let mapped = b.project(train.features())?;
        let e = loo_errors(&mapped, train.labels(), protocol.knn_k)?;
        errors.push((gamma, e));
        if e <= best.0 {
            best = (e, gamma);
        }
    }
    Ok(GammaSelection {
        gamma: best.1,
        dim,
        errors,
    })
}

/// Greedy dimension rule on a sequence of accuracies for `l = 1, 2, ...`:
/// accept `l = 1`, keep growing while accuracy does not strictly drop.
pub fn dimension_from_accuracies(accuracies: &[f64]) -> usize {
    if accuracies.is_empty() {
        return 1;
    }
    let mut l = 1;
    while l < accuracies.len() && accuracies[l] >= accuracies[l - 1] {
        l += 1;
    }
    l
}

#[derive(Debug, Clone, PartialEq)]
pub struct DimSelection {
    pub dim: usize,
    /// Leave-one-out accuracies for `l = 1..` up to where the scan stopped.
    pub accuracies: Vec<f64>,
}

/// Scans `l = 1, 2, ...` over truncations of `projection`, stopping at the
/// first strict drop in leave-one-out k-NN accuracy on `train`.
pub fn select_dimension(
    train: &LabeledDataset,
    projection: &Projection,
    protocol: &CvProtocol,
) -> Result<DimSelection> {
    let mapped = projection.project(train.features())?;
    let max_l = projection.output_dim();
    let mut accuracies = Vec::new();
    for l in 1..=max_l {
        let cols: Vec<usize> = (0..l).collect();
        let acc = loo_accuracy(&mapped.select_columns(&cols), train.labels(), protocol.knn_k)?;
        if let Some(&prev) = accuracies.last() {
            if acc < prev {
                accuracies.push(acc);
                break;
            }
        }
        accuracies.push(acc);
    }
    Ok(DimSelection {
        dim: dimension_from_accuracies(&accuracies),
        accuracies,
    })
}
