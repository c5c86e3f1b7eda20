//! Class-local Gaussians.
//!
//! For a point `x` and a class `j` the model takes the `k` nearest class-`j`
//! points (Euclidean, ties to the lower row index), fits their mean `mu` and a
//! single variance `var` (scaled-identity covariance), and records
//! `delta = mu - x`. The same fits drive the local QDA classifier, the exact
//! MAP leave-one-out error and the smooth log-ratio objective that LDG
//! approximates.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::linalg::{squared_distance, Matrix};
use crate::projection::Projection;

pub const VAR_FLOOR: f64 = 1e-12;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NeighborhoodConfig {
    pub k: usize,
    /// Leave the anchor point out of its own neighbourhood.
    pub exclude_self: bool,
}

impl NeighborhoodConfig {
    pub fn new(k: usize, exclude_self: bool) -> Result<Self> {
        if k < 2 {
            return Err(Error::param("k", "need at least two neighbours"));
        }
        Ok(NeighborhoodConfig { k, exclude_self })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalGaussian {
    pub mu: Vec<f64>,
    pub var: f64,
    pub delta: Vec<f64>,
}

impl LocalGaussian {
    /// `log N(x; mu, var·I_d)` where `delta = mu - x`.
    pub fn log_likelihood(&self) -> f64 {
        let d = self.mu.len() as f64;
        let r2: f64 = self.delta.iter().map(|v| v * v).sum();
        -0.5 * d * (LN_2PI + libm::log(self.var)) - r2 / (2.0 * self.var)
    }
}

fn by_distance(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// Indices of the `k` class-`class` rows of `reference` nearest to `query`.
///
/// Strict: fails when fewer than `cfg.k` candidates remain after the optional
/// self-exclusion. [`LocalGaussianModel`] applies the shrink rule instead.
pub fn class_neighbors(
    reference: &LabeledDataset,
    query: &[f64],
    class: usize,
    cfg: &NeighborhoodConfig,
    self_index: Option<usize>,
) -> Result<Vec<usize>> {
    let skip = if cfg.exclude_self { self_index } else { None };
    let candidates: Vec<usize> = (0..reference.len())
        .filter(|&i| reference.label(i) == class && Some(i) != skip)
        .collect();
    if candidates.len() < cfg.k {
        return Err(Error::Neighborhood {
            class,
            available: candidates.len(),
            required: cfg.k,
        });
    }
    let mut scored = Vec::with_capacity(candidates.len());
    nearest(reference.features(), query, &candidates, None, cfg.k, &mut scored);
    Ok(scored.into_iter().map(|(_, i)| i).collect())
}

/// Leaves the `k` nearest `(distance², index)` pairs in `out`, sorted.
fn nearest(
    points: &Matrix,
    query: &[f64],
    candidates: &[usize],
    skip: Option<usize>,
    k: usize,
    out: &mut Vec<(f64, usize)>,
) {
    out.clear();
    out.extend(
        candidates
            .iter()
            .filter(|&&i| Some(i) != skip)
            .map(|&i| (squared_distance(points.row(i), query), i)),
    );
    if k < out.len() {
        out.select_nth_unstable_by(k - 1, by_distance);
        out.truncate(k);
    }
    out.sort_unstable_by(by_distance);
}

/// Maximum-likelihood scaled-identity Gaussian of the rows of `points`,
/// with `delta = mu - anchor`.
pub fn fit_local_gaussian(points: &Matrix, anchor: &[f64]) -> Result<LocalGaussian> {
    if points.rows() < 2 {
        return Err(Error::param("points", "need at least two points"));
    }
    if anchor.len() != points.cols() {
        return Err(Error::Dimension {
            context: "local gaussian anchor",
            expected: points.cols(),
            found: anchor.len(),
        });
    }
    let idx: Vec<usize> = (0..points.rows()).collect();
    Ok(gaussian_from_rows(points, &idx, anchor))
}

fn gaussian_from_rows(points: &Matrix, idx: &[usize], anchor: &[f64]) -> LocalGaussian {
    let d = points.cols();
    let k = idx.len() as f64;
    let mut mu = vec![0.0; d];
    for &i in idx {
        for (m, v) in mu.iter_mut().zip(points.row(i)) {
            *m += v;
        }
    }
    for m in mu.iter_mut() {
        *m /= k;
    }
    let ss: f64 = idx.iter().map(|&i| squared_distance(points.row(i), &mu)).sum();
    let var = (ss / (k * d as f64)).max(VAR_FLOOR);
    let delta = mu.iter().zip(anchor).map(|(m, a)| m - a).collect();
    LocalGaussian { mu, var, delta }
}

/// Fits local Gaussians against a fixed reference set.
///
/// When a class has fewer than `k` usable members (but at least two) its
/// neighbourhood shrinks to what is available and a warning is logged once.
pub struct LocalGaussianModel<'a> {
    reference: &'a LabeledDataset,
    members: Vec<Vec<usize>>,
    k: usize,
    scratch: Vec<(f64, usize)>,
    warned: bool,
}

impl<'a> LocalGaussianModel<'a> {
    pub fn new(reference: &'a LabeledDataset, k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::param("k", "need at least two neighbours"));
        }
        Ok(LocalGaussianModel {
            reference,
            members: reference.class_members(),
            k,
            scratch: Vec::new(),
            warned: false,
        })
    }

    pub fn reference(&self) -> &LabeledDataset {
        self.reference
    }

    /// Members of `class` in the reference set.
    pub fn class_size(&self, class: usize) -> usize {
        self.members[class - 1].len()
    }

    /// Local Gaussian of `class` around `query`; `self_index` (a reference
    /// row) is left out of the neighbourhood when given.
    pub fn fit(&mut self, query: &[f64], class: usize, self_index: Option<usize>) -> Result<LocalGaussian> {
        let members = &self.members[class - 1];
        let excluded = self_index.map_or(0, |s| usize::from(self.reference.label(s) == class));
        let available = members.len() - excluded;
        let k = if available >= self.k {
            self.k
        } else if available >= 2 {
            if !self.warned {
                log::warn!(
                    "class {class} has only {available} usable neighbours; shrinking k from {} to {available}",
                    self.k
                );
                self.warned = true;
            }
            available
        } else {
            return Err(Error::Neighborhood {
                class,
                available,
                required: 2,
            });
        };
        nearest(
            self.reference.features(),
            query,
            members,
            self_index,
            k,
            &mut self.scratch,
        );
        let idx: Vec<usize> = self.scratch.iter().map(|&(_, i)| i).collect();
        Ok(gaussian_from_rows(self.reference.features(), &idx, query))
    }

    /// Every usable member of `class`, nearest first.
    pub fn sorted_class_neighbors(&mut self, query: &[f64], class: usize, self_index: Option<usize>) -> Vec<usize> {
        let members = &self.members[class - 1];
        nearest(
            self.reference.features(),
            query,
            members,
            self_index,
            members.len(),
            &mut self.scratch,
        );
        self.scratch.iter().map(|&(_, i)| i).collect()
    }

    /// Gaussian of the given reference rows, anchored at `anchor`.
    pub fn gaussian(&self, rows: &[usize], anchor: &[f64]) -> LocalGaussian {
        gaussian_from_rows(self.reference.features(), rows, anchor)
    }

    /// One Gaussian per class `1..=m`; `None` for classes absent from the
    /// reference set.
    pub fn fit_all(&mut self, query: &[f64], self_index: Option<usize>) -> Result<Vec<Option<LocalGaussian>>> {
        (1..=self.members.len())
            .map(|j| {
                if self.members[j - 1].is_empty() {
                    Ok(None)
                } else {
                    self.fit(query, j, self_index).map(Some)
                }
            })
            .collect()
    }
}

fn check_priors(priors: &[f64], classes: usize) -> Result<()> {
    if priors.len() != classes {
        return Err(Error::Dimension {
            context: "class priors",
            expected: classes,
            found: priors.len(),
        });
    }
    Ok(())
}

fn argmax_smallest(scores: &[f64]) -> usize {
    let mut best = 0;
    for (j, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = j;
        }
    }
    best + 1
}

/// Local QDA: scores `log p(j) − (d/2)·log var − ‖x − mu‖²/(2·var)` for each
/// class and returns the best, ties to the smallest class id.
pub fn local_qda_classify(
    train: &LabeledDataset,
    x: &[f64],
    cfg: &NeighborhoodConfig,
    priors: &[f64],
) -> Result<usize> {
    check_priors(priors, train.classes())?;
    let mut model = LocalGaussianModel::new(train, cfg.k)?;
    qda_with_model(&mut model, x, priors)
}

/// Local QDA predictions for every row of `queries`.
pub fn local_qda_predict(train: &LabeledDataset, queries: &Matrix, k: usize, priors: &[f64]) -> Result<Vec<usize>> {
    check_priors(priors, train.classes())?;
    let mut model = LocalGaussianModel::new(train, k)?;
    (0..queries.rows())
        .map(|r| qda_with_model(&mut model, queries.row(r), priors))
        .collect()
}

fn qda_with_model(model: &mut LocalGaussianModel<'_>, x: &[f64], priors: &[f64]) -> Result<usize> {
    let d = x.len() as f64;
    let gaussians = model.fit_all(x, None)?;
    let scores: Vec<f64> = gaussians
        .iter()
        .zip(priors)
        .map(|(g, &p)| match g {
            Some(g) if p > 0.0 => {
                let r2: f64 = g.delta.iter().map(|v| v * v).sum();
                libm::log(p) - 0.5 * d * libm::log(g.var) - r2 / (2.0 * g.var)
            }
            _ => f64::NEG_INFINITY,
        })
        .collect();
    Ok(argmax_smallest(&scores))
}

/// Per-point class scores `log p(j) + log N(Bᵀx_i; Bᵀmu_ij, var_ij·I_l)` with
/// Gaussians fitted in the original space.
fn mapped_scores<F>(
    projection: &Projection,
    train: &LabeledDataset,
    cfg: &NeighborhoodConfig,
    priors: &[f64],
    mut visit: F,
) -> Result<()>
where
    F: FnMut(usize, &[f64]),
{
    check_priors(priors, train.classes())?;
    if projection.input_dim() != train.dim() {
        return Err(Error::Dimension {
            context: "projection input",
            expected: train.dim(),
            found: projection.input_dim(),
        });
    }
    let l = projection.output_dim() as f64;
    let mut model = LocalGaussianModel::new(train, cfg.k)?;
    let mut scores = vec![0.0; train.classes()];
    for i in 0..train.len() {
        let self_index = cfg.exclude_self.then_some(i);
        let gaussians = model.fit_all(train.row(i), self_index)?;
        for ((s, g), &p) in scores.iter_mut().zip(&gaussians).zip(priors) {
            *s = match g {
                Some(g) if p > 0.0 => {
                    let mapped = projection.project_point(&g.delta)?;
                    let r2: f64 = mapped.iter().map(|v| v * v).sum();
                    libm::log(p) - 0.5 * l * (LN_2PI + libm::log(g.var)) - r2 / (2.0 * g.var)
                }
                _ => f64::NEG_INFINITY,
            };
        }
        visit(i, &scores);
    }
    Ok(())
}

/// Exact leave-one-out MAP error of the mapped local-Gaussian classifier:
/// the number of points whose correct-class score is strictly beaten.
pub fn map_loo_error(
    projection: &Projection,
    train: &LabeledDataset,
    cfg: &NeighborhoodConfig,
    priors: &[f64],
) -> Result<usize> {
    let mut errors = 0;
    mapped_scores(projection, train, cfg, priors, |i, scores| {
        let own = scores[train.label(i) - 1];
        if scores.iter().any(|&s| s > own) {
            errors += 1;
        }
    })?;
    Ok(errors)
}

/// Smooth objective `Σ_i log(Σ_j p(Bᵀx_i|j)p(j) / p(Bᵀx_i|y_i)p(y_i))`,
/// evaluated with log-sum-exp.
pub fn objective_f(
    projection: &Projection,
    train: &LabeledDataset,
    cfg: &NeighborhoodConfig,
    priors: &[f64],
) -> Result<f64> {
    let mut total = 0.0;
    mapped_scores(projection, train, cfg, priors, |i, scores| {
        let own = scores[train.label(i) - 1];
        let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = scores.iter().map(|&s| libm::exp(s - max)).sum();
        let term = max + libm::log(sum) - own;
        total += term.max(0.0);
    })?;
    Ok(total)
}
