//! PCA and FDA reference reductions.

use alloc::format;
use alloc::vec::Vec;

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::linalg::{default_ridge, gen_sym_eig, orthonormalize_columns, sym_eig, Matrix};
use crate::projection::{Method, Projection};

/// Population covariance of the rows of `x`.
pub fn covariance(x: &Matrix) -> Result<Matrix> {
    let n = x.rows();
    if n < 2 {
        return Err(Error::param("rows", "covariance needs at least two rows"));
    }
    let d = x.cols();
    let mut mean = alloc::vec![0.0; d];
    for r in 0..n {
        for (m, v) in mean.iter_mut().zip(x.row(r)) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut centered = x.clone();
    for r in 0..n {
        for (v, m) in centered.row_mut(r).iter_mut().zip(&mean) {
            *v -= m;
        }
    }
    Ok(centered.tr_matmul(&centered)?.scaled(1.0 / n as f64))
}

/// Top-`l` principal directions. Column `c` carries the variance it captures
/// as its eigenvalue, largest first.
pub fn pca_fit(x: &Matrix, l: usize) -> Result<Projection> {
    let d = x.cols();
    if l == 0 || l > d {
        return Err(Error::Dimension {
            context: "PCA target dimension (1..=d)",
            expected: d,
            found: l,
        });
    }
    let eig = sym_eig(&covariance(x)?)?;
    let order: Vec<usize> = (0..d).rev().collect();
    let values: Vec<f64> = order.iter().map(|&c| eig.values[c]).collect();
    if l < d {
        let (a, b) = (values[l - 1], values[l]);
        if (a - b).abs() <= 1e-9 * (1.0 + a.abs()) {
            log::warn!(
                "PCA components {l} and {} capture equal variance; the subspace is not unique",
                l + 1
            );
        }
    }
    let basis = eig.vectors.select_columns(&order[..l]);
    Projection::new(basis, values[..l].to_vec(), Method::Pca)
}

/// Between-class and within-class covariances.
#[derive(Debug, Clone, PartialEq)]
pub struct FdaScatter {
    pub between: Matrix,
    pub within: Matrix,
}

/// `S_b = Σ_j (n_j/n)(μ_j − μ)(μ_j − μ)ᵀ`, `S_w = (1/n) Σ_i (x_i − μ_{y_i})(x_i − μ_{y_i})ᵀ`.
pub fn fda_scatter(train: &LabeledDataset) -> Result<FdaScatter> {
    let n = train.len();
    if n == 0 {
        return Err(Error::param("train", "no rows"));
    }
    let d = train.dim();
    let m = train.classes();
    let counts = train.class_counts();
    let mut class_means = Matrix::zeros(m, d);
    let mut mean = alloc::vec![0.0; d];
    for i in 0..n {
        let j = train.label(i) - 1;
        for (c, v) in train.row(i).iter().enumerate() {
            class_means.set(j, c, class_means.get(j, c) + v);
            mean[c] += v;
        }
    }
    mean.iter_mut().for_each(|v| *v /= n as f64);
    for j in 0..m {
        if counts[j] > 0 {
            for v in class_means.row_mut(j) {
                *v /= counts[j] as f64;
            }
        }
    }
    let mut within = Matrix::zeros(d, d);
    let mut centered = alloc::vec![0.0; d];
    for i in 0..n {
        let mu = class_means.row(train.label(i) - 1);
        for ((c, x), m) in centered.iter_mut().zip(train.row(i)).zip(mu) {
            *c = x - m;
        }
        for a in 0..d {
            if centered[a] == 0.0 {
                continue;
            }
            for b in 0..d {
                within.set(a, b, within.get(a, b) + centered[a] * centered[b]);
            }
        }
    }
    let within = within.scaled(1.0 / n as f64);
    let mut between = Matrix::zeros(d, d);
    for j in 0..m {
        if counts[j] == 0 {
            continue;
        }
        let w = counts[j] as f64 / n as f64;
        let diff: Vec<f64> = class_means.row(j).iter().zip(&mean).map(|(a, b)| a - b).collect();
        for a in 0..d {
            for b in 0..d {
                between.set(a, b, between.get(a, b) + w * diff[a] * diff[b]);
            }
        }
    }
    Ok(FdaScatter { between, within })
}

/// Top-`l` Fisher directions (`l ≤ m − 1`), re-orthonormalized in order.
/// The within-class matrix always gets the default ridge.
pub fn fda_fit(train: &LabeledDataset, l: usize) -> Result<Projection> {
    let present = train.class_counts().iter().filter(|&&c| c > 0).count();
    let bound = present.saturating_sub(1);
    if l > bound {
        return Err(Error::Capability(format!(
            "FDA yields at most m - 1 = {bound} dimensions, {l} requested"
        )));
    }
    if l == 0 || l > train.dim() {
        return Err(Error::Dimension {
            context: "FDA target dimension",
            expected: train.dim(),
            found: l,
        });
    }
    let s = fda_scatter(train)?;
    let mut ridge = default_ridge(&s.within);
    if !(ridge > 0.0) {
        ridge = f64::EPSILON;
    }
    let eig = gen_sym_eig(&s.between, &s.within, ridge)?;
    let raw = eig.vectors.leading_columns(l);
    let basis = orthonormalize_columns(&raw)?;
    Projection::new(basis, eig.values[..l].to_vec(), Method::Fda)
}

/// Fits PCA or FDA on the row-wise union of `datasets`.
pub fn pooled_fit(method: Method, datasets: &[&LabeledDataset], l: usize) -> Result<Projection> {
    let (first, rest) = datasets
        .split_first()
        .ok_or_else(|| Error::param("datasets", "need at least one dataset"))?;
    let mut pooled = (*first).clone();
    for ds in rest {
        pooled = pooled.concat(ds)?;
    }
    match method {
        Method::Pca => pca_fit(pooled.features(), l),
        Method::Fda => fda_fit(&pooled, l),
        other => Err(Error::param("method", format!("{other} cannot be pooled"))),
    }
}
