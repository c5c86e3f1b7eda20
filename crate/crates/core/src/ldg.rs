//! Scatter matrices and the closed-form LDG projection.
//!
//! With `Δ_ij = mu_ij − x_i` from the class-local Gaussians:
//!
//! ```text
//! V = Σ_i          Δ_{i,y_i} Δ_{i,y_i}ᵀ / var_{i,y_i}
//! A = Σ_i Σ_j p(j) Δ_ij Δ_ijᵀ / var_ij          (all j, including y_i)
//! ```
//!
//! and the projection minimizing `½ Tr(Bᵀ(V − γA)B)` subject to `BᵀB = I`
//! is the `l` smallest eigenvectors of `V − γA`. Because the solution is a
//! single eigendecomposition, the first `l'` columns of the rank-`l` solution
//! are the rank-`l'` solution.

use alloc::vec;
use alloc::vec::Vec;

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::linalg::{sym_eig, Matrix};
use crate::localgauss::{LocalGaussianModel, NeighborhoodConfig};
use crate::projection::{Method, Projection};

pub const DEFAULT_GAMMA_GRID: [f64; 5] = [0.2, 0.4, 0.6, 0.8, 1.0];
pub const DEFAULT_K_GRID: [usize; 5] = [4, 8, 16, 32, 64];

/// The correct-class scatter `v` and the prior-weighted all-class scatter `a`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatterPair {
    pub v: Matrix,
    pub a: Matrix,
}

impl ScatterPair {
    pub fn zeros(d: usize) -> Self {
        ScatterPair {
            v: Matrix::zeros(d, d),
            a: Matrix::zeros(d, d),
        }
    }

    pub fn dim(&self) -> usize {
        self.v.rows()
    }

    /// `V − γA`.
    pub fn combined(&self, gamma: f64) -> Matrix {
        self.v.add_scaled(&self.a, -gamma).expect("scatter pair shapes agree")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LdgConfig {
    pub k: usize,
    pub gamma: f64,
    pub l: usize,
    pub gamma_grid: Vec<f64>,
    pub k_grid: Vec<usize>,
}

impl LdgConfig {
    pub fn new(k: usize, gamma: f64, l: usize) -> Self {
        LdgConfig {
            k,
            gamma,
            l,
            gamma_grid: DEFAULT_GAMMA_GRID.to_vec(),
            k_grid: DEFAULT_K_GRID.to_vec(),
        }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        if self.l == 0 || self.l > d {
            return Err(Error::Dimension {
                context: "LDG target dimension (1..=d)",
                expected: d,
                found: self.l,
            });
        }
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(Error::param("gamma", "must be finite and non-negative"));
        }
        if self.k < 2 {
            return Err(Error::param("k", "need at least two neighbours"));
        }
        Ok(())
    }
}

const BLOCK: usize = 64;

/// Accumulates `Σ w·δδᵀ` in blocks of rows, upper triangle only.
struct SymAccumulator {
    d: usize,
    upper: Vec<f64>,
    block: Vec<f64>,
    weights: Vec<f64>,
    rows: usize,
    scratch: Vec<f64>,
}

impl SymAccumulator {
    fn new(d: usize) -> Self {
        SymAccumulator {
            d,
            upper: vec![0.0; d * d],
            block: vec![0.0; d * BLOCK],
            weights: vec![0.0; BLOCK],
            rows: 0,
            scratch: vec![0.0; BLOCK],
        }
    }

    fn push(&mut self, weight: f64, delta: &[f64]) {
        for (a, &x) in delta.iter().enumerate() {
            self.block[a * BLOCK + self.rows] = x;
        }
        self.weights[self.rows] = weight;
        self.rows += 1;
        if self.rows == BLOCK {
            self.flush();
        }
    }

    fn flush(&mut self) {
        let r = self.rows;
        if r == 0 {
            return;
        }
        let d = self.d;
        for a in 0..d {
            let col_a = &self.block[a * BLOCK..a * BLOCK + r];
            let mut any = false;
            for ((s, &x), &w) in self.scratch.iter_mut().zip(col_a).zip(&self.weights[..r]) {
                *s = w * x;
                any |= x != 0.0;
            }
            if !any {
                continue;
            }
            let wa = &self.scratch[..r];
            let out = &mut self.upper[a * d..(a + 1) * d];
            for b in a..d {
                let col_b = &self.block[b * BLOCK..b * BLOCK + r];
                out[b] += wa.iter().zip(col_b).map(|(x, y)| x * y).sum::<f64>();
            }
        }
        self.rows = 0;
    }

    fn finish(mut self) -> Matrix {
        self.flush();
        let d = self.d;
        let mut m = Matrix::from_vec(d, d, self.upper).expect("square storage");
        for a in 0..d {
            for b in a + 1..d {
                let v = m.get(a, b);
                m.set(b, a, v);
            }
        }
        m
    }
}

/// Scatter of `queries` against local Gaussians fitted on `reference`.
/// With `exclude_self`, query row `i` is reference row `i` and is left out
/// of its own neighbourhoods.
pub(crate) fn scatter_against(
    queries: &LabeledDataset,
    reference: &LabeledDataset,
    exclude_self: bool,
    k: usize,
    priors: &[f64],
) -> Result<ScatterPair> {
    let m = reference.classes();
    if priors.len() != m || queries.classes() != m {
        return Err(Error::Dimension {
            context: "class priors",
            expected: m,
            found: priors.len(),
        });
    }
    if queries.dim() != reference.dim() {
        return Err(Error::Dimension {
            context: "scatter feature dimension",
            expected: reference.dim(),
            found: queries.dim(),
        });
    }
    let d = reference.dim();
    let mut model = LocalGaussianModel::new(reference, k)?;
    let mut v = SymAccumulator::new(d);
    let mut a = SymAccumulator::new(d);
    for i in 0..queries.len() {
        let yi = queries.label(i);
        let self_index = exclude_self.then_some(i);
        for j in 1..=m {
            let p = priors[j - 1];
            if p <= 0.0 && j != yi {
                continue;
            }
            if model.class_size(j) == 0 {
                return Err(Error::Neighborhood {
                    class: j,
                    available: 0,
                    required: 2,
                });
            }
            let g = model.fit(queries.row(i), j, self_index)?;
            if j == yi {
                v.push(1.0 / g.var, &g.delta);
            }
            if p > 0.0 {
                a.push(p / g.var, &g.delta);
            }
        }
    }
    Ok(ScatterPair {
        v: v.finish(),
        a: a.finish(),
    })
}

/// `V` and `A` for `train`, with neighbourhoods from `train` itself.
pub fn scatter_matrices(train: &LabeledDataset, cfg: &NeighborhoodConfig, priors: &[f64]) -> Result<ScatterPair> {
    scatter_against(train, train, cfg.exclude_self, cfg.k, priors)
}

/// The `l` smallest eigenvectors of `matrix` as a projection.
pub(crate) fn smallest_eigenvectors(matrix: &Matrix, l: usize, method: Method) -> Result<Projection> {
    let d = matrix.rows();
    if l == 0 || l > d {
        return Err(Error::Dimension {
            context: "target dimension (1..=d)",
            expected: d,
            found: l,
        });
    }
    let eig = sym_eig(matrix)?;
    if l < d {
        let (a, b) = (eig.values[l - 1], eig.values[l]);
        if (b - a).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs())) {
            log::warn!(
                "eigenvalues {l} and {} are tied ({a:e}); the selected subspace is defined only up to rotation in the tied block",
                l + 1
            );
        }
    }
    Projection::new(eig.vectors.leading_columns(l), eig.values[..l].to_vec(), method)
}

/// Closed-form solution from precomputed scatter.
pub fn ldg_solve(pair: &ScatterPair, gamma: f64, l: usize, k: usize) -> Result<Projection> {
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(Error::param("gamma", "must be finite and non-negative"));
    }
    Ok(smallest_eigenvectors(&pair.combined(gamma), l, Method::Ldg)?
        .with_gamma(gamma)
        .with_k(k))
}

/// Fits LDG on `train` with the configured `k`, `gamma` and `l`.
pub fn ldg_fit(train: &LabeledDataset, cfg: &LdgConfig, priors: &[f64]) -> Result<Projection> {
    cfg.validate(train.dim())?;
    let nb = NeighborhoodConfig::new(cfg.k, true)?;
    let pair = scatter_matrices(train, &nb, priors)?;
    ldg_solve(&pair, cfg.gamma, cfg.l, cfg.k)
}

/// `½ Tr(Bᵀ(V − γA)B)`.
pub fn ldg_objective(projection: &Projection, pair: &ScatterPair, gamma: f64) -> Result<f64> {
    if projection.input_dim() != pair.dim() {
        return Err(Error::Dimension {
            context: "objective",
            expected: pair.dim(),
            found: projection.input_dim(),
        });
    }
    let m = pair.combined(gamma);
    let b = projection.basis();
    let mb = m.matmul(b)?;
    let mut tr = 0.0;
    for r in 0..b.rows() {
        for c in 0..b.cols() {
            tr += b.get(r, c) * mb.get(r, c);
        }
    }
    Ok(0.5 * tr)
}
