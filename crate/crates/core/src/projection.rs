use alloc::format;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};

/// Tolerance on `‖BᵀB − I‖` (max-abs) every projection must meet.
pub const ORTHONORMALITY_TOLERANCE: f64 = 1e-8;

/// Which reduction produced a [`Projection`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Ldg,
    TransferLdg,
    Pca,
    Fda,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Ldg => "ldg",
            Method::TransferLdg => "transfer-ldg",
            Method::Pca => "pca",
            Method::Fda => "fda",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ldg" => Ok(Method::Ldg),
            "transfer-ldg" | "transfer" => Ok(Method::TransferLdg),
            "pca" => Ok(Method::Pca),
            "fda" => Ok(Method::Fda),
            other => Err(Error::param("method", format!("unknown method `{other}`"))),
        }
    }
}

/// A `d × l` matrix with orthonormal columns, mapping `x` to `Bᵀx`.
///
/// Columns are ordered by the solver's preference: ascending eigenvalue of
/// `V − γA` for LDG, descending variance for PCA, descending Fisher ratio
/// for FDA. `eigenvalues[c]` pairs with column `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    basis: Matrix,
    eigenvalues: Vec<f64>,
    method: Method,
    gamma: f64,
    k: usize,
    alpha: Option<f64>,
}

impl Projection {
    pub fn new(basis: Matrix, eigenvalues: Vec<f64>, method: Method) -> Result<Self> {
        if eigenvalues.len() != basis.cols() {
            return Err(Error::Dimension {
                context: "projection eigenvalues",
                expected: basis.cols(),
                found: eigenvalues.len(),
            });
        }
        if basis.cols() == 0 || basis.cols() > basis.rows() {
            return Err(Error::param(
                "l",
                format!("need 1 <= l <= d, got l = {} with d = {}", basis.cols(), basis.rows()),
            ));
        }
        if !basis.is_finite() {
            return Err(Error::NonFinite {
                context: "projection basis",
            });
        }
        let dev = basis.orthonormality_error();
        if dev > ORTHONORMALITY_TOLERANCE {
            return Err(Error::Capability(format!(
                "projection columns are not orthonormal (deviation {dev:e})"
            )));
        }
        Ok(Projection {
            basis,
            eigenvalues,
            method,
            gamma: 0.0,
            k: 0,
            alpha: None,
        })
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn with_k(mut self, k: usize) -> Self {
        self.k = k;
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = Some(alpha);
        self
    }

    pub fn basis(&self) -> &Matrix {
        &self.basis
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn alpha(&self) -> Option<f64> {
        self.alpha
    }

    /// Input dimension `d`.
    pub fn input_dim(&self) -> usize {
        self.basis.rows()
    }

    /// Output dimension `l`.
    pub fn output_dim(&self) -> usize {
        self.basis.cols()
    }

    /// Keeps the first `l` columns. These are exactly the columns a fit at
    /// dimension `l` would return from the same eigendecomposition.
    pub fn truncate(&self, l: usize) -> Result<Projection> {
        if l == 0 || l > self.output_dim() {
            return Err(Error::param(
                "l",
                format!("cannot truncate {} columns to {l}", self.output_dim()),
            ));
        }
        Ok(Projection {
            basis: self.basis.leading_columns(l),
            eigenvalues: self.eigenvalues[..l].to_vec(),
            ..self.clone()
        })
    }

    /// Maps every row of `x` (n × d) to `Bᵀx` (n × l).
    pub fn project(&self, x: &Matrix) -> Result<Matrix> {
        linalg::project(&self.basis, x)
    }

    pub fn project_point(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::Dimension {
                context: "projection",
                expected: self.input_dim(),
                found: x.len(),
            });
        }
        let mut out = alloc::vec![0.0; self.output_dim()];
        for (r, &xr) in x.iter().enumerate() {
            for (o, &b) in out.iter_mut().zip(self.basis.row(r)) {
                *o += xr * b;
            }
        }
        Ok(out)
    }
}
