//! Local discriminative Gaussian (LDG) dimensionality reduction.
//!
//! A supervised linear reduction that fits a scaled-identity Gaussian to the
//! `k` nearest same-class and other-class neighbours of every training point,
//! then picks the projection that keeps points close to their own class-local
//! means while pushing them away from the prior-weighted means of all classes.
//! The optimum of that trace objective is a single symmetric
//! eigendecomposition of `V - gamma * A`.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, timing and the
//! command-line front end live in the companion `ldg` crate.
//!
//! Module map:
//!
//! * [`linalg`]: dense matrices, symmetric and generalized symmetric eigensolvers.
//! * [`data`]: labelled datasets, normalization, seeded splits, class priors.
//! * [`localgauss`]: class-local Gaussians, local QDA, the exact MAP
//!   leave-one-out error and the smooth log-ratio objective.
//! * [`ldg`]: scatter matrices and the closed-form LDG solution.
//! * [`transfer`]: the alpha-weighted source/target variant.
//! * [`baselines`]: PCA and FDA.
//! * [`eval`]: k-NN scoring and hyperparameter selection.
//! * [`pipeline`]: the per-split fit used by experiment runners.

#![no_std]
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod baselines;
pub mod data;
pub mod error;
pub mod eval;
pub mod ldg;
pub mod linalg;
pub mod localgauss;
pub mod pipeline;
pub mod projection;
pub mod transfer;

pub use data::{LabeledDataset, Normalization, SplitSpec};
pub use error::{Error, Result};
pub use linalg::{EigenResult, Matrix};
pub use projection::{Method, Projection};
