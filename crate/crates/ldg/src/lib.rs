//! File formats, experiment runner and command-line front end for the
//! `ldg_core` dimensionality reduction library.

pub mod cli;
pub mod experiment;
pub mod io;
pub mod report;

pub use experiment::{run_experiment, run_transfer_experiment, ExperimentConfig, TransferExperimentConfig};
pub use io::{load_dataset, LabelColumn, LoadedDataset};
pub use report::{ExperimentReport, SplitRecord};
