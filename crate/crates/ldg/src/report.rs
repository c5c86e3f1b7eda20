//! Experiment reports: a JSON document for humans and tools, and a flat
//! CSV table with one row per split.

use serde::{Deserialize, Serialize};

/// Flat table columns, in order.
pub const TABLE_COLUMNS: [&str; 10] = [
    "dataset",
    "method",
    "split",
    "seed",
    "k_gauss",
    "gamma",
    "alpha",
    "dim",
    "accuracy",
    "train_seconds",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitRecord {
    pub dataset: String,
    pub method: String,
    pub split: usize,
    pub seed: u64,
    pub k_gauss: Option<usize>,
    pub gamma: Option<f64>,
    pub alpha: Option<f64>,
    pub dim: Option<usize>,
    pub accuracy: Option<f64>,
    pub train_seconds: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl SplitRecord {
    pub fn failed(dataset: &str, method: &str, split: usize, seed: u64, error: String) -> Self {
        SplitRecord {
            dataset: dataset.to_string(),
            method: method.to_string(),
            split,
            seed,
            k_gauss: None,
            gamma: None,
            alpha: None,
            dim: None,
            accuracy: None,
            train_seconds: None,
            error: Some(error),
        }
    }

    pub fn succeeded(&self) -> bool {
        self.error.is_none() && self.accuracy.is_some()
    }
}

/// Resolved configuration echoed into every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: String,
    pub method: String,
    pub seed: u64,
    pub splits: usize,
    pub train_fraction: Option<f64>,
    pub target_per_class: Option<usize>,
    pub balance: bool,
    pub knn_k: usize,
    pub cv_folds: usize,
    pub k_grid: Vec<usize>,
    pub gamma_grid: Vec<f64>,
    pub alpha_grid: Vec<f64>,
    pub max_dim: Option<usize>,
    pub fixed_dim: Option<usize>,
    pub examples: usize,
    pub features: usize,
    pub classes: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dropped_features: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub dataset: String,
    pub method: String,
    pub config: RunConfig,
    pub splits: Vec<SplitRecord>,
    /// Mean over successful splits.
    pub mean_accuracy: Option<f64>,
    pub std_accuracy: Option<f64>,
    pub mean_train_seconds: Option<f64>,
    /// Set when any split failed.
    pub degraded: bool,
}

impl ExperimentReport {
    pub fn new(dataset: &str, method: &str, config: RunConfig, splits: Vec<SplitRecord>) -> Self {
        let acc: Vec<f64> = splits
            .iter()
            .filter(|r| r.succeeded())
            .filter_map(|r| r.accuracy)
            .collect();
        let secs: Vec<f64> = splits
            .iter()
            .filter(|r| r.succeeded())
            .filter_map(|r| r.train_seconds)
            .collect();
        let degraded = splits.iter().any(|r| !r.succeeded());
        ExperimentReport {
            dataset: dataset.to_string(),
            method: method.to_string(),
            config,
            mean_accuracy: mean(&acc),
            std_accuracy: std_dev(&acc),
            mean_train_seconds: mean(&secs),
            splits,
            degraded,
        }
    }

    pub fn failed_splits(&self) -> usize {
        self.splits.iter().filter(|r| !r.succeeded()).count()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_table(&self) -> String {
        let mut out = TABLE_COLUMNS.join(",");
        out.push('\n');
        for r in &self.splits {
            let fields = [
                r.dataset.clone(),
                r.method.clone(),
                r.split.to_string(),
                r.seed.to_string(),
                opt(r.k_gauss),
                opt(r.gamma),
                opt(r.alpha),
                opt(r.dim),
                opt(r.accuracy),
                opt(r.train_seconds),
            ];
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn std_dev(v: &[f64]) -> Option<f64> {
    let mu = mean(v)?;
    Some((v.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / v.len() as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config() -> RunConfig {
        RunConfig {
            command: "bench".into(),
            method: "ldg".into(),
            seed: 1,
            splits: 2,
            train_fraction: Some(0.7),
            target_per_class: None,
            balance: false,
            knn_k: 3,
            cv_folds: 5,
            k_grid: vec![4, 8],
            gamma_grid: vec![1.0],
            alpha_grid: vec![0.0],
            max_dim: None,
            fixed_dim: None,
            examples: 10,
            features: 2,
            classes: 2,
            dropped_features: vec![],
        }
    }

    fn ok(split: usize, acc: f64) -> SplitRecord {
        SplitRecord {
            accuracy: Some(acc),
            train_seconds: Some(0.5),
            dim: Some(2),
            error: None,
            ..SplitRecord::failed("toy", "ldg", split, 1, String::new())
        }
    }

    #[test]
    fn mean_skips_failures() {
        let r = ExperimentReport::new(
            "toy",
            "ldg",
            config(),
            vec![
                ok(0, 0.5),
                SplitRecord::failed("toy", "ldg", 1, 1, "boom".into()),
                ok(2, 1.0),
            ],
        );
        assert_eq!(r.mean_accuracy, Some(0.75));
        assert!(r.degraded);
        assert_eq!(r.failed_splits(), 1);
    }

    #[test]
    fn table_shape() {
        let r = ExperimentReport::new("toy", "ldg", config(), vec![ok(0, 0.5), ok(1, 1.0)]);
        let t = r.to_table();
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines[0], TABLE_COLUMNS.join(","));
        assert_eq!(lines.len(), 3);
        assert!(lines.iter().all(|l| l.split(',').count() == 10));
        assert!(!r.degraded);
    }

    #[test]
    fn json_round_trip() {
        let r = ExperimentReport::new("toy", "ldg", config(), vec![ok(0, 0.5)]);
        let back: ExperimentReport = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back, r);
    }
}
