//! Labelled datasets, normalization, seeded splits and class statistics.
//!
//! Class ids are `1..=m`. Randomness comes from ChaCha8 seeded with a
//! SplitMix64 mix of `(seed, stream)`, so every split, fold assignment and
//! subsample is reproducible from its seed and stream alone.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Standard deviations below this are treated as constant features.
pub const STD_FLOOR: f64 = 1e-12;
/// Variances at or below this count as zero for feature removal.
pub const ZERO_VARIANCE: f64 = 1e-24;
/// Training-set cap applied after splitting.
pub const MAX_TRAIN_ROWS: usize = 3000;

/// Features `n × d` plus labels in `1..=m`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    features: Matrix,
    labels: Vec<usize>,
    classes: usize,
}

impl LabeledDataset {
    /// Validates labels against `classes` and requires every class to occur.
    pub fn new(features: Matrix, labels: Vec<usize>, classes: usize) -> Result<Self> {
        let ds = Self::with_class_count(features, labels, classes)?;
        if let Some(j) = ds.class_counts().iter().position(|&c| c == 0) {
            return Err(Error::param("labels", format!("class {} has no examples", j + 1)));
        }
        Ok(ds)
    }

    /// Like [`LabeledDataset::new`] but allows classes with no examples, as
    /// happens for subsets of a larger dataset.
    pub fn with_class_count(features: Matrix, labels: Vec<usize>, classes: usize) -> Result<Self> {
        if labels.len() != features.rows() {
            return Err(Error::Dimension {
                context: "dataset labels",
                expected: features.rows(),
                found: labels.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&y| y == 0 || y > classes) {
            return Err(Error::param("labels", format!("label {bad} outside 1..={classes}")));
        }
        if !features.is_finite() {
            return Err(Error::NonFinite {
                context: "dataset features",
            });
        }
        Ok(LabeledDataset {
            features,
            labels,
            classes,
        })
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.features.row(i)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    /// Number of classes `m` in the label universe.
    pub fn classes(&self) -> usize {
        self.classes
    }

    /// Counts `n_j`, indexed by `j - 1`.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes];
        for &y in &self.labels {
            counts[y - 1] += 1;
        }
        counts
    }

    /// Row indices of each class, indexed by `j - 1`.
    pub fn class_members(&self) -> Vec<Vec<usize>> {
        let mut members = vec![Vec::new(); self.classes];
        for (i, &y) in self.labels.iter().enumerate() {
            members[y - 1].push(i);
        }
        members
    }

    pub fn subset(&self, idx: &[usize]) -> LabeledDataset {
        LabeledDataset {
            features: self.features.select_rows(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            classes: self.classes,
        }
    }

    /// Same labels, new features (row count must match).
    pub fn with_features(&self, features: Matrix) -> Result<LabeledDataset> {
        LabeledDataset::with_class_count(features, self.labels.clone(), self.classes)
    }

    /// Rows of `self` followed by rows of `other`.
    pub fn concat(&self, other: &LabeledDataset) -> Result<LabeledDataset> {
        if self.classes != other.classes {
            return Err(Error::Dimension {
                context: "class universe",
                expected: self.classes,
                found: other.classes,
            });
        }
        let features = self.features.vstack(&other.features)?;
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels);
        LabeledDataset::with_class_count(features, labels, self.classes)
    }
}

/// Empirical priors `p(j) = n_j / n`, indexed by `j - 1`.
pub fn class_priors(dataset: &LabeledDataset) -> Vec<f64> {
    let n = dataset.len() as f64;
    dataset.class_counts().into_iter().map(|c| c as f64 / n).collect()
}

/// Per-feature mean and (population) standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalization {
    /// Fits on the rows of `x`. Standard deviations divide by `n` and are
    /// floored at [`STD_FLOOR`], so constant features normalize to zero.
    pub fn fit(x: &Matrix) -> Result<Self> {
        let n = x.rows();
        if n < 2 {
            return Err(Error::param("rows", "normalization needs at least two rows"));
        }
        let d = x.cols();
        let mut mean = vec![0.0; d];
        for r in 0..n {
            for (m, v) in mean.iter_mut().zip(x.row(r)) {
                *m += v;
            }
        }
        for m in mean.iter_mut() {
            *m /= n as f64;
        }
        let mut var = vec![0.0; d];
        for r in 0..n {
            for ((s, v), m) in var.iter_mut().zip(x.row(r)).zip(&mean) {
                let t = v - m;
                *s += t * t;
            }
        }
        let std = var
            .into_iter()
            .map(|s| libm::sqrt(s / n as f64).max(STD_FLOOR))
            .collect();
        Ok(Normalization { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, x: &Matrix) -> Result<Matrix> {
        self.check(x)?;
        let mut out = x.clone();
        for r in 0..out.rows() {
            for ((v, m), s) in out.row_mut(r).iter_mut().zip(&self.mean).zip(&self.std) {
                let centered = *v - m;
                // Constant features go to exactly zero rather than 0/floor noise.
                *v = if *s > STD_FLOOR { centered / s } else { 0.0 };
            }
        }
        Ok(out)
    }

    /// Inverse of [`Normalization::apply`] for non-constant features.
    pub fn invert(&self, z: &Matrix) -> Result<Matrix> {
        self.check(z)?;
        let mut out = z.clone();
        for r in 0..out.rows() {
            for ((v, m), s) in out.row_mut(r).iter_mut().zip(&self.mean).zip(&self.std) {
                *v = *v * s + m;
            }
        }
        Ok(out)
    }

    pub fn apply_dataset(&self, ds: &LabeledDataset) -> Result<LabeledDataset> {
        ds.with_features(self.apply(ds.features())?)
    }

    fn check(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.dim() {
            return Err(Error::Dimension {
                context: "normalization",
                expected: self.dim(),
                found: x.cols(),
            });
        }
        Ok(())
    }
}

/// Original column indices that survived feature removal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureMask {
    pub original_dim: usize,
    pub kept: Vec<usize>,
}

impl FeatureMask {
    pub fn identity(d: usize) -> Self {
        FeatureMask {
            original_dim: d,
            kept: (0..d).collect(),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.kept.len() == self.original_dim
    }

    pub fn apply(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.original_dim {
            return Err(Error::Dimension {
                context: "feature mask",
                expected: self.original_dim,
                found: x.cols(),
            });
        }
        Ok(x.select_columns(&self.kept))
    }

    pub fn apply_dataset(&self, ds: &LabeledDataset) -> Result<LabeledDataset> {
        ds.with_features(self.apply(ds.features())?)
    }
}

fn column_variances(x: &Matrix) -> Vec<f64> {
    let n = x.rows();
    let d = x.cols();
    if n == 0 {
        return vec![0.0; d];
    }
    let mut mean = vec![0.0; d];
    for r in 0..n {
        for (m, v) in mean.iter_mut().zip(x.row(r)) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut var = vec![0.0; d];
    for r in 0..n {
        for ((s, v), m) in var.iter_mut().zip(x.row(r)).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    var.into_iter().map(|s| s / n as f64).collect()
}

/// Drops every feature whose variance is at most [`ZERO_VARIANCE`] in any
/// of `datasets`, applying one mask to all of them.
pub fn remove_zero_variance(datasets: &[&Matrix]) -> Result<(Vec<Matrix>, FeatureMask)> {
    let first = datasets
        .first()
        .ok_or_else(|| Error::param("datasets", "need at least one dataset"))?;
    let d = first.cols();
    let mut keep = vec![true; d];
    for x in datasets {
        if x.cols() != d {
            return Err(Error::Dimension {
                context: "zero-variance removal",
                expected: d,
                found: x.cols(),
            });
        }
        for (k, v) in keep.iter_mut().zip(column_variances(x)) {
            if v <= ZERO_VARIANCE {
                *k = false;
            }
        }
    }
    let kept: Vec<usize> = (0..d).filter(|&c| keep[c]).collect();
    if kept.is_empty() {
        return Err(Error::EmptyFeatures);
    }
    let mask = FeatureMask { original_dim: d, kept };
    let reduced = datasets.iter().map(|x| mask.apply(x)).collect::<Result<Vec<_>>>()?;
    Ok((reduced, mask))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic generator for `(seed, stream)`.
pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(stream)))
}

/// Random train/test partition parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
    pub split_index: u64,
    pub max_train: usize,
}

impl SplitSpec {
    pub fn new(train_fraction: f64, seed: u64, split_index: u64) -> Self {
        SplitSpec {
            train_fraction,
            seed,
            split_index,
            max_train: MAX_TRAIN_ROWS,
        }
    }
}

/// Sorted row indices of a partition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

const SPLIT_RETRIES: usize = 32;

fn partition_ok(labels: &[usize], counts: &[usize], train: &[usize], test: &[usize]) -> bool {
    let mut in_train = vec![false; counts.len()];
    let mut in_test = vec![false; counts.len()];
    for &i in train {
        in_train[labels[i] - 1] = true;
    }
    for &i in test {
        in_test[labels[i] - 1] = true;
    }
    counts.iter().enumerate().all(|(j, &c)| match c {
        0 => true,
        1 => in_train[j],
        _ => in_train[j] && in_test[j],
    })
}

/// Seeded train/test partition of `labels` (ids `1..=classes`).
///
/// Every class with at least two examples appears on both sides; singleton
/// classes are forced into train. Random permutations are retried a few
/// times before falling back to a per-class stratified draw. The train side
/// is then capped at `spec.max_train` rows; the discarded rows belong to
/// neither side.
pub fn split_indices(labels: &[usize], classes: usize, spec: &SplitSpec) -> Result<SplitIndices> {
    let n = labels.len();
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(Error::param("train_fraction", "must lie in (0, 1)"));
    }
    if n < 2 {
        return Err(Error::param("dataset", "need at least two rows to split"));
    }
    let mut counts = vec![0usize; classes];
    for &y in labels {
        counts[y - 1] += 1;
    }
    for (j, &c) in counts.iter().enumerate() {
        if c == 1 {
            log::warn!("class {} has a single example; it is kept in the training side", j + 1);
        }
    }
    let n_train = (libm::round(n as f64 * spec.train_fraction) as usize).clamp(1, n - 1);
    let mut rng = seeded_rng(spec.seed, spec.split_index);

    let mut chosen = None;
    for _ in 0..SPLIT_RETRIES {
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let (train, test) = perm.split_at(n_train);
        if partition_ok(labels, &counts, train, test) {
            chosen = Some((train.to_vec(), test.to_vec()));
            break;
        }
    }
    let (train, mut test) = match chosen {
        Some(p) => p,
        None => {
            let mut members = vec![Vec::new(); classes];
            for (i, &y) in labels.iter().enumerate() {
                members[y - 1].push(i);
            }
            let mut train = Vec::new();
            let mut test = Vec::new();
            for mut m in members {
                m.shuffle(&mut rng);
                let c = m.len();
                if c == 0 {
                    continue;
                }
                let take = if c == 1 {
                    1
                } else {
                    (libm::round(c as f64 * spec.train_fraction) as usize).clamp(1, c - 1)
                };
                train.extend_from_slice(&m[..take]);
                test.extend_from_slice(&m[take..]);
            }
            train.shuffle(&mut rng);
            (train, test)
        }
    };

    let mut train = cap_preserving_classes(&train, labels, classes, spec.max_train);
    train.sort_unstable();
    test.sort_unstable();
    Ok(SplitIndices { train, test })
}

/// Keeps the first `cap` entries of `order`, after first reserving one
/// example of every class present.
fn cap_preserving_classes(order: &[usize], labels: &[usize], classes: usize, cap: usize) -> Vec<usize> {
    if order.len() <= cap {
        return order.to_vec();
    }
    let mut seen = vec![false; classes];
    let mut taken = vec![false; order.len()];
    let mut kept = 0;
    for (pos, &i) in order.iter().enumerate() {
        if !seen[labels[i] - 1] {
            seen[labels[i] - 1] = true;
            taken[pos] = true;
            kept += 1;
        }
    }
    for t in taken.iter_mut() {
        if kept >= cap {
            break;
        }
        if !*t {
            *t = true;
            kept += 1;
        }
    }
    order.iter().zip(&taken).filter(|(_, &t)| t).map(|(&i, _)| i).collect()
}

/// Splits `dataset` according to `spec`.
pub fn split(dataset: &LabeledDataset, spec: &SplitSpec) -> Result<(LabeledDataset, LabeledDataset)> {
    let idx = split_indices(dataset.labels(), dataset.classes(), spec)?;
    Ok((dataset.subset(&idx.train), dataset.subset(&idx.test)))
}

/// Class-stratified fold assignment: `fold[i]` in `0..folds`.
pub fn stratified_folds(labels: &[usize], classes: usize, folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::param("folds", "need at least two folds"));
    }
    let mut rng = seeded_rng(seed, 0x000F_01D5);
    let mut members = vec![Vec::new(); classes];
    for (i, &y) in labels.iter().enumerate() {
        members[y - 1].push(i);
    }
    let mut assignment = vec![0; labels.len()];
    let mut next = 0usize;
    for mut m in members {
        m.shuffle(&mut rng);
        for i in m {
            assignment[i] = next % folds;
            next += 1;
        }
    }
    Ok(assignment)
}

/// Draws exactly `per_class` rows of every class for training; the rest
/// are returned as test rows.
pub fn sample_per_class(
    labels: &[usize],
    classes: usize,
    per_class: usize,
    seed: u64,
    stream: u64,
) -> Result<SplitIndices> {
    let mut rng = seeded_rng(seed, stream);
    let mut members = vec![Vec::new(); classes];
    for (i, &y) in labels.iter().enumerate() {
        members[y - 1].push(i);
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (j, mut m) in members.into_iter().enumerate() {
        if m.len() < per_class {
            return Err(Error::Capability(format!(
                "class {} has {} examples, {per_class} requested per class",
                j + 1,
                m.len()
            )));
        }
        m.shuffle(&mut rng);
        train.extend_from_slice(&m[..per_class]);
        test.extend_from_slice(&m[per_class..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(SplitIndices { train, test })
}

/// Randomly subsamples every class down to the smallest class count.
pub fn balance_classes(dataset: &LabeledDataset, seed: u64) -> LabeledDataset {
    let mut rng = seeded_rng(seed, 0xBA1A_11CE);
    let members = dataset.class_members();
    let target = members.iter().map(|m| m.len()).filter(|&c| c > 0).min().unwrap_or(0);
    let mut keep = Vec::new();
    for mut m in members {
        m.shuffle(&mut rng);
        keep.extend(m.into_iter().take(target));
    }
    keep.sort_unstable();
    dataset.subset(&keep)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ds(rows: &[&[f64]], labels: &[usize], m: usize) -> LabeledDataset {
        LabeledDataset::new(Matrix::from_rows(rows).unwrap(), labels.to_vec(), m).unwrap()
    }

    #[test]
    fn priors() {
        let two = ds(&[&[0.0], &[1.0]], &[1, 2], 2);
        assert_eq!(class_priors(&two), vec![0.5, 0.5]);
        let skew = ds(&[&[0.0], &[1.0], &[2.0], &[3.0]], &[1, 2, 2, 2], 2);
        assert_eq!(class_priors(&skew), vec![0.25, 0.75]);
        let one = ds(&[&[0.0], &[1.0]], &[1, 1], 1);
        assert_eq!(class_priors(&one), vec![1.0]);
    }

    #[test]
    fn rejects_bad_labels() {
        let x = Matrix::zeros(2, 1);
        assert!(LabeledDataset::new(x.clone(), vec![1, 3], 2).is_err());
        assert!(LabeledDataset::new(x.clone(), vec![1], 2).is_err());
        assert!(LabeledDataset::new(x.clone(), vec![1, 1], 2).is_err());
        assert!(LabeledDataset::with_class_count(x, vec![1, 1], 2).is_ok());
    }

    #[test]
    fn normalization_population_convention() {
        let x = Matrix::from_rows(&[[0.0, 5.0], [2.0, 5.0]]).unwrap();
        let norm = Normalization::fit(&x).unwrap();
        assert_eq!(norm.mean, vec![1.0, 5.0]);
        assert_eq!(norm.std[0], 1.0);
        let z = norm.apply(&x).unwrap();
        assert_eq!(z, Matrix::from_rows(&[[-1.0, 0.0], [1.0, 0.0]]).unwrap());
        // held-out rows use the training statistics
        let held = Matrix::from_rows(&[[4.0, 7.0]]).unwrap();
        assert_eq!(norm.apply(&held).unwrap().row(0), &[3.0, 0.0]);
    }

    #[test]
    fn zero_variance_mask() {
        let a = Matrix::from_rows(&[[1.0, 2.0, 3.0], [1.0, 4.0, 5.0]]).unwrap();
        let (out, mask) = remove_zero_variance(&[&a]).unwrap();
        assert_eq!(mask.kept, vec![1, 2]);
        assert_eq!(out[0].cols(), 2);

        // constant in source, varying in target: dropped everywhere
        let source = Matrix::from_rows(&[[1.0, 0.0], [1.0, 1.0]]).unwrap();
        let target = Matrix::from_rows(&[[0.0, 0.0], [3.0, 1.0]]).unwrap();
        let (out, mask) = remove_zero_variance(&[&source, &target]).unwrap();
        assert_eq!(mask.kept, vec![1]);
        assert_eq!(out[1].column(0), vec![0.0, 1.0]);

        let varying = Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap();
        assert!(remove_zero_variance(&[&varying]).unwrap().1.is_identity());

        let constant = Matrix::from_rows(&[[1.0], [1.0]]).unwrap();
        assert_eq!(remove_zero_variance(&[&constant]), Err(Error::EmptyFeatures));
    }

    #[test]
    fn split_is_deterministic() {
        let labels: Vec<usize> = (0..10).map(|i| 1 + i % 2).collect();
        let spec = SplitSpec::new(0.7, 42, 3);
        let a = split_indices(&labels, 2, &spec).unwrap();
        let b = split_indices(&labels, 2, &spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.train.len(), 7);
        assert_eq!(a.test.len(), 3);
        let other = split_indices(&labels, 2, &SplitSpec::new(0.7, 42, 4)).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn split_caps_train() {
        let labels: Vec<usize> = (0..10_000).map(|i| 1 + i % 3).collect();
        let idx = split_indices(&labels, 3, &SplitSpec::new(0.7, 1, 0)).unwrap();
        assert_eq!(idx.train.len(), 3000);
        assert_eq!(idx.test.len(), 3000);
    }

    #[test]
    fn split_three_rows_two_classes() {
        // The only valid partitions put the lone class-2 row in train and
        // one class-1 row on each side.
        let labels = [1, 1, 2];
        for seed in 0..20 {
            let idx = split_indices(&labels, 2, &SplitSpec::new(0.7, seed, 0)).unwrap();
            assert!(idx.train.contains(&2));
            assert_eq!(idx.train.len(), 2);
            assert!(idx.test == vec![0] || idx.test == vec![1]);
        }
    }

    #[test]
    fn folds_are_stratified() {
        let labels: Vec<usize> = (0..50).map(|i| if i < 20 { 1 } else { 2 }).collect();
        let folds = stratified_folds(&labels, 2, 5, 9).unwrap();
        for f in 0..5 {
            let c1 = (0..20).filter(|&i| folds[i] == f).count();
            let c2 = (20..50).filter(|&i| folds[i] == f).count();
            assert_eq!(c1, 4);
            assert_eq!(c2, 6);
        }
    }

    #[test]
    fn per_class_sampling() {
        let labels: Vec<usize> = (0..30).map(|i| 1 + i % 3).collect();
        let idx = sample_per_class(&labels, 3, 2, 5, 0).unwrap();
        assert_eq!(idx.train.len(), 6);
        for j in 1..=3 {
            assert_eq!(idx.train.iter().filter(|&&i| labels[i] == j).count(), 2);
        }
        assert!(sample_per_class(&labels, 3, 11, 5, 0).is_err());
    }

    #[test]
    fn balancing() {
        let x = Matrix::zeros(10, 1);
        let labels = vec![1, 1, 1, 1, 1, 1, 1, 2, 2, 2];
        let d = LabeledDataset::new(x, labels, 2).unwrap();
        let b = balance_classes(&d, 3);
        assert_eq!(b.class_counts(), vec![3, 3]);
    }
}
