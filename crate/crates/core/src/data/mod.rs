//! Labeled datasets: synthetic generation, splitting, label corruption, and
//! the non-IID client partitioner.

mod formats;
mod partition;

pub use formats::{load_csv, load_idx, read_idx_images, read_idx_labels, write_idx};
pub use partition::{dirichlet_partition, PartitionPlan};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Row-major `n x dim` features with integer labels in `[0, classes)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    features: Vec<f64>,
    labels: Vec<usize>,
    dim: usize,
    classes: usize,
}

impl LabeledDataset {
    pub fn new(features: Vec<f64>, labels: Vec<usize>, dim: usize, classes: usize) -> Result<Self> {
        if labels.is_empty() || dim == 0 {
            return Err(Error::InvalidValue("dataset must have at least one sample and feature".into()));
        }
        if features.len() != labels.len() * dim {
            return Err(Error::Dimension {
                expected: labels.len() * dim,
                found: features.len(),
            });
        }
        if let Some(bad) = labels.iter().find(|&&y| y >= classes) {
            return Err(Error::InvalidValue(format!(
                "label {bad} outside [0, {classes})"
            )));
        }
        if features.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidValue("features must be finite".into()));
        }
        Ok(Self {
            features,
            labels,
            dim,
            classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    /// Samples at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let mut features = Vec::with_capacity(indices.len() * self.dim);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.len() {
                return Err(Error::InvalidValue(format!("sample index {i} out of range")));
            }
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Self::new(features, labels, self.dim, self.classes)
    }

    /// Per-class sample indices in ascending order.
    pub fn indices_by_class(&self) -> Vec<Vec<usize>> {
        let mut by_class = vec![Vec::new(); self.classes];
        for (i, &y) in self.labels.iter().enumerate() {
            by_class[y].push(i);
        }
        by_class
    }
}

/// `classes` isotropic Gaussian blobs around random unit-norm means.
///
/// Means are redrawn until every pair is at least `2 * spread` apart; when
/// that is geometrically out of reach the best-separated draw is kept.
pub fn generate_synthetic(
    n: usize,
    dim: usize,
    classes: usize,
    spread: f64,
    seed: u64,
) -> Result<LabeledDataset> {
    if classes == 0 || n < classes || dim == 0 {
        return Err(Error::InvalidValue(format!(
            "synthetic data needs n >= classes >= 1 and dim >= 1 (n={n}, classes={classes}, dim={dim})"
        )));
    }
    if !(spread > 0.0) {
        return Err(Error::InvalidValue(format!("spread must be positive, got {spread}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = |rng: &mut ChaCha8Rng| loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let norm = crate::vector::norm(&v);
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect::<Vec<f64>>();
        }
    };
    let min_gap = |means: &[Vec<f64>]| {
        let mut gap = f64::INFINITY;
        for i in 0..means.len() {
            for j in i + 1..means.len() {
                let d = crate::vector::squared_distance(&means[i], &means[j])
                    .expect("equal dims")
                    .sqrt();
                gap = gap.min(d);
            }
        }
        gap
    };

    let mut best: Vec<Vec<f64>> = (0..classes).map(|_| unit(&mut rng)).collect();
    let mut best_gap = min_gap(&best);
    for _ in 0..1000 {
        if best_gap >= 2.0 * spread {
            break;
        }
        let candidate: Vec<Vec<f64>> = (0..classes).map(|_| unit(&mut rng)).collect();
        let gap = min_gap(&candidate);
        if gap > best_gap {
            best = candidate;
            best_gap = gap;
        }
    }

    let mut features = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let y = i % classes;
        for &m in &best[y] {
            let z: f64 = StandardNormal.sample(&mut rng);
            features.push(m + spread * z);
        }
        labels.push(y);
    }
    LabeledDataset::new(features, labels, dim, classes)
}

/// Maps every label `y` to `classes - 1 - y`.
pub fn flip_labels(data: &LabeledDataset) -> LabeledDataset {
    let c = data.classes;
    LabeledDataset {
        features: data.features.clone(),
        labels: data.labels.iter().map(|&y| c - 1 - y).collect(),
        dim: data.dim,
        classes: c,
    }
}

/// Stratified holdout: `fraction` of each class (rounded, at least one when
/// the class has two or more samples) goes to the second returned set.
pub fn stratified_split(
    data: &LabeledDataset,
    fraction: f64,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidValue(format!(
            "holdout fraction must lie in (0, 1), got {fraction}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep = Vec::new();
    let mut held = Vec::new();
    for mut idx in data.indices_by_class() {
        idx.shuffle(&mut rng);
        let mut take = (fraction * idx.len() as f64).round() as usize;
        if idx.len() >= 2 {
            take = take.clamp(1, idx.len() - 1);
        } else {
            take = 0;
        }
        held.extend_from_slice(&idx[..take]);
        keep.extend_from_slice(&idx[take..]);
    }
    keep.sort_unstable();
    held.sort_unstable();
    Ok((data.subset(&keep)?, data.subset(&held)?))
}

/// Class-balanced uniform sample of `size` points (`size / classes` per
/// class, capped by availability).
pub fn balanced_sample(data: &LabeledDataset, size: usize, seed: u64) -> Result<LabeledDataset> {
    let per_class = size / data.classes;
    if per_class == 0 {
        return Err(Error::Config(format!(
            "root dataset size {size} is smaller than the number of classes {}",
            data.classes
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = Vec::new();
    for mut idx in data.indices_by_class() {
        idx.shuffle(&mut rng);
        idx.truncate(per_class);
        chosen.extend(idx);
    }
    chosen.sort_unstable();
    data.subset(&chosen)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_is_seeded_and_balanced() {
        let a = generate_synthetic(103, 6, 5, 0.3, 9).unwrap();
        let b = generate_synthetic(103, 6, 5, 0.3, 9).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, generate_synthetic(103, 6, 5, 0.3, 10).unwrap());
        let counts: Vec<usize> = a.indices_by_class().iter().map(Vec::len).collect();
        assert_eq!(counts, vec![21, 21, 21, 20, 20]);
    }

    #[test]
    fn synthetic_rejects_too_few_samples() {
        assert!(generate_synthetic(3, 4, 5, 0.3, 0).is_err());
    }

    #[test]
    fn flip_examples() {
        let d = LabeledDataset::new(vec![0.0; 3], vec![0, 9, 4], 1, 10).unwrap();
        let f = flip_labels(&d);
        assert_eq!(f.labels(), &[9, 0, 5]);
        assert_eq!(f.features(), d.features());
        assert_eq!(flip_labels(&f), d);
        let d = LabeledDataset::new(vec![0.0], vec![11], 1, 23).unwrap();
        assert_eq!(flip_labels(&d).labels(), &[11]);
    }

    #[test]
    fn stratified_split_keeps_every_class() {
        let d = generate_synthetic(200, 3, 4, 0.3, 1).unwrap();
        let (train, test) = stratified_split(&d, 0.2, 5).unwrap();
        assert_eq!(train.len() + test.len(), 200);
        assert_eq!(test.len(), 40);
        assert!(test.indices_by_class().iter().all(|c| c.len() == 10));
    }

    #[test]
    fn balanced_sample_counts() {
        let d = generate_synthetic(200, 3, 4, 0.3, 1).unwrap();
        let root = balanced_sample(&d, 40, 3).unwrap();
        assert!(root.indices_by_class().iter().all(|c| c.len() == 10));
        assert!(balanced_sample(&d, 3, 3).is_err());
    }

    #[test]
    fn dataset_validation() {
        assert!(LabeledDataset::new(vec![0.0; 4], vec![0, 1], 3, 2).is_err());
        assert!(LabeledDataset::new(vec![0.0; 2], vec![0, 2], 1, 2).is_err());
        assert!(LabeledDataset::new(vec![], vec![], 1, 2).is_err());
    }
}
