use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{invalid, ProblemError};

/// Row-major feature matrix with one target per row.
///
/// Targets are class indices stored as `f64` for classification data.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    inputs: Vec<f64>,
    n_features: usize,
    targets: Vec<f64>,
}

impl Dataset {
    pub fn new(
        inputs: Vec<f64>,
        n_features: usize,
        targets: Vec<f64>,
    ) -> Result<Self, ProblemError> {
        if n_features == 0 {
            return Err(invalid("dataset", "at least one feature is required"));
        }
        if inputs.len() != n_features * targets.len() {
            return Err(invalid(
                "dataset",
                format!(
                    "{} input values do not form {} rows of {} features",
                    inputs.len(),
                    targets.len(),
                    n_features
                ),
            ));
        }
        Ok(Self {
            inputs,
            n_features,
            targets,
        })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn target(&self, i: usize) -> f64 {
        self.targets[i]
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    /// Rows `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut inputs = Vec::with_capacity(indices.len() * self.n_features);
        let mut targets = Vec::with_capacity(indices.len());
        for &i in indices {
            inputs.extend_from_slice(self.row(i));
            targets.push(self.targets[i]);
        }
        Self {
            inputs,
            n_features: self.n_features,
            targets,
        }
    }

    /// Seeded shuffle followed by a cut: the first `round(train_fraction · n)`
    /// shuffled rows train, the rest are held out.
    pub fn split(&self, train_fraction: f64, seed: u64) -> (Self, Self) {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let cut = ((self.len() as f64) * train_fraction).round() as usize;
        let cut = cut.min(self.len());
        (self.subset(&order[..cut]), self.subset(&order[cut..]))
    }

    /// Number of classes, taken as the largest label plus one.
    pub fn n_classes(&self) -> usize {
        self.targets
            .iter()
            .fold(0.0f64, |acc, &t| acc.max(t))
            .round() as usize
            + 1
    }
}

/// Balanced Gaussian class blobs with identity covariance.
///
/// Example `i` belongs to class `i mod n_classes`. The mean of class `c` is
/// `separation` on every feature `j` with `j mod n_classes == c` and zero on
/// the others, so for two classes the classes load on alternating features.
pub fn gaussian_blobs(
    n_examples: usize,
    n_features: usize,
    n_classes: usize,
    separation: f64,
    seed: u64,
) -> Result<Dataset, ProblemError> {
    if n_classes < 2 {
        return Err(invalid("blobs", "need at least two classes"));
    }
    if n_examples < n_classes {
        return Err(invalid("blobs", "fewer examples than classes"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut inputs = Vec::with_capacity(n_examples * n_features);
    let mut targets = Vec::with_capacity(n_examples);
    for i in 0..n_examples {
        let class = i % n_classes;
        for j in 0..n_features {
            let mean = if j % n_classes == class {
                separation
            } else {
                0.0
            };
            let noise: f64 = StandardNormal.sample(&mut rng);
            inputs.push(mean + noise);
        }
        targets.push(class as f64);
    }
    Dataset::new(inputs, n_features, targets)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_checked() {
        assert!(Dataset::new(vec![1.0; 5], 2, vec![0.0, 1.0]).is_err());
        assert!(Dataset::new(vec![], 0, vec![]).is_err());
        let d = Dataset::new(vec![1.0, 2.0, 3.0, 4.0], 2, vec![0.0, 1.0]).unwrap();
        assert_eq!(d.row(1), &[3.0, 4.0]);
        assert_eq!(d.n_classes(), 2);
    }

    #[test]
    fn blobs_are_balanced_and_seeded() {
        let a = gaussian_blobs(100, 4, 2, 1.0, 7).unwrap();
        let b = gaussian_blobs(100, 4, 2, 1.0, 7).unwrap();
        assert_eq!(a, b);
        let ones = a.targets().iter().filter(|&&t| t == 1.0).count();
        assert_eq!(ones, 50);
        assert_ne!(a, gaussian_blobs(100, 4, 2, 1.0, 8).unwrap());
    }

    #[test]
    fn split_partitions_rows() {
        let d = gaussian_blobs(40, 2, 2, 1.0, 1).unwrap();
        let (train, test) = d.split(0.75, 3);
        assert_eq!((train.len(), test.len()), (30, 10));
        let mut all: Vec<f64> = train.targets().to_vec();
        all.extend_from_slice(test.targets());
        assert_eq!(all.iter().sum::<f64>(), 20.0);
        assert_eq!(d.split(0.75, 3), (train, test));
    }
}
