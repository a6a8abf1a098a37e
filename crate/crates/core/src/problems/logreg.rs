use crate::math::Vector;

use super::{
    check_batch, check_theta, gaussian_blobs, invalid, Batch, Dataset, Init, Problem, ProblemError,
};

/// Per-feature class-mean offset of the synthetic blobs.
pub const LOGREG_SEPARATION: f64 = 0.5;
/// Share of examples kept for training; the rest form the held-out split.
pub const TRAIN_FRACTION: f64 = 0.75;

/// Binary logistic regression with a bias term, mean cross-entropy loss.
///
/// Parameters are the feature weights followed by the bias, so
/// `dim = n_features + 1`. Targets are 0 or 1.
#[derive(Debug, Clone)]
pub struct LogisticRegression {
    train: Dataset,
    test: Option<Dataset>,
}

/// `ln(1 + eᶻ)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl LogisticRegression {
    /// Two balanced Gaussian blobs (see [`gaussian_blobs`]) with
    /// [`LOGREG_SEPARATION`], split 75/25 by a seeded shuffle.
    pub fn synthetic(
        n_examples: usize,
        n_features: usize,
        seed: u64,
    ) -> Result<Self, ProblemError> {
        if n_examples < 2 {
            return Err(invalid("logreg", "need at least two examples"));
        }
        if n_features == 0 {
            return Err(invalid("logreg", "need at least one feature"));
        }
        let data = gaussian_blobs(n_examples, n_features, 2, LOGREG_SEPARATION, seed)?;
        let (train, test) = data.split(TRAIN_FRACTION, seed.wrapping_add(1));
        Self::from_datasets(train, Some(test))
    }

    pub fn from_datasets(train: Dataset, test: Option<Dataset>) -> Result<Self, ProblemError> {
        if train.is_empty() {
            return Err(ProblemError::DatasetAbsent("empty training set".into()));
        }
        let binary = |d: &Dataset| d.targets().iter().all(|&t| t == 0.0 || t == 1.0);
        if !binary(&train) || test.as_ref().is_some_and(|t| !binary(t)) {
            return Err(invalid("logreg", "targets must be 0 or 1"));
        }
        if test
            .as_ref()
            .is_some_and(|t| t.n_features() != train.n_features())
        {
            return Err(invalid("logreg", "train and test feature counts differ"));
        }
        Ok(Self {
            train,
            test: test.filter(|t| !t.is_empty()),
        })
    }

    pub fn train(&self) -> &Dataset {
        &self.train
    }

    fn logit(&self, theta: &Vector, x: &[f64]) -> f64 {
        let w = theta.as_slice();
        let bias = w[x.len()];
        x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() + bias
    }

    fn mean_loss(&self, data: &Dataset, theta: &Vector, indices: &[usize]) -> f64 {
        let total: f64 = indices
            .iter()
            .map(|&i| {
                let z = self.logit(theta, data.row(i));
                softplus(z) - data.target(i) * z
            })
            .sum();
        total / indices.len() as f64
    }
}

impl Problem for LogisticRegression {
    fn name(&self) -> &str {
        "logreg"
    }

    fn dim(&self) -> usize {
        self.train.n_features() + 1
    }

    fn train_size(&self) -> Option<usize> {
        Some(self.train.len())
    }

    fn loss(&self, theta: &Vector, batch: &Batch) -> Result<f64, ProblemError> {
        check_theta(theta, self.dim())?;
        check_batch(batch, self.train.len())?;
        Ok(self.mean_loss(&self.train, theta, batch.indices()))
    }

    fn grad(&self, theta: &Vector, batch: &Batch) -> Result<Vector, ProblemError> {
        check_theta(theta, self.dim())?;
        check_batch(batch, self.train.len())?;
        let n = self.train.n_features();
        let mut grad = vec![0.0; n + 1];
        for &i in batch.indices() {
            let x = self.train.row(i);
            let residual = sigmoid(self.logit(theta, x)) - self.train.target(i);
            for (g, xi) in grad.iter_mut().zip(x) {
                *g += residual * xi;
            }
            grad[n] += residual;
        }
        let m = batch.len() as f64;
        grad.iter_mut().for_each(|g| *g /= m);
        Ok(Vector::new(grad)?)
    }

    fn test_loss(&self, theta: &Vector) -> Option<Result<f64, ProblemError>> {
        let test = self.test.as_ref()?;
        Some(check_theta(theta, self.dim()).map(|_| {
            let all: Vec<usize> = (0..test.len()).collect();
            self.mean_loss(test, theta, &all)
        }))
    }

    fn default_init(&self) -> Init {
        Init::Zeros
    }
}
