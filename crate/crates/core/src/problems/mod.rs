//! Differentiable benchmark objectives and the data plumbing around them.
//!
//! A [`Problem`] exposes a loss and its analytic gradient evaluated on a
//! [`Batch`] of example indices. The loss is the mean of per-example losses
//! over the batch. Objectives without data ([`Quadratic`], [`Rosenbrock`])
//! ignore the batch.

mod data;
mod gradcheck;
mod idx;
mod logreg;
mod mlp;
mod quadratic;
mod rosenbrock;
mod sampler;

use rand::Rng;
use thiserror::Error;

use crate::math::{MathError, Vector};

pub use data::{gaussian_blobs, Dataset};
pub use gradcheck::{
    grad_check, grad_check_report, random_grad_check, random_grad_check_report, GradCheckReport,
    DEFAULT_FD_STEP,
};
pub use idx::{load_idx, IdxArray, IdxError, IdxSection, IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC};
pub use logreg::LogisticRegression;
pub use mlp::Mlp;
pub use quadratic::Quadratic;
pub use rosenbrock::Rosenbrock;
pub use sampler::MinibatchSampler;

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error(transparent)]
    Math(#[from] MathError),
    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },
    #[error("empty batch")]
    EmptyBatch,
    #[error("example index {index} out of range for {len} examples")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("no dataset available: {0}")]
    DatasetAbsent(String),
    #[error(transparent)]
    Idx(#[from] IdxError),
    #[error("no kink-free evaluation point found after {0} attempts")]
    NoSmoothPoint(usize),
}

pub(crate) fn invalid(what: &'static str, reason: impl Into<String>) -> ProblemError {
    ProblemError::Invalid {
        what,
        reason: reason.into(),
    }
}

/// Indices of the examples that make up one minibatch.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Batch {
    indices: Vec<usize>,
}

impl Batch {
    pub fn new(indices: Vec<usize>) -> Self {
        Self { indices }
    }

    /// Every example `0..count`, in order.
    pub fn all(count: usize) -> Self {
        Self::new((0..count).collect())
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// How initial parameters are drawn.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    /// Independent uniform draws in `[-scale, scale]`.
    Uniform(f64),
    Zeros,
    Constant(f64),
}

impl Init {
    pub fn draw<R: Rng + ?Sized>(&self, dim: usize, rng: &mut R) -> Result<Vector, MathError> {
        match *self {
            Init::Uniform(scale) => {
                Vector::new((0..dim).map(|_| rng.random_range(-scale..=scale)).collect())
            }
            Init::Zeros => Vector::zeros(dim),
            Init::Constant(c) => Vector::filled(dim, c),
        }
    }
}

/// A differentiable objective.
pub trait Problem: Send + Sync {
    fn name(&self) -> &str;

    /// Number of parameters.
    fn dim(&self) -> usize;

    /// Training examples available to the sampler, or `None` when the
    /// objective has no data and every step is a full-batch step.
    fn train_size(&self) -> Option<usize>;

    fn loss(&self, theta: &Vector, batch: &Batch) -> Result<f64, ProblemError>;

    fn grad(&self, theta: &Vector, batch: &Batch) -> Result<Vector, ProblemError>;

    fn loss_and_grad(&self, theta: &Vector, batch: &Batch) -> Result<(f64, Vector), ProblemError> {
        Ok((self.loss(theta, batch)?, self.grad(theta, batch)?))
    }

    /// The batch covering the whole training set (empty for data-free
    /// objectives).
    fn full_batch(&self) -> Batch {
        Batch::all(self.train_size().unwrap_or(0))
    }

    /// Mean loss on the held-out split, if the problem has one.
    fn test_loss(&self, _theta: &Vector) -> Option<Result<f64, ProblemError>> {
        None
    }

    fn default_init(&self) -> Init {
        Init::Uniform(0.05)
    }

    /// Whether the loss is differentiable in a neighbourhood of `theta` on
    /// `batch`. Piecewise-smooth problems override this.
    fn is_smooth_at(&self, _theta: &Vector, _batch: &Batch) -> bool {
        true
    }

    /// A random point for gradient checking.
    fn check_point(&self, rng: &mut dyn rand::RngCore) -> Vector {
        Init::Uniform(1.0)
            .draw(self.dim(), rng)
            .expect("problems have at least one parameter")
    }
}

pub(crate) fn check_theta(theta: &Vector, dim: usize) -> Result<(), ProblemError> {
    if theta.dim() != dim {
        return Err(MathError::DimensionMismatch {
            left: theta.dim(),
            right: dim,
        }
        .into());
    }
    Ok(())
}

pub(crate) fn check_batch(batch: &Batch, len: usize) -> Result<(), ProblemError> {
    if batch.is_empty() {
        return Err(ProblemError::EmptyBatch);
    }
    if let Some(&index) = batch.indices().iter().find(|&&i| i >= len) {
        return Err(ProblemError::IndexOutOfRange { index, len });
    }
    Ok(())
}
