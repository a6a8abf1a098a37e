use crate::math::Vector;

use super::{check_theta, Batch, Problem, ProblemError};

/// The two-dimensional Rosenbrock valley `(1 − x)² + 100 (y − x²)²`,
/// minimised at `(1, 1)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Rosenbrock;

impl Problem for Rosenbrock {
    fn name(&self) -> &str {
        "rosenbrock"
    }

    fn dim(&self) -> usize {
        2
    }

    fn train_size(&self) -> Option<usize> {
        None
    }

    fn loss(&self, theta: &Vector, _batch: &Batch) -> Result<f64, ProblemError> {
        check_theta(theta, 2)?;
        let (x, y) = (theta[0], theta[1]);
        Ok((1.0 - x).powi(2) + 100.0 * (y - x * x).powi(2))
    }

    fn grad(&self, theta: &Vector, _batch: &Batch) -> Result<Vector, ProblemError> {
        check_theta(theta, 2)?;
        let (x, y) = (theta[0], theta[1]);
        let valley = y - x * x;
        Ok(Vector::new(vec![
            -2.0 * (1.0 - x) - 400.0 * x * valley,
            200.0 * valley,
        ])?)
    }
}
