use crate::math::Vector;

use super::{check_theta, invalid, Batch, Problem, ProblemError};

/// `f(θ) = ½ Σ λᵢ θᵢ²` with `λ` log-spaced over `[1, condition_number]`.
///
/// The Hessian is `diag(λ)`, so its condition number is exactly
/// `condition_number`. Deterministic: the batch is ignored.
#[derive(Debug, Clone)]
pub struct Quadratic {
    curvature: Vec<f64>,
}

impl Quadratic {
    pub fn new(dim: usize, condition_number: f64) -> Result<Self, ProblemError> {
        if dim == 0 {
            return Err(invalid("quadratic", "dim must be at least 1"));
        }
        if !(condition_number >= 1.0 && condition_number.is_finite()) {
            return Err(invalid(
                "quadratic",
                "condition number must be finite and >= 1",
            ));
        }
        let curvature = (0..dim)
            .map(|i| {
                if dim == 1 {
                    1.0
                } else {
                    condition_number.powf(i as f64 / (dim - 1) as f64)
                }
            })
            .collect();
        Ok(Self { curvature })
    }

    pub fn curvature(&self) -> &[f64] {
        &self.curvature
    }
}

impl Problem for Quadratic {
    fn name(&self) -> &str {
        "quadratic"
    }

    fn dim(&self) -> usize {
        self.curvature.len()
    }

    fn train_size(&self) -> Option<usize> {
        None
    }

    fn loss(&self, theta: &Vector, _batch: &Batch) -> Result<f64, ProblemError> {
        check_theta(theta, self.dim())?;
        Ok(0.5
            * theta
                .iter()
                .zip(&self.curvature)
                .map(|(t, l)| l * t * t)
                .sum::<f64>())
    }

    fn grad(&self, theta: &Vector, _batch: &Batch) -> Result<Vector, ProblemError> {
        check_theta(theta, self.dim())?;
        Ok(Vector::new(
            theta
                .iter()
                .zip(&self.curvature)
                .map(|(t, l)| l * t)
                .collect(),
        )?)
    }
}
