use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::math::Vector;

use super::{Batch, MinibatchSampler, Problem, ProblemError};

pub const DEFAULT_FD_STEP: f64 = 1e-6;

/// Examples per batch when checking data-backed problems at random points.
const CHECK_BATCH: usize = 32;
const MAX_SMOOTH_ATTEMPTS: usize = 1000;

/// Worst disagreement between analytic and finite-difference gradients.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GradCheckReport {
    /// `max_i |fd − g| / (|g| + 1e-12)`.
    pub max_relative: f64,
    /// `max_i |fd − g|`.
    pub max_absolute: f64,
    /// `|g|` at the coordinate with the worst relative error.
    pub grad_at_worst: f64,
}

impl GradCheckReport {
    fn merge(self, other: Self) -> Self {
        let worst = if other.max_relative > self.max_relative {
            other
        } else {
            self
        };
        Self {
            max_absolute: self.max_absolute.max(other.max_absolute),
            ..worst
        }
    }
}

/// Largest relative disagreement between the analytic gradient and central
/// differences `(f(θ + h eᵢ) − f(θ − h eᵢ)) / 2h`, measured per coordinate
/// as `|fd − g| / (|g| + 1e-12)`.
pub fn grad_check(
    problem: &dyn Problem,
    theta: &Vector,
    batch: &Batch,
    h: f64,
) -> Result<f64, ProblemError> {
    Ok(grad_check_report(problem, theta, batch, h)?.max_relative)
}

/// [`grad_check`] with the absolute error alongside.
pub fn grad_check_report(
    problem: &dyn Problem,
    theta: &Vector,
    batch: &Batch,
    h: f64,
) -> Result<GradCheckReport, ProblemError> {
    if h.is_nan() || h <= 0.0 {
        return Err(super::invalid(
            "finite-difference step",
            format!("{h} is not > 0"),
        ));
    }
    let analytic = problem.grad(theta, batch)?;
    let mut probe = theta.clone();
    let mut report = GradCheckReport::default();
    for i in 0..theta.dim() {
        let orig = probe[i];
        probe[i] = orig + h;
        let up = problem.loss(&probe, batch)?;
        probe[i] = orig - h;
        let down = problem.loss(&probe, batch)?;
        probe[i] = orig;
        let fd = (up - down) / (2.0 * h);
        let abs = (fd - analytic[i]).abs();
        report = report.merge(GradCheckReport {
            max_relative: abs / (analytic[i].abs() + 1e-12),
            max_absolute: abs,
            grad_at_worst: analytic[i].abs(),
        });
    }
    Ok(report)
}

/// Runs [`grad_check`] at `trials` seeded random points and returns the
/// worst error.
///
/// Points come from [`Problem::check_point`]; data-backed problems are
/// checked on a random batch of up to 32 examples. Points where the problem
/// reports a kink within reach ([`Problem::is_smooth_at`]) are redrawn.
pub fn random_grad_check(
    problem: &dyn Problem,
    trials: usize,
    seed: u64,
    h: f64,
) -> Result<f64, ProblemError> {
    Ok(random_grad_check_report(problem, trials, seed, h)?.max_relative)
}

/// [`random_grad_check`] with the absolute error alongside.
pub fn random_grad_check_report(
    problem: &dyn Problem,
    trials: usize,
    seed: u64,
    h: f64,
) -> Result<GradCheckReport, ProblemError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sampler = problem
        .train_size()
        .map(|n| MinibatchSampler::new(n, n.min(CHECK_BATCH)))
        .transpose()?;
    let mut report = GradCheckReport::default();
    for _ in 0..trials {
        let batch = match &sampler {
            Some(s) => s.epoch(&mut rng).swap_remove(0),
            None => problem.full_batch(),
        };
        let theta = (0..MAX_SMOOTH_ATTEMPTS)
            .map(|_| problem.check_point(&mut rng))
            .find(|theta| problem.is_smooth_at(theta, &batch))
            .ok_or(ProblemError::NoSmoothPoint(MAX_SMOOTH_ATTEMPTS))?;
        report = report.merge(grad_check_report(problem, &theta, &batch, h)?);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{Quadratic, Rosenbrock};

    /// `f(θ) = c·θ`.
    struct Linear(Vec<f64>);

    impl Problem for Linear {
        fn name(&self) -> &str {
            "linear"
        }
        fn dim(&self) -> usize {
            self.0.len()
        }
        fn train_size(&self) -> Option<usize> {
            None
        }
        fn loss(&self, theta: &Vector, _: &Batch) -> Result<f64, ProblemError> {
            Ok(theta.iter().zip(&self.0).map(|(a, b)| a * b).sum())
        }
        fn grad(&self, _: &Vector, _: &Batch) -> Result<Vector, ProblemError> {
            Ok(Vector::from_slice(&self.0)?)
        }
    }

    #[test]
    fn quadratic_is_near_exact() {
        let q = Quadratic::new(3, 10.0).unwrap();
        let theta = Vector::from_slice(&[0.7, -1.3, 0.9]).unwrap();
        let err = grad_check(&q, &theta, &q.full_batch(), DEFAULT_FD_STEP).unwrap();
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn rosenbrock_at_half() {
        let theta = Vector::from_slice(&[0.5, 0.5]).unwrap();
        let err = grad_check(&Rosenbrock, &theta, &Batch::all(0), DEFAULT_FD_STEP).unwrap();
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn linear_is_exact_for_any_small_step() {
        let p = Linear(vec![2.0, -0.5, 3.0]);
        let theta = Vector::from_slice(&[0.25, 1.0, -0.5]).unwrap();
        for h in [1e-3, 1e-4, 1e-5] {
            let err = grad_check(&p, &theta, &Batch::all(0), h).unwrap();
            assert!(err < 1e-10, "h = {h}: {err}");
        }
    }

    #[test]
    fn detects_a_wrong_gradient() {
        struct Wrong;
        impl Problem for Wrong {
            fn name(&self) -> &str {
                "wrong"
            }
            fn dim(&self) -> usize {
                1
            }
            fn train_size(&self) -> Option<usize> {
                None
            }
            fn loss(&self, t: &Vector, _: &Batch) -> Result<f64, ProblemError> {
                Ok(t[0] * t[0])
            }
            fn grad(&self, t: &Vector, _: &Batch) -> Result<Vector, ProblemError> {
                Ok(Vector::from_slice(&[t[0]])?)
            }
        }
        let theta = Vector::from_slice(&[1.0]).unwrap();
        assert!(grad_check(&Wrong, &theta, &Batch::all(0), 1e-6).unwrap() > 0.9);
    }

    #[test]
    fn rejects_non_positive_step() {
        let q = Quadratic::new(1, 1.0).unwrap();
        let theta = Vector::from_slice(&[1.0]).unwrap();
        assert!(grad_check(&q, &theta, &q.full_batch(), 0.0).is_err());
    }
}
