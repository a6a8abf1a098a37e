//! First-order update rules behind a uniform interface.
//!
//! Each rule is a free function taking the parameters, the gradient (or, for
//! Nesterov momentum, a gradient evaluator), the hyperparameters and the
//! mutable [`OptimizerState`]. [`Optimizer`] bundles a state with its
//! hyperparameters and dispatches on the [`Algorithm`] tag.
//!
//! The learning rate used by a step is always `hyper.epsilon`; schedules are
//! applied by the caller, which passes a copy of the hyperparameters with the
//! scheduled rate filled in.

mod rules;
mod state;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::{MathError, Vector};

pub use rules::{
    adadelta, adagrad, adam, adamax, amsgrad, momentum, nadam, nesterov, rmsprop, sgd,
};
pub use state::OptimizerState;

/// Boxed error returned by a gradient evaluator.
pub type EvalError = Box<dyn std::error::Error + Send + Sync>;

#[derive(Debug, Error)]
pub enum OptimError {
    #[error(transparent)]
    Math(#[from] MathError),
    #[error("non-finite gradient entry at index {index}: {value}")]
    NonFiniteGradient { index: usize, value: f64 },
    #[error("non-finite interim point entry at index {index}: {value}")]
    NonFiniteInterim { index: usize, value: f64 },
    #[error("state was built for {state}, but a {requested} step was requested")]
    WrongState {
        state: Algorithm,
        requested: Algorithm,
    },
    #[error("gradient evaluation failed: {0}")]
    Evaluation(#[source] EvalError),
    #[error("invalid hyperparameter {name} = {value}: {reason}")]
    InvalidHyperParam {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("unknown algorithm `{0}`")]
    UnknownAlgorithm(String),
}

/// The ten supported update rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Sgd,
    Momentum,
    Nesterov,
    AdaGrad,
    AdaDelta,
    RmsProp,
    Adam,
    AdaMax,
    Nadam,
    AmsGrad,
}

impl Algorithm {
    pub const ALL: [Algorithm; 10] = [
        Algorithm::Sgd,
        Algorithm::Momentum,
        Algorithm::Nesterov,
        Algorithm::AdaGrad,
        Algorithm::AdaDelta,
        Algorithm::RmsProp,
        Algorithm::Adam,
        Algorithm::AdaMax,
        Algorithm::Nadam,
        Algorithm::AmsGrad,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Sgd => "sgd",
            Algorithm::Momentum => "momentum",
            Algorithm::Nesterov => "nesterov",
            Algorithm::AdaGrad => "adagrad",
            Algorithm::AdaDelta => "adadelta",
            Algorithm::RmsProp => "rmsprop",
            Algorithm::Adam => "adam",
            Algorithm::AdaMax => "adamax",
            Algorithm::Nadam => "nadam",
            Algorithm::AmsGrad => "amsgrad",
        }
    }

    /// Plain SGD and its two momentum variants.
    pub fn is_sgd_family(self) -> bool {
        matches!(
            self,
            Algorithm::Sgd | Algorithm::Momentum | Algorithm::Nesterov
        )
    }

    /// The hyperparameters this rule actually reads.
    pub fn uses(self) -> &'static [HyperParam] {
        use HyperParam::*;
        match self {
            Algorithm::Sgd => &[Epsilon],
            Algorithm::Momentum | Algorithm::Nesterov => &[Epsilon, Alpha],
            Algorithm::AdaGrad => &[Epsilon, Delta],
            Algorithm::AdaDelta => &[Rho, Delta],
            Algorithm::RmsProp => &[Epsilon, Rho, Delta],
            Algorithm::Adam | Algorithm::Nadam | Algorithm::AmsGrad => {
                &[Epsilon, Rho1, Rho2, Delta]
            }
            Algorithm::AdaMax => &[Epsilon, Rho1, Rho2],
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = OptimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| OptimError::UnknownAlgorithm(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HyperParam {
    Epsilon,
    Alpha,
    Rho,
    Rho1,
    Rho2,
    Delta,
}

impl HyperParam {
    pub fn name(self) -> &'static str {
        match self {
            HyperParam::Epsilon => "epsilon",
            HyperParam::Alpha => "alpha",
            HyperParam::Rho => "rho",
            HyperParam::Rho1 => "rho1",
            HyperParam::Rho2 => "rho2",
            HyperParam::Delta => "delta",
        }
    }
}

/// Hyperparameters shared by all rules; each rule reads only the subset
/// listed by [`Algorithm::uses`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    /// Global learning rate.
    pub epsilon: f64,
    /// Momentum coefficient for the SGD variants.
    pub alpha: f64,
    /// Decay of the squared-gradient average (AdaDelta, RMSProp).
    pub rho: f64,
    /// First-moment decay.
    pub rho1: f64,
    /// Second-moment decay.
    pub rho2: f64,
    /// Numerical-stability constant.
    pub delta: f64,
}

impl HyperParams {
    /// Defaults for `algorithm`: ε = 0.01 for the SGD family and 0.001 for
    /// the adaptive rules, α = 0.9, ρ = 0.95 for AdaDelta and 0.9 for
    /// RMSProp, ρ₁ = 0.9, ρ₂ = 0.999. δ is 1e-6 for AdaDelta and Nadam and
    /// 1e-8 elsewhere.
    pub fn defaults_for(algorithm: Algorithm) -> Self {
        let epsilon = if algorithm.is_sgd_family() {
            0.01
        } else {
            0.001
        };
        let rho = match algorithm {
            Algorithm::RmsProp => 0.9,
            _ => 0.95,
        };
        let delta = match algorithm {
            Algorithm::AdaDelta | Algorithm::Nadam => 1e-6,
            _ => 1e-8,
        };
        Self {
            epsilon,
            alpha: 0.9,
            rho,
            rho1: 0.9,
            rho2: 0.999,
            delta,
        }
    }

    pub fn get(&self, param: HyperParam) -> f64 {
        match param {
            HyperParam::Epsilon => self.epsilon,
            HyperParam::Alpha => self.alpha,
            HyperParam::Rho => self.rho,
            HyperParam::Rho1 => self.rho1,
            HyperParam::Rho2 => self.rho2,
            HyperParam::Delta => self.delta,
        }
    }

    pub fn with_epsilon(self, epsilon: f64) -> Self {
        Self { epsilon, ..self }
    }

    /// Checks every field against its admissible range.
    pub fn validate(&self) -> Result<(), OptimError> {
        let positive = |name, value: f64| {
            if value.is_finite() && value > 0.0 {
                Ok(())
            } else {
                Err(OptimError::InvalidHyperParam {
                    name,
                    value,
                    reason: "must be finite and > 0",
                })
            }
        };
        let unit = |name, value: f64| {
            if (0.0..1.0).contains(&value) {
                Ok(())
            } else {
                Err(OptimError::InvalidHyperParam {
                    name,
                    value,
                    reason: "must lie in [0, 1)",
                })
            }
        };
        positive("epsilon", self.epsilon)?;
        unit("alpha", self.alpha)?;
        unit("rho", self.rho)?;
        unit("rho1", self.rho1)?;
        unit("rho2", self.rho2)?;
        positive("delta", self.delta)
    }
}

/// Summary of a per-coordinate effective learning rate `|Δθᵢ / gᵢ|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveLrStats {
    pub min: f64,
    pub mean: f64,
    pub max: f64,
}

/// What a single step did.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    /// `‖Δθ‖₂`.
    pub update_norm: f64,
    /// `‖g‖₂` of the gradient the step consumed. For Nesterov momentum this is
    /// the gradient at the interim point.
    pub grad_norm: f64,
    /// `None` when no coordinate had `|gᵢ| > EFFECTIVE_LR_THRESHOLD`.
    pub effective_lr: Option<EffectiveLrStats>,
}

/// Coordinates with `|gᵢ|` at or below this are left out of the effective
/// learning-rate summary.
pub const EFFECTIVE_LR_THRESHOLD: f64 = 1e-12;

impl StepReport {
    pub(crate) fn new(update: &[f64], grad: &[f64]) -> Self {
        let mut count = 0usize;
        let mut sum = 0.0;
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for (&d, &g) in update.iter().zip(grad) {
            if g.abs() > EFFECTIVE_LR_THRESHOLD {
                let lr = (d / g).abs();
                count += 1;
                sum += lr;
                min = min.min(lr);
                max = max.max(lr);
            }
        }
        let effective_lr = (count > 0).then(|| EffectiveLrStats {
            min,
            mean: sum / count as f64,
            max,
        });
        Self {
            update_norm: crate::math::l2_norm(update),
            grad_norm: crate::math::l2_norm(grad),
            effective_lr,
        }
    }
}

/// A rule's state together with its base hyperparameters.
#[derive(Debug, Clone)]
pub struct Optimizer {
    state: OptimizerState,
    hyper: HyperParams,
}

impl Optimizer {
    pub fn new(algorithm: Algorithm, hyper: HyperParams, dim: usize) -> Result<Self, OptimError> {
        hyper.validate()?;
        Ok(Self {
            state: OptimizerState::new(algorithm, dim)?,
            hyper,
        })
    }

    pub fn with_defaults(algorithm: Algorithm, dim: usize) -> Result<Self, OptimError> {
        Self::new(algorithm, HyperParams::defaults_for(algorithm), dim)
    }

    pub fn algorithm(&self) -> Algorithm {
        self.state.kind()
    }

    pub fn hyper(&self) -> &HyperParams {
        &self.hyper
    }

    pub fn state(&self) -> &OptimizerState {
        &self.state
    }

    /// Steps with the base learning rate and a precomputed gradient.
    ///
    /// For Nesterov momentum the gradient is treated as independent of the
    /// evaluation point; use [`Optimizer::step_with`] to evaluate it at the
    /// interim point.
    pub fn step(&mut self, theta: &mut Vector, grad: &Vector) -> Result<StepReport, OptimError> {
        let lr = self.hyper.epsilon;
        self.step_with(theta, lr, |_| Ok::<_, EvalError>(grad.clone()))
    }

    /// Steps with learning rate `lr`, calling `grad_at` for the gradient.
    ///
    /// `grad_at` is evaluated at `theta` for every rule except Nesterov
    /// momentum, where it is evaluated at `theta + alpha * v`.
    pub fn step_with<F, E>(
        &mut self,
        theta: &mut Vector,
        lr: f64,
        grad_at: F,
    ) -> Result<StepReport, OptimError>
    where
        F: FnOnce(&Vector) -> Result<Vector, E>,
        E: Into<EvalError>,
    {
        let hyper = self.hyper.with_epsilon(lr);
        let state = &mut self.state;
        if state.kind() == Algorithm::Nesterov {
            return nesterov(theta, grad_at, &hyper, state);
        }
        let grad = grad_at(theta).map_err(|e| OptimError::Evaluation(e.into()))?;
        match state.kind() {
            Algorithm::Sgd => sgd(theta, &grad, &hyper),
            Algorithm::Momentum => momentum(theta, &grad, &hyper, state),
            Algorithm::Nesterov => unreachable!(),
            Algorithm::AdaGrad => adagrad(theta, &grad, &hyper, state),
            Algorithm::AdaDelta => adadelta(theta, &grad, &hyper, state),
            Algorithm::RmsProp => rmsprop(theta, &grad, &hyper, state),
            Algorithm::Adam => adam(theta, &grad, &hyper, state),
            Algorithm::AdaMax => adamax(theta, &grad, &hyper, state),
            Algorithm::Nadam => nadam(theta, &grad, &hyper, state),
            Algorithm::AmsGrad => amsgrad(theta, &grad, &hyper, state),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_names_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
        }
        let err = "adamx".parse::<Algorithm>().unwrap_err();
        assert!(err.to_string().contains("adamx"));
    }

    #[test]
    fn defaults() {
        let sgd = HyperParams::defaults_for(Algorithm::Sgd);
        assert_eq!(sgd.epsilon, 0.01);
        assert_eq!(sgd.alpha, 0.9);
        let adadelta = HyperParams::defaults_for(Algorithm::AdaDelta);
        assert_eq!(adadelta.rho, 0.95);
        assert_eq!(adadelta.delta, 1e-6);
        let adam = HyperParams::defaults_for(Algorithm::Adam);
        assert_eq!(
            (adam.epsilon, adam.rho1, adam.rho2, adam.delta),
            (0.001, 0.9, 0.999, 1e-8)
        );
        assert_eq!(HyperParams::defaults_for(Algorithm::RmsProp).rho, 0.9);
        assert_eq!(HyperParams::defaults_for(Algorithm::Nadam).delta, 1e-6);
        for a in Algorithm::ALL {
            HyperParams::defaults_for(a).validate().unwrap();
        }
    }

    #[test]
    fn validation_rejects_out_of_range() {
        let base = HyperParams::defaults_for(Algorithm::Adam);
        assert!(HyperParams { rho1: 1.0, ..base }.validate().is_err());
        assert!(HyperParams { delta: 0.0, ..base }.validate().is_err());
        assert!(HyperParams {
            epsilon: -1.0,
            ..base
        }
        .validate()
        .is_err());
        assert!(HyperParams {
            alpha: f64::NAN,
            ..base
        }
        .validate()
        .is_err());
    }

    #[test]
    fn adadelta_does_not_use_epsilon() {
        assert!(!Algorithm::AdaDelta.uses().contains(&HyperParam::Epsilon));
    }

    #[test]
    fn report_effective_lr() {
        let r = StepReport::new(&[-0.1, 0.0, 0.3], &[1.0, 0.0, -1.0]);
        let lr = r.effective_lr.unwrap();
        assert_eq!((lr.min, lr.max), (0.1, 0.3));
        assert!((lr.mean - 0.2).abs() < 1e-15);
        assert!(StepReport::new(&[0.0], &[0.0]).effective_lr.is_none());
    }

    #[test]
    fn optimizer_dispatches_nesterov_at_interim_point() {
        let mut opt = Optimizer::with_defaults(Algorithm::Nesterov, 1).unwrap();
        let mut theta = Vector::from_slice(&[1.0]).unwrap();
        // f = ½θ², so the gradient is the evaluation point itself.
        for _ in 0..3 {
            opt.step_with(&mut theta, 0.01, |p| Ok::<_, EvalError>(p.clone()))
                .unwrap();
        }
        let mut reference = Vector::from_slice(&[1.0]).unwrap();
        let mut state = OptimizerState::new(Algorithm::Nesterov, 1).unwrap();
        let h = HyperParams::defaults_for(Algorithm::Nesterov);
        for _ in 0..3 {
            nesterov(
                &mut reference,
                |p| Ok::<_, EvalError>(p.clone()),
                &h,
                &mut state,
            )
            .unwrap();
        }
        assert_eq!(theta, reference);
    }

    #[test]
    fn evaluator_error_propagates() {
        let mut opt = Optimizer::with_defaults(Algorithm::Adam, 1).unwrap();
        let mut theta = Vector::zeros(1).unwrap();
        let err = opt
            .step_with(&mut theta, 0.1, |_| Err::<Vector, EvalError>("boom".into()))
            .unwrap_err();
        assert!(matches!(err, OptimError::Evaluation(_)));
    }
}
