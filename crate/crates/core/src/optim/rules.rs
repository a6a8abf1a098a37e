//! The ten update rules.
//!
//! Every rule works coordinate by coordinate, so running a `d`-dimensional
//! problem is the same as running `d` independent scalar problems. Where a
//! rule adds the stability constant δ, its placement relative to the square
//! root differs between rules and is kept as each rule defines it.

use crate::math::{MathError, Vector};

use super::{Algorithm, EvalError, HyperParams, OptimError, OptimizerState, StepReport};

fn check_inputs(theta: &Vector, grad: &Vector) -> Result<(), OptimError> {
    theta.check_dim(grad)?;
    if let Some(index) = grad.first_non_finite() {
        return Err(OptimError::NonFiniteGradient {
            index,
            value: grad[index],
        });
    }
    Ok(())
}

fn begin(
    kind: Algorithm,
    theta: &Vector,
    grad: &Vector,
    state: &mut OptimizerState,
) -> Result<(), OptimError> {
    state.expect(kind)?;
    if theta.dim() != state.dim() {
        return Err(MathError::DimensionMismatch {
            left: theta.dim(),
            right: state.dim(),
        }
        .into());
    }
    check_inputs(theta, grad)?;
    state.t += 1;
    Ok(())
}

fn apply(theta: &mut Vector, update: &[f64], grad: &Vector) -> StepReport {
    for (p, d) in theta.as_mut_slice().iter_mut().zip(update) {
        *p += d;
    }
    StepReport::new(update, grad.as_slice())
}

/// `ρᵗ` for a step counter.
#[inline]
fn pow_t(rho: f64, t: u64) -> f64 {
    rho.powf(t as f64)
}

macro_rules! buf {
    ($state:ident . $field:ident) => {
        $state
            .$field
            .as_mut()
            .expect(concat!(stringify!($field), " is allocated for this rule"))
            .as_mut_slice()
    };
}

/// Plain SGD: `θ ← θ − ε g`. Stateless.
pub fn sgd(
    theta: &mut Vector,
    grad: &Vector,
    hyper: &HyperParams,
) -> Result<StepReport, OptimError> {
    check_inputs(theta, grad)?;
    let eps = hyper.epsilon;
    let update: Vec<f64> = grad.iter().map(|g| -(eps * g)).collect();
    Ok(apply(theta, &update, grad))
}

/// Classical momentum: `v ← αv − εg`, then `θ ← θ + v`.
pub fn momentum(
    theta: &mut Vector,
    grad: &Vector,
    hyper: &HyperParams,
    state: &mut OptimizerState,
) -> Result<StepReport, OptimError> {
    begin(Algorithm::Momentum, theta, grad, state)?;
    let v = buf!(state.velocity);
    for (vi, g) in v.iter_mut().zip(grad) {
        *vi = hyper.alpha * *vi - hyper.epsilon * g;
    }
    let update = v.to_vec();
    Ok(apply(theta, &update, grad))
}

/// Nesterov momentum.
///
/// The gradient is taken at the interim point `θ̃ = θ + αv`; then
/// `v ← αv − εg` and `θ ← θ + v`. `grad_at` receives `θ̃` and must evaluate
/// on the same minibatch as the rest of the step.
pub fn nesterov<F, E>(
    theta: &mut Vector,
    grad_at: F,
    hyper: &HyperParams,
    state: &mut OptimizerState,
) -> Result<StepReport, OptimError>
where
    F: FnOnce(&Vector) -> Result<Vector, E>,
    E: Into<EvalError>,
{
    state.expect(Algorithm::Nesterov)?;
    let velocity = state.velocity.as_ref().expect("velocity is allocated");
    let interim = theta.add(&velocity.scale(hyper.alpha))?;
    if let Some(index) = interim.first_non_finite() {
        return Err(OptimError::NonFiniteInterim {
            index,
            value: interim[index],
        });
    }
    let grad = grad_at(&interim).map_err(|e| OptimError::Evaluation(e.into()))?;
    begin(Algorithm::Nesterov, theta, &grad, state)?;
    let v = buf!(state.velocity);
    for (vi, g) in v.iter_mut().zip(&grad) {
        *vi = hyper.alpha * *vi - hyper.epsilon * g;
    }
    let update = v.to_vec();
    Ok(apply(theta, &update, &grad))
}

/// AdaGrad: `r ← r + g⊙g`, `Δθ = −ε/(δ + √r) ⊙ g`. δ sits outside the root.
pub fn adagrad(
    theta: &mut Vector,
    grad: &Vector,
    hyper: &HyperParams,
    state: &mut OptimizerState,
) -> Result<StepReport, OptimError> {
    begin(Algorithm::AdaGrad, theta, grad, state)?;
    let r = buf!(state.accum);
    let update: Vec<f64> = r
        .iter_mut()
        .zip(grad)
        .map(|(ri, &g)| {
            *ri += g * g;
            -(hyper.epsilon / (hyper.delta + ri.sqrt())) * g
        })
        .collect();
    Ok(apply(theta, &update, grad))
}

/// AdaDelta. No learning rate: the step is scaled by the ratio of the RMS
/// of past updates to the RMS of past gradients, both with δ under the root.
///
/// The update average is refreshed only after `Δθ` has been computed from
/// its previous value.
pub fn adadelta(
    theta: &mut Vector,
    grad: &Vector,
    hyper: &HyperParams,
    state: &mut OptimizerState,
) -> Result<StepReport, OptimError> {
    begin(Algorithm::AdaDelta, theta, grad, state)?;
    let rho = hyper.rho;
    let delta = hyper.delta;
    let mut update = Vec::with_capacity(grad.dim());
    {
        let eg2 = buf!(state.accum);
        for (e, &g) in eg2.iter_mut().zip(grad) {
            *e = rho * *e + (1.0 - rho) * g * g;
        }
    }
    let eg2 = state.accum.as_ref().expect("accum is allocated").as_slice();
    let edx2 = state
        .accum_update
        .as_mut()
        .expect("accum_update is allocated")
        .as_mut_slice();
    for ((ex, &e), &g) in edx2.iter_mut().zip(eg2).zip(grad) {
        let rms_g = (e + delta).sqrt();
        let rms_dx = (*ex + delta).sqrt();
        let d = -(rms_dx / rms_g) * g;
        *ex = rho * *ex + (1.0 - rho) * d * d;
        update.push(d);
    }
    Ok(apply(theta, &update, grad))
}

/// RMSProp: `r ← ρr + (1−ρ) g⊙g`, `Δθ = −ε/√(δ + r) ⊙ g`. δ sits inside the
/// root.
pub fn rmsprop(
    theta: &mut Vector,
    grad: &Vector,
    hyper: &HyperParams,
    state: &mut OptimizerState,
) -> Result<StepReport, OptimError> {
    begin(Algorithm::RmsProp, theta, grad, state)?;
    let rho = hyper.rho;
    let r = buf!(state.accum);
    let update: Vec<f64> = r
        .iter_mut()
        .zip(grad)
        .map(|(ri, &g)| {
            *ri = rho * *ri + (1.0 - rho) * g * g;
            -(hyper.epsilon / (hyper.delta + *ri).sqrt()) * g
        })
        .collect();
    Ok(apply(theta, &update, grad))
}

/// Adam with bias-corrected moments; `Δθ = −ε m̂/(√û + δ)`, δ outside the
/// root.
pub fn adam(
    theta: &mut Vector,
    grad: &Vector,
    hyper: &HyperParams,
    state: &mut OptimizerState,
) -> Result<StepReport, OptimError> {
    begin(Algorithm::Adam, theta, grad, state)?;
    let t = state.t;
    debug_assert!(t >= 1);
    let (rho1, rho2) = (hyper.rho1, hyper.rho2);
    let c1 = 1.0 - pow_t(rho1, t);
    let c2 = 1.0 - pow_t(rho2, t);
    let mut m = state.m.take().expect("m is allocated");
    let u = buf!(state.u);
    let update: Vec<f64> = m
        .as_mut_slice()
        .iter_mut()
        .zip(u.iter_mut())
        .zip(grad)
        .map(|((mi, ui), &g)| {
            *mi = rho1 * *mi + (1.0 - rho1) * g;
            *ui = rho2 * *ui + (1.0 - rho2) * g * g;
            let m_hat = *mi / c1;
            let u_hat = *ui / c2;
            -hyper.epsilon * m_hat / (u_hat.sqrt() + hyper.delta)
        })
        .collect();
    state.m = Some(m);
    Ok(apply(theta, &update, grad))
}

/// AdaMax: `γ ← max(ρ₂γ, |g|)`, `θ ← θ − (ε/(1−ρ₁ᵗ)) m/γ`.
///
/// No δ and no second-moment correction. A coordinate whose γ is still 0
/// (every gradient so far exactly 0 there) does not move.
pub fn adamax(
    theta: &mut Vector,
    grad: &Vector,
    hyper: &HyperParams,
    state: &mut OptimizerState,
) -> Result<StepReport, OptimError> {
    begin(Algorithm::AdaMax, theta, grad, state)?;
    let rho1 = hyper.rho1;
    let step = hyper.epsilon / (1.0 - pow_t(rho1, state.t));
    let mut m = state.m.take().expect("m is allocated");
    let gamma = buf!(state.gamma);
    let update: Vec<f64> = m
        .as_mut_slice()
        .iter_mut()
        .zip(gamma.iter_mut())
        .zip(grad)
        .map(|((mi, gi), &g)| {
            *mi = rho1 * *mi + (1.0 - rho1) * g;
            *gi = (hyper.rho2 * *gi).max(g.abs());
            if *gi == 0.0 {
                0.0
            } else {
                -step * *mi / *gi
            }
        })
        .collect();
    state.m = Some(m);
    Ok(apply(theta, &update, grad))
}

/// Nadam with a constant momentum schedule `ρₜ = ρ₁`.
///
/// `m̂ = ρ₁m/(1−ρ₁ᵗ⁺¹) + (1−ρ₁)g/(1−ρ₁ᵗ)`, `û = ρ₂u/(1−ρ₂ᵗ)` and
/// `θ ← θ − ε m̂/√(û + δ)`, δ inside the root.
pub fn nadam(
    theta: &mut Vector,
    grad: &Vector,
    hyper: &HyperParams,
    state: &mut OptimizerState,
) -> Result<StepReport, OptimError> {
    begin(Algorithm::Nadam, theta, grad, state)?;
    let t = state.t;
    let (rho1, rho2) = (hyper.rho1, hyper.rho2);
    let c1_next = 1.0 - pow_t(rho1, t + 1);
    let c1 = 1.0 - pow_t(rho1, t);
    let c2 = 1.0 - pow_t(rho2, t);
    let mut m = state.m.take().expect("m is allocated");
    let u = buf!(state.u);
    let update: Vec<f64> = m
        .as_mut_slice()
        .iter_mut()
        .zip(u.iter_mut())
        .zip(grad)
        .map(|((mi, ui), &g)| {
            *mi = rho1 * *mi + (1.0 - rho1) * g;
            *ui = rho2 * *ui + (1.0 - rho2) * g * g;
            let m_hat = rho1 * *mi / c1_next + (1.0 - rho1) * g / c1;
            let u_hat = rho2 * *ui / c2;
            -hyper.epsilon * m_hat / (u_hat + hyper.delta).sqrt()
        })
        .collect();
    state.m = Some(m);
    Ok(apply(theta, &update, grad))
}

/// AMSGrad without bias correction and with an identity projection:
/// `û ← max(û, u)`, `θ ← θ − ε m/√û`.
///
/// The divisor is `max(√û, δ)`, which only matters while `û < δ²`.
pub fn amsgrad(
    theta: &mut Vector,
    grad: &Vector,
    hyper: &HyperParams,
    state: &mut OptimizerState,
) -> Result<StepReport, OptimError> {
    begin(Algorithm::AmsGrad, theta, grad, state)?;
    let (rho1, rho2) = (hyper.rho1, hyper.rho2);
    let mut m = state.m.take().expect("m is allocated");
    let mut u = state.u.take().expect("u is allocated");
    let u_hat = buf!(state.u_hat);
    let update: Vec<f64> = m
        .as_mut_slice()
        .iter_mut()
        .zip(u.as_mut_slice().iter_mut())
        .zip(u_hat.iter_mut())
        .zip(grad)
        .map(|(((mi, ui), uh), &g)| {
            *mi = rho1 * *mi + (1.0 - rho1) * g;
            *ui = rho2 * *ui + (1.0 - rho2) * g * g;
            *uh = uh.max(*ui);
            -hyper.epsilon * *mi / uh.sqrt().max(hyper.delta)
        })
        .collect();
    state.m = Some(m);
    state.u = Some(u);
    Ok(apply(theta, &update, grad))
}
