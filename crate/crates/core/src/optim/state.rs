use crate::math::Vector;

use super::{Algorithm, OptimError};

/// Mutable accumulators of one update rule.
///
/// Only the buffers the rule reads are allocated, all zero-filled, and the
/// step counter starts at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    kind: Algorithm,
    dim: usize,
    pub(super) t: u64,
    /// Velocity `v` (momentum, Nesterov).
    pub(super) velocity: Option<Vector>,
    /// `r` for AdaGrad and RMSProp, `E[g²]` for AdaDelta.
    pub(super) accum: Option<Vector>,
    /// `E[Δθ²]` for AdaDelta.
    pub(super) accum_update: Option<Vector>,
    pub(super) m: Option<Vector>,
    pub(super) u: Option<Vector>,
    /// Running maximum of `u` (AMSGrad).
    pub(super) u_hat: Option<Vector>,
    /// Exponentially weighted infinity norm (AdaMax).
    pub(super) gamma: Option<Vector>,
}

impl OptimizerState {
    pub fn new(kind: Algorithm, dim: usize) -> Result<Self, OptimError> {
        let zeros = || Vector::zeros(dim).map(Some);
        let mut state = Self {
            kind,
            dim,
            t: 0,
            velocity: None,
            accum: None,
            accum_update: None,
            m: None,
            u: None,
            u_hat: None,
            gamma: None,
        };
        // Surface the dimension error even for stateless SGD.
        Vector::zeros(dim)?;
        match kind {
            Algorithm::Sgd => {}
            Algorithm::Momentum | Algorithm::Nesterov => state.velocity = zeros()?,
            Algorithm::AdaGrad | Algorithm::RmsProp => state.accum = zeros()?,
            Algorithm::AdaDelta => {
                state.accum = zeros()?;
                state.accum_update = zeros()?;
            }
            Algorithm::Adam | Algorithm::Nadam => {
                state.m = zeros()?;
                state.u = zeros()?;
            }
            Algorithm::AdaMax => {
                state.m = zeros()?;
                state.gamma = zeros()?;
            }
            Algorithm::AmsGrad => {
                state.m = zeros()?;
                state.u = zeros()?;
                state.u_hat = zeros()?;
            }
        }
        Ok(state)
    }

    pub fn kind(&self) -> Algorithm {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of steps taken so far.
    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn velocity(&self) -> Option<&Vector> {
        self.velocity.as_ref()
    }

    pub fn accum(&self) -> Option<&Vector> {
        self.accum.as_ref()
    }

    pub fn accum_update(&self) -> Option<&Vector> {
        self.accum_update.as_ref()
    }

    pub fn m(&self) -> Option<&Vector> {
        self.m.as_ref()
    }

    pub fn u(&self) -> Option<&Vector> {
        self.u.as_ref()
    }

    pub fn u_hat(&self) -> Option<&Vector> {
        self.u_hat.as_ref()
    }

    pub fn gamma(&self) -> Option<&Vector> {
        self.gamma.as_ref()
    }

    /// Overwrites the velocity, e.g. to start from a known `v₀`.
    pub fn set_velocity(&mut self, velocity: Vector) -> Result<(), OptimError> {
        match &mut self.velocity {
            Some(v) => {
                v.check_dim(&velocity)?;
                *v = velocity;
                Ok(())
            }
            None => Err(OptimError::WrongState {
                state: self.kind,
                requested: Algorithm::Momentum,
            }),
        }
    }

    pub(super) fn expect(&self, requested: Algorithm) -> Result<(), OptimError> {
        if self.kind != requested {
            return Err(OptimError::WrongState {
                state: self.kind,
                requested,
            });
        }
        Ok(())
    }
}
