//! Straight-line scalar versions of the ten update rules, written directly
//! from the update formulas with plain `f64` variables. They share no code with
//! the library and serve as its reference.

#![allow(dead_code, clippy::assign_op_pattern)]

use gradkit::optim::{Algorithm, HyperParams};

#[derive(Debug, Clone)]
pub struct Oracle {
    pub alg: Algorithm,
    pub eps: f64,
    pub alpha: f64,
    pub rho: f64,
    pub rho1: f64,
    pub rho2: f64,
    pub delta: f64,
    pub theta: f64,
    pub t: i32,
    pub v: f64,
    pub r: f64,
    pub eg2: f64,
    pub edx2: f64,
    pub m: f64,
    pub u: f64,
    pub u_hat: f64,
    pub gamma: f64,
}

impl Oracle {
    pub fn new(alg: Algorithm, h: &HyperParams, theta: f64) -> Self {
        Self {
            alg,
            eps: h.epsilon,
            alpha: h.alpha,
            rho: h.rho,
            rho1: h.rho1,
            rho2: h.rho2,
            delta: h.delta,
            theta,
            t: 0,
            v: 0.0,
            r: 0.0,
            eg2: 0.0,
            edx2: 0.0,
            m: 0.0,
            u: 0.0,
            u_hat: 0.0,
            gamma: 0.0,
        }
    }

    /// One step; `grad` maps a parameter value to the gradient there.
    pub fn step(&mut self, grad: impl Fn(f64) -> f64) {
        self.t += 1;
        let t = self.t as f64;
        match self.alg {
            Algorithm::Sgd => {
                let g = grad(self.theta);
                self.theta = self.theta - self.eps * g;
            }
            Algorithm::Momentum => {
                let g = grad(self.theta);
                self.v = self.alpha * self.v - self.eps * g;
                self.theta = self.theta + self.v;
            }
            Algorithm::Nesterov => {
                let interim = self.theta + self.alpha * self.v;
                let g = grad(interim);
                self.v = self.alpha * self.v - self.eps * g;
                self.theta = self.theta + self.v;
            }
            Algorithm::AdaGrad => {
                let g = grad(self.theta);
                self.r = self.r + g * g;
                let dx = -(self.eps / (self.delta + self.r.sqrt())) * g;
                self.theta = self.theta + dx;
            }
            Algorithm::AdaDelta => {
                let g = grad(self.theta);
                self.eg2 = self.rho * self.eg2 + (1.0 - self.rho) * g * g;
                let rms_g = (self.eg2 + self.delta).sqrt();
                let rms_dx = (self.edx2 + self.delta).sqrt();
                let dx = -(rms_dx / rms_g) * g;
                self.edx2 = self.rho * self.edx2 + (1.0 - self.rho) * dx * dx;
                self.theta = self.theta + dx;
            }
            Algorithm::RmsProp => {
                let g = grad(self.theta);
                self.r = self.rho * self.r + (1.0 - self.rho) * g * g;
                let dx = -(self.eps / (self.delta + self.r).sqrt()) * g;
                self.theta = self.theta + dx;
            }
            Algorithm::Adam => {
                let g = grad(self.theta);
                self.m = self.rho1 * self.m + (1.0 - self.rho1) * g;
                self.u = self.rho2 * self.u + (1.0 - self.rho2) * g * g;
                let m_hat = self.m / (1.0 - self.rho1.powf(t));
                let u_hat = self.u / (1.0 - self.rho2.powf(t));
                let dx = -self.eps * m_hat / (u_hat.sqrt() + self.delta);
                self.theta = self.theta + dx;
            }
            Algorithm::AdaMax => {
                let g = grad(self.theta);
                self.m = self.rho1 * self.m + (1.0 - self.rho1) * g;
                self.gamma = (self.rho2 * self.gamma).max(g.abs());
                if self.gamma != 0.0 {
                    self.theta =
                        self.theta - (self.eps / (1.0 - self.rho1.powf(t))) * self.m / self.gamma;
                }
            }
            Algorithm::Nadam => {
                let g = grad(self.theta);
                self.m = self.rho1 * self.m + (1.0 - self.rho1) * g;
                self.u = self.rho2 * self.u + (1.0 - self.rho2) * g * g;
                let m_hat = self.rho1 * self.m / (1.0 - self.rho1.powf(t + 1.0))
                    + (1.0 - self.rho1) * g / (1.0 - self.rho1.powf(t));
                let u_hat = self.rho2 * self.u / (1.0 - self.rho2.powf(t));
                self.theta = self.theta - self.eps * m_hat / (u_hat + self.delta).sqrt();
            }
            Algorithm::AmsGrad => {
                let g = grad(self.theta);
                self.m = self.rho1 * self.m + (1.0 - self.rho1) * g;
                self.u = self.rho2 * self.u + (1.0 - self.rho2) * g * g;
                self.u_hat = self.u_hat.max(self.u);
                self.theta = self.theta - self.eps * self.m / self.u_hat.sqrt().max(self.delta);
            }
        }
    }
}

/// Relative difference, zero when both values are equal.
pub fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}
