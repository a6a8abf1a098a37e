//! Dense `f64` vectors with the elementwise operations used by the update rules.
//!
//! Every optimizer in this crate is elementwise, so parameters and gradients
//! are kept as flat arrays with no tensor shape attached.

use std::fmt;
use std::ops::{Index, IndexMut};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MathError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("vectors must have at least one entry")]
    Empty,
}

/// A flat array of real numbers with a fixed, non-zero dimension.
#[derive(Clone, PartialEq, Default)]
pub struct Vector(Vec<f64>);

/// Model parameters.
pub type ParamVector = Vector;
/// A gradient (or gradient estimate) taken against a [`ParamVector`].
pub type GradVector = Vector;

impl Vector {
    pub fn new(values: Vec<f64>) -> Result<Self, MathError> {
        if values.is_empty() {
            return Err(MathError::Empty);
        }
        Ok(Self(values))
    }

    pub fn from_slice(values: &[f64]) -> Result<Self, MathError> {
        Self::new(values.to_vec())
    }

    pub fn zeros(dim: usize) -> Result<Self, MathError> {
        Self::filled(dim, 0.0)
    }

    pub fn filled(dim: usize, value: f64) -> Result<Self, MathError> {
        Self::new(vec![value; dim])
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn check_dim(&self, other: &Self) -> Result<(), MathError> {
        if self.dim() != other.dim() {
            return Err(MathError::DimensionMismatch {
                left: self.dim(),
                right: other.dim(),
            });
        }
        Ok(())
    }

    fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self, MathError> {
        self.check_dim(other)?;
        Ok(Self(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        ))
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self(self.0.iter().map(|&a| f(a)).collect())
    }

    /// Hadamard product `a ⊙ b`.
    pub fn hadamard(&self, other: &Self) -> Result<Self, MathError> {
        self.zip_with(other, |a, b| a * b)
    }

    /// Componentwise maximum.
    ///
    /// If either entry is NaN the other one is returned, matching [`f64::max`].
    pub fn max(&self, other: &Self) -> Result<Self, MathError> {
        self.zip_with(other, f64::max)
    }

    pub fn add(&self, other: &Self) -> Result<Self, MathError> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self, MathError> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, factor: f64) -> Self {
        self.map(|a| a * factor)
    }

    pub fn abs(&self) -> Self {
        self.map(f64::abs)
    }

    pub fn sqrt(&self) -> Self {
        self.map(f64::sqrt)
    }

    /// `self += other`, in place.
    pub fn add_assign(&mut self, other: &Self) -> Result<(), MathError> {
        self.check_dim(other)?;
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += b;
        }
        Ok(())
    }

    pub fn dot(&self, other: &Self) -> Result<f64, MathError> {
        self.check_dim(other)?;
        Ok(self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum())
    }

    pub fn l2_norm(&self) -> f64 {
        l2_norm(&self.0)
    }

    /// Index of the first NaN or infinite entry, if any.
    pub fn first_non_finite(&self) -> Option<usize> {
        self.0.iter().position(|v| !v.is_finite())
    }

    pub fn is_finite(&self) -> bool {
        self.first_non_finite().is_none()
    }
}

/// Euclidean norm of a slice; `0.0` for an empty slice.
pub fn l2_norm(values: &[f64]) -> f64 {
    values.iter().map(|v| v * v).sum::<f64>().sqrt()
}

impl Index<usize> for Vector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for Vector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl AsRef<[f64]> for Vector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

impl<'a> IntoIterator for &'a Vector {
    type Item = &'a f64;
    type IntoIter = std::slice::Iter<'a, f64>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

impl fmt::Debug for Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(&self.0).finish()
    }
}
