//! Flat update vectors and the two abnormality metrics (direction and
//! magnitude) that every defense and attack is built on.
//!
//! The free functions operate on `&[f64]` so they accept plain slices as well
//! as [`UpdateVector`] through deref.

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A flat vector of model-parameter deltas. All entries are finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateVector(Vec<f64>);

impl UpdateVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidValue("update vector must be non-empty".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidValue(format!(
                "update vector entry {i} is not finite"
            )));
        }
        Ok(Self(values))
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    /// Wraps values without the finiteness check. Callers guarantee the invariant.
    pub(crate) fn from_vec_unchecked(values: Vec<f64>) -> Self {
        debug_assert!(values.iter().all(|v| v.is_finite()));
        Self(values)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self(self.0.iter().map(|v| v * factor).collect())
    }

    /// `self + factor * other`, coordinate-wise.
    pub fn axpy(&self, factor: f64, other: &[f64]) -> Result<Self> {
        check_len(self.len(), other.len())?;
        Ok(Self(
            self.0
                .iter()
                .zip(other)
                .map(|(a, b)| a + factor * b)
                .collect(),
        ))
    }
}

impl Deref for UpdateVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl AsRef<[f64]> for UpdateVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Dimension { expected, found })
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Cosine of the angle between `a` and `b`, clamped to `[-1, 1]`.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    check_len(a.len(), b.len())?;
    let aa = dot(a, a);
    let bb = dot(b, b);
    if aa == 0.0 || bb == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok((dot(a, b) / (aa * bb).sqrt()).clamp(-1.0, 1.0))
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    check_len(a.len(), b.len())?;
    Ok(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
}

/// Euclidean distance between `a` and `b`.
pub fn l2_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    squared_distance(a, b).map(f64::sqrt)
}

/// `Σ (w_i / Σw) · v_i`, coordinate-wise.
pub fn weighted_mean<V: AsRef<[f64]>>(vectors: &[V], weights: &[f64]) -> Result<UpdateVector> {
    if vectors.is_empty() || vectors.len() != weights.len() {
        return Err(Error::EmptyAggregate);
    }
    if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(Error::InvalidValue("weights must be finite and non-negative".into()));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::EmptyAggregate);
    }
    let dim = vectors[0].as_ref().len();
    let mut out = vec![0.0; dim];
    for (v, w) in vectors.iter().zip(weights) {
        let v = v.as_ref();
        check_len(dim, v.len())?;
        let share = w / total;
        for (o, x) in out.iter_mut().zip(v) {
            *o += share * x;
        }
    }
    Ok(UpdateVector::from_vec_unchecked(out))
}

/// Unweighted coordinate-wise mean.
pub fn mean<V: AsRef<[f64]>>(vectors: &[V]) -> Result<UpdateVector> {
    weighted_mean(vectors, &vec![1.0; vectors.len()])
}

/// Per-coordinate population standard deviation (divides by `n`).
pub fn coordinate_std<V: AsRef<[f64]>>(vectors: &[V]) -> Result<UpdateVector> {
    if vectors.len() < 2 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            got: vectors.len(),
        });
    }
    let mu = mean(vectors)?;
    let n = vectors.len() as f64;
    let mut var = vec![0.0; mu.len()];
    for v in vectors {
        for ((acc, x), m) in var.iter_mut().zip(v.as_ref()).zip(mu.iter()) {
            *acc += (x - m) * (x - m);
        }
    }
    Ok(UpdateVector::from_vec_unchecked(
        var.into_iter().map(|s| (s / n).sqrt()).collect(),
    ))
}
