//! Dense bias vectors and the handful of inner-product helpers the
//! detectors are built on.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Role annotation for a bias vector. Informational only; no operation
/// branches on it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Original,
    Watermarked,
    Adversarial,
}

/// A last-layer bias vector over an alphabet of `len()` tokens.
///
/// Values are always finite: constructors reject NaN and infinities, so
/// downstream arithmetic never has to re-check.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasVector {
    values: Vec<f64>,
    label: Label,
}

impl BiasVector {
    pub fn new(values: Vec<f64>, label: Label) -> Result<Self> {
        check_finite(&values)?;
        if values.is_empty() {
            return Err(Error::InvalidParameter {
                name: "values",
                reason: "bias vector must be non-empty".into(),
            });
        }
        Ok(Self { values, label })
    }

    /// The all-zero vector, used as the unwatermarked reference model.
    pub fn zeros(n: usize, label: Label) -> Self {
        Self {
            values: vec![0.0; n],
            label,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn label(&self) -> Label {
        self.label
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn with_label(mut self, label: Label) -> Self {
        self.label = label;
        self
    }

    /// Componentwise sum with a raw slice. Errors on length mismatch; the
    /// result carries `label`.
    pub fn add(&self, rhs: &[f64], label: Label) -> Result<BiasVector> {
        if rhs.len() != self.values.len() {
            return Err(Error::DimensionMismatch {
                expected: self.values.len(),
                got: rhs.len(),
            });
        }
        let values = self
            .values
            .iter()
            .zip(rhs)
            .map(|(a, b)| a + b)
            .collect::<Vec<_>>();
        BiasVector::new(values, label)
    }
}

pub(crate) fn check_finite(values: &[f64]) -> Result<()> {
    for (index, v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite { index });
        }
    }
    Ok(())
}

/// Plain dot product. Lengths must match; callers validate.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn l2_norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Euclidean distance between two equal-length slices.
pub fn l2_distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum::<f64>()
        .sqrt()
}
