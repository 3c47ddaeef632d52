use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the sum of a weight vector.
pub const SIMPLEX_TOLERANCE: f64 = 1e-9;

/// Allocation fractions over N assets: non-negative and summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidWeights("empty".into()));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFiniteInput);
        }
        if let Some(w) = weights.iter().find(|&&w| w < 0.0) {
            return Err(Error::InvalidWeights(format!("negative weight {w}")));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(Error::InvalidWeights(format!("weights sum to {sum}")));
        }
        Ok(Self(weights))
    }

    pub fn uniform(n: usize) -> Self {
        assert!(n > 0, "uniform weights need at least one asset");
        Self(vec![1.0 / n as f64; n])
    }

    /// All weight on asset `index`.
    pub fn vertex(n: usize, index: usize) -> Self {
        assert!(index < n);
        let mut w = vec![0.0; n];
        w[index] = 1.0;
        Self(w)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn dot(&self, other: &[f64]) -> Result<f64> {
        if other.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                actual: other.len(),
            });
        }
        Ok(self.0.iter().zip(other).map(|(w, x)| w * x).sum())
    }
}

impl std::ops::Index<usize> for WeightVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl TryFrom<Vec<f64>> for WeightVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<WeightVector> for Vec<f64> {
    fn from(w: WeightVector) -> Self {
        w.0
    }
}

impl AsRef<[f64]> for WeightVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}
