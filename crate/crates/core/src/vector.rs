use serde::{Deserialize, Serialize};

use crate::linalg;

/// A dense vector formed as a weighted sum of dictionary columns.
///
/// When the vector has been normalized, `scale` holds the norm that was
/// divided out so the original sum can be restored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummedVector {
    pub values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
}

impl SummedVector {
    pub fn new(values: Vec<f64>) -> Self {
        SummedVector {
            values,
            scale: None,
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self::new(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        linalg::norm(&self.values)
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// Unit-norm copy with the removed norm folded into `scale`.
    /// Returns `None` for the zero vector.
    pub fn normalized(&self) -> Option<SummedVector> {
        let nrm = self.norm();
        if nrm == 0.0 || !nrm.is_finite() {
            return None;
        }
        let mut values = self.values.clone();
        linalg::scale(1.0 / nrm, &mut values);
        Some(SummedVector {
            values,
            scale: Some(nrm * self.scale.unwrap_or(1.0)),
        })
    }

    /// The sum this vector stands for, with any recorded normalization undone.
    pub fn denormalized(&self) -> Vec<f64> {
        match self.scale {
            Some(s) => self.values.iter().map(|v| v * s).collect(),
            None => self.values.clone(),
        }
    }

    pub fn add_scaled(&mut self, alpha: f64, other: &[f64]) {
        linalg::axpy(alpha, other, &mut self.values);
    }
}

impl From<Vec<f64>> for SummedVector {
    fn from(values: Vec<f64>) -> Self {
        SummedVector::new(values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_records_scale() {
        let v = SummedVector::new(vec![3.0, 4.0]);
        let n = v.normalized().unwrap();
        assert_eq!(n.scale, Some(5.0));
        assert!((n.values[0] - 0.6).abs() < 1e-15);
        let back = n.denormalized();
        assert!((back[1] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn zero_vector_has_no_normalization() {
        assert!(SummedVector::zeros(3).normalized().is_none());
    }
}
