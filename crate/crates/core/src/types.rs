//! Shared value types: parameter points, box domains and chain output.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in a `p`-dimensional parameter space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("parameter vector must have p >= 1".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "parameter vector has non-finite entries: {values:?}"
            )));
        }
        Ok(Self(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Deref for ParamVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for ParamVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

/// Axis-aligned box `[lower, upper]`, used for priors and design domains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::InvalidArgument(format!(
                "box bounds must be non-empty and of equal length ({} vs {})",
                lower.len(),
                upper.len()
            )));
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidArgument(format!(
                    "box axis {i}: need finite lower < upper, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// Builds a box from `(lower, upper)` pairs.
    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self> {
        Self::new(pairs.iter().map(|p| p.0).collect(), pairs.iter().map(|p| p.1).collect())
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn width(&self, axis: usize) -> f64 {
        self.upper[axis] - self.lower[axis]
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|i| self.width(i)).product()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| 0.5 * (l + u)).collect()
    }

    /// Closed-box membership. Dimension mismatches are never contained.
    pub fn contains(&self, theta: &[f64]) -> bool {
        theta.len() == self.dim()
            && theta
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(t, (l, u))| *t >= *l && *t <= *u)
    }

    pub fn contains_box(&self, other: &BoxDomain) -> bool {
        self.contains(other.lower()) && self.contains(other.upper())
    }

    /// Intersection with `other`; `None` when empty along some axis.
    pub fn intersect(&self, other: &BoxDomain) -> Option<BoxDomain> {
        if self.dim() != other.dim() {
            return None;
        }
        let lower: Vec<f64> = self.lower.iter().zip(&other.lower).map(|(a, b)| a.max(*b)).collect();
        let upper: Vec<f64> = self.upper.iter().zip(&other.upper).map(|(a, b)| a.min(*b)).collect();
        BoxDomain::new(lower, upper).ok()
    }
}

/// Output of one sampler run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainOutput {
    /// One row per iteration.
    pub samples: Vec<Vec<f64>>,
    pub acc_count: usize,
    pub seed: u64,
    /// Seconds.
    pub wall_time: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_iter_time: Option<Vec<f64>>,
}

impl ChainOutput {
    pub fn n_iter(&self) -> usize {
        self.samples.len()
    }

    pub fn dim(&self) -> usize {
        self.samples.first().map_or(0, Vec::len)
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.samples.is_empty() {
            0.0
        } else {
            self.acc_count as f64 / self.samples.len() as f64
        }
    }

    /// Trace of parameter `axis`.
    pub fn column(&self, axis: usize) -> Vec<f64> {
        self.samples.iter().map(|row| row[axis]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn param_vector_rejects_bad_input() {
        assert!(ParamVector::new(vec![]).is_err());
        assert!(ParamVector::new(vec![1.0, f64::NAN]).is_err());
        assert_eq!(ParamVector::new(vec![1.0, 2.0]).unwrap().dim(), 2);
    }

    #[test]
    fn box_validation_and_membership() {
        assert!(BoxDomain::new(vec![1.0], vec![1.0]).is_err());
        assert!(BoxDomain::new(vec![0.0, 0.0], vec![1.0]).is_err());
        let b = BoxDomain::from_pairs(&[(-7.8, -6.8), (1.8, 2.5)]).unwrap();
        assert!(b.contains(&[-7.0, 2.0]));
        assert!(!b.contains(&[-7.0, 2.6]));
        assert!(!b.contains(&[-7.0]));
        assert!((b.volume() - 0.7).abs() < 1e-12);
    }

    #[test]
    fn intersection() {
        let a = BoxDomain::from_pairs(&[(0.0, 2.0), (0.0, 2.0)]).unwrap();
        let b = BoxDomain::from_pairs(&[(1.0, 3.0), (-1.0, 1.5)]).unwrap();
        let c = a.intersect(&b).unwrap();
        assert_eq!(c.lower(), &[1.0, 0.0]);
        assert_eq!(c.upper(), &[2.0, 1.5]);
        let far = BoxDomain::from_pairs(&[(5.0, 6.0), (0.0, 1.0)]).unwrap();
        assert!(a.intersect(&far).is_none());
    }
}
