//! Priors on a compact box.
//!
//! Uniform boxes are the only first-class prior; [`CustomPrior`] wraps an
//! arbitrary log-density callback restricted to a box for extensions.

use crate::types::BoxDomain;

/// Log prior density; `-inf` outside the support box.
pub trait Prior: Sync {
    fn log_density(&self, theta: &[f64]) -> f64;
    fn support(&self) -> &BoxDomain;
}

/// `-Σ log(upper - lower)` inside `domain`, `-inf` outside.
pub fn uniform_box_log_prior(theta: &[f64], domain: &BoxDomain) -> f64 {
    if domain.contains(theta) {
        -(0..domain.dim()).map(|i| domain.width(i).ln()).sum::<f64>()
    } else {
        f64::NEG_INFINITY
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UniformBox {
    domain: BoxDomain,
    log_norm: f64,
}

impl UniformBox {
    pub fn new(domain: BoxDomain) -> Self {
        let log_norm = -(0..domain.dim()).map(|i| domain.width(i).ln()).sum::<f64>();
        Self { domain, log_norm }
    }
}

impl Prior for UniformBox {
    fn log_density(&self, theta: &[f64]) -> f64 {
        if self.domain.contains(theta) {
            self.log_norm
        } else {
            f64::NEG_INFINITY
        }
    }

    fn support(&self) -> &BoxDomain {
        &self.domain
    }
}

/// A user log-density restricted to a box.
pub struct CustomPrior<F> {
    domain: BoxDomain,
    log_density: F,
}

impl<F: Fn(&[f64]) -> f64 + Sync> CustomPrior<F> {
    pub fn new(domain: BoxDomain, log_density: F) -> Self {
        Self { domain, log_density }
    }
}

impl<F: Fn(&[f64]) -> f64 + Sync> Prior for CustomPrior<F> {
    fn log_density(&self, theta: &[f64]) -> f64 {
        if self.domain.contains(theta) {
            (self.log_density)(theta)
        } else {
            f64::NEG_INFINITY
        }
    }

    fn support(&self) -> &BoxDomain {
        &self.domain
    }
}
