//! The attraction-repulsion interaction function.
//!
//! ```text
//! φ(D) = 0                                  0 <= D <= R
//!      = θ1 - (√θ1 / (θ2 - R) · (D - θ2))²  R < D <= D1
//!      = 1 + 1 / (θ3 (D - D2))²             D > D1
//! ```
//!
//! The breakpoints `D1 > θ2` and `D2 < D1` are chosen so that the quadratic
//! and the tail agree in value and slope at `D1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_HARD_CORE: f64 = 5.0;
pub const DEFAULT_CAP: f64 = 1.2;

/// Intensity, interaction shape and the derived breakpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InteractionParams {
    pub lambda: f64,
    pub theta1: f64,
    pub theta2: f64,
    pub theta3: f64,
    pub r: f64,
    pub d1: f64,
    pub d2: f64,
}

impl InteractionParams {
    pub fn new(lambda: f64, theta1: f64, theta2: f64, theta3: f64, r: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!("intensity must be positive, got {lambda}")));
        }
        let (d1, d2) = solve_breakpoints(theta1, theta2, theta3, r)?;
        Ok(Self { lambda, theta1, theta2, theta3, r, d1, d2 })
    }

    /// From `θ = (λ, θ1, θ2, θ3)`.
    pub fn from_theta(theta: &[f64], r: f64) -> Result<Self> {
        if theta.len() != 4 {
            return Err(Error::DimensionMismatch { expected: 4, got: theta.len() });
        }
        Self::new(theta[0], theta[1], theta[2], theta[3], r)
    }

    #[inline]
    fn slope_sq(&self) -> f64 {
        self.theta1 / ((self.theta2 - self.r) * (self.theta2 - self.r))
    }

    pub fn quadratic(&self, d: f64) -> f64 {
        self.theta1 - self.slope_sq() * (d - self.theta2) * (d - self.theta2)
    }

    pub fn tail(&self, d: f64) -> f64 {
        let z = self.theta3 * (d - self.d2);
        1.0 + 1.0 / (z * z)
    }

    pub fn quadratic_deriv(&self, d: f64) -> f64 {
        -2.0 * self.slope_sq() * (d - self.theta2)
    }

    pub fn tail_deriv(&self, d: f64) -> f64 {
        let v = d - self.d2;
        -2.0 / (self.theta3 * self.theta3 * v * v * v)
    }

    /// `φ(D)`.
    #[inline]
    pub fn phi(&self, d: f64) -> f64 {
        if d <= self.r {
            0.0
        } else if d <= self.d1 {
            self.quadratic(d)
        } else {
            self.tail(d)
        }
    }

    #[inline]
    pub fn log_phi(&self, d: f64) -> f64 {
        self.phi(d).ln()
    }
}

/// `φ(D)` for the given parameters.
pub fn phi(d: f64, params: &InteractionParams) -> f64 {
    params.phi(d)
}

fn residuals(d1: f64, d2: f64, a2: f64, theta1: f64, theta2: f64, t3sq: f64) -> [f64; 2] {
    let u = d1 - theta2;
    let v = d1 - d2;
    [theta1 - a2 * u * u - 1.0 - 1.0 / (t3sq * v * v), -2.0 * a2 * u + 2.0 / (t3sq * v * v * v)]
}

/// Breakpoints `(D1, D2)` making `φ` continuous and differentiable at `D1`.
///
/// A bracketed one-dimensional solve in `v = D1 - D2` seeds a damped Newton
/// iteration on the two matching conditions.
pub fn solve_breakpoints(theta1: f64, theta2: f64, theta3: f64, r: f64) -> Result<(f64, f64)> {
    if !(theta1 > 1.0 && theta2 > r && theta3 > 0.0 && r >= 0.0)
        || ![theta1, theta2, theta3, r].iter().all(|v| v.is_finite())
    {
        return Err(Error::BreakpointsUnsolvable);
    }
    let a2 = theta1 / ((theta2 - r) * (theta2 - r));
    let t3sq = theta3 * theta3;
    let target = theta1 - 1.0;

    // slope matching gives u(v) = 1 / (θ3² a² v³); value matching is then
    // a² u (u + v) = θ1 - 1, strictly decreasing in v
    let u_of = |v: f64| 1.0 / (t3sq * a2 * v * v * v);
    let g = |lv: f64| {
        let v = lv.exp();
        let u = u_of(v);
        (a2 * u * (u + v)).ln() - target.ln()
    };
    let (mut lo, mut hi) = (-1.0f64, 1.0f64);
    while g(lo) < 0.0 {
        lo -= 2.0;
        if lo < -200.0 {
            return Err(Error::BreakpointsUnsolvable);
        }
    }
    while g(hi) > 0.0 {
        hi += 2.0;
        if hi > 200.0 {
            return Err(Error::BreakpointsUnsolvable);
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    let v0 = (0.5 * (lo + hi)).exp();
    let mut d1 = theta2 + u_of(v0);
    let mut d2 = d1 - v0;

    let norm = |f: [f64; 2]| f[0].abs().max(f[1].abs());
    let mut f = residuals(d1, d2, a2, theta1, theta2, t3sq);
    for _ in 0..100 {
        if norm(f) < 1e-13 {
            break;
        }
        let u = d1 - theta2;
        let v = d1 - d2;
        // Jacobian in (d1, d2)
        let dv1 = 2.0 / (t3sq * v * v * v);
        let j11 = -2.0 * a2 * u + dv1;
        let j12 = -dv1;
        let dv2 = -6.0 / (t3sq * v * v * v * v);
        let j21 = -2.0 * a2 + dv2;
        let j22 = -dv2;
        let det = j11 * j22 - j12 * j21;
        if det == 0.0 || !det.is_finite() {
            break;
        }
        let s1 = (f[0] * j22 - f[1] * j12) / det;
        let s2 = (j11 * f[1] - j21 * f[0]) / det;
        let mut t = 1.0;
        let mut improved = false;
        for _ in 0..40 {
            let (n1, n2) = (d1 - t * s1, d2 - t * s2);
            if n1 > theta2 && n1 > n2 {
                let nf = residuals(n1, n2, a2, theta1, theta2, t3sq);
                if norm(nf) < norm(f) {
                    d1 = n1;
                    d2 = n2;
                    f = nf;
                    improved = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !improved {
            break;
        }
    }
    if !(norm(f) < 1e-10 && d1 > theta2 && d1 > d2 && d1.is_finite() && d2.is_finite()) {
        return Err(Error::BreakpointsUnsolvable);
    }
    Ok((d1, d2))
}
