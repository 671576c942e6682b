//! Numerically stable log-space primitives.

use crate::error::{Error, Result};

/// `log Σ exp(v_i)`, shifted by the maximum so large magnitudes never overflow.
///
/// All `-inf` entries give `-inf`; any `+inf` gives `+inf`.
pub fn log_sum_exp(v: &[f64]) -> Result<f64> {
    if v.is_empty() {
        return Err(Error::EmptyInput);
    }
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max.is_infinite() {
        return Ok(max);
    }
    let sum: f64 = v.iter().map(|x| (x - max).exp()).sum();
    Ok(max + sum.ln())
}

/// `log((1/n) Σ exp(v_i))`.
pub fn log_mean_exp(v: &[f64]) -> Result<f64> {
    Ok(log_sum_exp(v)? - (v.len() as f64).ln())
}

/// Logistic function `1 / (1 + e^{-x})`, accurate in both tails.
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^x)`.
pub fn log1p_exp(x: f64) -> f64 {
    if x > 35.0 {
        x
    } else if x < -35.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample variance; zero for fewer than two values.
pub fn variance(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() - 1) as f64
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identity_cases() {
        assert!((log_sum_exp(&[0.0, 0.0]).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert_eq!(log_sum_exp(&[1000.0, 1000.0]).unwrap(), 1000.0 + 2f64.ln());
        assert!(matches!(log_sum_exp(&[]), Err(Error::EmptyInput)));
    }

    #[test]
    fn matches_naive_sum_at_small_magnitudes() {
        let v = [-1.0, -2.0, -3.0];
        let naive = v.iter().map(|x: &f64| x.exp()).sum::<f64>().ln();
        assert!((log_sum_exp(&v).unwrap() - naive).abs() < 1e-15);
        assert!((naive - (-0.592_394_035_555_619_7)).abs() < 1e-15);
    }

    #[test]
    fn infinities() {
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY; 3]).unwrap(), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn logistic_tails() {
        assert_eq!(logistic(0.0), 0.5);
        assert!(logistic(-800.0) >= 0.0 && logistic(-800.0) < 1e-300);
        assert_eq!(logistic(800.0), 1.0);
        assert!((log1p_exp(0.0) - 2f64.ln()).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn shift_invariance(v in prop::collection::vec(-50.0f64..50.0, 1..20), c in -1e4f64..1e4) {
            let base = log_sum_exp(&v).unwrap();
            let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
            let got = log_sum_exp(&shifted).unwrap();
            let want = base + c;
            prop_assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0));
        }
    }
}
