//! Space-filling designs.

use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::types::{BoxDomain, ParamVector};

/// `d`-point Latin hypercube over `domain`: along every axis each of the `d`
/// equal-width strata holds exactly one point, placed uniformly inside it.
pub fn latin_hypercube(d: usize, domain: &BoxDomain, rng: &mut Rng) -> Result<Vec<ParamVector>> {
    if d == 0 {
        return Err(Error::InvalidArgument("latin hypercube needs d >= 1".into()));
    }
    let p = domain.dim();
    let mut coords = vec![vec![0.0; p]; d];
    let mut strata: Vec<usize> = (0..d).collect();
    for axis in 0..p {
        strata.shuffle(rng);
        let lo = domain.lower()[axis];
        let w = domain.width(axis);
        for (row, &s) in coords.iter_mut().zip(&strata) {
            let u: f64 = rng.random();
            // clamp guards against rounding past the upper edge
            row[axis] = (lo + w * (s as f64 + u) / d as f64).min(domain.upper()[axis]);
        }
    }
    coords.into_iter().map(ParamVector::new).collect()
}

/// Index of the stratum along `axis` that holds `x`.
pub fn stratum_of(x: f64, axis: usize, d: usize, domain: &BoxDomain) -> usize {
    let t = (x - domain.lower()[axis]) / domain.width(axis);
    ((t * d as f64).floor() as usize).min(d - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn assert_stratified(points: &[ParamVector], domain: &BoxDomain) {
        let d = points.len();
        for axis in 0..domain.dim() {
            let mut seen = vec![0usize; d];
            for pt in points {
                assert!(domain.contains(pt));
                seen[stratum_of(pt[axis], axis, d, domain)] += 1;
            }
            assert!(seen.iter().all(|&c| c == 1), "axis {axis}: {seen:?}");
        }
    }

    #[test]
    fn single_point() {
        let unit = BoxDomain::from_pairs(&[(0.0, 1.0), (0.0, 1.0)]).unwrap();
        let pts = latin_hypercube(1, &unit, &mut stream(1, 0)).unwrap();
        assert_eq!(pts.len(), 1);
        assert!(unit.contains(&pts[0]));
    }

    #[test]
    fn zero_points_is_an_error() {
        let unit = BoxDomain::from_pairs(&[(0.0, 1.0)]).unwrap();
        assert!(latin_hypercube(0, &unit, &mut stream(1, 0)).is_err());
    }

    #[test]
    fn four_strata_on_unit_interval() {
        let unit = BoxDomain::from_pairs(&[(0.0, 1.0)]).unwrap();
        let pts = latin_hypercube(4, &unit, &mut stream(3, 0)).unwrap();
        let mut xs: Vec<f64> = pts.iter().map(|p| p[0]).collect();
        xs.sort_by(f64::total_cmp);
        for (k, x) in xs.iter().enumerate() {
            assert!(*x >= k as f64 * 0.25 && *x <= (k + 1) as f64 * 0.25);
        }
    }

    #[test]
    fn exhaustive_stratification_up_to_64() {
        let domain = BoxDomain::from_pairs(&[(-3.0, 1.0), (0.5, 0.75), (10.0, 20.0)]).unwrap();
        for d in 1..=64 {
            let pts = latin_hypercube(d, &domain, &mut stream(d as u64, 9)).unwrap();
            assert_eq!(pts.len(), d);
            assert_stratified(&pts, &domain);
        }
    }

    #[test]
    fn four_hundred_points_on_mple_window() {
        let domain = BoxDomain::from_pairs(&[(-7.8, -6.8), (1.8, 2.5)]).unwrap();
        let pts = latin_hypercube(400, &domain, &mut stream(400, 0)).unwrap();
        assert_stratified(&pts, &domain);
    }
}
