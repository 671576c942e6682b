use funcemu::diagnostics::{hpd, kde_tv};
use funcemu::rng::stream;
use rand_distr::Distribution;
use statrs::distribution::{ContinuousCDF, Normal};

fn normal_draws(mu: f64, n: usize, seed: u64) -> Vec<f64> {
    let d = rand_distr::Normal::new(mu, 1.0).unwrap();
    let mut rng = stream(seed, 0);
    (0..n).map(|_| d.sample(&mut rng)).collect()
}

#[test]
fn tv_of_shifted_normals_matches_closed_form() {
    let phi = Normal::new(0.0, 1.0).unwrap();
    let a = normal_draws(0.0, 40_000, 1);
    for (k, shift) in [0.5, 1.0, 2.0].into_iter().enumerate() {
        let b = normal_draws(shift, 40_000, 2 + k as u64);
        let exact = 2.0 * phi.cdf(shift / 2.0) - 1.0;
        let tv = kde_tv(&a, &b).unwrap();
        assert!((tv - exact).abs() < 0.02, "shift {shift}: {tv} vs {exact}");
    }
}

#[test]
fn hpd_of_a_normal_matches_quantiles() {
    let phi = Normal::new(0.0, 1.0).unwrap();
    let x = normal_draws(0.0, 100_000, 9);
    let (lo, hi) = hpd(&x, 0.9).unwrap();
    let q = phi.inverse_cdf(0.95);
    assert!((lo + q).abs() < 0.03 && (hi - q).abs() < 0.03, "({lo}, {hi}) vs ±{q}");
}
