//! Chain diagnostics: effective sample size, batch-means Monte Carlo
//! standard error, HPD intervals and kernel-density total variation.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::{mean, variance};
use crate::types::ChainOutput;

/// Effective sample size `n / (1 + 2 Σ_k ρ̂_k)`, summing autocorrelations up
/// to the first non-positive one. Clamped to `(0, n]`.
pub fn ess(x: &[f64]) -> Result<f64> {
    let n = x.len();
    if n < 2 {
        return Err(Error::InvalidArgument("ESS needs at least two draws".into()));
    }
    let m = mean(x);
    let c0 = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64;
    if !(c0 > 0.0) {
        return Err(Error::ZeroVariance);
    }
    let acov = autocovariance(x, m);
    let mut sum = 0.0;
    for &ck in &acov[1..] {
        let rho = ck / c0;
        if rho <= 0.0 {
            break;
        }
        sum += rho;
    }
    let e = n as f64 / (1.0 + 2.0 * sum);
    Ok(e.min(n as f64))
}

/// Biased autocovariances `c_k = (1/n) Σ_t (x_t - m)(x_{t+k} - m)` for all
/// lags, by FFT on a zero-padded series.
pub fn autocovariance(x: &[f64], m: f64) -> Vec<f64> {
    use rustfft::{num_complex::Complex, FftPlanner};
    let n = x.len();
    let len = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = x.iter().map(|v| Complex::new(v - m, 0.0)).collect();
    buf.resize(len, Complex::new(0.0, 0.0));
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(len).process(&mut buf);
    for c in buf.iter_mut() {
        *c = Complex::new(c.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(len).process(&mut buf);
    buf[..n].iter().map(|c| c.re / (len as f64 * n as f64)).collect()
}

/// Batch-means MCSE with batch size `⌊√n⌋`; trailing draws that do not fill
/// a batch are dropped.
pub fn mcse_batch_means(x: &[f64]) -> Result<f64> {
    let n = x.len();
    let b = (n as f64).sqrt().floor() as usize;
    if b < 2 {
        return Err(Error::InvalidArgument("batch means need at least four draws".into()));
    }
    let a = n / b;
    let means: Vec<f64> = (0..a).map(|k| mean(&x[k * b..(k + 1) * b])).collect();
    Ok((variance(&means) / a as f64).sqrt())
}

/// Shortest interval containing `⌈level·n⌉` of the sorted draws.
pub fn hpd(x: &[f64], level: f64) -> Result<(f64, f64)> {
    if x.is_empty() {
        return Err(Error::EmptyInput);
    }
    if !(level > 0.0 && level <= 1.0) {
        return Err(Error::InvalidArgument(format!("HPD level must be in (0, 1], got {level}")));
    }
    let mut s = x.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).expect("finite draws"));
    let n = s.len();
    let m = ((level * n as f64).ceil() as usize).clamp(1, n);
    let mut best = (s[0], s[m - 1]);
    for i in 1..=n - m {
        if s[i + m - 1] - s[i] < best.1 - best.0 {
            best = (s[i], s[i + m - 1]);
        }
    }
    Ok(best)
}

fn quantile_sorted(s: &[f64], q: f64) -> f64 {
    let h = (s.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    s[lo] + (h - lo as f64) * (s[hi] - s[lo])
}

/// Silverman's rule-of-thumb bandwidth `0.9 min(sd, IQR/1.34) n^{-1/5}`.
pub fn silverman_bandwidth(x: &[f64]) -> f64 {
    let mut s = x.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).expect("finite draws"));
    let sd = if x.len() > 1 { variance(x).sqrt() } else { 0.0 };
    let iqr = quantile_sorted(&s, 0.75) - quantile_sorted(&s, 0.25);
    let mut lo = sd.min(iqr / 1.34);
    if !(lo > 0.0) {
        lo = if sd > 0.0 {
            sd
        } else if s[0] != 0.0 {
            s[0].abs()
        } else {
            1.0
        };
    }
    0.9 * lo * (x.len() as f64).powf(-0.2)
}

/// Gaussian KDE with bandwidth `bw` evaluated on `grid`.
pub fn kde_on_grid(x: &[f64], bw: f64, grid: &[f64]) -> Vec<f64> {
    let norm = 1.0 / (x.len() as f64 * bw * (2.0 * std::f64::consts::PI).sqrt());
    grid.iter()
        .map(|&g| {
            x.iter()
                .map(|&v| {
                    let u = (g - v) / bw;
                    (-0.5 * u * u).exp()
                })
                .sum::<f64>()
                * norm
        })
        .collect()
}

pub const KDE_GRID: usize = 512;

/// Shared grid spanning the pooled range ± 3 bandwidths.
pub fn kde_grid(a: &[f64], b: &[f64], bw_a: f64, bw_b: f64) -> Vec<f64> {
    let lo = a.iter().chain(b).copied().fold(f64::INFINITY, f64::min);
    let hi = a.iter().chain(b).copied().fold(f64::NEG_INFINITY, f64::max);
    let pad = 3.0 * bw_a.max(bw_b);
    let (lo, hi) = (lo - pad, hi + pad);
    let step = (hi - lo) / (KDE_GRID - 1) as f64;
    (0..KDE_GRID).map(|i| lo + step * i as f64).collect()
}

/// Total variation `½ Σ |f̂ - ĝ| Δ` between Gaussian KDEs of two samples.
pub fn kde_tv(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyInput);
    }
    let (ba, bb) = (silverman_bandwidth(a), silverman_bandwidth(b));
    let grid = kde_grid(a, b, ba, bb);
    let step = grid[1] - grid[0];
    let f = kde_on_grid(a, ba, &grid);
    let g = kde_on_grid(b, bb, &grid);
    Ok(0.5 * f.iter().zip(&g).map(|(u, v)| (u - v).abs()).sum::<f64>() * step)
}

/// One row of a posterior summary table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub param: String,
    pub mean: f64,
    pub hpd_lo: f64,
    pub hpd_hi: f64,
    pub ess: f64,
    pub mcse: f64,
    pub time: f64,
    pub ess_per_time: f64,
    pub tv_vs_gold: Option<f64>,
}

/// Per-parameter mean, 95% HPD, ESS, MCSE and ESS per second of wall time,
/// plus TV against `gold` when given.
pub fn summarize(chain: &ChainOutput, gold: Option<&ChainOutput>) -> Result<Vec<SummaryRow>> {
    if chain.samples.is_empty() {
        return Err(Error::EmptyInput);
    }
    let p = chain.dim();
    if let Some(g) = gold {
        if g.dim() != p {
            return Err(Error::DimensionMismatch { expected: p, got: g.dim() });
        }
    }
    (0..p)
        .map(|k| {
            let x = chain.column(k);
            let (hpd_lo, hpd_hi) = hpd(&x, 0.95)?;
            let e = match ess(&x) {
                Ok(e) => e,
                Err(Error::ZeroVariance) => 0.0,
                Err(err) => return Err(err),
            };
            let mcse = if x.len() >= 4 { mcse_batch_means(&x)? } else { f64::NAN };
            let tv = gold.map(|g| kde_tv(&x, &g.column(k))).transpose()?;
            Ok(SummaryRow {
                param: format!("theta{}", k + 1),
                mean: mean(&x),
                hpd_lo,
                hpd_hi,
                ess: e,
                mcse,
                time: chain.wall_time,
                ess_per_time: if chain.wall_time > 0.0 { e / chain.wall_time } else { f64::NAN },
                tv_vs_gold: tv,
            })
        })
        .collect()
}

/// Smallest ESS across parameters divided by wall time.
pub fn min_ess_per_time(rows: &[SummaryRow]) -> f64 {
    rows.iter().map(|r| r.ess_per_time).fold(f64::INFINITY, f64::min)
}

/// Summary rows as CSV. Without `timing` the wall-clock columns are left
/// out, so the file depends only on the chain.
pub fn write_summary_csv<W: Write>(rows: &[SummaryRow], timing: bool, w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let mut header = vec!["param", "mean", "hpd_lo", "hpd_hi", "ess", "mcse"];
    if timing {
        header.extend(["time", "ess_per_time"]);
    }
    header.push("tv_vs_gold");
    wr.write_record(&header).map_err(csv_err)?;
    for r in rows {
        let mut rec = vec![
            r.param.clone(),
            format!("{:?}", r.mean),
            format!("{:?}", r.hpd_lo),
            format!("{:?}", r.hpd_hi),
            format!("{:?}", r.ess),
            format!("{:?}", r.mcse),
        ];
        if timing {
            rec.push(format!("{:?}", r.time));
            rec.push(format!("{:?}", r.ess_per_time));
        }
        rec.push(r.tv_vs_gold.map_or(String::new(), |v| format!("{v:?}")));
        wr.write_record(&rec).map_err(csv_err)?;
    }
    wr.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

/// Aligned text table with columns Mean, 95%HPD, ESS, Time, ESS/Time.
pub fn format_summary_table(rows: &[SummaryRow]) -> String {
    let with_tv = rows.iter().any(|r| r.tv_vs_gold.is_some());
    let mut out = format!(
        "{:<8} {:>12} {:>27} {:>10} {:>10} {:>10} {:>10}",
        "param", "Mean", "95%HPD", "ESS", "MCSE", "Time(s)", "ESS/Time"
    );
    if with_tv {
        out.push_str(&format!(" {:>8}", "TV"));
    }
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{:<8} {:>12.5} {:>27} {:>10.1} {:>10.2e} {:>10.2} {:>10.2}",
            r.param,
            r.mean,
            format!("({:.5}, {:.5})", r.hpd_lo, r.hpd_hi),
            r.ess,
            r.mcse,
            r.time,
            r.ess_per_time
        ));
        if let Some(tv) = r.tv_vs_gold {
            out.push_str(&format!(" {tv:>8.4}"));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Rng};
    use rand::Rng as _;
    use rand_distr::{Distribution, Normal, StandardNormal};

    fn normals(n: usize, mu: f64, sd: f64, rng: &mut Rng) -> Vec<f64> {
        let d = Normal::new(mu, sd).unwrap();
        (0..n).map(|_| d.sample(rng)).collect()
    }

    fn ar1(n: usize, rho: f64, rng: &mut Rng) -> Vec<f64> {
        let mut x = Vec::with_capacity(n);
        let mut v = 0.0;
        let s = (1.0 - rho * rho).sqrt();
        for _ in 0..n {
            let e: f64 = StandardNormal.sample(rng);
            v = rho * v + s * e;
            x.push(v);
        }
        x
    }

    #[test]
    fn autocovariance_matches_direct_sum() {
        let x = ar1(300, 0.7, &mut stream(11, 0));
        let m = mean(&x);
        let fast = autocovariance(&x, m);
        for k in [0, 1, 5, 50, 299] {
            let direct = x[..300 - k].iter().zip(&x[k..]).map(|(a, b)| (a - m) * (b - m)).sum::<f64>() / 300.0;
            assert!((fast[k] - direct).abs() < 1e-10);
        }
    }

    #[test]
    fn ess_of_iid_draws() {
        let x = normals(10_000, 0.0, 1.0, &mut stream(1, 0));
        let e = ess(&x).unwrap();
        assert!(e >= 9_000.0 && e <= 10_000.0, "{e}");
    }

    #[test]
    fn ess_of_ar1() {
        let n = 100_000;
        let x = ar1(n, 0.5, &mut stream(2, 0));
        let e = ess(&x).unwrap();
        let target = n as f64 * (1.0 - 0.5) / (1.0 + 0.5);
        assert!((e / target - 1.0).abs() < 0.1, "{e} vs {target}");
    }

    #[test]
    fn ess_clamped_for_alternating_series() {
        let x: Vec<f64> = (0..1000).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        assert_eq!(ess(&x).unwrap(), 1000.0);
        assert!(matches!(ess(&[2.0; 200]), Err(Error::ZeroVariance)));
    }

    #[test]
    fn ess_decreases_with_correlation() {
        let mut prev = f64::INFINITY;
        for (i, rho) in [0.0, 0.3, 0.6, 0.9].into_iter().enumerate() {
            let x = ar1(20_000, rho, &mut stream(3, i as u64));
            let e = ess(&x).unwrap();
            assert!(e < prev && e <= 20_000.0);
            prev = e;
        }
    }

    #[test]
    fn batch_means() {
        let x = normals(10_000, 0.0, 1.0, &mut stream(4, 0));
        let m = mcse_batch_means(&x).unwrap();
        assert!((m - 0.01).abs() < 0.003, "{m}");
        assert_eq!(mcse_batch_means(&[1.5; 400]).unwrap(), 0.0);
        // averaged over replications, doubling n shrinks the MCSE by √2
        let (mut small, mut large) = (0.0, 0.0);
        for r in 0..40 {
            small += mcse_batch_means(&normals(20_000, 0.0, 1.0, &mut stream(5, r))).unwrap();
            large += mcse_batch_means(&normals(40_000, 0.0, 1.0, &mut stream(6, r))).unwrap();
        }
        assert!((small / large - 2f64.sqrt()).abs() < 0.1, "{}", small / large);
    }

    #[test]
    fn hpd_of_uniform_and_normal() {
        let mut rng = stream(7, 0);
        let u: Vec<f64> = (0..100_000).map(|_| rng.random::<f64>()).collect();
        let (lo, hi) = hpd(&u, 0.95).unwrap();
        assert!((hi - lo - 0.95).abs() < 0.01);
        let x = normals(20_000, 3.0, 1.0, &mut rng);
        let (lo, hi) = hpd(&x, 0.95).unwrap();
        let mc = mcse_batch_means(&x).unwrap();
        assert!((0.5 * (lo + hi) - mean(&x)).abs() < 2.0 * mc.max(0.02));
        let mut s = x.clone();
        s.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = s[s.len() / 2];
        assert!(lo < median && median < hi);
        assert_eq!(hpd(&[4.0; 150], 0.95).unwrap(), (4.0, 4.0));
    }

    #[test]
    fn hpd_brute_force() {
        let mut rng = stream(8, 0);
        let x: Vec<f64> = (0..137).map(|_| rng.random::<f64>().powi(3)).collect();
        let (lo, hi) = hpd(&x, 0.9).unwrap();
        let m = (0.9f64 * 137.0).ceil() as usize;
        let mut best = f64::INFINITY;
        for &a in &x {
            for &b in &x {
                let inside = x.iter().filter(|&&v| v >= a && v <= b).count();
                if b >= a && inside >= m {
                    best = best.min(b - a);
                }
            }
        }
        assert_eq!(hi - lo, best);
    }

    #[test]
    fn tv_landmarks() {
        let mut rng = stream(9, 0);
        let a = normals(20_000, 0.0, 1.0, &mut rng);
        let b = normals(20_000, 1.0, 1.0, &mut rng);
        let tv = kde_tv(&a, &b).unwrap();
        assert!((tv - 0.3829).abs() < 0.02, "{tv}");
        assert!(kde_tv(&a, &a).unwrap() < 0.01);
        let far = normals(2_000, 100.0, 0.1, &mut rng);
        let near = normals(2_000, 0.0, 0.1, &mut rng);
        assert!(kde_tv(&near, &far).unwrap() > 0.99);
        assert_eq!(kde_tv(&a, &b).unwrap().to_bits(), kde_tv(&b, &a).unwrap().to_bits());
    }

    #[test]
    fn summary_rows() {
        let mut rng = stream(10, 0);
        let samples: Vec<Vec<f64>> = (0..5000).map(|_| vec![rng.random::<f64>(), StandardNormal.sample(&mut rng)]).collect();
        let chain = ChainOutput { samples, acc_count: 5000, seed: 1, wall_time: 2.0, per_iter_time: None };
        let rows = summarize(&chain, Some(&chain)).unwrap();
        assert_eq!(rows.len(), 2);
        assert!((rows[0].mean - 0.5).abs() < 3.0 * rows[0].mcse.max(1e-3));
        assert!(rows.iter().all(|r| r.tv_vs_gold.unwrap() < 0.01));
        let table = format_summary_table(&rows);
        assert!(table.contains("95%HPD") && table.contains("ESS/Time"));
        let mut buf = Vec::new();
        write_summary_csv(&rows, true, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 3);
        let mut plain = Vec::new();
        write_summary_csv(&rows, false, &mut plain).unwrap();
        let plain = String::from_utf8(plain).unwrap();
        assert!(plain.starts_with("param,mean,hpd_lo,hpd_hi,ess,mcse,tv_vs_gold\n"));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]

            #[test]
            fn tv_is_symmetric_and_bounded(seed in 0u64..1000, shift in -5.0f64..5.0, sd in 0.1f64..3.0) {
                let mut rng = stream(seed, 0);
                let a = normals(300, 0.0, 1.0, &mut rng);
                let b = normals(300, shift, sd, &mut rng);
                let ab = kde_tv(&a, &b).unwrap();
                prop_assert_eq!(ab.to_bits(), kde_tv(&b, &a).unwrap().to_bits());
                prop_assert!((0.0..1.02).contains(&ab));
            }

            #[test]
            fn ess_never_exceeds_n(seed in 0u64..1000, rho in -0.9f64..0.95) {
                let x = ar1(500, rho, &mut stream(seed, 1));
                let e = ess(&x).unwrap();
                prop_assert!(e > 0.0 && e <= 500.0);
            }
        }
    }
}
