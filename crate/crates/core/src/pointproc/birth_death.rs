use rand::Rng as _;

use super::interaction::{InteractionParams, DEFAULT_CAP};
use super::pattern::{dist, PointPattern, Window};
use crate::rng::Rng;

/// A pairwise interaction with capped per-point log interaction sums,
/// `log h(x) = n log λ + Σ_i min(Σ_{j≠i} log φ(D_ij), cap)`.
pub trait PairInteraction: Sync {
    fn log_lambda(&self) -> f64;
    fn log_phi(&self, d: f64) -> f64;
    fn cap(&self) -> f64;
}

impl PairInteraction for InteractionParams {
    fn log_lambda(&self) -> f64 {
        self.lambda.ln()
    }

    fn log_phi(&self, d: f64) -> f64 {
        InteractionParams::log_phi(self, d)
    }

    fn cap(&self) -> f64 {
        DEFAULT_CAP
    }
}

/// `φ ≡ 1`: a homogeneous Poisson process.
#[derive(Debug, Clone, Copy)]
pub struct NoInteraction {
    pub lambda: f64,
}

impl PairInteraction for NoInteraction {
    fn log_lambda(&self) -> f64 {
        self.lambda.ln()
    }

    fn log_phi(&self, _d: f64) -> f64 {
        0.0
    }

    fn cap(&self) -> f64 {
        DEFAULT_CAP
    }
}

/// `log h(x)` by direct double sum.
pub fn log_h_with<I: PairInteraction>(points: &[[f64; 2]], inter: &I) -> f64 {
    let n = points.len();
    let mut sums = vec![0.0; n];
    for i in 0..n {
        for j in i + 1..n {
            let l = inter.log_phi(dist(points[i], points[j]));
            if l == f64::NEG_INFINITY {
                return f64::NEG_INFINITY;
            }
            sums[i] += l;
            sums[j] += l;
        }
    }
    n as f64 * inter.log_lambda() + sums.iter().map(|&s| s.min(inter.cap())).sum::<f64>()
}

/// `n log λ + Σ_i min(Σ_{j≠i} log φ(D_ij), 1.2)`; `-inf` on a hard-core
/// violation.
pub fn log_h_pp(x: &PointPattern, params: &InteractionParams) -> f64 {
    log_h_with(x.points(), params)
}

/// Birth-death sampler state with cached pairwise `log φ` and per-point sums.
pub struct BirthDeath<'a, I: PairInteraction> {
    inter: &'a I,
    window: Window,
    log_area: f64,
    points: Vec<[f64; 2]>,
    lphi: Vec<Vec<f64>>,
    sums: Vec<f64>,
    scratch: Vec<f64>,
}

impl<'a, I: PairInteraction> BirthDeath<'a, I> {
    /// The pattern must have finite `log h` under `inter`.
    pub fn new(pattern: PointPattern, inter: &'a I) -> Self {
        let window = *pattern.window();
        let points = pattern.into_points();
        let n = points.len();
        let mut lphi = vec![vec![0.0; n]; n];
        let mut sums = vec![0.0; n];
        for i in 0..n {
            for j in i + 1..n {
                let l = inter.log_phi(dist(points[i], points[j]));
                lphi[i][j] = l;
                lphi[j][i] = l;
                sums[i] += l;
                sums[j] += l;
            }
        }
        Self { inter, window, log_area: window.area().ln(), points, lphi, sums, scratch: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn log_h(&self) -> f64 {
        let c = self.inter.cap();
        self.points.len() as f64 * self.inter.log_lambda() + self.sums.iter().map(|&s| s.min(c)).sum::<f64>()
    }

    fn fill_scratch(&mut self, xi: [f64; 2]) {
        self.scratch.clear();
        for &p in &self.points {
            self.scratch.push(self.inter.log_phi(dist(xi, p)));
        }
    }

    fn birth_delta(&self) -> f64 {
        let c = self.inter.cap();
        let mut own = 0.0;
        let mut others = 0.0;
        for (j, &l) in self.scratch.iter().enumerate() {
            if l == f64::NEG_INFINITY {
                return f64::NEG_INFINITY;
            }
            own += l;
            let s = self.sums[j];
            others += (s + l).min(c) - s.min(c);
        }
        self.inter.log_lambda() + own.min(c) + others
    }

    /// Log Hastings ratio `log{|S| h(x∪ξ) / ((n+1) h(x))}`.
    pub fn log_birth_ratio(&mut self, xi: [f64; 2]) -> f64 {
        self.fill_scratch(xi);
        self.log_area - ((self.points.len() + 1) as f64).ln() + self.birth_delta()
    }

    /// Log Hastings ratio `log{n h(x∖η) / (|S| h(x))}` for removing point `k`.
    pub fn log_death_ratio(&self, k: usize) -> f64 {
        let c = self.inter.cap();
        let row = &self.lphi[k];
        let mut others = 0.0;
        for (j, &s) in self.sums.iter().enumerate() {
            if j != k {
                others += (s - row[j]).min(c) - s.min(c);
            }
        }
        let delta = -self.inter.log_lambda() - self.sums[k].min(c) + others;
        (self.points.len() as f64).ln() - self.log_area + delta
    }

    fn insert(&mut self, xi: [f64; 2]) {
        let n = self.points.len();
        let mut own = 0.0;
        for j in 0..n {
            let l = self.scratch[j];
            self.lphi[j].push(l);
            self.sums[j] += l;
            own += l;
        }
        let mut row = std::mem::take(&mut self.scratch);
        row.push(0.0);
        self.lphi.push(row);
        self.sums.push(own);
        self.points.push(xi);
    }

    fn remove(&mut self, k: usize) {
        let row = self.lphi.swap_remove(k);
        self.points.swap_remove(k);
        self.sums.swap_remove(k);
        for (j, r) in self.lphi.iter_mut().enumerate() {
            r.swap_remove(k);
            let old = if j == k { row[row.len() - 1] } else { row[j] };
            self.sums[j] -= old;
        }
    }

    /// One birth or death proposal; returns whether it was accepted.
    pub fn step(&mut self, rng: &mut Rng) -> bool {
        if rng.random::<bool>() {
            let xi = self.window.sample(rng);
            let log_r = self.log_birth_ratio(xi);
            if log_r >= 0.0 || rng.random::<f64>().ln() < log_r {
                self.insert(xi);
                return true;
            }
            false
        } else {
            let n = self.points.len();
            if n == 0 {
                return false;
            }
            let k = rng.random_range(0..n);
            let log_r = self.log_death_ratio(k);
            if log_r >= 0.0 || rng.random::<f64>().ln() < log_r {
                self.remove(k);
                return true;
            }
            false
        }
    }

    /// `cycles` cycles of `max(n, 1)` proposals each, `n` taken at the start
    /// of the cycle. The interaction sums are recomputed after every cycle.
    pub fn run_cycles(&mut self, cycles: usize, rng: &mut Rng) {
        for _ in 0..cycles {
            let m = self.points.len().max(1);
            for _ in 0..m {
                self.step(rng);
            }
            self.refresh_sums();
        }
    }

    fn refresh_sums(&mut self) {
        for (i, row) in self.lphi.iter().enumerate() {
            self.sums[i] = row.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &l)| l).sum();
        }
    }

    pub fn into_pattern(self) -> PointPattern {
        PointPattern::from_parts_unchecked(self.points, self.window)
    }
}

/// One birth-death proposal from `x`.
pub fn birth_death_step(x: &PointPattern, params: &InteractionParams, rng: &mut Rng) -> PointPattern {
    let mut s = BirthDeath::new(x.clone(), params);
    s.step(rng);
    s.into_pattern()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn rsv_b() -> InteractionParams {
        InteractionParams::new(4e-4, 1.2, 15.0, 0.3, 5.0).unwrap()
    }

    #[test]
    fn small_patterns() {
        let w = Window::square(100.0).unwrap();
        let p = rsv_b();
        assert_eq!(log_h_pp(&PointPattern::empty(w), &p), 0.0);
        let one = PointPattern::new(vec![[50.0, 50.0]], w).unwrap();
        assert_eq!(log_h_pp(&one, &p), 4e-4f64.ln());
        let close = PointPattern::new(vec![[50.0, 50.0], [53.0, 50.0]], w).unwrap();
        assert_eq!(log_h_pp(&close, &p), f64::NEG_INFINITY);
        let two = PointPattern::new(vec![[50.0, 50.0], [65.0, 50.0]], w).unwrap();
        let expect = 2.0 * 4e-4f64.ln() + 2.0 * 1.2f64.ln();
        assert!((log_h_pp(&two, &p) - expect).abs() < 1e-12);
    }

    #[test]
    fn cap_binds_exactly() {
        // eight neighbours at the peak distance: sum = 8 ln 1.2 > 1.2
        let w = Window::square(100.0).unwrap();
        let p = rsv_b();
        let c = [50.0, 50.0];
        let mut pts = vec![c];
        for k in 0..8 {
            let a = k as f64 * std::f64::consts::TAU / 8.0;
            pts.push([c[0] + 15.0 * a.cos(), c[1] + 15.0 * a.sin()]);
        }
        let x = PointPattern::new(pts.clone(), w).unwrap();
        let centre_sum: f64 = pts[1..].iter().map(|&q| p.log_phi(dist(c, q))).sum();
        assert!(centre_sum > 1.2);
        let mut expect = 9.0 * p.lambda.ln() + 1.2;
        for i in 1..9 {
            let s: f64 = (0..9).filter(|&j| j != i).map(|j| p.log_phi(dist(pts[i], pts[j]))).sum();
            expect += s.min(1.2);
        }
        assert!((log_h_pp(&x, &p) - expect).abs() < 1e-12);
    }

    #[test]
    fn exchangeable_bitwise() {
        let w = Window::square(150.0).unwrap();
        let x = PointPattern::binomial_hard_core(40, w, 5.0, &mut stream(3, 0));
        let mut pts = x.points().to_vec();
        pts.reverse();
        let y = PointPattern::new(pts, w).unwrap();
        assert_eq!(log_h_pp(&x, &rsv_b()).to_bits(), log_h_pp(&y, &rsv_b()).to_bits());
    }

    #[test]
    fn birth_then_death_ratios_cancel() {
        let w = Window::square(120.0).unwrap();
        let p = rsv_b();
        let mut rng = stream(4, 0);
        for _ in 0..50 {
            let x = PointPattern::binomial_hard_core(20, w, 5.0, &mut rng);
            let mut s = BirthDeath::new(x, &p);
            let xi = w.sample(&mut rng);
            let b = s.log_birth_ratio(xi);
            if !b.is_finite() {
                continue;
            }
            s.insert(xi);
            let d = s.log_death_ratio(s.len() - 1);
            assert!((b + d).abs() < 1e-10, "{b} {d}");
        }
    }

    #[test]
    fn hard_core_birth_never_accepted() {
        let w = Window::square(100.0).unwrap();
        let p = rsv_b();
        let x = PointPattern::new(vec![[50.0, 50.0]], w).unwrap();
        let mut s = BirthDeath::new(x, &p);
        assert_eq!(s.log_birth_ratio([52.0, 50.0]), f64::NEG_INFINITY);
    }

    #[test]
    fn incremental_cache_matches_direct() {
        let w = Window::square(150.0).unwrap();
        let p = rsv_b();
        let mut rng = stream(5, 0);
        let x = PointPattern::binomial_hard_core(40, w, 5.0, &mut rng);
        let mut s = BirthDeath::new(x, &p);
        for _ in 0..2000 {
            s.step(&mut rng);
            let direct = log_h_with(s.points(), &p);
            assert!((s.log_h() - direct).abs() < 1e-8 * direct.abs().max(1.0));
        }
    }

    #[test]
    fn detailed_balance_algebra() {
        // π(x) q(x→x∪ξ) α = π(x∪ξ) q(x∪ξ→x) α' with q = 1/(2|S|) and 1/(2(n+1))
        let w = Window::square(60.0).unwrap();
        let p = rsv_b();
        let mut rng = stream(6, 0);
        for _ in 0..200 {
            let n = rng.random_range(0..=3);
            let x = PointPattern::binomial_hard_core(n, w, 5.0, &mut rng);
            let hx = log_h_pp(&x, &p);
            let xi = w.sample(&mut rng);
            let mut s = BirthDeath::new(x.clone(), &p);
            let b = s.log_birth_ratio(xi);
            if !b.is_finite() {
                continue;
            }
            let mut pts = x.points().to_vec();
            pts.push(xi);
            let hy = log_h_pp(&PointPattern::new(pts, w).unwrap(), &p);
            s.insert(xi);
            let d = s.log_death_ratio(n);
            let fwd = hx - (2.0 * w.area()).ln() + b.min(0.0);
            let bwd = hy - (2.0 * (n as f64 + 1.0)).ln() + d.min(0.0);
            assert!((fwd - bwd).abs() < 1e-10);
        }
    }

    #[test]
    fn poisson_count_distribution() {
        // λ|S| = 1.5: compare P(N = k), k = 0..3, with the Poisson pmf
        let w = Window::square(10.0).unwrap();
        let inter = NoInteraction { lambda: 0.015 };
        let mut s = BirthDeath::new(PointPattern::empty(w), &inter);
        let mut rng = stream(7, 0);
        let steps = 400_000;
        let mut counts = [0usize; 4];
        for _ in 0..steps {
            s.step(&mut rng);
            if s.len() < 4 {
                counts[s.len()] += 1;
            }
        }
        let mu: f64 = 1.5;
        let mut pmf = (-mu).exp();
        for (k, &c) in counts.iter().enumerate() {
            let f = c as f64 / steps as f64;
            // generous band for autocorrelated draws
            assert!((f - pmf).abs() < 0.02, "k={k}: {f} vs {pmf}");
            pmf *= mu / (k as f64 + 1.0);
        }
    }
}
