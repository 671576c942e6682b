//! Matérn-3/2 Gaussian-process emulator with a linear trend.
//!
//! Inputs are standardised per coordinate before fitting. The trend is an
//! intercept plus the standardised coordinates, `β` is the GLS estimate and
//! `(σ², φ, τ²)` maximise the profile likelihood.

use std::path::Path;

use argmin::core::{CostFunction, Executor, State};
use argmin::solver::neldermead::NelderMead;
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::design::latin_hypercube;
use crate::error::{Error, Result};
use crate::numeric::{logistic, mean, variance};
use crate::rng::stream;
use crate::types::{BoxDomain, ParamVector};

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Covariance hyperparameters and trend coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpHyper {
    pub sigma2: f64,
    pub phi: f64,
    pub tau2: f64,
    pub beta: Vec<f64>,
}

/// `σ²(1 + √3 r/φ) exp(-√3 r/φ)`.
#[inline]
pub fn matern32_r(r: f64, sigma2: f64, phi: f64) -> f64 {
    let s = SQRT3 * r / phi;
    sigma2 * (1.0 + s) * (-s).exp()
}

/// Covariance between two inputs; the nugget is added only when they are
/// the same design index.
pub fn matern32(a: &[f64], b: &[f64], hyper: &GpHyper, same_index: bool) -> f64 {
    let r = crate::numeric::euclidean(a, b);
    matern32_r(r, hyper.sigma2, hyper.phi) + if same_index { hyper.tau2 } else { 0.0 }
}

/// `C_ij = matern(z_i, z_j) + τ² 1{i = j}`, filled symmetrically.
pub fn covariance_matrix(z: &[Vec<f64>], sigma2: f64, phi: f64, tau2: f64) -> DMatrix<f64> {
    let d = z.len();
    let mut c = DMatrix::zeros(d, d);
    for i in 0..d {
        c[(i, i)] = sigma2 + tau2;
        for j in 0..i {
            let v = matern32_r(crate::numeric::euclidean(&z[i], &z[j]), sigma2, phi);
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
    c
}

/// Cholesky factor, adding `10⁻¹⁰σ²` to the diagonal on failure and
/// escalating ×10 up to `10⁻⁶σ²`. Returns the jitter used.
pub fn cholesky_with_jitter(c: &DMatrix<f64>, sigma2: f64) -> Result<(Cholesky<f64, Dyn>, f64)> {
    if let Some(ch) = Cholesky::new(c.clone()) {
        return Ok((ch, 0.0));
    }
    let mut jitter = 1e-10 * sigma2;
    while jitter <= 1e-6 * sigma2 * (1.0 + 1e-12) {
        let mut cj = c.clone();
        for i in 0..cj.nrows() {
            cj[(i, i)] += jitter;
        }
        if let Some(ch) = Cholesky::new(cj) {
            return Ok((ch, jitter));
        }
        jitter *= 10.0;
    }
    Err(Error::SingularCovariance)
}

/// Trend regressors `[1, z_1, ..., z_p]`.
pub fn trend_row(z: &[f64]) -> Vec<f64> {
    let mut r = Vec::with_capacity(z.len() + 1);
    r.push(1.0);
    r.extend_from_slice(z);
    r
}

pub fn trend_matrix(z: &[Vec<f64>]) -> DMatrix<f64> {
    let q = z.first().map_or(1, |r| r.len() + 1);
    DMatrix::from_fn(z.len(), q, |i, j| if j == 0 { 1.0 } else { z[i][j - 1] })
}

/// `(ψ'C⁻¹ψ)⁻¹ ψ'C⁻¹ y` for a factored `C`.
pub fn gls_beta(psi: &DMatrix<f64>, chol: &Cholesky<f64, Dyn>, y: &DVector<f64>) -> Result<DVector<f64>> {
    Ok(Gls::new(psi, chol, y)?.beta)
}

struct Gls {
    beta: DVector<f64>,
    cinv_psi: DMatrix<f64>,
    m_chol: Cholesky<f64, Dyn>,
}

impl Gls {
    fn new(psi: &DMatrix<f64>, chol: &Cholesky<f64, Dyn>, y: &DVector<f64>) -> Result<Self> {
        if psi.nrows() != y.len() || psi.nrows() != chol.l_dirty().nrows() {
            return Err(Error::DimensionMismatch { expected: psi.nrows(), got: y.len() });
        }
        if psi.nrows() < psi.ncols() {
            return Err(Error::RankDeficient);
        }
        let cinv_psi = chol.solve(psi);
        let m = psi.transpose() * &cinv_psi;
        let m_chol = Cholesky::new(m.clone()).ok_or(Error::RankDeficient)?;
        let diag_max = m.diagonal().max();
        let l_min = m_chol.l_dirty().diagonal().min();
        if !(l_min * l_min > 1e-12 * diag_max) {
            return Err(Error::RankDeficient);
        }
        let beta = m_chol.solve(&(cinv_psi.transpose() * y));
        Ok(Self { beta, cinv_psi, m_chol })
    }
}

/// Per-coordinate affine map to zero mean and unit variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub center: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardization {
    pub fn identity(p: usize) -> Self {
        Self { center: vec![0.0; p], scale: vec![1.0; p] }
    }

    pub fn fit(design: &[ParamVector]) -> Self {
        let p = design[0].dim();
        let mut center = Vec::with_capacity(p);
        let mut scale = Vec::with_capacity(p);
        for k in 0..p {
            let col: Vec<f64> = design.iter().map(|t| t[k]).collect();
            center.push(mean(&col));
            let sd = variance(&col).sqrt();
            scale.push(if sd > 0.0 && sd.is_finite() { sd } else { 1.0 });
        }
        Self { center, scale }
    }

    pub fn apply(&self, theta: &[f64]) -> Vec<f64> {
        theta.iter().zip(&self.center).zip(&self.scale).map(|((t, c), s)| (t - c) / s).collect()
    }
}

/// Options for [`fit_gp_mle`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub standardize: bool,
    pub starts: usize,
    pub max_iters: u64,
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { standardize: true, starts: 5, max_iters: 400, seed: 0x9e37 }
    }
}

/// `log σ², log φ, log τ²` bounds.
#[derive(Debug, Clone, Copy)]
struct LogBounds {
    lo: [f64; 3],
    hi: [f64; 3],
}

impl LogBounds {
    fn new(z: &[Vec<f64>], var_y: f64) -> Self {
        let mut dists = Vec::with_capacity(z.len() * (z.len() - 1) / 2);
        for i in 0..z.len() {
            for j in 0..i {
                dists.push(crate::numeric::euclidean(&z[i], &z[j]));
            }
        }
        dists.retain(|&d| d > 0.0);
        dists.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
        let med = if dists.is_empty() { 1.0 } else { dists[dists.len() / 2] };
        let (lv, lm) = (var_y.ln(), med.ln());
        let l10 = std::f64::consts::LN_10;
        Self {
            lo: [lv - 8.0 * l10, lm - 3.0 * l10, lv - 8.0 * l10],
            hi: [lv + 3.0 * l10, lm + 3.0 * l10, lv],
        }
    }

    fn map(&self, u: &[f64]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for k in 0..3 {
            out[k] = (self.lo[k] + (self.hi[k] - self.lo[k]) * logistic(u[k])).exp();
        }
        out
    }
}

/// Gaussian log-likelihood with `β` profiled out by GLS.
pub fn profile_log_likelihood(
    z: &[Vec<f64>],
    y: &[f64],
    sigma2: f64,
    phi: f64,
    tau2: f64,
) -> Result<f64> {
    let c = covariance_matrix(z, sigma2, phi, tau2);
    let (chol, _) = cholesky_with_jitter(&c, sigma2)?;
    let psi = trend_matrix(z);
    let yv = DVector::from_column_slice(y);
    let gls = Gls::new(&psi, &chol, &yv)?;
    let resid = &yv - &psi * &gls.beta;
    let quad = resid.dot(&chol.solve(&resid));
    let logdet = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let d = y.len() as f64;
    Ok(-0.5 * (logdet + quad + d * (2.0 * std::f64::consts::PI).ln()))
}

struct NegLogLik<'a> {
    z: &'a [Vec<f64>],
    y: &'a [f64],
    bounds: LogBounds,
}

impl CostFunction for NegLogLik<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, u: &Vec<f64>) -> std::result::Result<f64, argmin::core::Error> {
        let [s2, phi, t2] = self.bounds.map(u);
        Ok(match profile_log_likelihood(self.z, self.y, s2, phi, t2) {
            Ok(l) if l.is_finite() => -l,
            _ => 1e300,
        })
    }
}

fn check_table(design: &[ParamVector], y: &[f64]) -> Result<usize> {
    if design.is_empty() {
        return Err(Error::EmptyInput);
    }
    if design.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: design.len(), got: y.len() });
    }
    let p = design[0].dim();
    if let Some(t) = design.iter().find(|t| t.dim() != p) {
        return Err(Error::DimensionMismatch { expected: p, got: t.dim() });
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite responses".into()));
    }
    Ok(p)
}

/// Maximum-likelihood `(σ², φ, τ²)` by multi-start Nelder-Mead in a bounded
/// log-parameter space; `φ` is on the standardised scale when
/// `opts.standardize` is set.
pub fn fit_gp_mle(design: &[ParamVector], y: &[f64], opts: FitOptions) -> Result<GpHyper> {
    let p = check_table(design, y)?;
    if design.len() < p + 3 {
        return Err(Error::InvalidArgument(format!("need d >= p + 3 = {} design points, got {}", p + 3, design.len())));
    }
    let var_y = variance(y);
    if !(var_y > 0.0) {
        return Err(Error::ZeroVariance);
    }
    let st = if opts.standardize { Standardization::fit(design) } else { Standardization::identity(p) };
    let z: Vec<Vec<f64>> = design.iter().map(|t| st.apply(t)).collect();
    let bounds = LogBounds::new(&z, var_y);

    let unit = BoxDomain::new(vec![0.05; 3], vec![0.95; 3])?;
    let mut rng = stream(opts.seed, 0);
    let starts = latin_hypercube(opts.starts.max(1), &unit, &mut rng)?;
    let mut best: Option<(Vec<f64>, f64)> = None;
    for s in &starts {
        let u0: Vec<f64> = s.iter().map(|&v| (v / (1.0 - v)).ln()).collect();
        let mut simplex = vec![u0.clone()];
        for k in 0..3 {
            let mut v = u0.clone();
            v[k] += 1.0;
            simplex.push(v);
        }
        let cost = NegLogLik { z: &z, y, bounds };
        let solver = NelderMead::new(simplex)
            .with_sd_tolerance(1e-9)
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let res = match Executor::new(cost, solver).configure(|st| st.max_iters(opts.max_iters)).run() {
            Ok(r) => r,
            Err(e) => {
                log::debug!("optimizer start failed: {e}");
                continue;
            }
        };
        let st = res.state();
        let c = st.get_best_cost();
        if let Some(u) = st.get_best_param() {
            if c < 1e299 && best.as_ref().is_none_or(|(_, b)| c < *b) {
                best = Some((u.clone(), c));
            }
        }
    }
    let (u, _) = best.ok_or(Error::SingularCovariance)?;
    let [sigma2, phi, tau2] = bounds.map(&u);
    let c = covariance_matrix(&z, sigma2, phi, tau2);
    let (chol, _) = cholesky_with_jitter(&c, sigma2)?;
    let beta = gls_beta(&trend_matrix(&z), &chol, &DVector::from_column_slice(y))?;
    Ok(GpHyper { sigma2, phi, tau2, beta: beta.iter().copied().collect() })
}

/// A fitted emulator: everything needed for O(d) mean and O(d²) MSE
/// predictions.
#[derive(Debug, Clone)]
pub struct GpEmulator {
    design: Vec<ParamVector>,
    response: Vec<f64>,
    hyper: GpHyper,
    standardization: Standardization,
    z: Vec<Vec<f64>>,
    chol: Cholesky<f64, Dyn>,
    jitter: f64,
    weights: DVector<f64>,
    cinv_psi: DMatrix<f64>,
    m_chol: Cholesky<f64, Dyn>,
}

#[derive(Serialize, Deserialize)]
struct EmulatorFile {
    design: Vec<ParamVector>,
    response: Vec<f64>,
    sigma2: f64,
    phi: f64,
    tau2: f64,
    standardization: Standardization,
    /// `Σ log L_ii` of the Cholesky factor of `C`.
    checksum: f64,
}

impl GpEmulator {
    /// Fits hyperparameters by maximum likelihood with default options.
    pub fn fit(design: &[ParamVector], y: &[f64]) -> Result<Self> {
        Self::fit_with(design, y, FitOptions::default())
    }

    pub fn fit_with(design: &[ParamVector], y: &[f64], opts: FitOptions) -> Result<Self> {
        let h = fit_gp_mle(design, y, opts)?;
        let p = design[0].dim();
        let st = if opts.standardize { Standardization::fit(design) } else { Standardization::identity(p) };
        Self::from_parts(design, y, h.sigma2, h.phi, h.tau2, st)
    }

    /// An emulator with given covariance hyperparameters; `β` is the GLS estimate.
    pub fn with_hyper(design: &[ParamVector], y: &[f64], sigma2: f64, phi: f64, tau2: f64, standardize: bool) -> Result<Self> {
        let p = check_table(design, y)?;
        let st = if standardize { Standardization::fit(design) } else { Standardization::identity(p) };
        Self::from_parts(design, y, sigma2, phi, tau2, st)
    }

    fn from_parts(
        design: &[ParamVector],
        y: &[f64],
        sigma2: f64,
        phi: f64,
        tau2: f64,
        standardization: Standardization,
    ) -> Result<Self> {
        check_table(design, y)?;
        if !(sigma2 > 0.0 && phi > 0.0 && tau2 >= 0.0) {
            return Err(Error::InvalidArgument(format!("invalid hyperparameters ({sigma2}, {phi}, {tau2})")));
        }
        let z: Vec<Vec<f64>> = design.iter().map(|t| standardization.apply(t)).collect();
        let c = covariance_matrix(&z, sigma2, phi, tau2);
        let (chol, jitter) = cholesky_with_jitter(&c, sigma2)?;
        let psi = trend_matrix(&z);
        let yv = DVector::from_column_slice(y);
        let gls = Gls::new(&psi, &chol, &yv)?;
        let weights = chol.solve(&(&yv - &psi * &gls.beta));
        Ok(Self {
            design: design.to_vec(),
            response: y.to_vec(),
            hyper: GpHyper { sigma2, phi, tau2, beta: gls.beta.iter().copied().collect() },
            standardization,
            z,
            chol,
            jitter,
            weights,
            cinv_psi: gls.cinv_psi,
            m_chol: gls.m_chol,
        })
    }

    pub fn hyper(&self) -> &GpHyper {
        &self.hyper
    }

    pub fn design(&self) -> &[ParamVector] {
        &self.design
    }

    pub fn response(&self) -> &[f64] {
        &self.response
    }

    pub fn standardization(&self) -> &Standardization {
        &self.standardization
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn dim(&self) -> usize {
        self.design[0].dim()
    }

    pub fn log_likelihood(&self) -> Result<f64> {
        profile_log_likelihood(&self.z, &self.response, self.hyper.sigma2, self.hyper.phi, self.hyper.tau2)
    }

    fn cross_cov(&self, zs: &[f64]) -> DVector<f64> {
        let h = &self.hyper;
        DVector::from_iterator(
            self.z.len(),
            self.z.iter().map(|zi| {
                let r = crate::numeric::euclidean(zs, zi);
                matern32_r(r, h.sigma2, h.phi) + if r == 0.0 { h.tau2 } else { 0.0 }
            }),
        )
    }

    fn trend_at(&self, zs: &[f64]) -> f64 {
        trend_row(zs).iter().zip(&self.hyper.beta).map(|(a, b)| a * b).sum()
    }

    /// BLUP mean `ψ*β̂ + c'C⁻¹(y - ψβ̂)`.
    pub fn predict_mean(&self, theta: &[f64]) -> Result<f64> {
        if theta.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: theta.len() });
        }
        let zs = self.standardization.apply(theta);
        let c = self.cross_cov(&zs);
        Ok(self.trend_at(&zs) + c.dot(&self.weights))
    }

    /// BLUP mean and mean squared error
    /// `σ² + τ² - c'C⁻¹c + b'(ψ'C⁻¹ψ)⁻¹b`, `b = ψ* - ψ'C⁻¹c`.
    pub fn predict(&self, theta: &[f64]) -> Result<(f64, f64)> {
        if theta.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: theta.len() });
        }
        let zs = self.standardization.apply(theta);
        let c = self.cross_cov(&zs);
        let mean = self.trend_at(&zs) + c.dot(&self.weights);
        let v = self.chol.l_dirty().solve_lower_triangular(&c).ok_or(Error::SingularCovariance)?;
        let b = DVector::from_vec(trend_row(&zs)) - self.cinv_psi.transpose() * &c;
        let trend_term = b.dot(&self.m_chol.solve(&b));
        let h = &self.hyper;
        let mut mse = h.sigma2 + h.tau2 - v.dot(&v) + trend_term;
        if mse < 0.0 {
            if mse < -1e-8 {
                log::warn!("negative MSE {mse:e} clamped to 0");
            }
            mse = 0.0;
        }
        Ok((mean, mse))
    }

    pub fn to_json(&self) -> Result<String> {
        let f = EmulatorFile {
            design: self.design.clone(),
            response: self.response.clone(),
            sigma2: self.hyper.sigma2,
            phi: self.hyper.phi,
            tau2: self.hyper.tau2,
            standardization: self.standardization.clone(),
            checksum: self.checksum(),
        };
        Ok(serde_json::to_string_pretty(&f)?)
    }

    /// Rebuilds the factorisation and verifies it against the stored checksum.
    pub fn from_json(s: &str) -> Result<Self> {
        let f: EmulatorFile = serde_json::from_str(s)?;
        let em = Self::from_parts(&f.design, &f.response, f.sigma2, f.phi, f.tau2, f.standardization)?;
        let got = em.checksum();
        if (got - f.checksum).abs() > 1e-9 * f.checksum.abs().max(1.0) {
            return Err(Error::ChecksumMismatch { stored: f.checksum, recomputed: got });
        }
        Ok(em)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    fn checksum(&self) -> f64 {
        self.chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum()
    }
}

/// Mean and MSE of the emulator at `θ*`.
pub fn blup_predict(emulator: &GpEmulator, theta_star: &[f64]) -> Result<(f64, f64)> {
    emulator.predict(theta_star)
}
