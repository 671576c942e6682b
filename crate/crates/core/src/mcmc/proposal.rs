use nalgebra::{Cholesky, DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::Rng;

pub const DEFAULT_ADAPT_UNTIL: usize = 10_000;
pub const DEFAULT_MIN_HISTORY: usize = 100;
const RIDGE: f64 = 1e-8;

/// Gaussian random-walk proposal `N(θ, scale·cov)` with covariance
/// re-estimated from the chain history until `adapt_until`.
#[derive(Debug, Clone)]
pub struct ProposalState {
    cov: DMatrix<f64>,
    chol: Option<DMatrix<f64>>,
    pub scale: f64,
    pub adapt_until: usize,
    /// History length needed before the first re-estimate.
    pub min_history: usize,
    n: usize,
    mean: DVector<f64>,
    m2: DMatrix<f64>,
}

impl PartialEq for ProposalState {
    fn eq(&self, o: &Self) -> bool {
        self.cov == o.cov
            && self.scale == o.scale
            && self.adapt_until == o.adapt_until
            && self.min_history == o.min_history
            && self.n == o.n
            && self.mean == o.mean
            && self.m2 == o.m2
    }
}

impl ProposalState {
    /// `cov` must be symmetric positive definite; `scale = 2.38²/p`.
    pub fn new(cov: DMatrix<f64>, adapt_until: usize) -> Result<Self> {
        let p = cov.nrows();
        if p == 0 || cov.ncols() != p {
            return Err(Error::DimensionMismatch { expected: p, got: cov.ncols() });
        }
        if cov != cov.transpose() {
            return Err(Error::InvalidArgument("proposal covariance not symmetric".into()));
        }
        let chol = Cholesky::new(cov.clone())
            .ok_or_else(|| Error::InvalidArgument("proposal covariance not positive definite".into()))?
            .l();
        Ok(Self {
            cov,
            chol: Some(chol),
            scale: 2.38 * 2.38 / p as f64,
            adapt_until,
            min_history: DEFAULT_MIN_HISTORY,
            n: 0,
            mean: DVector::zeros(p),
            m2: DMatrix::zeros(p, p),
        })
    }

    pub fn diagonal(variances: &[f64], adapt_until: usize) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(variances)), adapt_until)
    }

    /// From a covariance given as rows, e.g. [`crate::ergm::MpleFit::cov`].
    pub fn from_rows(rows: &[Vec<f64>], adapt_until: usize) -> Result<Self> {
        let p = rows.len();
        if let Some(r) = rows.iter().find(|r| r.len() != p) {
            return Err(Error::DimensionMismatch { expected: p, got: r.len() });
        }
        Self::new(DMatrix::from_fn(p, p, |i, j| rows[i][j]), adapt_until)
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn dim(&self) -> usize {
        self.cov.nrows()
    }

    fn factor(&mut self) -> &DMatrix<f64> {
        if self.chol.is_none() {
            self.chol = Some(Cholesky::new(self.cov.clone()).expect("covariance kept positive definite").l());
        }
        self.chol.as_ref().expect("factor just set")
    }

    /// `θ + √scale · L z`, `z ~ N(0, I)`.
    pub fn propose(&mut self, theta: &[f64], rng: &mut Rng) -> Vec<f64> {
        let p = theta.len();
        let z = DVector::from_fn(p, |_, _| StandardNormal.sample(rng));
        let s = self.scale.sqrt();
        let step = self.factor() * z;
        theta.iter().zip(step.iter()).map(|(t, d)| t + s * d).collect()
    }

    /// Adds the current state to the running history and, while
    /// `iter <= adapt_until`, replaces the covariance by the history's sample
    /// covariance plus a small ridge. Degenerate histories keep the previous
    /// covariance.
    pub fn observe(&mut self, theta: &[f64], iter: usize) {
        if iter > self.adapt_until {
            return;
        }
        let x = DVector::from_column_slice(theta);
        self.n += 1;
        let delta = &x - &self.mean;
        self.mean += &delta / self.n as f64;
        let delta2 = &x - &self.mean;
        self.m2 += &delta * delta2.transpose();
        if self.n >= self.min_history.max(2) {
            let mut c = &self.m2 / (self.n - 1) as f64;
            c = (&c + c.transpose()) * 0.5;
            if c.diagonal().iter().all(|&v| v > 0.0) {
                for i in 0..c.nrows() {
                    c[(i, i)] += RIDGE;
                }
                if let Some(ch) = Cholesky::new(c.clone()) {
                    self.cov = c;
                    self.chol = Some(ch.l());
                }
            }
        }
    }
}

/// Functional form of the adaptation rule: the proposal after observing
/// `history` (all states up to `iter`).
pub fn adapt_proposal(state: &ProposalState, history: &[Vec<f64>], iter: usize) -> ProposalState {
    let mut s = state.clone();
    if iter > s.adapt_until {
        return s;
    }
    s.n = 0;
    s.mean.fill(0.0);
    s.m2.fill(0.0);
    let take = history.len().min(iter.max(1));
    for (k, h) in history[..take].iter().enumerate() {
        s.observe(h, k + 1);
    }
    s
}
