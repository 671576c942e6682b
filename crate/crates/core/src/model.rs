//! The plug-in model interface.
//!
//! A model supplies the unnormalised log-likelihood `log h(x | θ)` and an
//! approximate sampler for `h(· | θ) / Z(θ)`. Samplers and the importance
//! sampling layer only ever talk to models through this trait.

use crate::rng::Rng;

pub trait Model: Sync {
    /// A dataset (observed or simulated).
    type Data: Clone + Send + Sync;

    /// Cached form of a dataset for repeated `log h` evaluation at many
    /// parameter values (sufficient statistics, distance matrices, ...).
    type Prepared: Send + Sync;

    /// Parameter dimension `p`.
    fn dim(&self) -> usize;

    fn prepare(&self, data: &Self::Data) -> Self::Prepared;

    /// `log h(x | θ)` for a prepared dataset. May be `-inf` at hard-core
    /// violations, never NaN on the declared domain.
    fn log_h_prepared(&self, prepared: &Self::Prepared, theta: &[f64]) -> f64;

    fn log_h(&self, data: &Self::Data, theta: &[f64]) -> f64 {
        self.log_h_prepared(&self.prepare(data), theta)
    }

    /// Starting state for a fresh chain targeting `h(· | θ)`.
    fn initial_state(&self, theta: &[f64], rng: &mut Rng) -> Self::Data;

    /// Advances `state` by `cycles` sweeps of the model's MCMC sampler at `θ`.
    fn simulate(&self, state: &mut Self::Data, theta: &[f64], cycles: usize, rng: &mut Rng);

    /// Low-dimensional summary statistics, when the model has them.
    fn summary(&self, _data: &Self::Data) -> Option<Vec<f64>> {
        None
    }
}
