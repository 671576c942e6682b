//! Gaussian-process function emulation for Bayesian inference on doubly
//! intractable posteriors.
//!
//! The crate provides the two emulated samplers (normalising-function
//! emulation and full-likelihood emulation), the double Metropolis-Hastings
//! baseline, particle selection by short DMH runs or ABC, two built-in
//! models (a curved ERGM with edges + GWESP terms and an attraction-repulsion
//! Markov point process) and the usual chain diagnostics.
//!
//! A typical pipeline:
//!
//! 1. choose particles ([`mcmc::abc_particles`] or [`mcmc::dmh_particles`]),
//! 2. estimate `log Z` or `log L` at every particle by importance sampling
//!    ([`isampling::precompute_table`]),
//! 3. fit a Matérn-3/2 emulator ([`gp::GpEmulator::fit`]),
//! 4. run the emulated chain ([`mcmc::run_chain`]).

pub mod design;
pub mod diagnostics;
pub mod ergm;
pub mod error;
pub mod gp;
pub mod io;
pub mod isampling;
pub mod mcmc;
pub mod model;
pub mod numeric;
pub mod par;
pub mod pointproc;
pub mod prior;
pub mod rng;
pub mod types;

pub use error::{Error, Result};
pub use model::Model;
pub use types::{BoxDomain, ChainOutput, ParamVector};
