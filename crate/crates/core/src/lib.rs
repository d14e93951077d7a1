//! Low-rank matrix completion with entrywise uncertainty quantification.
//!
//! Frequentist side: ALS and soft-impute base fits ([`freq`]) and the
//! de-biased estimator with Gaussian confidence intervals ([`debias`]).
//! Bayesian side: tempered Gibbs samplers under fixed-rank and flexible-rank
//! factor priors with equal-tailed credible intervals ([`bayes`]).
//! [`sim`] generates synthetic problems and [`bench`] runs replicated
//! simulation studies and writes tables.

pub mod bayes;
pub mod bench;
pub mod debias;
pub mod error;
pub mod freq;
mod kernels;
pub mod linalg;
pub mod model;
pub mod rng;
pub mod sim;
pub mod stats;

pub use error::{Error, Result};
pub use model::{
    complement_project, compute_errors, mask_project, CompletionEstimate, DenseMatrix, Entry, ErrorReport,
    FactorPair, Method, ObservationSet,
};
pub use rng::RngStream;
