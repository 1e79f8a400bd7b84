//! Semi-supervised adversarially robust learning on the two-component
//! symmetric Gaussian mixture.
//!
//! The crate is organised bottom-up:
//!
//! - [`rng`] and [`gmm`]: reproducible stream-split randomness and the
//!   `(θ*, σ)` mixture sampler.
//! - [`linalg`] and [`spectral`]: covariance estimation, power iteration and
//!   the one-labeled-point spectral classifier.
//! - [`risk`]: closed-form and Monte-Carlo natural/robust 0-1 risks, the
//!   label-free stability term and the robust-risk decomposition bound.
//! - [`adv`]: PGD attacks, the supervised and pseudo-label robust losses and
//!   the minibatch training loop over small differentiable classifiers.
//! - [`data`]: IDX readers, semi-supervised splits and the synthetic dataset
//!   container.
//! - [`harness`]: experiment configs, seeded trial execution, summaries and
//!   the acceptance battery used by the CLI.

pub mod adv;
pub mod data;
pub mod error;
pub mod gmm;
pub mod harness;
pub mod linalg;
pub mod normal;
pub mod risk;
pub mod rng;
pub mod spectral;
pub mod stats;

pub use error::{Error, Result};
pub use gmm::{Dataset, Example, GmmParams, LabeledSample, Sign};
pub use rng::RngSeed;
pub use spectral::{EigenResult, LinearClassifier};
