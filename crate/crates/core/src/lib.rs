//! Proximity penalty priors for Bayesian Gaussian mixture models.
//!
//! The prior is split into an independent conjugate factor and a joint
//! penalty factor that compares components with one another. The sampler
//! draws every parameter block from its conjugate full conditional and
//! accepts it with the ratio of penalties, which is a valid
//! Metropolis-Hastings step for the penalized posterior.
//!
//! Modules:
//! - [`model`]: mixture density, likelihood, synthetic data
//! - [`priors`]: independent prior factor and conjugate conditionals
//! - [`penalty`]: penalty family, parser, acceptance ratio
//! - [`sampler`]: fixed-K Metropolis-within-Gibbs chain
//! - [`analysis`]: relabeling, pooling, KDE and grid summaries
//! - [`oracle`]: brute-force checks of the sampler on small problems
//! - [`cli`]: the `ppp` command-line interface

pub mod analysis;
pub mod cli;
pub mod error;
pub mod model;
pub mod oracle;
pub mod penalty;
pub mod priors;
pub mod rng;
pub mod sampler;
pub mod svg;

pub use error::{Error, Result};
pub use model::{Dataset, MixtureParams};
pub use penalty::PenaltySpec;
pub use priors::Hyperparams;
pub use sampler::{ChainConfig, SampleStore};
