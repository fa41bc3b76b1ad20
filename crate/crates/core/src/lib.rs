//! Exact Markov binomial distributions and their negative-binomial / binomial
//! approximations.
//!
//! For a stationary two-state chain with transition matrix
//! `[[1 - alpha, alpha], [1 - beta, beta]]`, the sum `S = X_1 + ... + X_n`
//! follows a Markov binomial law. This crate computes that law exactly,
//! fits moment-matched negative-binomial (over-dispersed) or binomial
//! (under-dispersed) approximations, evaluates fully explicit total-variation
//! error bounds for them, and ships numerical checks for the supporting
//! inequalities: Stein-solution difference bounds, coupling meeting-time
//! laws and smoothness of the sum.
//!
//! ```
//! use markov_binomial::{bounds, chain::ChainParams, fit};
//!
//! let params = ChainParams::new(0.1, 0.8).unwrap();
//! let nb = fit::fit_negative_binomial(&params, 100).unwrap();
//! assert!((nb.r - 12.46536).abs() < 1e-4);
//! let report = bounds::bound_nb(&params, 100).unwrap();
//! assert_eq!(report.clipped_value, 1.0);
//! ```

pub mod bounds;
pub mod chain;
pub mod cli;
pub mod coupling;
pub mod error;
pub mod fit;
pub mod pmf;
pub mod rng;
mod special;
pub mod stein;

pub use chain::{ChainParams, MomentSummary, Start, StationaryLaw};
pub use error::{Error, Result};
pub use fit::{BinFit, NbFit, Regime};
pub use pmf::Pmf;
