//! Perfect sampling for finite-state Markov chains.
//!
//! The samplers here produce draws distributed *exactly* as the stationary
//! law of a chain, by rejection: run the time-reversed chain backward from
//! a seed, impute the driving randomness consistent with that path, and
//! accept the backward endpoint precisely when the imputed randomness makes
//! forward coupling coalesce. Variants cover fixed windows with retries, a
//! growing backward search, stochastically monotone chains driven through
//! upward kernels (including cross-monotone dominating chains), and the
//! forward-time mirrors (coupling from the past and read-once coupling).
//!
//! Everything distributional is exact rational arithmetic end to end. The
//! [`oracle`] module enumerates each sampler's full probability space and
//! returns the acceptance probability and conditional output laws as
//! rationals; the test suites assert the distributional identities as exact
//! equalities and drive the Monte Carlo layer ([`stats`]) against them.
//!
//! The `perfect-mcmc` binary exposes the samplers, the oracle and the
//! statistical validation over JSON chain-spec files; see the crate README.

pub mod chain;
pub mod chainspec;
pub mod detection;
pub mod error;
pub mod imputation;
pub mod oracle;
pub mod order;
pub mod ratio;
pub mod rng;
pub mod rule;
pub mod samplers;
pub mod stats;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{Error, Result};
