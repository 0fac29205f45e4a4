//! Online prediction with k-subsets of experts.
//!
//! The learner picks `k` of `N` experts every round and is paid by a reward
//! function of the chosen set. The policies here never enumerate the
//! `binomial(N, k)` subsets: they compute first-order inclusion
//! probabilities (marginals) for a base learner and then draw a k-set that
//! matches those marginals exactly with systematic sampling.
//!
//! Layout:
//!
//! - [`sampling`]: marginal feasibility and systematic (Madow) sampling.
//! - [`esp`]: elementary symmetric polynomials, Hedge marginals and the
//!   incremental polynomial-coefficient engine.
//! - [`policy`]: SAGE-Hedge, entropic FTRL, the pairwise super-item policy
//!   and the potential-based policy for stable loss functions.
//! - [`baselines`]: LRU, LFU, FTPL and the brute-force expanded Hedge.
//! - [`environments`]: reward variants, trace generators and trace files.
//! - [`harness`]: offline oracles, bound calculators and the experiment
//!   runner used by the `kexperts` binary.

pub mod baselines;
pub mod environments;
pub mod error;
pub mod esp;
pub mod harness;
pub mod policy;
pub mod sampling;

mod combin;

pub use error::{Error, Result};
pub use sampling::{KSet, MarginalVector};
