//! Bayesian occupant identification and belief-weighted comfort control for
//! simulated smart homes.
//!
//! The smart home never sees who is present. It keeps a Gaussian TH
//! preference profile per known occupant, tracks a belief over them from the
//! TH the occupant settles on, weights per-occupant Q-tables by that belief,
//! and at the end of every episode decides with a Jensen-Shannon threshold
//! whether the occupant was known or new.

pub mod agent;
pub mod belief;
pub mod env;
pub mod error;
pub mod harness;
pub mod identity;
pub mod occupant;
pub mod preference;
pub mod records;

pub use error::{Error, Result};
