//! Simulation and verification toolkit for secret-key sharing from
//! reciprocal channel phases.
//!
//! Alice switches RF mirrors around her antenna so that every mirror state
//! gives a fresh, uniformly distributed channel phase that Bob sees too. The
//! two-antenna and four-antenna protocols turn those phases into shared
//! values; [`keylink`] uses them to mask PSK symbols; [`adversary`] models a
//! passive eavesdropper; [`analysis`] measures what she learns.

pub mod adversary;
pub mod analysis;
pub mod environment;
pub mod error;
pub mod harness;
pub mod keylink;
pub mod phase_math;
pub mod protocol_four;
pub mod protocol_two;
pub mod transcript;

pub use error::{Error, Result};
pub use phase_math::Phase;
