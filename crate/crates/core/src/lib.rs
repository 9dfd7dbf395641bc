//! Interactive transmission of a discrete source to a receiver that holds
//! correlated side information.
//!
//! The sender (Alice) has a value `x` of a random variable `X`; the receiver
//! (Bob) has a correlated value `y` of `Y` and the joint law of `(X, Y)`.
//! Instead of a one-way code, the parties interact over a binary channel and
//! share a seeded source of public randomness, realized as a family of boolean
//! hash functions. Alice reveals hash values of `x` in stages; Bob narrows the
//! candidates down by conditional-probability bucket until a unique match
//! survives. The expected number of bits exchanged tracks the conditional
//! entropy `H(X|Y)` instead of `H(X)`.
//!
//! The crate provides:
//!
//! - [`dist`]: finite joint/conditional distributions, entropy functionals,
//!   sampling, and the named example families used by the experiments.
//! - [`hashing`]: the shared-randomness hash oracle, reproducible bit-for-bit
//!   from a 256-bit seed across parties, platforms, and runs.
//! - [`engine`]: a two-party alternating-message simulator with exact
//!   transcript, direction, and round accounting.
//! - [`protocols`]: the staged hash protocol, its entropy-tuned instantiation,
//!   the constant-expected-rounds variant, and seed-fixing derandomization.
//! - [`compress`]: one-round public-coin protocol compression driven by
//!   information complexity, plus statistical distance.
//! - [`bounds`]: closed-form communication lower bounds and consistency
//!   checks of measured statistics against them.
//!
//! The crate is `no_std` (with `alloc`); IO, file formats, and the CLI live in
//! the companion `sidelink` crate.

#![no_std]
#![deny(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod bounds;
pub mod compress;
pub mod dist;
pub mod engine;
pub mod hashing;
pub mod protocols;
pub mod rational;

pub use dist::{ConditionalDistribution, Distribution, JointDistribution, SymbolId};
pub use engine::{Direction, ProtocolOutcome, RunStats, Transcript};
pub use hashing::{HashBackend, HashOracle, SharedSeed};

use alloc::string::String;

/// Errors shared by the whole crate.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    /// A constructor argument is outside its documented range.
    #[error("bad parameter: {0}")]
    BadParam(String),
    /// A distribution failed validation (mass, positivity, support coverage).
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    /// Conditioning on a `y` outside the joint's y-support.
    #[error("unknown y symbol {0}")]
    UnknownY(u32),
    /// A hash query addressed a symbol outside the oracle's domain.
    #[error("symbol {symbol} outside hash domain of size {domain_size}")]
    DomainOverflow { symbol: u32, domain_size: u32 },
    /// The interaction exceeded its stage cap; signals a protocol bug, not a
    /// statistical event.
    #[error("protocol did not terminate within {max_turns} turns")]
    NonTermination { max_turns: usize },
    /// The value to transmit has zero probability under the receiver's law.
    #[error("symbol {0} not in the support of the distribution")]
    NotInSupport(u32),
    /// A one-round protocol's message map does not cover the required inputs.
    #[error("incompatible supports: {0}")]
    IncompatibleSupports(String),
    /// No candidate seed achieved the requested error budget.
    #[error("no candidate seed reached the target error probability")]
    NoSeedFound,
}

/// Crate-wide result alias.
pub type Result<T> = core::result::Result<T, Error>;
