//! Defective Galton-Watson processes in a varying environment.
//!
//! A population starts from one individual. In generation `n` every
//! individual independently has `k` children with probability `f_n[k]`, or,
//! with the remaining probability `1 - f_n(1)`, sends the whole process to an
//! absorbing graveyard state `Δ`. This crate computes such processes exactly
//! (by composing probability generating functions) and by simulation:
//!
//! - [`offspring`]: single-generation laws, their derivatives, fixed points
//!   and regularity constants.
//! - [`environment`]: the sequence of laws, composed generating functions,
//!   mean products and exact truncated distributions of `Z_n`.
//! - [`analysis`]: moments, absorption probabilities, bounds and criteria on
//!   absorption and explosion.
//! - [`simulate`]: reproducible parallel Monte Carlo by the direct recursion
//!   and by the killed non-defective coupling.
//! - [`trees`]: defective family trees, the spine construction for trees
//!   conditioned on non-absorption, and brute-force oracles.
//! - [`config`] and [`cli`]: the experiment runner behind the `dgwve` binary.

pub mod analysis;
pub mod cli;
pub mod config;
pub mod environment;
mod error;
pub mod offspring;
pub mod simulate;
pub mod trees;

pub use environment::{DistVector, Environment, TailMeta, Window};
pub use error::{Error, Result};
pub use offspring::{OffspringLaw, RegularityReport};

use std::fmt;

/// A value in `ℕ₀ ∪ {Δ}`: a population size or the graveyard state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum State {
    Count(u64),
    Delta,
}

impl State {
    pub fn is_delta(self) -> bool {
        matches!(self, State::Delta)
    }

    /// Both `0` and `Δ` are absorbing.
    pub fn is_absorbed(self) -> bool {
        matches!(self, State::Delta | State::Count(0))
    }

    pub fn count(self) -> Option<u64> {
        match self {
            State::Count(k) => Some(k),
            State::Delta => None,
        }
    }

    /// `Δ + k = Δ`.
    pub fn add(self, other: State) -> State {
        match (self, other) {
            (State::Count(a), State::Count(b)) => State::Count(a.saturating_add(b)),
            _ => State::Delta,
        }
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            State::Count(k) => write!(f, "{k}"),
            State::Delta => f.write_str("D"),
        }
    }
}

impl serde::Serialize for State {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            State::Count(k) => serializer.serialize_u64(*k),
            State::Delta => serializer.serialize_str("D"),
        }
    }
}
