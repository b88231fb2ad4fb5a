//! Timed commitments: time-lock and time-line puzzles.
//!
//! Two work functions are provided: repeated squaring modulo an RSA modulus
//! (locking uses the factorisation as a shortcut) and an iterated keyed
//! SHA-256 chain. A time-line puzzle locks several items on one chain so
//! that opening all of them costs `max t` steps rather than the sum.

mod hiding;
mod prime;
mod puzzle;
mod work;

use alloc::string::String;

use thiserror::Error;

pub use hiding::{
    hiding_experiment, ChainSolvingAdversary, HidingAdversary, HidingReport, HidingVariant,
    HidingView, QueryingAdversary, RandomGuessAdversary,
};
pub use prime::{is_probable_prime, random_prime};
pub use puzzle::{
    lock, lock_hybrid, lock_line, lock_line_hash, lock_line_square, solve, unlock_hybrid,
    unlock_line_at, ChainSolver, HybridPuzzle, TimeLinePuzzle, Work,
};
pub use work::{HashChainWork, SquaringTrapdoor, SquaringWork, WorkFunction};

/// Default prime size for the squaring scheme.
pub const DEFAULT_KAPPA: u32 = 512;
/// Prime size used by the toy parameter set.
pub const TOY_KAPPA: u32 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Square,
    Hash,
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Square => "square",
            Scheme::Hash => "hash",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "square" => Some(Scheme::Square),
            "hash" => Some(Scheme::Hash),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TimedError {
    #[error("item of {len} bytes exceeds one mask element ({width} bytes); use hybrid wrapping")]
    DataTooLong { len: usize, width: usize },
    #[error("security parameter {0} too small")]
    BadKappa(u32),
    #[error("a time-line puzzle needs at least one item")]
    EmptyLine,
    #[error("{delays} delays for {items} items")]
    LengthMismatch { delays: usize, items: usize },
    #[error("malformed puzzle: {0}")]
    Malformed(String),
}
