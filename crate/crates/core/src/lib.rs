//! Ordered, incentive-compatible data sharing.
//!
//! The crate is `no_std` (with `alloc`). It contains the collaboration model,
//! the mechanism that chooses an order and per-player accuracies, Shamir
//! sharing, a deterministic round simulator, ordered and time-delayed MPC
//! protocols built on top of it, and timed commitments (time-lock and
//! time-line puzzles).
//!
//! Conventions used throughout:
//! * players are 0-based (`0..n`);
//! * a [`Permutation`] is a delivery order, `order[t - 1]` is the player served
//!   at time `t`;
//! * time indices `t` are 1-based because they appear as exponents of the
//!   discount factor.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod delay;
pub mod mechanism;
pub mod model;
pub mod ordered;
pub mod rng;
pub mod sharing;
pub mod simnet;
pub mod timed;

pub use model::{Instance, LearningBounds, Permutation, ProposedOutcome};

/// Absolute tolerance for floating point comparisons.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;
