//! Simulation of quantum string seals, bit seals built on top of them, and the
//! two seal-based bit commitment protocols (Basic and Advanced), together with
//! concrete cheating strategies and exact branch-enumeration oracles.
//!
//! The crate is `no_std` and only needs `alloc`. All randomness is passed in
//! explicitly: classical choices come from any [`rand::Rng`], quantum outcomes
//! from an [`OutcomeSource`], which is either a random stream or a
//! [`BranchReplay`] used by the exact oracles to enumerate every branch.

#![cfg_attr(not(test), no_std)]
#![deny(rust_2018_idioms)]

extern crate alloc;

pub mod adversary;
pub mod bits;
pub mod bitseal;
pub mod chance;
pub mod gf2;
mod math;
pub mod quantum;
pub mod reference;
pub mod rng;
pub mod seal;
pub mod session;
pub mod stats;

/// Library version, recorded in report metadata.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use bits::BitString;
pub use chance::{enumerate_branches, Branch, BranchReplay, OutcomeSource};
