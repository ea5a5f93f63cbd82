//! Core algorithms for studying semantic anchoring in few-shot arithmetic.
//!
//! Everything in this crate is deterministic given explicit seeds and free of
//! IO: embedding-cluster geometry and anchoring-strength scores ([`anchor`]),
//! a Bayesian pattern-selection simulator with sharp success thresholds
//! ([`sim`]), exact multi-base addition benchmarks ([`arith`]), psychometric
//! curve fitting ([`fit`]), information-theoretic debate diagnostics
//! ([`metrics`]), and a calibrated mock backend ([`backend`]). File formats,
//! the CLI, and wire transports live in the `anchorlab` companion crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

#[cfg(feature = "std")]
extern crate std;

pub mod anchor;
pub mod arith;
pub mod backend;
pub mod fit;
pub mod metrics;
pub mod sim;
pub mod util;
