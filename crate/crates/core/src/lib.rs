//! Consensus and decentralized optimization over slowly time-varying graphs.
//!
//! The crate is `no_std` (it needs `alloc`) and contains only the numerical
//! machinery. File formats, the experiment runner and the command line live
//! in the `slowvary` companion crate.
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`linalg`] | dense matrices and a symmetric eigensolver |
//! | [`graph`] | undirected graphs, weights, BFS utilities |
//! | [`gossip`] | Laplacians, gossip-matrix checks, spectral bounds, weight retuning |
//! | [`markov`] | Markov chains over finite graph families |
//! | [`consensus`] | accelerated consensus with a multilevel batch estimator |
//! | [`decopt`] | accelerated gradient method with inner consensus |
//! | [`lowerbound`] | the two-star adversarial sequence and its information-flow floor |
#![no_std]
// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod consensus;
pub mod decopt;
mod error;
pub mod gossip;
pub mod graph;
pub mod linalg;
pub mod lowerbound;
pub mod markov;
pub mod seed;
pub mod source;

pub use error::{Error, Result};

/// Library version string, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
