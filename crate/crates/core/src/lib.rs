//! Forward and inverse solvers for linearly-solvable Markov decision processes.
//!
//! The crate is `no_std` (it needs `alloc`) and contains only numerical code:
//!
//! - [`lmdp`]: optimal policies, Z-iteration, cost recovery from costs-to-go.
//! - [`spp`]: the self-propelled-particle model embedded as an LMDP, plus a
//!   seeded multi-agent simulator producing transition counts.
//! - [`basis`]: feature matrices mapping weights to costs-to-go.
//! - [`inference`]: likelihood, hierarchical prior, NUTS and mean-field
//!   variational posteriors over basis weights.
//! - [`trajectory`]: turning positional tracks into misalignment states and
//!   transition counts on a 2-D circular grid.
//!
//! File formats, the CLI and thread-level parallelism live in the companion
//! `lmdp-irl` crate.

#![no_std]
#![forbid(unsafe_code)]
// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod basis;
pub mod error;
pub mod grid;
pub mod inference;
pub mod lmdp;
pub mod math;
pub mod matrix;
pub mod rng;
pub mod spp;
pub mod trajectory;

pub use error::{Error, Result};
pub use grid::{Axis, StateGrid};
pub use matrix::DenseMatrix;
