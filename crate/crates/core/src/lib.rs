//! Joint unicast and multigroup-multicast downlink in single-cell massive MIMO
//! with maximum-ratio transmission.
//!
//! The crate covers the whole resource-allocation chain:
//!
//! - [`scenario`]: cell constants, user drops, path loss and the conversion
//!   from physical units (W, J, dBm/Hz) to noise-normalized values.
//! - [`closed_form`]: MMSE estimation variances and the achievable SINR/SE
//!   expressions for unicast and multicast users.
//! - [`optimizers`]: closed-form max-min-fair multicast allocation,
//!   water-filling for the weighted unicast sum SE, the Pareto boundary
//!   sweep between the two, a convexity check and a brute-force oracle.
//! - [`montecarlo`]: channel/pilot simulation that checks every closed-form
//!   term against sample averages.
//! - [`cli`]: JSON experiment configs, the command runner behind the
//!   `mimo-pareto` binary and the output file formats.
//!
//! All powers are noise-normalized: a transmit power of `q` means `q` times
//! the noise power over the signal bandwidth.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod closed_form;
pub mod error;
pub mod montecarlo;
pub mod optimizers;
pub mod scenario;

pub use error::{Error, Result};
