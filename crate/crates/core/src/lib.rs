//! Shaped-pulse gate design for a driven electron-nuclear spin pair coupled
//! to a nuclear-spin bath.
//!
//! Frequencies at every public boundary are plain frequencies in kHz and
//! times are in ns (μs for spectroscopy, ms for relaxation). Generators handed
//! to [`qcore`] are angular, in rad/ns; [`units`] holds the conversions.

// `!(x > 0.0)` is the NaN-rejecting form used for argument checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod ddspec;
pub mod error;
pub mod fit;
pub mod grape;
pub mod model;
pub mod noise;
pub mod qcore;
pub mod relax;
pub mod units;

pub use error::{Error, Result};
