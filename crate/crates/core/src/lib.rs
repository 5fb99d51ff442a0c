//! Bubbling and energy quantization for `−Δu = u|u|^{4/(n−2)}`.
//!
//! Start with [`concentration::make_sequence`] and
//! [`concentration::quantization_report`], or with the single-field tools in
//! [`fields`], [`monotonicity`] and [`lorentz`].

// `!(x > 0.0)` is how validation rejects NaN along with non-positive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod concentration;
pub mod error;
pub mod fields;
pub mod grid;
pub mod lorentz;
pub mod monotonicity;

pub use error::{Error, Result};
