//! Mean-field simulation of superradiant bursts and revivals in an
//! inhomogeneously broadened spin ensemble coupled to a lossy cavity, with
//! spectral hole refilling from spin-spin relaxation.
//!
//! Internally every frequency is an angular frequency (rad/s) in the frame
//! rotating at the cavity frequency. Configuration files and user-facing
//! parameters use Hz.

// `!(x > 0.0)` style guards also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod dynamics;
pub mod ensemble;
pub mod error;
pub mod protocol;

pub use error::{Error, Result};
