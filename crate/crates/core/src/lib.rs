//! Controlled rough paths on discrete time grids.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod brownian;
pub mod controlled;
pub mod error;
pub mod grid;
pub mod rate;
pub mod rde;
pub mod sewing;
pub mod signature;
mod tensor;
pub mod young;

pub use error::{Error, Result};
