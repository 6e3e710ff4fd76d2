#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bpa;
pub mod cli;
pub mod error;
pub mod ffbp;
pub mod io;
pub mod metrics;
pub mod model;
pub mod rangecomp;
pub mod simulator;
pub mod spectrum;

pub use error::{Error, ErrorClass, Result};
