#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod belief;
pub mod cli;
pub mod config;
pub mod error;
pub mod io;
pub mod model;
pub mod quadrature;
pub mod simulate;
pub mod solver;
pub mod stability;

pub use error::{Error, Result};
