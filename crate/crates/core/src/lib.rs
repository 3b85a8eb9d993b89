//! Numerical ergodic optimization on analytic expanding circle maps.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod circle;
pub mod cli;
pub mod config;
pub mod dadic;
pub mod error;
pub mod hfamily;
pub mod linearization;
pub mod optimizer;
pub mod rng;
pub mod selftest;
pub mod trig;

pub use circle::{birkhoff_sum, uniform_grid, ExpandingMap, ExpansionConstants, MapOptions, Potential};
pub use dadic::DadicInt;
pub use error::{Error, Result};
pub use hfamily::{HFamily, HValue};
pub use trig::TrigPoly;
