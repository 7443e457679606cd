// `!(x > 0.0)` is used on purpose: it rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod datagen;
pub mod dct;
pub mod error;
pub mod fastkan;
pub mod numerics;
pub mod rng;
pub mod theory;
pub mod trainer;

pub use error::{Error, Result};
