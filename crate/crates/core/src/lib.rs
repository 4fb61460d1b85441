//! Generative design with a performance-augmented diversity loss.
//!
//! The crate trains small GANs whose generator objective adds a
//! determinantal-point-process loss built from a quality-weighted RBF kernel,
//! and ships the 2-D synthetic benchmarks used to compare it against plain,
//! diversity-only and quality-only variants.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod datasets;
pub mod dpp;
mod error;
pub mod evaluation;
pub mod experiment;
pub mod io;
pub mod models;
pub mod nn;
pub mod plot;
pub mod quality;

pub use error::{Error, Result};
