//! Rare-event probabilities for random walks by sequential importance
//! sampling with resampling, using exponential-tilt weight schedules.
//!
//! See the book under `book/` for a guided tour.

// NaN-rejecting checks are written as `!(x > 0.0)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod engine;
pub mod error;
pub mod exp_family;
pub mod harness;
pub mod models;
pub mod numeric;
pub mod rng;
pub mod schedules;
pub mod spectral;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    struct Introduction;
    #[doc = include_str!("../../../book/src/tilting.md")]
    struct Tilting;
    #[doc = include_str!("../../../book/src/resampling.md")]
    struct Resampling;
    #[doc = include_str!("../../../book/src/schedules.md")]
    struct Schedules;
    #[doc = include_str!("../../../book/src/markov.md")]
    struct Markov;
    #[doc = include_str!("../../../book/src/experiments.md")]
    struct Experiments;
}
