//! Phase-amplitude reduction of oscillator networks reconstructed from
//! phase/radius time series.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod averaging;
pub mod basis;
pub mod config;
pub mod coupling;
pub mod error;
pub mod io;
pub mod limit_cycle;
pub mod models;
pub mod ode;
pub mod pipeline;
pub mod ridge;
pub mod signal;
pub mod transforms;
pub mod vf_reconstruction;

pub use error::{Error, Result};
