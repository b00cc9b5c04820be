//! Spatio-temporal MJO forecasting toolkit.
//!
//! The pipeline runs gridded OLR/U200/U850/SST fields through climate
//! anomaly preprocessing ([`dkpm`]), derives RMM labels ([`rmm`]), encodes
//! each day with a residual convolution stack ([`srcm`]), and forecasts
//! `n` days of (RMM1, RMM2) with an attention LSTM encoder/decoder
//! ([`taam`]). [`training`] wires these into a trainable model and
//! [`metrics`] scores forecasts by lead time.
//!
//! Everything runs on the reverse-mode [`tensor`] engine in 64-bit floats.

mod binio;
pub mod cli;
pub mod config;
pub mod dkpm;
pub mod error;
pub mod gradcheck;
pub mod grid;
pub mod metrics;
pub mod pipeline;
pub mod rmm;
pub mod srcm;
pub mod taam;
pub mod training;
pub mod tensor;

pub use error::{Error, Result};
