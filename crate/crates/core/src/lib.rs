//! Adversarial reduced-order forecasting of time-resolved velocity fields.
//!
//! The pipeline compresses snapshots with PCA ([`rom`]), regularises the
//! principal-component series with an adversarial autoencoder ([`aae`]),
//! forecasts latent deltas with an adversarially trained LSTM ([`alstm`]) and
//! rolls the forecasts out and back to physical space ([`forecast`]).
//! [`pipeline`] wires the stages to a config file and on-disk artifacts.

pub mod aae;
pub mod alstm;
mod binfmt;
pub mod error;
pub mod forecast;
pub mod nn;
pub mod pipeline;
pub mod rng;
pub mod rom;
pub mod snapshots;
pub mod table;

pub use error::{Error, Result};
