//! Multi-tone ultrasound Doppler sensing for speech: transmitter and echo
//! simulation, receiver filtering and feature extraction, training losses
//! with verified gradients, dataset construction and objective metrics.

pub mod buffer;
pub mod dataset;
pub mod dsp;
pub mod error;
pub mod features;
pub mod losses;
pub mod metrics;
pub mod sensing;

pub use buffer::SampleBuffer;
pub use error::{Error, Result};
