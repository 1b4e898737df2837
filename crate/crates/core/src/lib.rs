//! Polyphonic sound event detection with bidirectional LSTM networks.

pub mod augment;
pub mod cli;
pub mod detection;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod neural;
pub mod sequence;
pub mod synthgen;
pub mod training;

pub use error::{Error, Result};
