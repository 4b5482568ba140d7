//! Noisy-supervision source separation lab: ring-mixed batches, SDR / SI-SDR
//! / SCER losses, occupancy, λ-family loss landscapes and a toy optimizer.

pub mod error;
pub mod export;
pub mod landscape;
pub mod losses;
pub mod mixing;
pub mod signal;
pub mod synth;
pub mod toysep;
pub mod wav;

pub use error::{Error, Result};
pub use signal::{Energy, Waveform};
