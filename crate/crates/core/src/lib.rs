//! Spatial modulation over terahertz-band array-of-subarrays (AoSA) links.
//!
//! The crate covers the whole desk-scale chain:
//!
//! - [`geometry`]: AoSA layout, optimal and quantized subarray spacing.
//! - [`channel`]: LoS path gains, steering vectors, channel matrices and
//!   condition-number analysis.
//! - [`modulation`]: Gray-mapped square QAM and the hierarchical SA/AE bit mapper.
//! - [`detection`]: MRRC and exhaustive ML receivers.
//! - [`analysis`]: closed-form and quadrature-based error probabilities.
//! - [`linkbudget`]: path loss, thresholds, subarray sizing and sheet masks.
//! - [`sim`]: seeded, thread-count-independent Monte Carlo sweeps.
//! - [`cli`]: the `thz-sm` command-line front end.

pub mod analysis;
pub mod channel;
pub mod cli;
pub mod detection;
mod error;
pub mod geometry;
pub mod linkbudget;
pub mod modulation;
pub mod sim;

pub use error::{Error, Result};

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Free-space wavelength at `freq_hz`.
pub fn wavelength(freq_hz: f64) -> f64 {
    SPEED_OF_LIGHT / freq_hz
}

pub type Complex = num_complex::Complex64;
