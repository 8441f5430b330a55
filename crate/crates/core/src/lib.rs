//! Thermal-noise spectra of lossless coaxial lines with reflective
//! terminations and of a 4-port splitter network, plus a derivative-free
//! fitter that recovers line lengths, delays and display offsets from
//! measured or synthetic spectra.

pub mod cli;
pub mod config;
pub mod csv_io;
pub mod error;
pub mod fit;
pub mod measurement;
pub mod spectrum;
pub mod splitter;
pub mod tline;
pub mod wave;

pub use error::{Error, Result};
pub use spectrum::{FrequencyGrid, PowerSpectrum};
pub use wave::{CableSegment, Termination};
