//! Convolutive superposition spectrum sharing for OFDM cognitive radio.
//!
//! A secondary transmitter (STx) overhears one OFDM block of a primary
//! link, filters it with a short FIR chosen by its own data, and adds a
//! signal on a few virtual subcarriers that the primary link leaves idle.
//! The crate covers the full chain: DFT bookkeeping, channels, precoders,
//! a block-level time-domain simulator, and the capacity analysis that
//! ties everything together. [`harness`] turns configuration files into
//! reproducible sweeps.

pub mod capacity;
pub mod channel;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod mc;
pub mod oracle;
pub mod precoder;
pub mod special;
pub mod spectral;
pub mod transceiver;
pub mod validation;

pub use error::{Error, Result};
pub use num_complex::Complex64;
