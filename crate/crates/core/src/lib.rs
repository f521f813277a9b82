//! Noisy density evolution for LDPC decoders under asymmetric hardware deviations.
//!
//! The crate tracks message densities conditioned on the transmitted codeword
//! bit, so it does not rely on the all-zero-codeword assumption. It covers
//! three decoders (belief propagation via population dynamics, Gallager B and
//! quantized offset Min-Sum), ε-threshold search, finite-length BER prediction,
//! asymmetric parameter optimization and a faulty-decoder Monte-Carlo
//! simulator used to validate every prediction.

pub mod analysis;
pub mod channels;
pub mod codes;
pub mod de_bp_mc;
pub mod de_gallager_b;
pub mod de_minsum;
pub mod densities;
pub mod deviations;
mod error;
pub mod optimize;
pub mod result;
pub mod sim;
pub mod stream;

pub use error::{Error, Result};
