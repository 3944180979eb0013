//! Affine frequency division multiplexing and its chirp-domain relatives
//! (OFDM, OCDM, OTFS) over doubly dispersive channels: discrete affine
//! Fourier transforms, modems with chirp-periodic prefixes, delay-Doppler
//! channel models, linear detection, embedded-pilot sensing and Monte Carlo
//! analysis.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod detection;
pub mod error;
pub mod sensing;
pub mod signal;
pub mod transforms;
pub mod analysis;
pub mod channel;
pub mod waveform;

pub use error::{Error, Result};
pub use signal::{ComplexSignal, Domain};
