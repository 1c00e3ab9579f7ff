//! Chirp-based underwater acoustic physical layer.
//!
//! The crate bundles everything needed to run a link end to end:
//!
//! * [`gfield`]: GF(2^m) arithmetic backing the non-binary code.
//! * [`tx`]: linear and quadratic chirp synthesis, frame assembly, IQ and
//!   passband file formats.
//! * [`channel`]: tapped-delay multipath with calibrated AWGN.
//! * [`rx`]: packet and path detection, per-path dechirp, spectral
//!   combination and soft-output generation.
//! * [`codec`]: NB-LDPC (QSPA and FFT-QSPA), binary LDPC and extended
//!   Hamming(8,4).
//! * [`harness`]: seeded Monte-Carlo experiments and CSV metrics.
//!
//! Signal and decoder code is generic over [`Real`]; the aliases below pin
//! the common `f64` / `f32` instantiations.

pub mod channel;
pub mod codec;
pub mod gfield;
pub mod harness;
mod real;
pub mod rx;
pub mod tx;

pub use real::Real;

pub use channel::{ChannelProfile, RngSeed, Tap};
pub use codec::{CodecConfig, Scheme};
pub use gfield::{FieldSpec, GfElem};
pub use rx::{CombineMode, DemodOutput, PathEstimate, ReceiverConfig};
pub use tx::{ChirpConfig, ChirpKind, FrameLayout};

/// Double-precision complex baseband buffer.
pub type IqBuffer64 = tx::IqBuffer<f64>;
/// Single-precision complex baseband buffer.
pub type IqBuffer32 = tx::IqBuffer<f32>;
/// Double-precision dechirp amplitude spectrum.
pub type SymbolSpectrum64 = rx::SymbolSpectrum<f64>;
/// Single-precision dechirp amplitude spectrum.
pub type SymbolSpectrum32 = rx::SymbolSpectrum<f32>;
/// Double-precision per-symbol LLR vector.
pub type LlrVector64 = rx::LlrVector<f64>;
/// Single-precision per-symbol LLR vector.
pub type LlrVector32 = rx::LlrVector<f32>;
/// Double-precision receiver output.
pub type DemodOutput64 = rx::DemodOutput<f64>;
