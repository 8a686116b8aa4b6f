//! Speech noise-reduction kernels.
//!
//! Two denoiser families share one signal substrate:
//!
//! * [`wavelet`]: DWT / wavelet-packet decomposition, universal or
//!   balance-sparsity thresholds, soft or hard shrinkage, reconstruction;
//! * [`adaptive`]: adaptive noise cancellation with LMS, NLMS, RLS, AFA and
//!   ANLMS weight updates, driven by an external noise reference or by a noise
//!   template gathered from [`vad`] decisions.
//!
//! [`metrics`] scores the results (SNR, SNR improvement, segmental SNR, MOS
//! aggregation) and [`signal`] provides WAV I/O, resampling to 8 kHz, framing
//! and SNR-controlled mixing.
//!
//! All numeric code is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the common `f64` instantiation.

pub mod adaptive;
pub mod metrics;
pub mod scalar;
pub mod signal;
pub mod synth;
pub mod vad;
pub mod wavelet;

pub use scalar::Real;

pub type AudioBufferF64 = signal::AudioBuffer<f64>;
pub type AudioBufferF32 = signal::AudioBuffer<f32>;
pub type WaveletFilterF64 = wavelet::WaveletFilter<f64>;
pub type WaveletDecompositionF64 = wavelet::WaveletDecomposition<f64>;
pub type AdaptiveFilterStateF64 = adaptive::AdaptiveFilterState<f64>;
pub type AdaptiveFilterStateF32 = adaptive::AdaptiveFilterState<f32>;
pub type MixSpecF64 = signal::MixSpec<f64>;
