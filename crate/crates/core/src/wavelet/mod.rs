//! Orthogonal wavelet denoising: decomposition, threshold estimation,
//! shrinkage and reconstruction.

mod denoise;
mod filters;
mod tables;
mod threshold;
mod transform;

use thiserror::Error;

pub use denoise::{denoise_wavelet, WaveletDenoiseConfig};
pub use filters::{validate_filter_table, wavelet_filters, FilterDefect, WaveletFamily, WaveletFilter};
pub use threshold::{
    apply_threshold, balance_sparsity_crossing, balance_sparsity_threshold, estimate_threshold, median_abs_sigma,
    retained_energy_fraction, shrink, universal_threshold, zeros_fraction, ShrinkMode, ThresholdMethod,
    ThresholdScope, ThresholdSpec, ThresholdValue,
};
pub use transform::{dwt, reconstruct, transform, wpt, TransformKind, WaveletDecomposition, DEFAULT_LEVELS};

#[derive(Debug, Error)]
pub enum WaveletError {
    #[error("unknown wavelet family `{0}`")]
    UnknownFamily(String),
    #[error("cannot decompose an empty signal")]
    EmptySignal,
    #[error("decomposition depth must be at least 1")]
    InvalidLevels,
    #[error("decomposition was produced with {expected}, reconstruction requested with {found}")]
    FamilyMismatch {
        expected: WaveletFamily,
        found: WaveletFamily,
    },
    #[error("threshold must be finite and non-negative")]
    InvalidThreshold,
    #[error("per-band threshold has {found} entries for {expected} bands")]
    BandCountMismatch { expected: usize, found: usize },
}
