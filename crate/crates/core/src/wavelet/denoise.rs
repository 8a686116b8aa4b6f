use serde::{Deserialize, Serialize};

use crate::scalar::Real;
use crate::signal::AudioBuffer;

use super::{
    apply_threshold, estimate_threshold, reconstruct, transform, wavelet_filters, ShrinkMode, ThresholdMethod,
    ThresholdScope, TransformKind, WaveletError, WaveletFamily, DEFAULT_LEVELS,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WaveletDenoiseConfig {
    pub family: WaveletFamily,
    pub kind: TransformKind,
    pub levels: usize,
    pub method: ThresholdMethod,
    pub mode: ShrinkMode,
    #[serde(default)]
    pub scope: ThresholdScope,
}

impl WaveletDenoiseConfig {
    pub fn new(family: WaveletFamily, kind: TransformKind, method: ThresholdMethod, mode: ShrinkMode) -> Self {
        Self {
            family,
            kind,
            levels: DEFAULT_LEVELS,
            method,
            mode,
            scope: ThresholdScope::Global,
        }
    }

    /// `dwt-universal-hard`, plus `-perband` when not global.
    pub fn variant(&self) -> String {
        let mut v = format!("{}-{}-{}", self.kind.as_str(), self.method.as_str(), self.mode.as_str());
        if self.scope == ThresholdScope::PerBand {
            v.push_str("-perband");
        }
        if self.levels != DEFAULT_LEVELS {
            v.push_str(&format!("-l{}", self.levels));
        }
        v
    }
}

/// Transform, estimate a threshold, shrink, invert. Output length equals input length.
pub fn denoise_wavelet<T: Real>(
    noisy: &AudioBuffer<T>,
    config: &WaveletDenoiseConfig,
) -> Result<AudioBuffer<T>, WaveletError> {
    let filter = wavelet_filters::<T>(config.family);
    let decomp = transform(noisy, &filter, config.kind, config.levels)?;
    let spec = estimate_threshold(&decomp, config.method, config.mode, config.scope);
    let shrunk = apply_threshold(&decomp, &spec)?;
    reconstruct(&shrunk, &filter)
}
