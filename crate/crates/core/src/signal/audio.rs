use crate::scalar::Real;

use super::SignalError;

/// Mono sampled signal.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer<T> {
    pub(crate) samples: Vec<T>,
    pub(crate) sample_rate: u32,
}

impl<T: Real> AudioBuffer<T> {
    /// Builds a buffer, rejecting a zero rate and any NaN/Inf sample.
    pub fn new(samples: Vec<T>, sample_rate: u32) -> Result<Self, SignalError> {
        if sample_rate == 0 {
            return Err(SignalError::ZeroSampleRate);
        }
        if let Some(index) = samples.iter().position(|s| !s.is_finite()) {
            return Err(SignalError::NonFinite { index });
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn silence(len: usize, sample_rate: u32) -> Result<Self, SignalError> {
        Self::new(vec![T::zero(); len], sample_rate)
    }

    /// Builds a buffer from values already known to be finite (e.g. the output
    /// of another checked stage).
    pub(crate) fn from_trusted(samples: Vec<T>, sample_rate: u32) -> Self {
        debug_assert!(sample_rate > 0);
        debug_assert!(samples.iter().all(|s| s.is_finite()));
        Self {
            samples,
            sample_rate,
        }
    }

    pub fn samples(&self) -> &[T] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<T> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Same samples, different scalar type.
    pub fn cast<U: Real>(&self) -> AudioBuffer<U> {
        AudioBuffer {
            samples: self
                .samples
                .iter()
                .map(|&s| U::lit(s.as_f64()))
                .collect(),
            sample_rate: self.sample_rate,
        }
    }

    pub fn scaled(&self, gain: T) -> Result<Self, SignalError> {
        Self::new(self.samples.iter().map(|&s| s * gain).collect(), self.sample_rate)
    }
}
