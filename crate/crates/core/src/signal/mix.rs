use serde::{Deserialize, Serialize};

use crate::scalar::{energy, Real};
use crate::vad::{detect, VadDecision, VadParams};

use super::{AudioBuffer, SignalError};

/// Outcome of an SNR-controlled mix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixSpec<T> {
    pub target_snr_db: f64,
    pub noise_gain: T,
    /// SNR re-measured on the mixed output over the same region.
    pub measured_snr_db: f64,
    /// True when powers were taken over VAD-active frames, false when the
    /// whole signal was used because no frame was voiced.
    pub active_region: bool,
}

/// Loops `noise` end-to-start or truncates it to exactly `len` samples.
pub fn align_noise<T: Real>(noise: &[T], len: usize) -> Vec<T> {
    if noise.is_empty() {
        return vec![T::zero(); len];
    }
    noise.iter().copied().cycle().take(len).collect()
}

/// Per-sample mask of samples covered by at least one voiced frame, or `None`
/// when no frame is voiced.
pub fn active_mask(len: usize, decisions: &VadDecision) -> Option<Vec<bool>> {
    if decisions.voiced_count() == 0 {
        return None;
    }
    let mut mask = vec![false; len];
    for (k, _) in decisions.flags.iter().enumerate().filter(|(_, &f)| f) {
        let (s, e) = decisions.frame_span(k, len);
        mask[s..e].iter_mut().for_each(|m| *m = true);
    }
    Some(mask)
}

fn masked_energy<T: Real>(x: &[T], mask: Option<&[bool]>) -> (T, usize) {
    match mask {
        None => (energy(x), x.len()),
        Some(mask) => x
            .iter()
            .zip(mask)
            .filter(|(_, &m)| m)
            .fold((T::zero(), 0), |(acc, n), (&v, _)| (acc + v * v, n + 1)),
    }
}

/// Level in dB of the samples in voiced frames; the whole signal when no
/// frame is voiced.
pub fn active_level<T: Real>(buf: &AudioBuffer<T>, decisions: &VadDecision) -> f64 {
    let mask = active_mask(buf.len(), decisions);
    let (e, n) = masked_energy(buf.samples(), mask.as_deref());
    if n == 0 {
        return f64::NEG_INFINITY;
    }
    10.0 * (e.as_f64() / n as f64).log10()
}

fn clean_activity<T: Real>(clean: &AudioBuffer<T>) -> Option<Vec<bool>> {
    let params = VadParams::at_rate(clean.sample_rate());
    detect(clean, &params)
        .ok()
        .and_then(|d| active_mask(clean.len(), &d))
}

/// Adds `noise` to `clean`, scaled so the SNR over the clean signal's active
/// region equals `target_snr_db`. Noise shorter than `clean` is looped.
pub fn mix_at_snr<T: Real>(
    clean: &AudioBuffer<T>,
    noise: &AudioBuffer<T>,
    target_snr_db: f64,
) -> Result<(AudioBuffer<T>, MixSpec<T>), SignalError> {
    if clean.sample_rate() != noise.sample_rate() {
        return Err(SignalError::RateMismatch {
            left: clean.sample_rate(),
            right: noise.sample_rate(),
        });
    }
    let noise = align_noise(noise.samples(), clean.len());
    let mask = clean_activity(clean);
    let (e_clean, n) = masked_energy(clean.samples(), mask.as_deref());
    let (e_noise, _) = masked_energy(&noise, mask.as_deref());
    if n == 0 || e_clean <= T::zero() {
        return Err(SignalError::ZeroPowerClean);
    }
    if e_noise <= T::zero() {
        return Err(SignalError::ZeroPowerNoise);
    }
    // both energies are over the same n samples, so the ratio of sums is the
    // ratio of mean squares
    let ratio = T::lit(10f64.powf(target_snr_db / 10.0));
    let noise_gain = (e_clean / (e_noise * ratio)).sqrt();
    let scaled: Vec<T> = noise.iter().map(|&v| noise_gain * v).collect();
    let noisy: Vec<T> = clean
        .samples()
        .iter()
        .zip(&scaled)
        .map(|(&c, &v)| c + v)
        .collect();
    let (e_scaled, _) = masked_energy(&scaled, mask.as_deref());
    let measured_snr_db = 10.0 * (e_clean.as_f64() / e_scaled.as_f64()).log10();
    let noisy = AudioBuffer::new(noisy, clean.sample_rate())?;
    Ok((
        noisy,
        MixSpec {
            target_snr_db,
            noise_gain,
            measured_snr_db,
            active_region: mask.is_some(),
        },
    ))
}
