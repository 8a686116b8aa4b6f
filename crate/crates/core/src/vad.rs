//! Frame-level voice activity detection with an adaptive, noise-tracking threshold.
//!
//! The detector assumes the first `noise_init_frames` frames contain only
//! background noise. From those it estimates the mean `m` and standard
//! deviation `s` of the per-frame feature and declares a frame voiced when its
//! feature exceeds `m + k_sigma * s`. After every unvoiced frame the noise
//! statistics are updated by exponential smoothing, so the threshold follows
//! slowly varying noise but never adapts to speech.
//!
//! Two features are available:
//!
//! * **energy**: mean square of the frame samples;
//! * **cepstral**: Euclidean distance between the frame's real cepstrum
//!   (excluding `c[0]`, which only carries overall level) and a running mean of
//!   noise-frame cepstra.

use std::fmt::Write as _;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{mean_square, Real};
use crate::signal::{frame_signal, AudioBuffer, SignalError};

/// Floor added to spectral magnitudes before the logarithm.
pub const LOG_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VadFeature {
    Energy,
    Cepstral,
}

impl VadFeature {
    pub fn as_str(self) -> &'static str {
        match self {
            VadFeature::Energy => "energy",
            VadFeature::Cepstral => "cepstral",
        }
    }
}

impl std::str::FromStr for VadFeature {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "energy" => Ok(VadFeature::Energy),
            "cepstral" => Ok(VadFeature::Cepstral),
            other => Err(format!("unknown VAD feature `{other}` (expected energy|cepstral)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VadParams {
    pub frame_len: usize,
    pub hop: usize,
    pub noise_init_frames: usize,
    pub k_sigma: f64,
    pub smoothing: f64,
    pub feature: VadFeature,
    pub n_cepstral: usize,
}

impl Default for VadParams {
    /// 20 ms frames with 50% overlap at 8 kHz.
    fn default() -> Self {
        Self {
            frame_len: 160,
            hop: 80,
            noise_init_frames: 10,
            k_sigma: 3.0,
            smoothing: 0.9,
            feature: VadFeature::Energy,
            n_cepstral: 12,
        }
    }
}

impl VadParams {
    pub fn with_feature(feature: VadFeature) -> Self {
        Self {
            feature,
            ..Self::default()
        }
    }

    /// Defaults with the frame geometry rescaled to 20 ms / 10 ms at `rate`.
    pub fn at_rate(rate: u32) -> Self {
        let frame_len = ((rate as usize) / 50).max(2);
        Self {
            frame_len,
            hop: frame_len / 2,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<(), VadError> {
        if self.noise_init_frames == 0 {
            return Err(VadError::InvalidParams("noise_init_frames must be at least 1".into()));
        }
        if !(self.smoothing > 0.0 && self.smoothing < 1.0) {
            return Err(VadError::InvalidParams(format!(
                "smoothing must lie in (0, 1), got {}",
                self.smoothing
            )));
        }
        if !self.k_sigma.is_finite() || self.k_sigma < 0.0 {
            return Err(VadError::InvalidParams(format!("k_sigma must be >= 0, got {}", self.k_sigma)));
        }
        if self.feature == VadFeature::Cepstral && self.n_cepstral < 2 {
            return Err(VadError::InvalidParams("n_cepstral must be at least 2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum VadError {
    #[error("buffer yields {frames} frames; at least {needed} noise-initialisation frames are required")]
    TooFewFrames { frames: usize, needed: usize },
    #[error("invalid VAD parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Signal(#[from] SignalError),
}

/// Per-frame decisions plus the traces that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct VadDecision {
    pub flags: Vec<bool>,
    pub threshold_trace: Vec<f64>,
    pub feature_trace: Vec<f64>,
    pub frame_len: usize,
    pub hop: usize,
}

impl VadDecision {
    pub fn len(&self) -> usize {
        self.flags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flags.is_empty()
    }

    pub fn voiced_count(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }

    /// Sample range `[start, end)` of frame `k`, clipped to `len`.
    pub fn frame_span(&self, k: usize, len: usize) -> (usize, usize) {
        let start = (k * self.hop).min(len);
        (start, (start + self.frame_len).min(len))
    }

    /// Debug dump: `index,feature,threshold,flag` per frame.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,feature,threshold,flag\n");
        for (k, ((f, t), flag)) in self
            .feature_trace
            .iter()
            .zip(&self.threshold_trace)
            .zip(&self.flags)
            .enumerate()
        {
            let _ = writeln!(out, "{k},{f:e},{t:e},{}", u8::from(*flag));
        }
        out
    }
}

/// Mean of squared samples.
pub fn frame_energy<T: Real>(frame: &[T]) -> T {
    mean_square(frame)
}

/// Real cepstrum coefficients `c[0..n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CepstrumFrame<T> {
    pub coefficients: Vec<T>,
}

/// Reusable real-cepstrum analyser for one frame length.
pub struct CepstrumAnalyzer<T: Real> {
    frame_len: usize,
    window: Vec<T>,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
    fft_len: usize,
}

impl<T: Real> CepstrumAnalyzer<T> {
    pub fn new(frame_len: usize) -> Self {
        let fft_len = frame_len.max(1).next_power_of_two();
        let mut planner = FftPlanner::new();
        let window = hann(frame_len);
        Self {
            frame_len,
            window,
            forward: planner.plan_fft_forward(fft_len),
            inverse: planner.plan_fft_inverse(fft_len),
            fft_len,
        }
    }

    pub fn fft_len(&self) -> usize {
        self.fft_len
    }

    /// Hann-windowed, zero-padded frame → IDFT(log(|DFT| + 1e-10)), first `n` terms.
    pub fn analyze(&self, frame: &[T], n: usize) -> CepstrumFrame<T> {
        assert_eq!(frame.len(), self.frame_len, "frame length mismatch");
        let mut buf: Vec<Complex<T>> = vec![Complex::new(T::zero(), T::zero()); self.fft_len];
        for ((slot, &x), &w) in buf.iter_mut().zip(frame).zip(&self.window) {
            slot.re = x * w;
        }
        self.forward.process(&mut buf);
        let floor = T::lit(LOG_FLOOR);
        for v in buf.iter_mut() {
            *v = Complex::new((v.norm() + floor).ln(), T::zero());
        }
        self.inverse.process(&mut buf);
        let scale = T::from_count(self.fft_len);
        CepstrumFrame {
            coefficients: buf.iter().take(n.min(self.fft_len)).map(|c| c.re / scale).collect(),
        }
    }
}

fn hann<T: Real>(n: usize) -> Vec<T> {
    if n <= 1 {
        return vec![T::one(); n];
    }
    let denom = (n - 1) as f64;
    (0..n)
        .map(|i| T::lit(0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / denom).cos()))
        .collect()
}

pub fn real_cepstrum<T: Real>(frame: &[T], n_cepstral: usize) -> CepstrumFrame<T> {
    CepstrumAnalyzer::new(frame.len()).analyze(frame, n_cepstral)
}

/// Exponentially tracked mean and variance of the noise feature.
struct NoiseStats {
    mean: f64,
    var: f64,
}

impl NoiseStats {
    fn from_initial(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Self { mean, var }
    }

    fn threshold(&self, k_sigma: f64) -> f64 {
        self.mean + k_sigma * self.var.sqrt()
    }

    fn update(&mut self, value: f64, a: f64) {
        let dev = value - self.mean;
        self.mean = a * self.mean + (1.0 - a) * value;
        self.var = a * self.var + (1.0 - a) * dev * dev;
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Classifies each frame of `buf` as voiced or unvoiced.
pub fn detect<T: Real>(buf: &AudioBuffer<T>, params: &VadParams) -> Result<VadDecision, VadError> {
    params.validate()?;
    let frames = frame_signal(buf, params.frame_len, params.hop)?;
    let n_init = params.noise_init_frames;
    if frames.len() < n_init {
        return Err(VadError::TooFewFrames {
            frames: frames.len(),
            needed: n_init,
        });
    }
    let a = params.smoothing;
    let mut flags = Vec::with_capacity(frames.len());
    let mut threshold_trace = Vec::with_capacity(frames.len());
    let mut feature_trace = Vec::with_capacity(frames.len());

    match params.feature {
        VadFeature::Energy => {
            feature_trace.extend(frames.frames.iter().map(|f| frame_energy(f).as_f64()));
            let mut stats = NoiseStats::from_initial(&feature_trace[..n_init]);
            let t0 = stats.threshold(params.k_sigma);
            flags.resize(n_init, false);
            threshold_trace.resize(n_init, t0);
            for &f in &feature_trace[n_init..] {
                let t = stats.threshold(params.k_sigma);
                let voiced = f > t;
                if !voiced {
                    stats.update(f, a);
                }
                flags.push(voiced);
                threshold_trace.push(t);
            }
        }
        VadFeature::Cepstral => {
            let analyzer = CepstrumAnalyzer::<T>::new(params.frame_len);
            let ceps: Vec<Vec<f64>> = frames
                .frames
                .iter()
                .map(|f| {
                    analyzer
                        .analyze(f, params.n_cepstral)
                        .coefficients
                        .iter()
                        .skip(1)
                        .map(|c| c.as_f64())
                        .collect()
                })
                .collect();
            let dims = ceps[0].len();
            let mut noise_mean = vec![0.0; dims];
            for c in &ceps[..n_init] {
                for (m, v) in noise_mean.iter_mut().zip(c) {
                    *m += v / n_init as f64;
                }
            }
            let init: Vec<f64> = ceps[..n_init].iter().map(|c| distance(c, &noise_mean)).collect();
            let mut stats = NoiseStats::from_initial(&init);
            let t0 = stats.threshold(params.k_sigma);
            feature_trace.extend_from_slice(&init);
            flags.resize(n_init, false);
            threshold_trace.resize(n_init, t0);
            for c in &ceps[n_init..] {
                let f = distance(c, &noise_mean);
                let t = stats.threshold(params.k_sigma);
                let voiced = f > t;
                if !voiced {
                    stats.update(f, a);
                    for (m, v) in noise_mean.iter_mut().zip(c) {
                        *m = a * *m + (1.0 - a) * v;
                    }
                }
                flags.push(voiced);
                threshold_trace.push(t);
                feature_trace.push(f);
            }
        }
    }

    Ok(VadDecision {
        flags,
        threshold_trace,
        feature_trace,
        frame_len: params.frame_len,
        hop: params.hop,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn energy_examples() {
        assert_eq!(frame_energy(&[0.0f64; 8]), 0.0);
        assert_eq!(frame_energy(&[0.5f64; 7]), 0.25);
        assert_eq!(frame_energy(&[1.0f64, -1.0, 1.0, -1.0]), 1.0);
    }

    #[test]
    fn zero_frame_cepstrum_is_dc_only() {
        let c = real_cepstrum(&[0.0f64; 160], 12).coefficients;
        assert_eq!(c.len(), 12);
        assert!((c[0] - LOG_FLOOR.ln()).abs() < 1e-9);
        for v in &c[1..] {
            assert!(v.abs() < 1e-9, "{v}");
        }
    }

    #[test]
    fn cepstrum_scale_shifts_only_c0() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let frame: Vec<f64> = (0..160).map(|_| rng.random_range(-1.0..1.0)).collect();
        let doubled: Vec<f64> = frame.iter().map(|v| 2.0 * v).collect();
        let a = real_cepstrum(&frame, 12).coefficients;
        let b = real_cepstrum(&doubled, 12).coefficients;
        assert!((b[0] - a[0] - 2f64.ln()).abs() < 1e-8);
        for (x, y) in a[1..].iter().zip(&b[1..]) {
            assert!((x - y).abs() < 1e-8);
        }
    }

    #[test]
    fn white_noise_cepstrum_dominated_by_c0() {
        // the frame is scaled so log|X| is far from zero and c[0] carries the level
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let frame: Vec<f64> = (0..256).map(|_| rng.random_range(-1e-3..1e-3)).collect();
            let c = real_cepstrum(&frame, 12).coefficients;
            let rest = c[1..].iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(rest < 0.25 * c[0].abs(), "seed {seed}: {rest} vs {}", c[0]);
        }
    }

    #[test]
    fn silence_is_unvoiced_in_both_modes() {
        let buf = AudioBuffer::new(vec![0.0f64; 8000], 8000).unwrap();
        for feature in [VadFeature::Energy, VadFeature::Cepstral] {
            let d = detect(&buf, &VadParams::with_feature(feature)).unwrap();
            assert!(d.flags.iter().all(|f| !f));
        }
    }

    #[test]
    fn tone_after_silence() {
        let mut x = vec![0.0f64; 4000];
        x.extend((0..4000).map(|i| (2.0 * PI * 1000.0 * i as f64 / 8000.0).sin()));
        let buf = AudioBuffer::new(x, 8000).unwrap();
        let d = detect(&buf, &VadParams::default()).unwrap();
        let onset = 4000;
        let mut errors_outside_boundary = 0;
        for k in 0..d.len() {
            let (s, e) = d.frame_span(k, buf.len());
            let straddles = s < onset && e > onset;
            if straddles {
                continue;
            }
            let truth = s >= onset;
            if d.flags[k] != truth {
                errors_outside_boundary += 1;
            }
        }
        assert_eq!(errors_outside_boundary, 0);
    }

    #[test]
    fn first_frames_forced_unvoiced() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<f64> = (0..4000).map(|_| rng.random_range(-0.5..0.5)).collect();
        let buf = AudioBuffer::new(x, 8000).unwrap();
        let d = detect(&buf, &VadParams::default()).unwrap();
        assert!(d.flags[..10].iter().all(|f| !f));
        assert!(d.threshold_trace.iter().all(|t| t.is_finite() && *t >= 0.0));
    }

    #[test]
    fn too_few_frames() {
        let buf = AudioBuffer::new(vec![0.1f64; 200], 8000).unwrap();
        assert!(matches!(
            detect(&buf, &VadParams::default()),
            Err(VadError::TooFewFrames { needed: 10, .. })
        ));
    }

    #[test]
    fn invalid_params() {
        let buf = AudioBuffer::new(vec![0.1f64; 8000], 8000).unwrap();
        for p in [
            VadParams {
                smoothing: 1.0,
                ..VadParams::default()
            },
            VadParams {
                noise_init_frames: 0,
                ..VadParams::default()
            },
        ] {
            assert!(matches!(detect(&buf, &p), Err(VadError::InvalidParams(_))));
        }
    }

    #[test]
    fn csv_dump_has_row_per_frame() {
        let buf = AudioBuffer::new(vec![0.0f64; 1600], 8000).unwrap();
        let d = detect(&buf, &VadParams::default()).unwrap();
        let csv = d.to_csv();
        assert_eq!(csv.lines().count(), d.len() + 1);
        assert!(csv.starts_with("index,feature,threshold,flag\n0,"));
    }
}
