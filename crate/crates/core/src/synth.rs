//! Deterministic test material: a speech-like source with a known voicing
//! mask, white and babble noise, and the external-reference cancellation rig.
//!
//! Everything is driven by a `ChaCha8Rng` seeded from the caller, so identical
//! seeds give bit-identical audio on every platform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::signal::{mix_at_snr, AudioBuffer, MixSpec, SignalError, TARGET_RATE};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeechParams {
    pub duration_secs: f64,
    pub lead_silence_secs: f64,
    pub sample_rate: u32,
    /// Peak envelope amplitude.
    pub amplitude: f64,
}

impl Default for SpeechParams {
    fn default() -> Self {
        Self {
            duration_secs: 3.0,
            lead_silence_secs: 0.5,
            sample_rate: TARGET_RATE,
            amplitude: 0.3,
        }
    }
}

/// Synthetic utterance plus its per-sample voicing.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpeech {
    pub audio: AudioBuffer<f64>,
    pub voiced: Vec<bool>,
}

const RAMP_SECS: f64 = 0.015;

/// Two-pole resonator, unity gain at its centre frequency.
struct Resonator {
    a1: f64,
    a2: f64,
    g: f64,
    y1: f64,
    y2: f64,
}

impl Resonator {
    fn new(freq: f64, bandwidth: f64, rate: f64) -> Self {
        let r = (-std::f64::consts::PI * bandwidth / rate).exp();
        let theta = 2.0 * std::f64::consts::PI * freq / rate;
        Self {
            a1: 2.0 * r * theta.cos(),
            a2: -r * r,
            g: 1.0 - r,
            y1: 0.0,
            y2: 0.0,
        }
    }

    fn tick(&mut self, x: f64) -> f64 {
        let y = self.g * x + self.a1 * self.y1 + self.a2 * self.y2;
        self.y2 = self.y1;
        self.y1 = y;
        y
    }
}

/// Renders one voiced syllable of `len` samples: a harmonic source with a
/// gliding, jittered pitch through three formant resonators.
fn syllable(rng: &mut ChaCha8Rng, len: usize, rate: f64) -> Vec<f64> {
    let f0_start = rng.random_range(95.0..230.0);
    let f0_end = f0_start * rng.random_range(0.75..1.3);
    let formants = [
        (rng.random_range(350.0..850.0), 90.0),
        (rng.random_range(900.0..2200.0), 120.0),
        (rng.random_range(2300.0..3200.0), 200.0),
    ];
    let mut filters: Vec<Resonator> = formants.iter().map(|&(f, b)| Resonator::new(f, b, rate)).collect();
    let mut phase = 0.0f64;
    let mut out = Vec::with_capacity(len);
    for i in 0..len {
        let t = i as f64 / len.max(1) as f64;
        let f0 = (f0_start + (f0_end - f0_start) * t) * (1.0 + 0.01 * rng.random_range(-1.0..1.0));
        phase = (phase + f0 / rate).fract();
        let harmonics = ((0.45 * rate) / f0) as usize;
        let src: f64 = (1..=harmonics)
            .map(|k| (2.0 * std::f64::consts::PI * k as f64 * phase).sin() / k as f64)
            .sum();
        let y = filters.iter_mut().fold(0.0, |acc, f| acc + f.tick(src));
        out.push(y);
    }
    out
}

/// Alternating syllables and pauses after a silent lead-in. Syllables get
/// 15 ms raised-cosine ramps and are normalized to `amplitude` peak.
pub fn synth_speech(seed: u64, params: &SpeechParams) -> SynthSpeech {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rate = params.sample_rate as f64;
    let total = (params.duration_secs * rate).round() as usize;
    let mut samples = vec![0.0; total];
    let mut voiced = vec![false; total];
    let ramp = (RAMP_SECS * rate).round() as usize;
    let mut pos = (params.lead_silence_secs * rate).round() as usize;
    while pos < total {
        let len = (rng.random_range(0.15..0.35) * rate) as usize;
        let len = len.min(total - pos);
        let level = rng.random_range(0.6..1.0);
        let mut syl = syllable(&mut rng, len, rate);
        let peak = syl.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
        for (i, v) in syl.iter_mut().enumerate() {
            let edge = i.min(len - 1 - i);
            let env = if edge < ramp {
                0.5 - 0.5 * (std::f64::consts::PI * (edge as f64 + 0.5) / ramp as f64).cos()
            } else {
                1.0
            };
            *v *= env * level * params.amplitude / peak;
        }
        samples[pos..pos + len].copy_from_slice(&syl);
        voiced[pos..pos + len].iter_mut().for_each(|m| *m = true);
        pos += len + (rng.random_range(0.1..0.3) * rate) as usize;
    }
    SynthSpeech {
        audio: AudioBuffer::from_trusted(samples, params.sample_rate),
        voiced,
    }
}

/// Zero-mean Gaussian noise.
pub fn white_noise(seed: u64, len: usize, sample_rate: u32, std_dev: f64) -> AudioBuffer<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = Normal::new(0.0, std_dev).expect("finite, non-negative std_dev");
    AudioBuffer::from_trusted((0..len).map(|_| dist.sample(&mut rng)).collect(), sample_rate)
}

/// Several overlapping synthetic talkers without pauses, normalized to unit RMS.
pub fn babble_noise(seed: u64, len: usize, sample_rate: u32, talkers: usize) -> AudioBuffer<f64> {
    let params = SpeechParams {
        duration_secs: len as f64 / sample_rate as f64,
        lead_silence_secs: 0.0,
        sample_rate,
        amplitude: 1.0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mix = vec![0.0; len];
    for _ in 0..talkers.max(1) {
        let talker = synth_speech(rng.random(), &params);
        let offset = rng.random_range(0..len.max(1));
        for (i, m) in mix.iter_mut().enumerate() {
            *m += talker.audio.samples()[(i + offset) % len];
        }
    }
    let rms = (mix.iter().map(|v| v * v).sum::<f64>() / len.max(1) as f64).sqrt();
    if rms > 0.0 {
        mix.iter_mut().for_each(|v| *v /= rms);
    }
    AudioBuffer::from_trusted(mix, sample_rate)
}

/// Frame-level truth: a frame is voiced when at least half its samples are.
pub fn frame_labels(voiced: &[bool], frame_len: usize, hop: usize) -> Vec<bool> {
    let frames = crate::signal::frame_count(voiced.len(), frame_len, hop);
    (0..frames)
        .map(|k| {
            let s = k * hop;
            let e = (s + frame_len).min(voiced.len());
            2 * voiced[s..e].iter().filter(|&&v| v).count() >= frame_len
        })
        .collect()
}

/// Fraction of frames where `decided` matches `truth`, ignoring frames within
/// `guard` frames of a change in `truth`.
pub fn frame_accuracy(decided: &[bool], truth: &[bool], guard: usize) -> f64 {
    let n = decided.len().min(truth.len());
    let mut near_edge = vec![false; n];
    for k in 1..n {
        if truth[k] != truth[k - 1] {
            let lo = k.saturating_sub(guard);
            let hi = (k + guard).min(n);
            near_edge[lo..hi].iter_mut().for_each(|m| *m = true);
        }
    }
    let (hits, total) = (0..n)
        .filter(|&k| !near_edge[k])
        .fold((0usize, 0usize), |(h, t), k| (h + (decided[k] == truth[k]) as usize, t + 1));
    if total == 0 {
        1.0
    } else {
        hits as f64 / total as f64
    }
}

/// Acoustic path from the noise pickup to the primary microphone.
pub const RIG_PATH: [f64; 5] = [0.8, -0.45, 0.3, -0.15, 0.05];

/// Primary `d = s + g * (h * n)` and reference `x = n`, with `g` chosen so the
/// primary sits at `snr_db` over the speech-active region.
#[derive(Debug, Clone, PartialEq)]
pub struct AncRig {
    pub clean: AudioBuffer<f64>,
    pub noisy: AudioBuffer<f64>,
    pub reference: AudioBuffer<f64>,
    pub voiced: Vec<bool>,
    pub mix: MixSpec<f64>,
}

pub fn fir(taps: &[f64], x: &[f64]) -> Vec<f64> {
    (0..x.len())
        .map(|n| taps.iter().enumerate().take(n + 1).map(|(k, h)| h * x[n - k]).sum())
        .collect()
}

pub fn external_reference_rig(seed: u64, duration_secs: f64, snr_db: f64) -> Result<AncRig, SignalError> {
    let speech = synth_speech(
        seed,
        &SpeechParams {
            duration_secs,
            ..SpeechParams::default()
        },
    );
    let len = speech.audio.len();
    let reference = white_noise(seed ^ 0x05ee_d0f0_e15e, len, TARGET_RATE, 0.1);
    let path = AudioBuffer::from_trusted(fir(&RIG_PATH, reference.samples()), TARGET_RATE);
    let (noisy, mix) = mix_at_snr(&speech.audio, &path, snr_db)?;
    Ok(AncRig {
        clean: speech.audio,
        noisy,
        reference,
        voiced: speech.voiced,
        mix,
    })
}
