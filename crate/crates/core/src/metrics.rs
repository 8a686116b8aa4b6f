//! Objective scores and MOS aggregation.

use std::collections::BTreeMap;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Real;
use crate::signal::AudioBuffer;

pub const SNR_FLOOR_DB: f64 = -20.0;
pub const SNR_CEIL_DB: f64 = 60.0;
pub const SEGSNR_FLOOR_DB: f64 = -10.0;
pub const SEGSNR_CEIL_DB: f64 = 35.0;
pub const DEFAULT_MAX_LAG: usize = 512;
/// 20 ms at 8 kHz.
pub const DEFAULT_SEGMENT_LEN: usize = 160;
const SILENT_FRAME_ENERGY: f64 = 1e-8;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("reference signal has zero energy")]
    ZeroEnergy,
    #[error("sample rates differ: {left} Hz vs {right} Hz")]
    RateMismatch { left: u32, right: u32 },
    #[error("no frame of the reference exceeds the silence floor")]
    NoEligibleFrames,
    #[error("segment length must be positive")]
    InvalidFrameLength,
    #[error("no ratings to aggregate")]
    Empty,
    #[error("score {0} outside 0..=10")]
    ScoreOutOfRange(i64),
}

/// Delay of `processed` relative to `clean` and whether it is inverted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alignment {
    /// Positive when `processed` lags `clean`.
    pub lag: i64,
    pub inverted: bool,
}

fn check_rates<T: Real>(a: &AudioBuffer<T>, b: &AudioBuffer<T>) -> Result<(), MetricsError> {
    if a.sample_rate() != b.sample_rate() {
        return Err(MetricsError::RateMismatch {
            left: a.sample_rate(),
            right: b.sample_rate(),
        });
    }
    Ok(())
}

/// Cross-correlation `r[k] = sum_n a[n] b[n + k]` for `k` in `-max_lag..=max_lag`.
fn cross_correlation<T: Real>(a: &[T], b: &[T], max_lag: usize) -> Vec<f64> {
    let n = (a.len() + b.len()).max(1).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let load = |x: &[T]| {
        let mut v = vec![Complex::new(0.0, 0.0); n];
        for (d, s) in v.iter_mut().zip(x) {
            d.re = s.as_f64();
        }
        v
    };
    let mut fa = load(a);
    let mut fb = load(b);
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    let mut prod: Vec<Complex<f64>> = fa.iter().zip(&fb).map(|(x, y)| x.conj() * y).collect();
    inv.process(&mut prod);
    let scale = 1.0 / n as f64;
    let max_lag = max_lag.min(n / 2 - 1).min(a.len().max(b.len()));
    let at = |k: i64| prod[k.rem_euclid(n as i64) as usize].re * scale;
    (-(max_lag as i64)..=max_lag as i64).map(at).collect()
}

/// Lag maximizing `|cross-correlation|` within `±max_lag`. Ties go to the
/// smaller absolute lag, then to the negative one.
pub fn align<T: Real>(
    clean: &AudioBuffer<T>,
    processed: &AudioBuffer<T>,
    max_lag: usize,
) -> Result<Alignment, MetricsError> {
    check_rates(clean, processed)?;
    align_slices(clean.samples(), processed.samples(), max_lag)
}

pub fn align_slices<T: Real>(clean: &[T], processed: &[T], max_lag: usize) -> Result<Alignment, MetricsError> {
    if clean.iter().all(|v| v.is_zero()) || processed.iter().all(|v| v.is_zero()) {
        return Err(MetricsError::ZeroEnergy);
    }
    let r = cross_correlation(clean, processed, max_lag);
    let half = (r.len() / 2) as i64;
    let mut best = (0i64, r[half as usize]);
    for m in 1..=half {
        for k in [-m, m] {
            let v = r[(k + half) as usize];
            if v.abs() > best.1.abs() {
                best = (k, v);
            }
        }
    }
    Ok(Alignment {
        lag: best.0,
        inverted: best.1 < 0.0,
    })
}

/// Shifts `processed` back by `lag` and truncates both to the overlap.
pub fn apply_lag<'a, T>(clean: &'a [T], processed: &'a [T], lag: i64) -> (&'a [T], &'a [T]) {
    let (c, p) = if lag >= 0 {
        let s = (lag as usize).min(processed.len());
        (clean, &processed[s..])
    } else {
        let s = (lag.unsigned_abs() as usize).min(clean.len());
        (&clean[s..], processed)
    };
    let n = c.len().min(p.len());
    (&c[..n], &p[..n])
}

fn ratio_db(signal: f64, error: f64) -> f64 {
    if error == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (signal / error).log10()
    }
}

fn energies<T: Real>(clean: &[T], processed: &[T]) -> (f64, f64) {
    clean.iter().zip(processed).fold((0.0, 0.0), |(s, e), (&c, &p)| {
        let (c, p) = (c.as_f64(), p.as_f64());
        (s + c * c, e + (c - p) * (c - p))
    })
}

/// Global SNR over the overlap, clamped to [-20, 60] dB.
pub fn snr_db_slices<T: Real>(clean: &[T], processed: &[T]) -> Result<f64, MetricsError> {
    let (s, e) = energies(clean, processed);
    if s == 0.0 {
        return Err(MetricsError::ZeroEnergy);
    }
    Ok(ratio_db(s, e).clamp(SNR_FLOOR_DB, SNR_CEIL_DB))
}

pub fn snr_db<T: Real>(clean: &AudioBuffer<T>, processed: &AudioBuffer<T>) -> Result<f64, MetricsError> {
    check_rates(clean, processed)?;
    snr_db_slices(clean.samples(), processed.samples())
}

/// Mean over non-overlapping full frames of the per-frame SNR, each clamped
/// to [-10, 35] dB. Frames whose reference energy is below 1e-8 are skipped.
pub fn segmental_snr_slices<T: Real>(clean: &[T], processed: &[T], frame_len: usize) -> Result<f64, MetricsError> {
    if frame_len == 0 {
        return Err(MetricsError::InvalidFrameLength);
    }
    let n = clean.len().min(processed.len());
    let (mut sum, mut count) = (0.0, 0usize);
    for (c, p) in clean[..n].chunks_exact(frame_len).zip(processed[..n].chunks_exact(frame_len)) {
        let (s, e) = energies(c, p);
        if s < SILENT_FRAME_ENERGY {
            continue;
        }
        sum += ratio_db(s, e).clamp(SEGSNR_FLOOR_DB, SEGSNR_CEIL_DB);
        count += 1;
    }
    if count == 0 {
        return Err(MetricsError::NoEligibleFrames);
    }
    Ok(sum / count as f64)
}

pub fn segmental_snr<T: Real>(
    clean: &AudioBuffer<T>,
    processed: &AudioBuffer<T>,
    frame_len: usize,
) -> Result<f64, MetricsError> {
    check_rates(clean, processed)?;
    segmental_snr_slices(clean.samples(), processed.samples(), frame_len)
}

/// One row of the evaluation table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub file: String,
    pub algorithm: String,
    pub variant: String,
    pub input_snr_db: f64,
    pub output_snr_db: f64,
    pub improvement_db: f64,
    pub segsnr_db: f64,
    pub lag: i64,
    #[serde(default)]
    pub inverted: bool,
}

impl MetricReport {
    pub fn labeled(self, file: impl Into<String>, algorithm: impl Into<String>, variant: impl Into<String>) -> Self {
        Self {
            file: file.into(),
            algorithm: algorithm.into(),
            variant: variant.into(),
            ..self
        }
    }
}

/// Scores `denoised` against `clean`. The noisy input is taken as already
/// aligned; the denoised output is aligned within ±512 samples first.
pub fn snr_improvement<T: Real>(
    clean: &AudioBuffer<T>,
    noisy: &AudioBuffer<T>,
    denoised: &AudioBuffer<T>,
) -> Result<MetricReport, MetricsError> {
    check_rates(clean, noisy)?;
    check_rates(clean, denoised)?;
    let input_snr_db = snr_db_slices(clean.samples(), noisy.samples())?;
    let alignment = match align(clean, denoised, DEFAULT_MAX_LAG) {
        Ok(a) => a,
        // a silent output has no delay to find
        Err(MetricsError::ZeroEnergy) => Alignment {
            lag: 0,
            inverted: false,
        },
        Err(e) => return Err(e),
    };
    let (c, p) = apply_lag(clean.samples(), denoised.samples(), alignment.lag);
    let output_snr_db = snr_db_slices(c, p)?;
    let segsnr_db = segmental_snr_slices(c, p, DEFAULT_SEGMENT_LEN)?;
    Ok(MetricReport {
        file: String::new(),
        algorithm: String::new(),
        variant: String::new(),
        input_snr_db,
        output_snr_db,
        improvement_db: output_snr_db - input_snr_db,
        segsnr_db,
        lag: alignment.lag,
        inverted: alignment.inverted,
    })
}

/// A single listener rating, already unblinded.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MosRecord {
    pub rater: String,
    pub clip: String,
    pub algorithm: String,
    pub variant: String,
    pub score: u8,
    /// Milliseconds since the Unix epoch.
    pub timestamp: u64,
}

pub fn validate_score(score: i64) -> Result<u8, MetricsError> {
    if (0..=10).contains(&score) {
        Ok(score as u8)
    } else {
        Err(MetricsError::ScoreOutOfRange(score))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MosSummary {
    pub algorithm: String,
    pub variant: String,
    pub mos: f64,
    pub n: usize,
    /// Sample standard deviation; 0 for a single rating.
    pub stddev: f64,
}

/// Mean score per (algorithm, variant), sorted by key.
pub fn mos_aggregate(records: &[MosRecord]) -> Result<Vec<MosSummary>, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut groups: BTreeMap<(&str, &str), Vec<f64>> = BTreeMap::new();
    for r in records {
        validate_score(r.score as i64)?;
        groups
            .entry((r.algorithm.as_str(), r.variant.as_str()))
            .or_default()
            .push(r.score as f64);
    }
    Ok(groups
        .into_iter()
        .map(|((algorithm, variant), scores)| {
            let n = scores.len();
            let mos = scores.iter().sum::<f64>() / n as f64;
            let stddev = if n > 1 {
                (scores.iter().map(|s| (s - mos).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
            } else {
                0.0
            };
            MosSummary {
                algorithm: algorithm.to_string(),
                variant: variant.to_string(),
                mos,
                n,
                stddev,
            }
        })
        .collect())
}

/// `algorithm,variant,mos,n,stddev` with a header row.
pub fn mos_csv(summaries: &[MosSummary]) -> String {
    let mut out = String::from("algorithm,variant,mos,n,stddev\n");
    for s in summaries {
        out.push_str(&format!("{},{},{:.4},{},{:.4}\n", s.algorithm, s.variant, s.mos, s.n, s.stddev));
    }
    out
}
