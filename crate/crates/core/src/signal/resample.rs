//! Rational-ratio downsampling through a Kaiser-windowed sinc low-pass.

use std::f64::consts::PI;

use crate::scalar::Real;

use super::{AudioBuffer, SignalError};

pub const TARGET_RATE: u32 = 8000;

/// Anti-alias cutoff as a fraction of the output rate.
const CUTOFF_FRACTION: f64 = 0.45;
/// Full transition width in Hz, centred on the cutoff.
const TRANSITION_HZ: f64 = 400.0;
const STOPBAND_DB: f64 = 60.0;

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Zeroth-order modified Bessel function of the first kind (power series).
fn bessel_i0(x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= (half / k as f64) * (half / k as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

/// Odd-length linear-phase low-pass with unity DC gain.
/// `cutoff` and `transition` are in cycles per sample.
fn kaiser_lowpass(cutoff: f64, transition: f64, atten_db: f64) -> Vec<f64> {
    let beta = if atten_db > 50.0 {
        0.1102 * (atten_db - 8.7)
    } else if atten_db >= 21.0 {
        0.5842 * (atten_db - 21.0).powf(0.4) + 0.07886 * (atten_db - 21.0)
    } else {
        0.0
    };
    let dw = 2.0 * PI * transition;
    let mut taps = ((atten_db - 7.95) / (2.285 * dw)).ceil() as usize + 1;
    if taps.is_multiple_of(2) {
        taps += 1;
    }
    let mid = (taps - 1) as f64 / 2.0;
    let norm = bessel_i0(beta);
    let mut h: Vec<f64> = (0..taps)
        .map(|i| {
            let t = i as f64 - mid;
            let sinc = if t == 0.0 {
                2.0 * cutoff
            } else {
                (2.0 * PI * cutoff * t).sin() / (PI * t)
            };
            let r = t / mid;
            sinc * bessel_i0(beta * (1.0 - r * r).max(0.0).sqrt()) / norm
        })
        .collect();
    let dc: f64 = h.iter().sum();
    h.iter_mut().for_each(|v| *v /= dc);
    h
}

/// Downsamples to `target_rate` by the reduced ratio L/M, low-pass filtering at
/// `0.45 * target_rate` first. The filter delay is compensated so the output
/// stays time-aligned with the input.
pub fn resample<T: Real>(buf: &AudioBuffer<T>, target_rate: u32) -> Result<AudioBuffer<T>, SignalError> {
    let in_rate = buf.sample_rate();
    if in_rate < target_rate {
        return Err(SignalError::UpsamplingUnsupported { rate: in_rate });
    }
    if in_rate == target_rate {
        return Ok(buf.clone());
    }
    let g = gcd(in_rate as u64, target_rate as u64);
    let up = (target_rate as u64 / g) as usize;
    let down = (in_rate as u64 / g) as usize;
    let fs_up = in_rate as f64 * up as f64;
    let h = kaiser_lowpass(
        CUTOFF_FRACTION * target_rate as f64 / fs_up,
        TRANSITION_HZ / fs_up,
        STOPBAND_DB,
    );
    let delay = (h.len() - 1) / 2;
    let x = buf.samples();
    let n_out = (x.len() * up).div_ceil(down);
    let gain = up as f64;

    let mut out = Vec::with_capacity(n_out);
    for m in 0..n_out {
        // position on the upsampled grid, shifted by the filter delay
        let t = m * down + delay;
        let mut acc = 0.0;
        let mut k = t % up;
        while k < h.len() && k <= t {
            let j = (t - k) / up;
            if j < x.len() {
                acc += h[k] * x[j].as_f64();
            }
            k += up;
        }
        out.push(T::lit(acc * gain));
    }
    Ok(AudioBuffer::from_trusted(out, target_rate))
}

/// Converts any rate at or above 8 kHz down to exactly 8 kHz.
pub fn resample_to_8k<T: Real>(buf: &AudioBuffer<T>) -> Result<AudioBuffer<T>, SignalError> {
    resample(buf, TARGET_RATE)
}
