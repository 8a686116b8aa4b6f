//! Threshold estimation and shrinkage.

use num_traits::{FromPrimitive, Num, Signed};
use serde::{Deserialize, Serialize};

use crate::scalar::Real;

use super::{WaveletDecomposition, WaveletError};

/// Median absolute deviation to standard deviation for Gaussian noise.
const MAD_TO_SIGMA: f64 = 0.6745;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMethod {
    /// Fixed-form `sigma * sqrt(2 ln N)`.
    Universal,
    /// Retained-energy and zeroed-coefficient percentages are equal.
    BalanceSparsity,
}

impl ThresholdMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            ThresholdMethod::Universal => "universal",
            ThresholdMethod::BalanceSparsity => "balance_sparsity",
        }
    }
}

impl std::str::FromStr for ThresholdMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "universal" | "sqtwolog" => Ok(ThresholdMethod::Universal),
            "balance_sparsity" | "balance-sparsity" | "bal_sn" => Ok(ThresholdMethod::BalanceSparsity),
            other => Err(format!("unknown threshold method `{other}` (expected universal|balance_sparsity)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShrinkMode {
    Soft,
    Hard,
}

impl ShrinkMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ShrinkMode::Soft => "soft",
            ShrinkMode::Hard => "hard",
        }
    }
}

impl std::str::FromStr for ShrinkMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "soft" => Ok(ShrinkMode::Soft),
            "hard" => Ok(ShrinkMode::Hard),
            other => Err(format!("unknown shrinkage mode `{other}` (expected soft|hard)")),
        }
    }
}

/// Whether one threshold covers every detail band or each band gets its own.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdScope {
    #[default]
    Global,
    PerBand,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ThresholdValue<T> {
    Global(T),
    /// One entry per band; entry 0 (the exempt band) is ignored.
    PerBand(Vec<T>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdSpec<T> {
    pub method: ThresholdMethod,
    pub mode: ShrinkMode,
    pub value: ThresholdValue<T>,
    pub sigma_hat: T,
}

impl<T: Real> ThresholdSpec<T> {
    /// The global value, or the largest per-band value.
    pub fn max_value(&self) -> T {
        match &self.value {
            ThresholdValue::Global(t) => *t,
            ThresholdValue::PerBand(v) => v.iter().skip(1).fold(T::zero(), |a, &b| a.max(b)),
        }
    }
}

fn median<T: Real>(mut v: Vec<T>) -> T {
    if v.is_empty() {
        return T::zero();
    }
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite coefficients"));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / T::lit(2.0)
    }
}

/// Robust noise level: `median(|band|) / 0.6745`.
pub fn median_abs_sigma<T: Real>(band: &[T]) -> T {
    median(band.iter().map(|c| c.abs()).collect()) / T::lit(MAD_TO_SIGMA)
}

/// Fixed-form universal threshold from the finest band, `sigma * sqrt(2 ln N)`
/// with `N` the original signal length.
pub fn universal_threshold<T: Real>(decomp: &WaveletDecomposition<T>, mode: ShrinkMode) -> ThresholdSpec<T> {
    let sigma_hat = median_abs_sigma(decomp.finest_band());
    ThresholdSpec {
        method: ThresholdMethod::Universal,
        mode,
        value: ThresholdValue::Global(sigma_hat * universal_factor(decomp.original_length)),
        sigma_hat,
    }
}

fn universal_factor<T: Real>(n: usize) -> T {
    (T::lit(2.0) * T::from_count(n.max(1)).ln()).sqrt()
}

/// Percentage (as a fraction) of total energy held by coefficients with `|c| > t`.
pub fn retained_energy_fraction<S>(coeffs: &[S], t: &S) -> S
where
    S: Num + Signed + PartialOrd + Clone,
{
    let total = coeffs.iter().fold(S::zero(), |acc, c| acc + c.clone() * c.clone());
    if total.is_zero() {
        return S::zero();
    }
    let kept = coeffs
        .iter()
        .filter(|c| c.abs() > *t)
        .fold(S::zero(), |acc, c| acc + c.clone() * c.clone());
    kept / total
}

/// Fraction of coefficients with `|c| <= t`.
pub fn zeros_fraction<S>(coeffs: &[S], t: &S) -> S
where
    S: Num + Signed + PartialOrd + Clone + FromPrimitive,
{
    if coeffs.is_empty() {
        return S::zero();
    }
    let zeros = coeffs.iter().filter(|c| c.abs() <= *t).count();
    S::from_usize(zeros).expect("count") / S::from_usize(coeffs.len()).expect("count")
}

/// Threshold at which retained energy E(t) and zeroed fraction Z(t) cross.
///
/// Candidates are the distinct coefficient magnitudes in ascending order.
/// The result is the first candidate where `E <= Z` when that is the smallest
/// magnitude; otherwise `E - Z` is linearly interpolated between the last
/// candidate above the crossing and the first one at or below it.
///
/// Generic over any ordered field so the scan can run on exact rationals.
pub fn balance_sparsity_crossing<S>(coeffs: &[S]) -> S
where
    S: Num + Signed + PartialOrd + Clone + FromPrimitive,
{
    let mut mags: Vec<S> = coeffs.iter().map(Signed::abs).collect();
    mags.sort_by(|a, b| a.partial_cmp(b).expect("ordered coefficients"));
    let total = mags.iter().fold(S::zero(), |acc, m| acc + m.clone() * m.clone());
    if total.is_zero() {
        return S::zero();
    }
    let n = S::from_usize(mags.len()).expect("count");

    let mut removed = S::zero();
    let mut prev: Option<(S, S)> = None;
    let mut i = 0;
    while i < mags.len() {
        let t = mags[i].clone();
        while i < mags.len() && mags[i] == t {
            removed = removed + mags[i].clone() * mags[i].clone();
            i += 1;
        }
        let energy = (total.clone() - removed.clone()) / total.clone();
        let zeros = S::from_usize(i).expect("count") / n.clone();
        let gap = energy - zeros;
        if gap <= S::zero() {
            return match prev {
                None => t,
                Some((t_prev, gap_prev)) => {
                    let span = t - t_prev.clone();
                    t_prev + span * gap_prev.clone() / (gap_prev - gap)
                }
            };
        }
        prev = Some((t, gap));
    }
    // unreachable for a nonzero total: the largest magnitude has E = 0, Z = 1
    prev.map(|(t, _)| t).unwrap_or_else(S::zero)
}

fn detail_coefficients<T: Real>(decomp: &WaveletDecomposition<T>) -> Vec<T> {
    decomp.detail_bands().flatten().copied().collect()
}

/// Balance-sparsity threshold over all detail/leaf coefficients (band 0 excluded).
pub fn balance_sparsity_threshold<T: Real>(decomp: &WaveletDecomposition<T>, mode: ShrinkMode) -> ThresholdSpec<T> {
    ThresholdSpec {
        method: ThresholdMethod::BalanceSparsity,
        mode,
        value: ThresholdValue::Global(balance_sparsity_crossing(&detail_coefficients(decomp))),
        sigma_hat: median_abs_sigma(decomp.finest_band()),
    }
}

/// Threshold estimate for `method` at the requested granularity.
pub fn estimate_threshold<T: Real>(
    decomp: &WaveletDecomposition<T>,
    method: ThresholdMethod,
    mode: ShrinkMode,
    scope: ThresholdScope,
) -> ThresholdSpec<T> {
    match (scope, method) {
        (ThresholdScope::Global, ThresholdMethod::Universal) => universal_threshold(decomp, mode),
        (ThresholdScope::Global, ThresholdMethod::BalanceSparsity) => balance_sparsity_threshold(decomp, mode),
        (ThresholdScope::PerBand, _) => {
            let factor = universal_factor::<T>(decomp.original_length);
            let values = decomp
                .bands
                .iter()
                .enumerate()
                .map(|(i, band)| match (i, method) {
                    (0, _) => T::zero(),
                    (_, ThresholdMethod::Universal) => median_abs_sigma(band) * factor,
                    (_, ThresholdMethod::BalanceSparsity) => balance_sparsity_crossing(band),
                })
                .collect();
            ThresholdSpec {
                method,
                mode,
                value: ThresholdValue::PerBand(values),
                sigma_hat: median_abs_sigma(decomp.finest_band()),
            }
        }
    }
}

/// Shrinks one coefficient.
#[inline]
pub fn shrink<T: Real>(c: T, t: T, mode: ShrinkMode) -> T {
    match mode {
        ShrinkMode::Hard => {
            if c.abs() > t {
                c
            } else {
                T::zero()
            }
        }
        ShrinkMode::Soft => c.signum() * (c.abs() - t).max(T::zero()),
    }
}

/// Applies the threshold to every band except band 0.
pub fn apply_threshold<T: Real>(
    decomp: &WaveletDecomposition<T>,
    spec: &ThresholdSpec<T>,
) -> Result<WaveletDecomposition<T>, WaveletError> {
    let per_band: Vec<T> = match &spec.value {
        ThresholdValue::Global(t) => vec![*t; decomp.bands.len()],
        ThresholdValue::PerBand(v) => {
            if v.len() != decomp.bands.len() {
                return Err(WaveletError::BandCountMismatch {
                    expected: decomp.bands.len(),
                    found: v.len(),
                });
            }
            v.clone()
        }
    };
    if per_band.iter().skip(1).any(|t| !t.is_finite() || *t < T::zero()) {
        return Err(WaveletError::InvalidThreshold);
    }
    let mut out = decomp.clone();
    for (band, &t) in out.bands.iter_mut().zip(&per_band).skip(1) {
        band.iter_mut().for_each(|c| *c = shrink(*c, t, spec.mode));
    }
    Ok(out)
}
