use serde::{Deserialize, Serialize};

use crate::scalar::Real;
use crate::signal::AudioBuffer;

use super::{WaveletError, WaveletFamily, WaveletFilter};

pub const DEFAULT_LEVELS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransformKind {
    Dwt,
    Wpt,
}

impl TransformKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TransformKind::Dwt => "dwt",
            TransformKind::Wpt => "wpt",
        }
    }
}

impl std::str::FromStr for TransformKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dwt" => Ok(TransformKind::Dwt),
            "wpt" => Ok(TransformKind::Wpt),
            other => Err(format!("unknown transform `{other}` (expected dwt|wpt)")),
        }
    }
}

/// Coefficients of a periodised multi-level decomposition.
///
/// Band layout:
/// * `Dwt`: `[a_L, d_L, d_{L-1}, ..., d_1]` where `d_1` is the finest detail;
/// * `Wpt`: the `2^L` leaves in natural filter-bank order, leaf `i` of a node
///   splitting into `2i` (low-pass) and `2i + 1` (high-pass).
///
/// Band 0 is the all-low-pass band in both layouts and is never thresholded.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletDecomposition<T> {
    pub kind: TransformKind,
    pub levels: usize,
    pub family: WaveletFamily,
    pub bands: Vec<Vec<T>>,
    pub original_length: usize,
    pub sample_rate: u32,
}

impl<T: Real> WaveletDecomposition<T> {
    pub fn coefficient_count(&self) -> usize {
        self.bands.iter().map(Vec::len).sum()
    }

    pub fn energy(&self) -> T {
        self.bands.iter().flatten().fold(T::zero(), |acc, &c| acc + c * c)
    }

    /// Bands subject to thresholding: everything except band 0.
    pub fn detail_bands(&self) -> impl Iterator<Item = &[T]> {
        self.bands.iter().skip(1).map(Vec::as_slice)
    }

    /// The highest-frequency band: `d_1` for a DWT. For a packet tree in
    /// natural order the frequency index of a leaf is the Gray-code inverse of
    /// its position, so the top band sits at position `2^(L-1)`.
    pub fn finest_band(&self) -> &[T] {
        match self.kind {
            TransformKind::Dwt => self.bands.last().expect("decomposition has bands"),
            TransformKind::Wpt => &self.bands[1 << (self.levels - 1)],
        }
    }
}

/// One analysis stage with periodic extension: returns (approximation, detail).
fn analyze<T: Real>(x: &[T], lo: &[T], hi: &[T]) -> (Vec<T>, Vec<T>) {
    let n = x.len();
    let half = n / 2;
    let mut a = Vec::with_capacity(half);
    let mut d = Vec::with_capacity(half);
    for i in 0..half {
        let base = 2 * i;
        let (mut sa, mut sd) = (T::zero(), T::zero());
        if base + lo.len() <= n {
            for ((&l, &h), &v) in lo.iter().zip(hi).zip(&x[base..]) {
                sa = sa + l * v;
                sd = sd + h * v;
            }
        } else {
            for (k, (&l, &h)) in lo.iter().zip(hi).enumerate() {
                let v = x[(base + k) % n];
                sa = sa + l * v;
                sd = sd + h * v;
            }
        }
        a.push(sa);
        d.push(sd);
    }
    (a, d)
}

/// Adjoint of [`analyze`]; exact inverse for an orthonormal filter pair.
fn synthesize<T: Real>(a: &[T], d: &[T], lo: &[T], hi: &[T]) -> Vec<T> {
    let n = 2 * a.len();
    let mut x = vec![T::zero(); n];
    for (i, (&ca, &cd)) in a.iter().zip(d).enumerate() {
        let base = 2 * i;
        for (k, (&l, &h)) in lo.iter().zip(hi).enumerate() {
            let j = (base + k) % n;
            x[j] = x[j] + l * ca + h * cd;
        }
    }
    x
}

fn padded<T: Real>(signal: &AudioBuffer<T>, levels: usize) -> Result<Vec<T>, WaveletError> {
    if levels == 0 {
        return Err(WaveletError::InvalidLevels);
    }
    if signal.is_empty() {
        return Err(WaveletError::EmptySignal);
    }
    let block = 1usize << levels;
    let mut x = signal.samples().to_vec();
    x.resize(signal.len().div_ceil(block) * block, T::zero());
    Ok(x)
}

/// Mallat cascade: `levels` successive low-pass splits.
pub fn dwt<T: Real>(
    signal: &AudioBuffer<T>,
    filter: &WaveletFilter<T>,
    levels: usize,
) -> Result<WaveletDecomposition<T>, WaveletError> {
    let mut approx = padded(signal, levels)?;
    let mut details = Vec::with_capacity(levels);
    for _ in 0..levels {
        let (a, d) = analyze(&approx, &filter.dec_lo, &filter.dec_hi);
        details.push(d);
        approx = a;
    }
    let mut bands = Vec::with_capacity(levels + 1);
    bands.push(approx);
    bands.extend(details.into_iter().rev());
    Ok(WaveletDecomposition {
        kind: TransformKind::Dwt,
        levels,
        family: filter.family,
        bands,
        original_length: signal.len(),
        sample_rate: signal.sample_rate(),
    })
}

/// Full wavelet-packet tree: both branches split at every level.
pub fn wpt<T: Real>(
    signal: &AudioBuffer<T>,
    filter: &WaveletFilter<T>,
    depth: usize,
) -> Result<WaveletDecomposition<T>, WaveletError> {
    let mut nodes = vec![padded(signal, depth)?];
    for _ in 0..depth {
        nodes = nodes
            .iter()
            .flat_map(|node| {
                let (a, d) = analyze(node, &filter.dec_lo, &filter.dec_hi);
                [a, d]
            })
            .collect();
    }
    Ok(WaveletDecomposition {
        kind: TransformKind::Wpt,
        levels: depth,
        family: filter.family,
        bands: nodes,
        original_length: signal.len(),
        sample_rate: signal.sample_rate(),
    })
}

pub fn transform<T: Real>(
    signal: &AudioBuffer<T>,
    filter: &WaveletFilter<T>,
    kind: TransformKind,
    levels: usize,
) -> Result<WaveletDecomposition<T>, WaveletError> {
    match kind {
        TransformKind::Dwt => dwt(signal, filter, levels),
        TransformKind::Wpt => wpt(signal, filter, levels),
    }
}

/// Inverse transform, truncated to the original signal length.
pub fn reconstruct<T: Real>(
    decomp: &WaveletDecomposition<T>,
    filter: &WaveletFilter<T>,
) -> Result<AudioBuffer<T>, WaveletError> {
    if decomp.family != filter.family {
        return Err(WaveletError::FamilyMismatch {
            expected: decomp.family,
            found: filter.family,
        });
    }
    let (lo, hi) = (&filter.dec_lo, &filter.dec_hi);
    let mut x = match decomp.kind {
        TransformKind::Dwt => {
            let mut approx = decomp.bands[0].clone();
            for detail in &decomp.bands[1..] {
                approx = synthesize(&approx, detail, lo, hi);
            }
            approx
        }
        TransformKind::Wpt => {
            let mut nodes = decomp.bands.clone();
            while nodes.len() > 1 {
                nodes = nodes.chunks_exact(2).map(|p| synthesize(&p[0], &p[1], lo, hi)).collect();
            }
            nodes.pop().unwrap_or_default()
        }
    };
    x.truncate(decomp.original_length);
    Ok(AudioBuffer::from_trusted(x, decomp.sample_rate))
}

#[cfg(test)]
mod tests {
    use super::super::wavelet_filters;
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn buf(x: Vec<f64>) -> AudioBuffer<f64> {
        AudioBuffer::new(x, 8000).unwrap()
    }

    fn random(n: usize, seed: u64) -> AudioBuffer<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        buf((0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
    }

    #[test]
    fn haar_one_level_by_hand() {
        let f = wavelet_filters(WaveletFamily::Haar);
        let d = dwt(&buf(vec![4.0, 4.0, 2.0, 2.0]), &f, 1).unwrap();
        assert_eq!(d.bands.len(), 2);
        assert!((d.bands[0][0] - 5.65685).abs() < 1e-5);
        assert!((d.bands[0][1] - 2.82843).abs() < 1e-5);
        assert!(d.bands[1].iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn zeros_stay_zero() {
        let f = wavelet_filters(WaveletFamily::Sym10);
        for kind in [TransformKind::Dwt, TransformKind::Wpt] {
            let d = transform(&buf(vec![0.0; 256]), &f, kind, 5).unwrap();
            assert!(d.bands.iter().flatten().all(|&c| c == 0.0));
        }
    }

    #[test]
    fn band_shapes() {
        let f = wavelet_filters(WaveletFamily::Db5);
        let x = random(1000, 1);
        let d = dwt(&x, &f, 5).unwrap();
        // padded to 1024
        let lens: Vec<usize> = d.bands.iter().map(Vec::len).collect();
        assert_eq!(lens, vec![32, 32, 64, 128, 256, 512]);
        assert_eq!(d.coefficient_count(), 1024);
        let p = wpt(&x, &f, 5).unwrap();
        assert_eq!(p.bands.len(), 32);
        assert!(p.bands.iter().all(|b| b.len() == 32));
    }

    #[test]
    fn one_level_packet_equals_one_level_dwt() {
        let f = wavelet_filters(WaveletFamily::Coif3);
        let x = random(512, 2);
        assert_eq!(dwt(&x, &f, 1).unwrap().bands, wpt(&x, &f, 1).unwrap().bands);
    }

    #[test]
    fn perfect_reconstruction_and_parseval() {
        for (seed, family) in WaveletFamily::ALL.into_iter().enumerate() {
            let f = wavelet_filters(family);
            let x = random(4096, seed as u64);
            let e_x: f64 = x.samples().iter().map(|v| v * v).sum();
            for kind in [TransformKind::Dwt, TransformKind::Wpt] {
                let d = transform(&x, &f, kind, 5).unwrap();
                assert!(((d.energy() - e_x) / e_x).abs() < 1e-8, "{family} {kind:?}");
                let y = reconstruct(&d, &f).unwrap();
                let err = y
                    .samples()
                    .iter()
                    .zip(x.samples())
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                assert!(err < 1e-8, "{family} {kind:?}: {err}");
            }
        }
    }

    #[test]
    fn short_signals_are_padded_and_truncated() {
        let f = wavelet_filters(WaveletFamily::Db15);
        let x = random(7, 3);
        let d = dwt(&x, &f, 5).unwrap();
        assert_eq!(d.coefficient_count(), 32);
        let y = reconstruct(&d, &f).unwrap();
        assert_eq!(y.len(), 7);
        for (a, b) in y.samples().iter().zip(x.samples()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn single_precision_round_trip() {
        let f = wavelet_filters::<f32>(WaveletFamily::Sym5);
        let x = random(1024, 4).cast::<f32>();
        let y = reconstruct(&wpt(&x, &f, 5).unwrap(), &f).unwrap();
        for (a, b) in y.samples().iter().zip(x.samples()) {
            assert!((a - b).abs() < 1e-5);
        }
    }

    #[test]
    fn finest_packet_leaf_holds_top_band() {
        // a tone near Nyquist lands in the leaf reported as finest
        let n = 4096;
        let x = buf((0..n).map(|i| (std::f64::consts::PI * 0.985 * i as f64).sin()).collect());
        let f = wavelet_filters(WaveletFamily::Sym15);
        let d = wpt(&x, &f, 5).unwrap();
        let energies: Vec<f64> = d.bands.iter().map(|b| b.iter().map(|v| v * v).sum()).collect();
        let argmax = energies
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert_eq!(argmax, 16);
        assert_eq!(d.finest_band().as_ptr(), d.bands[16].as_ptr());
    }

    #[test]
    fn errors() {
        let f = wavelet_filters(WaveletFamily::Haar);
        assert!(matches!(dwt(&buf(vec![]), &f, 5), Err(WaveletError::EmptySignal)));
        assert!(matches!(dwt(&buf(vec![1.0]), &f, 0), Err(WaveletError::InvalidLevels)));
        let d = dwt(&random(64, 5), &f, 2).unwrap();
        let other = wavelet_filters(WaveletFamily::Db5);
        assert!(matches!(reconstruct(&d, &other), Err(WaveletError::FamilyMismatch { .. })));
    }
}
