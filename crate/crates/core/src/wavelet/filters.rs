use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::scalar::Real;

use super::{tables, WaveletError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WaveletFamily {
    Haar,
    Db5,
    Db10,
    Db15,
    Sym5,
    Sym10,
    Sym15,
    Coif3,
    Coif4,
}

impl WaveletFamily {
    pub const ALL: [WaveletFamily; 9] = [
        WaveletFamily::Haar,
        WaveletFamily::Db5,
        WaveletFamily::Db10,
        WaveletFamily::Db15,
        WaveletFamily::Sym5,
        WaveletFamily::Sym10,
        WaveletFamily::Sym15,
        WaveletFamily::Coif3,
        WaveletFamily::Coif4,
    ];

    pub fn name(self) -> &'static str {
        match self {
            WaveletFamily::Haar => "haar",
            WaveletFamily::Db5 => "db5",
            WaveletFamily::Db10 => "db10",
            WaveletFamily::Db15 => "db15",
            WaveletFamily::Sym5 => "sym5",
            WaveletFamily::Sym10 => "sym10",
            WaveletFamily::Sym15 => "sym15",
            WaveletFamily::Coif3 => "coif3",
            WaveletFamily::Coif4 => "coif4",
        }
    }

    /// Low-pass decomposition coefficients.
    pub fn table(self) -> &'static [f64] {
        match self {
            WaveletFamily::Haar => &tables::HAAR,
            WaveletFamily::Db5 => &tables::DB5,
            WaveletFamily::Db10 => &tables::DB10,
            WaveletFamily::Db15 => &tables::DB15,
            WaveletFamily::Sym5 => &tables::SYM5,
            WaveletFamily::Sym10 => &tables::SYM10,
            WaveletFamily::Sym15 => &tables::SYM15,
            WaveletFamily::Coif3 => &tables::COIF3,
            WaveletFamily::Coif4 => &tables::COIF4,
        }
    }
}

impl fmt::Display for WaveletFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for WaveletFamily {
    type Err = WaveletError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.to_ascii_lowercase();
        let lower = if lower == "db1" { "haar".to_string() } else { lower };
        WaveletFamily::ALL
            .into_iter()
            .find(|f| f.name() == lower)
            .ok_or_else(|| WaveletError::UnknownFamily(s.to_string()))
    }
}

/// Orthogonal two-channel filter bank.
///
/// `dec_hi[k] = (-1)^k * dec_lo[L-1-k]`; the reconstruction filters are the
/// time-reversed analysis pair.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletFilter<T> {
    pub family: WaveletFamily,
    pub dec_lo: Vec<T>,
    pub dec_hi: Vec<T>,
    pub rec_lo: Vec<T>,
    pub rec_hi: Vec<T>,
}

impl<T> WaveletFilter<T> {
    pub fn len(&self) -> usize {
        self.dec_lo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dec_lo.is_empty()
    }
}

/// A violated filter-bank condition.
#[derive(Debug, Clone, PartialEq)]
pub enum FilterDefect {
    /// `|sum(h) - sqrt 2|`
    DcGain(f64),
    /// `|sum_k h[k] h[k+2m] - delta(m)|` at shift `m`
    Orthonormality { shift: usize, residual: f64 },
}

/// Checks `sum h = sqrt 2` (1e-10) and double-shift orthonormality (1e-8).
pub fn validate_filter_table(h: &[f64]) -> Result<(), FilterDefect> {
    let dc = (h.iter().sum::<f64>() - std::f64::consts::SQRT_2).abs();
    if dc > 1e-10 {
        return Err(FilterDefect::DcGain(dc));
    }
    for shift in 0..h.len().div_ceil(2) {
        let acc: f64 = h.iter().zip(&h[2 * shift..]).map(|(a, b)| a * b).sum();
        let target = if shift == 0 { 1.0 } else { 0.0 };
        let residual = (acc - target).abs();
        if residual > 1e-8 {
            return Err(FilterDefect::Orthonormality { shift, residual });
        }
    }
    Ok(())
}

pub fn wavelet_filters<T: Real>(family: WaveletFamily) -> WaveletFilter<T> {
    let h = family.table();
    debug_assert!(
        validate_filter_table(h).is_ok(),
        "{family} table fails QMF checks: {:?}",
        validate_filter_table(h)
    );
    let len = h.len();
    let dec_lo: Vec<T> = h.iter().map(|&v| T::lit(v)).collect();
    let dec_hi: Vec<T> = (0..len)
        .map(|k| {
            let v = T::lit(h[len - 1 - k]);
            if k % 2 == 0 {
                v
            } else {
                -v
            }
        })
        .collect();
    let rec_lo = dec_lo.iter().rev().copied().collect();
    let rec_hi = dec_hi.iter().rev().copied().collect();
    WaveletFilter {
        family,
        dec_lo,
        dec_hi,
        rec_lo,
        rec_hi,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn haar_coefficients() {
        let f = wavelet_filters::<f64>(WaveletFamily::Haar);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert_eq!(f.dec_lo.len(), 2);
        assert!((f.dec_lo[0] - r).abs() < 1e-15 && (f.dec_lo[1] - r).abs() < 1e-15);
        assert!((f.dec_hi[0] - r).abs() < 1e-15 && (f.dec_hi[1] + r).abs() < 1e-15);
    }

    #[test]
    fn filter_lengths() {
        let expected = [2, 10, 20, 30, 10, 20, 30, 18, 24];
        for (family, len) in WaveletFamily::ALL.into_iter().zip(expected) {
            assert_eq!(family.table().len(), len, "{family}");
        }
    }

    #[test]
    fn every_table_is_an_orthonormal_qmf() {
        for family in WaveletFamily::ALL {
            validate_filter_table(family.table()).unwrap_or_else(|e| panic!("{family}: {e:?}"));
            let f = wavelet_filters::<f64>(family);
            let l = f.len();
            for k in 0..l {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                assert_eq!(f.dec_hi[k], sign * f.dec_lo[l - 1 - k]);
                assert_eq!(f.rec_lo[k], f.dec_lo[l - 1 - k]);
                assert_eq!(f.rec_hi[k], f.dec_hi[l - 1 - k]);
            }
            // high-pass has zero DC and is orthogonal to the low-pass at even shifts
            assert!(f.dec_hi.iter().sum::<f64>().abs() < 1e-10);
            for m in 0..l / 2 {
                let cross: f64 = (0..l - 2 * m).map(|k| f.dec_lo[k] * f.dec_hi[k + 2 * m]).sum();
                let cross_rev: f64 = (0..l - 2 * m).map(|k| f.dec_hi[k] * f.dec_lo[k + 2 * m]).sum();
                assert!(cross.abs() < 1e-8 && cross_rev.abs() < 1e-8, "{family} m={m}");
            }
        }
    }

    #[test]
    fn db5_dc_gain() {
        let s: f64 = WaveletFamily::Db5.table().iter().sum();
        assert!((s - std::f64::consts::SQRT_2).abs() < 1e-10);
    }

    #[test]
    fn corrupted_table_is_caught() {
        let mut h = WaveletFamily::Coif4.table().to_vec();
        h[3] += 1e-6;
        assert!(matches!(validate_filter_table(&h), Err(FilterDefect::DcGain(_))));
        let mut h = WaveletFamily::Db5.table().to_vec();
        h.swap(0, 1);
        assert!(matches!(validate_filter_table(&h), Err(FilterDefect::Orthonormality { .. })));
    }

    #[test]
    fn names_round_trip() {
        for family in WaveletFamily::ALL {
            assert_eq!(family.name().parse::<WaveletFamily>().unwrap(), family);
        }
        assert_eq!("DB1".parse::<WaveletFamily>().unwrap(), WaveletFamily::Haar);
        assert!(matches!("db4".parse::<WaveletFamily>(), Err(WaveletError::UnknownFamily(_))));
    }
}
