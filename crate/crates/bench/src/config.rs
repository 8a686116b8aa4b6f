use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use denoise_core::adaptive::{Algorithm, OptimizerParams};
use denoise_core::vad::VadFeature;
use denoise_core::wavelet::{ShrinkMode, ThresholdMethod, ThresholdScope, TransformKind, WaveletFamily, DEFAULT_LEVELS};
use serde::{Deserialize, Serialize};

use crate::BenchError;

pub const SEED_ENV: &str = "DENOISE_BENCH_SEED";

/// Everything a run depends on. Loaded from JSON; every field has a default
/// and can be overridden from the command line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub clean_dir: Option<PathBuf>,
    pub noise_file: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub snr_targets: Vec<f64>,
    pub seed: u64,
    pub wavelet: WaveletGrid,
    pub adaptive: AdaptiveGrid,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            clean_dir: None,
            noise_file: None,
            output_dir: PathBuf::from("bench-out"),
            snr_targets: vec![0.0, 5.0, 10.0, 15.0],
            seed: 0,
            wavelet: WaveletGrid::default(),
            adaptive: AdaptiveGrid::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WaveletGrid {
    pub families: Vec<WaveletFamily>,
    pub kinds: Vec<TransformKind>,
    pub methods: Vec<ThresholdMethod>,
    pub modes: Vec<ShrinkMode>,
    pub levels: usize,
    pub scope: ThresholdScope,
}

impl Default for WaveletGrid {
    fn default() -> Self {
        Self {
            families: WaveletFamily::ALL.to_vec(),
            kinds: vec![TransformKind::Dwt, TransformKind::Wpt],
            methods: vec![ThresholdMethod::Universal, ThresholdMethod::BalanceSparsity],
            modes: vec![ShrinkMode::Soft, ShrinkMode::Hard],
            levels: DEFAULT_LEVELS,
            scope: ThresholdScope::Global,
        }
    }
}

/// Per-algorithm parameter changes on top of the published defaults.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamOverride {
    pub order: Option<usize>,
    pub mu: Option<f64>,
    pub alpha: Option<f64>,
    pub c: Option<f64>,
    pub gamma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdaptiveGrid {
    pub algorithms: Vec<Algorithm>,
    pub vad: Vec<VadFeature>,
    pub overrides: BTreeMap<Algorithm, ParamOverride>,
}

impl Default for AdaptiveGrid {
    fn default() -> Self {
        Self {
            algorithms: Algorithm::ALL.to_vec(),
            vad: vec![VadFeature::Energy, VadFeature::Cepstral],
            overrides: BTreeMap::new(),
        }
    }
}

impl AdaptiveGrid {
    pub fn params(&self, algorithm: Algorithm) -> OptimizerParams {
        let mut p = OptimizerParams::defaults(algorithm);
        if let Some(o) = self.overrides.get(&algorithm) {
            p.order = o.order.unwrap_or(p.order);
            p.mu = o.mu.unwrap_or(p.mu);
            p.alpha = o.alpha.unwrap_or(p.alpha);
            p.c = o.c.unwrap_or(p.c);
            p.gamma = o.gamma.unwrap_or(p.gamma);
        }
        p
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, BenchError> {
        let text = std::fs::read_to_string(path).map_err(|source| BenchError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| BenchError::Config(format!("{}: {e}", path.display())))
    }

    /// Applies `DENOISE_BENCH_SEED` if set.
    pub fn apply_env(&mut self) -> Result<(), BenchError> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.seed = v
                .trim()
                .parse()
                .map_err(|_| BenchError::Config(format!("{SEED_ENV}={v} is not an unsigned integer")))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let empty = |what: &str| Err(BenchError::Config(format!("{what} must not be empty")));
        if self.snr_targets.is_empty() {
            return empty("snr_targets");
        }
        if self.snr_targets.iter().any(|t| !t.is_finite()) {
            return Err(BenchError::Config("snr_targets must be finite".into()));
        }
        let w = &self.wavelet;
        if w.families.is_empty() || w.kinds.is_empty() || w.methods.is_empty() || w.modes.is_empty() {
            return empty("every wavelet grid axis");
        }
        if w.levels == 0 {
            return Err(BenchError::Config("wavelet.levels must be at least 1".into()));
        }
        if self.adaptive.algorithms.is_empty() || self.adaptive.vad.is_empty() {
            return empty("every adaptive grid axis");
        }
        for &a in &self.adaptive.algorithms {
            self.adaptive
                .params(a)
                .validate()
                .map_err(|e| BenchError::Config(e.to_string()))?;
        }
        Ok(())
    }

    pub fn clean_dir(&self) -> PathBuf {
        self.output_dir.join("clean")
    }

    pub fn noisy_dir(&self) -> PathBuf {
        self.output_dir.join("noisy")
    }

    pub fn denoised_dir(&self) -> PathBuf {
        self.output_dir.join("denoised")
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.output_dir.join("manifest.csv")
    }

    pub fn results_path(&self) -> PathBuf {
        self.output_dir.join("results.csv")
    }

    pub fn report_path(&self) -> PathBuf {
        self.output_dir.join("report.csv")
    }
}
