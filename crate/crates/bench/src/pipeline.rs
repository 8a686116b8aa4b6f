//! `mix`, `denoise` and `eval`. Each stage reads the previous stage's files
//! under the output directory and isolates failures per file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use denoise_core::adaptive::{denoise_adaptive, NoiseReference, OptimizerParams};
use denoise_core::metrics::snr_improvement;
use denoise_core::signal::{mix_at_snr, read_wav, resample_to_8k, write_wav_as, AudioBuffer, WavEncoding};
use denoise_core::vad::{detect, VadParams};
use denoise_core::wavelet::{denoise_wavelet, WaveletDenoiseConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::naming::{denoised_stem, noisy_stem, parse_denoised_stem, parse_noisy_stem};
use crate::{BenchError, RunSummary};

/// Written files keep full precision; PCM16 would clip loud mixtures.
pub const OUTPUT_ENCODING: WavEncoding = WavEncoding::Float32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub file: String,
    pub clean: String,
    pub target_snr_db: f64,
    pub measured_snr_db: f64,
    pub noise_gain: f64,
    pub noise_offset: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub file: String,
    pub algorithm: String,
    pub variant: String,
    pub input_snr_db: f64,
    pub output_snr_db: f64,
    pub improvement_db: f64,
    pub segsnr_db: f64,
    pub lag: i64,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> BenchError + '_ {
    move |source| BenchError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn create_dir(path: &Path) -> Result<(), BenchError> {
    std::fs::create_dir_all(path).map_err(io_err(path))
}

/// `*.wav` files in `dir`, sorted by name.
pub fn list_wavs(dir: &Path) -> Result<Vec<PathBuf>, BenchError> {
    let mut out: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|e| e.eq_ignore_ascii_case("wav")))
        .collect();
    out.sort();
    Ok(out)
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Writes `rows` as CSV through a temporary file so readers never see a
/// partial table.
pub fn write_csv<R: Serialize>(path: &Path, rows: &[R]) -> Result<(), BenchError> {
    let tmp = path.with_extension("csv.tmp");
    let mut w = csv::Writer::from_path(&tmp).map_err(|e| BenchError::Csv(tmp.clone(), e))?;
    for r in rows {
        w.serialize(r).map_err(|e| BenchError::Csv(tmp.clone(), e))?;
    }
    w.flush().map_err(io_err(&tmp))?;
    drop(w);
    std::fs::rename(&tmp, path).map_err(io_err(path))
}

pub fn read_csv<R: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<R>, BenchError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| BenchError::Csv(path.to_path_buf(), e))?;
    r.deserialize()
        .collect::<Result<Vec<R>, _>>()
        .map_err(|e| BenchError::Csv(path.to_path_buf(), e))
}

fn load_8k(path: &Path) -> Result<AudioBuffer<f64>, String> {
    let raw: AudioBuffer<f64> = read_wav(path).map_err(|e| e.to_string())?;
    resample_to_8k(&raw).map_err(|e| e.to_string())
}

/// Same noise, rotated to start at `offset`.
fn rotated(noise: &AudioBuffer<f64>, offset: usize) -> AudioBuffer<f64> {
    let s = noise.samples();
    let mut v = Vec::with_capacity(s.len());
    v.extend_from_slice(&s[offset..]);
    v.extend_from_slice(&s[..offset]);
    AudioBuffer::new(v, noise.sample_rate()).expect("rotation keeps samples finite")
}

/// Start of the noise excerpt for one (file, target) pair: a pure function of
/// the run seed and the pair, independent of scheduling.
fn noise_offset(seed: u64, clean_stem: &str, target: f64, noise_len: usize) -> usize {
    let mut key = seed ^ target.to_bits().rotate_left(17);
    for b in clean_stem.bytes() {
        key = key.rotate_left(5) ^ b as u64;
        key = key.wrapping_mul(0x100_0000_01b3);
    }
    ChaCha8Rng::seed_from_u64(key).random_range(0..noise_len.max(1))
}

fn run_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T, BenchError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| BenchError::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Resamples every clean file to 8 kHz, mixes it with the noise at each
/// target SNR and writes `noisy/<stem>_snr<k>.wav` plus `manifest.csv`.
pub fn cmd_mix(cfg: &ExperimentConfig, jobs: usize) -> Result<RunSummary, BenchError> {
    cfg.validate()?;
    let clean_dir = cfg
        .clean_dir
        .as_deref()
        .ok_or_else(|| BenchError::Config("clean_dir is required for mix".into()))?;
    let noise_file = cfg
        .noise_file
        .as_deref()
        .ok_or_else(|| BenchError::Config("noise_file is required for mix".into()))?;
    if !noise_file.is_file() {
        return Err(BenchError::Config(format!("noise file {} not found", noise_file.display())));
    }
    let noise = load_8k(noise_file).map_err(|e| BenchError::Config(format!("{}: {e}", noise_file.display())))?;
    if noise.is_empty() {
        return Err(BenchError::Config(format!("noise file {} is empty", noise_file.display())));
    }
    let sources = list_wavs(clean_dir)?;
    if sources.is_empty() {
        return Err(BenchError::Config(format!("no .wav files in {}", clean_dir.display())));
    }
    create_dir(&cfg.clean_dir())?;
    create_dir(&cfg.noisy_dir())?;

    let per_file = run_pool(jobs, || {
        sources
            .par_iter()
            .map(|path| mix_one(cfg, path, &noise))
            .collect::<Vec<_>>()
    })?;

    let mut summary = RunSummary::default();
    let mut manifest = Vec::new();
    for (path, result) in sources.iter().zip(per_file) {
        match result {
            Ok(rows) => {
                summary.produced += rows.len();
                manifest.extend(rows);
            }
            Err(e) => summary.fail(path.display().to_string(), e),
        }
    }
    write_csv(&cfg.manifest_path(), &manifest)?;
    Ok(summary)
}

fn mix_one(cfg: &ExperimentConfig, path: &Path, noise: &AudioBuffer<f64>) -> Result<Vec<ManifestRow>, String> {
    let clean_stem = stem(path);
    let clean = load_8k(path)?;
    write_wav_as(&clean, cfg.clean_dir().join(format!("{clean_stem}.wav")), OUTPUT_ENCODING)
        .map_err(|e| e.to_string())?;
    let mut rows = Vec::new();
    for &target in &cfg.snr_targets {
        let offset = noise_offset(cfg.seed, &clean_stem, target, noise.len());
        let (noisy, spec) = mix_at_snr(&clean, &rotated(noise, offset), target).map_err(|e| e.to_string())?;
        let name = noisy_stem(&clean_stem, target);
        write_wav_as(&noisy, cfg.noisy_dir().join(format!("{name}.wav")), OUTPUT_ENCODING)
            .map_err(|e| e.to_string())?;
        rows.push(ManifestRow {
            file: name,
            clean: clean_stem.clone(),
            target_snr_db: target,
            measured_snr_db: spec.measured_snr_db,
            noise_gain: spec.noise_gain,
            noise_offset: offset,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Wavelet,
    Adaptive,
}

/// One point of a denoising grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum GridPoint {
    Wavelet {
        #[serde(flatten)]
        config: WaveletDenoiseConfig,
    },
    Adaptive {
        params: OptimizerParams,
        vad: VadParams,
        reference: &'static str,
    },
}

impl GridPoint {
    pub fn algorithm(&self) -> String {
        match self {
            GridPoint::Wavelet { .. } => "wavelet".to_string(),
            GridPoint::Adaptive { params, .. } => params.algorithm.as_str().to_string(),
        }
    }

    pub fn variant(&self) -> String {
        match self {
            GridPoint::Wavelet { config } => format!("{}-{}", config.family.name(), config.variant()),
            GridPoint::Adaptive { vad, .. } => vad.feature.as_str().to_string(),
        }
    }
}

pub fn grid(cfg: &ExperimentConfig, method: Method) -> Vec<GridPoint> {
    match method {
        Method::Wavelet => {
            let w = &cfg.wavelet;
            let mut out = Vec::new();
            for &family in &w.families {
                for &kind in &w.kinds {
                    for &method in &w.methods {
                        for &mode in &w.modes {
                            let mut config = WaveletDenoiseConfig::new(family, kind, method, mode);
                            config.levels = w.levels;
                            config.scope = w.scope;
                            out.push(GridPoint::Wavelet { config });
                        }
                    }
                }
            }
            out
        }
        Method::Adaptive => {
            let a = &cfg.adaptive;
            let mut out = Vec::new();
            for &algorithm in &a.algorithms {
                for &feature in &a.vad {
                    out.push(GridPoint::Adaptive {
                        params: a.params(algorithm),
                        vad: VadParams::with_feature(feature),
                        reference: "vad_reference",
                    });
                }
            }
            out
        }
    }
}

pub fn denoise_one(noisy: &AudioBuffer<f64>, point: &GridPoint) -> Result<AudioBuffer<f64>, String> {
    match point {
        GridPoint::Wavelet { config } => denoise_wavelet(noisy, config).map_err(|e| e.to_string()),
        GridPoint::Adaptive { params, vad, .. } => {
            let vad_params = VadParams {
                feature: vad.feature,
                ..VadParams::at_rate(noisy.sample_rate())
            };
            let decision = detect(noisy, &vad_params).map_err(|e| e.to_string())?;
            denoise_adaptive(noisy, params, NoiseReference::VadTemplate(&decision)).map_err(|e| e.to_string())
        }
    }
}

#[derive(Serialize)]
struct Sidecar<'a> {
    source: String,
    clean: &'a str,
    target_snr_db: f64,
    seed: u64,
    algorithm: String,
    variant: String,
    sample_rate: u32,
    samples: usize,
    parameters: &'a GridPoint,
}

/// Runs every grid point over every noisy file in the manifest.
pub fn cmd_denoise(cfg: &ExperimentConfig, method: Method, jobs: usize) -> Result<RunSummary, BenchError> {
    cfg.validate()?;
    let manifest: Vec<ManifestRow> = read_manifest(cfg)?;
    let points = grid(cfg, method);
    create_dir(&cfg.denoised_dir())?;
    let tasks: Vec<(&ManifestRow, &GridPoint)> = manifest
        .iter()
        .flat_map(|row| points.iter().map(move |p| (row, p)))
        .collect();
    let results = run_pool(jobs, || {
        tasks
            .par_iter()
            .map(|(row, point)| denoise_task(cfg, row, point))
            .collect::<Vec<_>>()
    })?;
    let mut summary = RunSummary::default();
    for ((row, point), result) in tasks.iter().zip(results) {
        match result {
            Ok(()) => summary.produced += 1,
            Err(e) => summary.fail(denoised_stem(&row.file, &point.algorithm(), &point.variant()), e),
        }
    }
    Ok(summary)
}

fn read_manifest(cfg: &ExperimentConfig) -> Result<Vec<ManifestRow>, BenchError> {
    let path = cfg.manifest_path();
    if !path.is_file() {
        return Err(BenchError::Config(format!(
            "{} not found; run `mix` first",
            path.display()
        )));
    }
    read_csv(&path)
}

fn denoise_task(cfg: &ExperimentConfig, row: &ManifestRow, point: &GridPoint) -> Result<(), String> {
    let source = cfg.noisy_dir().join(format!("{}.wav", row.file));
    let noisy: AudioBuffer<f64> = read_wav(&source).map_err(|e| e.to_string())?;
    let out = denoise_one(&noisy, point)?;
    let name = denoised_stem(&row.file, &point.algorithm(), &point.variant());
    let wav = cfg.denoised_dir().join(format!("{name}.wav"));
    write_wav_as(&out, &wav, OUTPUT_ENCODING).map_err(|e| e.to_string())?;
    let sidecar = Sidecar {
        source: format!("noisy/{}.wav", row.file),
        clean: &row.clean,
        target_snr_db: row.target_snr_db,
        seed: cfg.seed,
        algorithm: point.algorithm(),
        variant: point.variant(),
        sample_rate: out.sample_rate(),
        samples: out.len(),
        parameters: point,
    };
    let json = serde_json::to_string_pretty(&sidecar).map_err(|e| e.to_string())?;
    std::fs::write(wav.with_extension("json"), json).map_err(|e| e.to_string())
}

/// Scores every file in `denoised/` against its clean and noisy counterparts
/// and writes `results.csv`.
pub fn cmd_eval(cfg: &ExperimentConfig, jobs: usize) -> Result<RunSummary, BenchError> {
    let manifest: BTreeMap<String, ManifestRow> = read_manifest(cfg)?
        .into_iter()
        .map(|r| (r.file.clone(), r))
        .collect();
    let denoised = list_wavs(&cfg.denoised_dir())?;
    let rows = run_pool(jobs, || {
        denoised
            .par_iter()
            .map(|path| eval_one(cfg, &manifest, path))
            .collect::<Vec<_>>()
    })?;
    let mut summary = RunSummary::default();
    let mut table = Vec::new();
    for (path, row) in denoised.iter().zip(rows) {
        match row {
            Ok(r) => table.push(r),
            Err(e) => summary.fail(path.display().to_string(), e),
        }
    }
    table.sort_by(|a, b| (&a.file, &a.algorithm, &a.variant).cmp(&(&b.file, &b.algorithm, &b.variant)));
    summary.produced = table.len();
    write_csv(&cfg.results_path(), &table)?;
    Ok(summary)
}

fn eval_one(
    cfg: &ExperimentConfig,
    manifest: &BTreeMap<String, ManifestRow>,
    path: &Path,
) -> Result<ResultRow, String> {
    let name = stem(path);
    let (noisy_name, algorithm, variant) =
        parse_denoised_stem(&name).ok_or("name is not <stem>_snr<k>__<algorithm>__<variant>.wav")?;
    let entry = manifest
        .get(noisy_name)
        .ok_or_else(|| format!("no manifest entry for {noisy_name}"))?;
    let read = |p: PathBuf| -> Result<AudioBuffer<f64>, String> {
        read_wav(&p).map_err(|e| format!("{}: {e}", p.display()))
    };
    let clean = read(cfg.clean_dir().join(format!("{}.wav", entry.clean)))?;
    let noisy = read(cfg.noisy_dir().join(format!("{noisy_name}.wav")))?;
    let out = read(path.to_path_buf())?;
    let report = snr_improvement(&clean, &noisy, &out).map_err(|e| e.to_string())?;
    if report.inverted {
        tracing::warn!(file = %name, "output is polarity-inverted relative to clean");
    }
    Ok(ResultRow {
        file: noisy_name.to_string(),
        algorithm: algorithm.to_string(),
        variant: variant.to_string(),
        input_snr_db: report.input_snr_db,
        output_snr_db: report.output_snr_db,
        improvement_db: report.improvement_db,
        segsnr_db: report.segsnr_db,
        lag: report.lag,
    })
}

/// Target SNR encoded in a noisy-file name.
pub fn target_of(file: &str) -> Option<f64> {
    parse_noisy_stem(file).map(|(_, t)| t)
}
