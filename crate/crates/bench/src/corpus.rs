//! Synthetic stand-in corpus: speech-like clean files plus a babble noise
//! file, for running the pipeline without external audio.

use std::path::{Path, PathBuf};

use denoise_core::signal::{write_wav_as, AudioBuffer, TARGET_RATE};
use denoise_core::synth::{babble_noise, synth_speech, SpeechParams};

use crate::pipeline::OUTPUT_ENCODING;
use crate::BenchError;

pub const BABBLE_FILE: &str = "babble.wav";

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub clean: Vec<PathBuf>,
    pub noise: PathBuf,
}

/// Writes `files` utterances to `dir/clean/utt<NN>.wav` and babble long enough
/// to cover one utterance to `dir/babble.wav`.
pub fn write_synthetic_corpus(dir: &Path, seed: u64, files: usize, duration_secs: f64) -> Result<SynthCorpus, BenchError> {
    if files == 0 || duration_secs.is_nan() || duration_secs <= 0.5 {
        return Err(BenchError::Config("synth needs at least one file longer than 0.5 s".into()));
    }
    let clean_dir = dir.join("clean");
    std::fs::create_dir_all(&clean_dir).map_err(|source| BenchError::Io {
        path: clean_dir.clone(),
        source,
    })?;
    let params = SpeechParams {
        duration_secs,
        ..SpeechParams::default()
    };
    let write = |buf: &AudioBuffer<f64>, path: PathBuf| {
        write_wav_as(buf, &path, OUTPUT_ENCODING)
            .map(|_| path)
            .map_err(|e| BenchError::Config(e.to_string()))
    };
    let mut clean = Vec::with_capacity(files);
    for i in 0..files {
        let speech = synth_speech(seed.wrapping_add(i as u64), &params);
        clean.push(write(&speech.audio, clean_dir.join(format!("utt{i:02}.wav")))?);
    }
    let len = (2.0 * duration_secs * TARGET_RATE as f64) as usize;
    let babble = babble_noise(seed ^ 0xbabb1e, len, TARGET_RATE, 4);
    let noise = write(&babble, dir.join(BABBLE_FILE))?;
    Ok(SynthCorpus { clean, noise })
}
