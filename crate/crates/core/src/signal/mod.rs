//! Audio containers, WAV I/O, rate conversion, framing and SNR-controlled mixing.

mod audio;
mod frame;
mod mix;
mod resample;
mod wav;

use std::path::PathBuf;

use thiserror::Error;

pub use audio::AudioBuffer;
pub(crate) use frame::frame_count;
pub use frame::{frame_signal, FrameSequence};
pub use mix::{active_level, active_mask, align_noise, mix_at_snr, MixSpec};
pub use resample::{resample, resample_to_8k, TARGET_RATE};
pub use wav::{decode_wav, encode_wav, encode_wav_as, read_wav, write_wav, write_wav_as, WavEncoding};

#[derive(Debug, Error)]
pub enum SignalError {
    #[error("sample rate must be positive")]
    ZeroSampleRate,
    #[error("non-finite sample at index {index}")]
    NonFinite { index: usize },
    #[error("malformed WAV header: {0}")]
    MalformedHeader(String),
    #[error("multichannel WAV ({channels} channels); only mono is supported")]
    Multichannel { channels: u16 },
    #[error("unsupported WAV encoding: format tag {format_tag}, {bits} bits per sample")]
    UnsupportedEncoding { format_tag: u16, bits: u16 },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("input rate {rate} Hz is below 8000 Hz; upsampling is not supported")]
    UpsamplingUnsupported { rate: u32 },
    #[error("invalid framing: frame_len {frame_len}, hop {hop} (need 0 < hop <= frame_len)")]
    InvalidFraming { frame_len: usize, hop: usize },
    #[error("sample rate mismatch: {left} Hz vs {right} Hz")]
    RateMismatch { left: u32, right: u32 },
    #[error("noise has zero power over the mixing region")]
    ZeroPowerNoise,
    #[error("clean signal has zero power over the mixing region")]
    ZeroPowerClean,
}
