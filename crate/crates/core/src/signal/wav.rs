//! Minimal RIFF/WAVE codec for mono PCM16 and IEEE float32.

use std::fs;
use std::path::Path;

use crate::scalar::Real;

use super::{AudioBuffer, SignalError};

const FORMAT_PCM: u16 = 1;
const FORMAT_IEEE_FLOAT: u16 = 3;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

const PCM16_SCALE: f64 = 32768.0;

struct Format {
    tag: u16,
    channels: u16,
    sample_rate: u32,
    bits: u16,
}

fn malformed(msg: impl Into<String>) -> SignalError {
    SignalError::MalformedHeader(msg.into())
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

fn parse_fmt(body: &[u8]) -> Result<Format, SignalError> {
    if body.len() < 16 {
        return Err(malformed(format!("fmt chunk too short ({} bytes)", body.len())));
    }
    let mut tag = u16_at(body, 0);
    let channels = u16_at(body, 2);
    let sample_rate = u32_at(body, 4);
    let bits = u16_at(body, 14);
    if tag == FORMAT_EXTENSIBLE {
        // cbSize(2) validBits(2) channelMask(4) then the subformat GUID whose
        // first two bytes carry the real format tag.
        if body.len() < 26 {
            return Err(malformed("extensible fmt chunk too short"));
        }
        tag = u16_at(body, 24);
    }
    Ok(Format {
        tag,
        channels,
        sample_rate,
        bits,
    })
}

/// Decodes an in-memory WAV file.
pub fn decode_wav<T: Real>(bytes: &[u8]) -> Result<AudioBuffer<T>, SignalError> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(malformed("missing RIFF/WAVE signature"));
    }
    let mut pos = 12;
    let mut format: Option<Format> = None;
    let mut data: Option<&[u8]> = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32_at(bytes, pos + 4) as usize;
        let start = pos + 8;
        // Writers that stream sometimes leave the data size unset; take what is there.
        let end = start.saturating_add(size).min(bytes.len());
        match id {
            b"fmt " => format = Some(parse_fmt(&bytes[start..end])?),
            b"data" => data = Some(&bytes[start..end]),
            _ => {}
        }
        pos = start.saturating_add(size).saturating_add(size & 1);
    }
    let format = format.ok_or_else(|| malformed("no fmt chunk"))?;
    let data = data.ok_or_else(|| malformed("no data chunk"))?;
    if format.sample_rate == 0 {
        return Err(malformed("sample rate is zero"));
    }
    if format.channels == 0 {
        return Err(malformed("channel count is zero"));
    }
    if format.channels != 1 {
        return Err(SignalError::Multichannel {
            channels: format.channels,
        });
    }
    let samples: Vec<T> = match (format.tag, format.bits) {
        (FORMAT_PCM, 16) => data
            .chunks_exact(2)
            .map(|c| T::lit(i16::from_le_bytes([c[0], c[1]]) as f64 / PCM16_SCALE))
            .collect(),
        (FORMAT_IEEE_FLOAT, 32) => data
            .chunks_exact(4)
            .map(|c| T::lit(f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64))
            .collect(),
        (tag, bits) => {
            return Err(SignalError::UnsupportedEncoding {
                format_tag: tag,
                bits,
            })
        }
    };
    AudioBuffer::new(samples, format.sample_rate)
}

pub fn read_wav<T: Real>(path: impl AsRef<Path>) -> Result<AudioBuffer<T>, SignalError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| SignalError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode_wav(&bytes)
}

fn quantize<T: Real>(s: T) -> i16 {
    let v = s.as_f64().clamp(-1.0, 1.0) * PCM16_SCALE;
    v.round().clamp(i16::MIN as f64, i16::MAX as f64) as i16
}

/// Sample encoding for written files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum WavEncoding {
    /// 16-bit integer, amplitudes clamped to [-1, 1].
    #[default]
    Pcm16,
    /// 32-bit IEEE float, unclamped.
    Float32,
}

/// Encodes as mono PCM16, clamping amplitudes to [-1, 1].
pub fn encode_wav<T: Real>(buf: &AudioBuffer<T>) -> Result<Vec<u8>, SignalError> {
    encode_wav_as(buf, WavEncoding::Pcm16)
}

pub fn encode_wav_as<T: Real>(buf: &AudioBuffer<T>, encoding: WavEncoding) -> Result<Vec<u8>, SignalError> {
    if let Some(index) = buf.samples().iter().position(|s| !s.is_finite()) {
        return Err(SignalError::NonFinite { index });
    }
    let (tag, width) = match encoding {
        WavEncoding::Pcm16 => (FORMAT_PCM, 2u16),
        WavEncoding::Float32 => (FORMAT_IEEE_FLOAT, 4u16),
    };
    let data_len = buf.len() * width as usize;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&tag.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&buf.sample_rate().to_le_bytes());
    out.extend_from_slice(&(buf.sample_rate() * width as u32).to_le_bytes());
    out.extend_from_slice(&width.to_le_bytes());
    out.extend_from_slice(&(width * 8).to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &s in buf.samples() {
        match encoding {
            WavEncoding::Pcm16 => out.extend_from_slice(&quantize(s).to_le_bytes()),
            WavEncoding::Float32 => out.extend_from_slice(&(s.as_f64() as f32).to_le_bytes()),
        }
    }
    Ok(out)
}

pub fn write_wav<T: Real>(buf: &AudioBuffer<T>, path: impl AsRef<Path>) -> Result<(), SignalError> {
    write_wav_as(buf, path, WavEncoding::Pcm16)
}

pub fn write_wav_as<T: Real>(
    buf: &AudioBuffer<T>,
    path: impl AsRef<Path>,
    encoding: WavEncoding,
) -> Result<(), SignalError> {
    let path = path.as_ref();
    let bytes = encode_wav_as(buf, encoding)?;
    fs::write(path, bytes).map_err(|source| SignalError::Io {
        path: path.to_path_buf(),
        source,
    })
}
