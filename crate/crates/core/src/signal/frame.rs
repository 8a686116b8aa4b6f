use crate::scalar::Real;

use super::{AudioBuffer, SignalError};

/// Fixed-length analysis windows over a buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence<T> {
    pub frame_len: usize,
    pub hop: usize,
    pub frames: Vec<Vec<T>>,
    pub source_rate: u32,
    /// Zero samples appended to the final frame (0 when it is complete).
    pub final_padding: usize,
}

impl<T> FrameSequence<T> {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn start_of(&self, index: usize) -> usize {
        index * self.hop
    }
}

pub(crate) fn frame_count(len: usize, frame_len: usize, hop: usize) -> usize {
    if len == 0 {
        0
    } else {
        len.saturating_sub(frame_len).div_ceil(hop) + 1
    }
}

/// Splits `buf` into frames of `frame_len` samples starting every `hop` samples.
/// The last frame is zero-padded when the signal does not fill it.
pub fn frame_signal<T: Real>(
    buf: &AudioBuffer<T>,
    frame_len: usize,
    hop: usize,
) -> Result<FrameSequence<T>, SignalError> {
    if frame_len == 0 || hop == 0 || hop > frame_len {
        return Err(SignalError::InvalidFraming { frame_len, hop });
    }
    let x = buf.samples();
    let count = frame_count(x.len(), frame_len, hop);
    let mut final_padding = 0;
    let frames = (0..count)
        .map(|k| {
            let start = k * hop;
            let end = (start + frame_len).min(x.len());
            let mut frame = x[start..end].to_vec();
            if frame.len() < frame_len {
                final_padding = frame_len - frame.len();
                frame.resize(frame_len, T::zero());
            }
            frame
        })
        .collect();
    Ok(FrameSequence {
        frame_len,
        hop,
        frames,
        source_rate: buf.sample_rate(),
        final_padding,
    })
}
