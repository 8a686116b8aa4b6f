use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

/// A rateable clip, identified by its file name inside the clip directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Clip {
    pub file: String,
    pub algorithm: String,
    pub variant: String,
}

/// Splits `<stem>__<algorithm>__<variant>.wav`.
pub fn parse_clip_name(file: &str) -> Option<Clip> {
    let stem = file.strip_suffix(".wav")?;
    let mut parts = stem.rsplitn(3, "__");
    let variant = parts.next()?;
    let algorithm = parts.next()?;
    let source = parts.next()?;
    if [source, algorithm, variant].iter().any(|p| p.is_empty()) {
        return None;
    }
    Some(Clip {
        file: file.to_string(),
        algorithm: algorithm.to_string(),
        variant: variant.to_string(),
    })
}

#[derive(Debug, Clone)]
pub struct ClipPool {
    dir: PathBuf,
    clips: Vec<Clip>,
}

impl ClipPool {
    /// Collects every conforming WAV in `dir`, sorted by file name. Other
    /// files are skipped.
    pub fn scan(dir: impl AsRef<Path>) -> std::io::Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        let mut clips = Vec::new();
        for entry in std::fs::read_dir(&dir)? {
            let entry = entry?;
            if !entry.file_type()?.is_file() {
                continue;
            }
            let name = entry.file_name();
            let Some(name) = name.to_str() else { continue };
            match parse_clip_name(name) {
                Some(clip) => clips.push(clip),
                None => tracing::debug!(file = name, "skipping file without <stem>__<algorithm>__<variant>.wav name"),
            }
        }
        clips.sort_by(|a, b| a.file.cmp(&b.file));
        Ok(Self { dir, clips })
    }

    pub fn clips(&self) -> &[Clip] {
        &self.clips
    }

    pub fn is_empty(&self) -> bool {
        self.clips.is_empty()
    }

    pub fn path_of(&self, file: &str) -> PathBuf {
        self.dir.join(file)
    }
}
