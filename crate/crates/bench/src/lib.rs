//! Batch experiment driver: mix a clean corpus with noise, run the wavelet
//! and adaptive denoisers over their parameter grids, score the outputs and
//! summarize them.
//!
//! All stages share one output directory:
//!
//! ```text
//! <output_dir>/clean/<stem>.wav
//! <output_dir>/noisy/<stem>_snr<k>.wav
//! <output_dir>/denoised/<stem>_snr<k>__<algorithm>__<variant>.{wav,json}
//! <output_dir>/manifest.csv  results.csv  report.csv
//! ```

use std::path::PathBuf;

use thiserror::Error;

pub mod config;
pub mod corpus;
pub mod naming;
pub mod pipeline;
pub mod report;

pub use config::{ExperimentConfig, SEED_ENV};
pub use pipeline::Method;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("CSV error on {0}: {1}")]
    Csv(PathBuf, #[source] csv::Error),
    #[error("{0}")]
    Empty(String),
}

/// Outcome of a batch stage. Failures are per item and never abort the run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunSummary {
    pub produced: usize,
    pub failures: Vec<(String, String)>,
}

impl RunSummary {
    pub fn fail(&mut self, item: impl Into<String>, reason: impl ToString) {
        self.failures.push((item.into(), reason.to_string()));
    }

    /// 0 when everything succeeded, 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        if self.failures.is_empty() {
            0
        } else {
            1
        }
    }
}
