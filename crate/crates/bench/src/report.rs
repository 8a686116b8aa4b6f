//! Grouped means over `results.csv`, keyed by (algorithm, variant, target SNR).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::pipeline::{read_csv, target_of, write_csv, ResultRow};
use crate::BenchError;

/// Externally computed PESQ scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PesqRow {
    pub file: String,
    pub algorithm: String,
    pub variant: String,
    pub input_snr_db: f64,
    pub pesq: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub algorithm: String,
    pub variant: String,
    pub target_snr_db: f64,
    pub n: usize,
    pub input_snr_db: f64,
    pub output_snr_db: f64,
    pub improvement_db: f64,
    pub segsnr_db: f64,
    pub pesq: Option<f64>,
    pub pesq_n: usize,
}

/// Milli-dB key so targets group and sort numerically.
fn target_key(t: f64) -> i64 {
    (t * 1000.0).round() as i64
}

#[derive(Default)]
struct Acc {
    n: usize,
    input: f64,
    output: f64,
    improvement: f64,
    segsnr: f64,
    pesq: f64,
    pesq_n: usize,
}

/// A PESQ row matches a result when file, algorithm and variant agree and
/// its `input_snr_db` equals either the file's target or the measured input SNR.
fn pesq_for<'a>(
    pesq: &'a BTreeMap<(String, String, String), Vec<PesqRow>>,
    row: &ResultRow,
    target: f64,
) -> Option<&'a PesqRow> {
    pesq.get(&(row.file.clone(), row.algorithm.clone(), row.variant.clone()))?
        .iter()
        .find(|p| p.input_snr_db == target || p.input_snr_db == row.input_snr_db)
}

pub fn summarize(results: &[ResultRow], pesq: &[PesqRow]) -> Result<Vec<ReportRow>, BenchError> {
    if results.is_empty() {
        return Err(BenchError::Empty("results table has no rows".into()));
    }
    let mut by_key: BTreeMap<(String, String, String), Vec<PesqRow>> = BTreeMap::new();
    for p in pesq {
        by_key
            .entry((p.file.clone(), p.algorithm.clone(), p.variant.clone()))
            .or_default()
            .push(p.clone());
    }
    let mut groups: BTreeMap<(String, String, i64), Acc> = BTreeMap::new();
    let mut targets: BTreeMap<i64, f64> = BTreeMap::new();
    for r in results {
        let target = target_of(&r.file)
            .ok_or_else(|| BenchError::Config(format!("file `{}` carries no _snr<k> target", r.file)))?;
        targets.insert(target_key(target), target);
        let acc = groups
            .entry((r.algorithm.clone(), r.variant.clone(), target_key(target)))
            .or_default();
        acc.n += 1;
        acc.input += r.input_snr_db;
        acc.output += r.output_snr_db;
        acc.improvement += r.improvement_db;
        acc.segsnr += r.segsnr_db;
        if let Some(p) = pesq_for(&by_key, r, target) {
            acc.pesq += p.pesq;
            acc.pesq_n += 1;
        }
    }
    Ok(groups
        .into_iter()
        .map(|((algorithm, variant, t), a)| {
            let n = a.n as f64;
            ReportRow {
                algorithm,
                variant,
                target_snr_db: targets[&t],
                n: a.n,
                input_snr_db: a.input / n,
                output_snr_db: a.output / n,
                improvement_db: a.improvement / n,
                segsnr_db: a.segsnr / n,
                pesq: (a.pesq_n > 0).then(|| a.pesq / a.pesq_n as f64),
                pesq_n: a.pesq_n,
            }
        })
        .collect())
}

/// Mean improvement, one line per (algorithm, variant), one column per target.
pub fn pivot(rows: &[ReportRow]) -> String {
    let targets: BTreeSet<i64> = rows.iter().map(|r| target_key(r.target_snr_db)).collect();
    let mut cells: BTreeMap<(&str, &str), BTreeMap<i64, f64>> = BTreeMap::new();
    for r in rows {
        cells
            .entry((&r.algorithm, &r.variant))
            .or_default()
            .insert(target_key(r.target_snr_db), r.improvement_db);
    }
    let width = cells.keys().map(|(a, v)| a.len() + v.len() + 1).max().unwrap_or(0).max(9);
    let mut out = format!("{:<width$}", "algorithm");
    for t in &targets {
        let _ = write!(out, " {:>9}", format!("{}dB", *t as f64 / 1000.0));
    }
    out.push('\n');
    for ((a, v), by_t) in &cells {
        let _ = write!(out, "{:<width$}", format!("{a}/{v}"));
        for t in &targets {
            match by_t.get(t) {
                Some(x) => {
                    let _ = write!(out, " {x:>9.3}");
                }
                None => {
                    let _ = write!(out, " {:>9}", "-");
                }
            }
        }
        out.push('\n');
    }
    out
}

/// Reads `results.csv`, optionally merges PESQ scores, writes `report.csv`
/// and returns the printable pivot.
pub fn cmd_report(cfg: &ExperimentConfig, pesq_csv: Option<&Path>) -> Result<String, BenchError> {
    let path = cfg.results_path();
    if !path.is_file() {
        return Err(BenchError::Config(format!("{} not found; run `eval` first", path.display())));
    }
    let results: Vec<ResultRow> = read_csv(&path)?;
    let pesq: Vec<PesqRow> = match pesq_csv {
        Some(p) => read_csv(p)?,
        None => Vec::new(),
    };
    let rows = summarize(&results, &pesq)?;
    write_csv(&cfg.report_path(), &rows)?;
    Ok(pivot(&rows))
}
