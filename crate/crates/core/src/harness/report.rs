//! Report persistence: per-run CSV rows, multi-seed aggregates and JSON.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::train::TrainReport;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "csv" => Some(Self::Csv),
            "json" => Some(Self::Json),
            _ => None,
        }
    }
}

pub const CSV_HEADER: [&str; 9] =
    ["method", "dataset", "selection_mode", "alpha", "beta", "seed", "test_accuracy", "val_accuracy", "wall_seconds"];

/// Sample mean and sample standard deviation (0 for a single value).
pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    (mean, (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
}

/// Accuracies in percent as `"79.8 ± 0.9"`.
pub fn format_mean_sd(fractions: &[f64]) -> String {
    let (m, s) = mean_sd(fractions);
    format!("{:.1} ± {:.1}", 100.0 * m, 100.0 * s)
}

/// One row per report, then one aggregate row per `(method, dataset, selection, α, β)`
/// group with at least two seeds (seed column `mean±sd`).
pub fn csv_rows(reports: &[TrainReport]) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    let mut groups: Vec<((String, String, String, u64, u64), Vec<&TrainReport>)> = Vec::new();
    for r in reports {
        let c = &r.config;
        rows.push(vec![
            r.method.clone(),
            c.dataset.name().into(),
            c.selection.name().into(),
            r.alpha().to_string(),
            r.beta().to_string(),
            c.seed.to_string(),
            r.final_test_accuracy.to_string(),
            r.val_accuracy.to_string(),
            r.wall_seconds.map(|w| w.to_string()).unwrap_or_default(),
        ]);
        let key = (
            r.method.clone(),
            c.dataset.name().to_string(),
            c.selection.name().to_string(),
            r.alpha().to_bits(),
            r.beta().to_bits(),
        );
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, members)) => members.push(r),
            None => groups.push((key, vec![r])),
        }
    }
    for ((method, dataset, selection, _, _), members) in groups {
        if members.len() < 2 {
            continue;
        }
        let test: Vec<f64> = members.iter().map(|r| r.final_test_accuracy).collect();
        let val: Vec<f64> = members.iter().map(|r| r.val_accuracy).collect();
        let walls: Option<Vec<f64>> = members.iter().map(|r| r.wall_seconds).collect();
        rows.push(vec![
            method,
            dataset,
            selection,
            members[0].alpha().to_string(),
            members[0].beta().to_string(),
            "mean±sd".into(),
            format_mean_sd(&test),
            format_mean_sd(&val),
            walls.map(|w| format!("{:.1}", w.iter().sum::<f64>())).unwrap_or_default(),
        ]);
    }
    rows
}

pub fn render_csv(reports: &[TrainReport]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let wrap = |e: csv::Error| Error::InvalidArgument(e.to_string());
    w.write_record(CSV_HEADER).map_err(wrap)?;
    for row in csv_rows(reports) {
        w.write_record(&row).map_err(wrap)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn render_json(reports: &[TrainReport]) -> Result<String> {
    serde_json::to_string_pretty(reports).map_err(|e| Error::InvalidArgument(e.to_string()))
}

/// Write `reports` to `path` in `format`.
pub fn emit_report(reports: &[TrainReport], path: impl AsRef<Path>, format: Format) -> Result<()> {
    let path = path.as_ref();
    let text = match format {
        Format::Csv => render_csv(reports)?,
        Format::Json => render_json(reports)? + "\n",
    };
    std::fs::write(path, text).map_err(Error::io(path))
}

/// Read reports from a JSON file holding one report or an array of them.
pub fn read_reports(path: impl AsRef<Path>) -> Result<Vec<TrainReport>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
    let bad = |e: serde_json::Error| Error::Parse { path: path.to_path_buf(), msg: e.to_string() };
    if text.trim_start().starts_with('[') {
        serde_json::from_str(&text).map_err(bad)
    } else {
        Ok(vec![serde_json::from_str(&text).map_err(bad)?])
    }
}
