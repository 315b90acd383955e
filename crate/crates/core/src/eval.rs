//! Precision, recall, F1 and edit-distance metrics for join outputs.

use serde::Serialize;

use crate::join::{edit_distance, JoinResult};
use crate::model::CellValue;
use crate::{Error, Result};

/// What the pipeline produced for one source row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowOutcome {
    pub predicted: Option<CellValue>,
    /// Text of the matched target row, if any.
    pub matched: Option<CellValue>,
}

impl RowOutcome {
    /// Resolves the first match of a join result against the target column.
    pub fn from_join(result: &JoinResult, targets: &[CellValue]) -> Self {
        RowOutcome {
            predicted: result.predicted.clone(),
            matched: result.matches.first().and_then(|m| targets.get(m.target_index)).cloned(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct MetricsReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub aed: f64,
    pub aned: f64,
    pub rows: usize,
    pub predicted_rows: usize,
    pub correct_rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetReport {
    pub tables: Vec<MetricsReport>,
    pub mean: MetricsReport,
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

pub fn score_table(rows: &[RowOutcome], truth: &[CellValue]) -> Result<MetricsReport> {
    if rows.len() != truth.len() {
        return Err(Error::LengthMismatch { predicted: rows.len(), truth: truth.len() });
    }
    let n = rows.len();
    let mut predicted_rows = 0;
    let mut correct_rows = 0;
    let mut aed = 0.0;
    let mut aned = 0.0;
    for (row, t) in rows.iter().zip(truth) {
        if let Some(m) = &row.matched {
            predicted_rows += 1;
            if m == t {
                correct_rows += 1;
            }
        }
        let pred = row.predicted.as_ref().map_or("", CellValue::as_str);
        let d = edit_distance(pred, t.as_str()) as f64;
        aed += d;
        aned += (d / t.char_len().max(1) as f64).min(1.0);
    }
    let precision = if predicted_rows == 0 { 0.0 } else { correct_rows as f64 / predicted_rows as f64 };
    let recall = if n == 0 { 0.0 } else { correct_rows as f64 / n as f64 };
    let denom = n.max(1) as f64;
    Ok(MetricsReport {
        precision,
        recall,
        f1: f1(precision, recall),
        aed: aed / denom,
        aned: aned / denom,
        rows: n,
        predicted_rows,
        correct_rows,
    })
}

/// Scores join results whose match indices refer to `targets`.
pub fn score_join(results: &[JoinResult], targets: &[CellValue], truth: &[CellValue]) -> Result<MetricsReport> {
    let rows: Vec<RowOutcome> = results.iter().map(|r| RowOutcome::from_join(r, targets)).collect();
    score_table(&rows, truth)
}

/// Unweighted mean of per-table reports. Counts in the mean are rounded
/// means too.
pub fn score_dataset(tables: Vec<MetricsReport>) -> Result<DatasetReport> {
    if tables.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = tables.len() as f64;
    let mean_of = |f: &dyn Fn(&MetricsReport) -> f64| tables.iter().map(f).sum::<f64>() / n;
    let count = |f: &dyn Fn(&MetricsReport) -> usize| (tables.iter().map(f).sum::<usize>() as f64 / n).round() as usize;
    let mean = MetricsReport {
        precision: mean_of(&|r| r.precision),
        recall: mean_of(&|r| r.recall),
        f1: mean_of(&|r| r.f1),
        aed: mean_of(&|r| r.aed),
        aned: mean_of(&|r| r.aned),
        rows: count(&|r| r.rows),
        predicted_rows: count(&|r| r.predicted_rows),
        correct_rows: count(&|r| r.correct_rows),
    };
    Ok(DatasetReport { tables, mean })
}
