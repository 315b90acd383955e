//! Table files and run manifests.
//!
//! Single-column tables are CSV with the header `value`; example files have
//! the header `source,target`. Join output is `matches.csv` with the header
//! `source,predicted,matched,distance,support,trials`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tabxform::eval::RowOutcome;
use tabxform::join::JoinResult;
use tabxform::model::{validate_cell, CellValue, ExamplePair, ExampleSet};

use crate::failure::{CliResult, Failure};

fn reader(path: &Path) -> CliResult<csv::Reader<fs::File>> {
    let file = fs::File::open(path).map_err(|e| Failure::data(e.to_string()).context(path.display()))?;
    Ok(csv::ReaderBuilder::new().has_headers(true).from_reader(file))
}

fn check_header(rdr: &mut csv::Reader<fs::File>, path: &Path, expected: &[&str]) -> CliResult<()> {
    let headers = rdr.headers().map_err(|e| Failure::from(e).context(path.display()))?;
    let got: Vec<&str> = headers.iter().collect();
    if got != expected {
        return Err(Failure::data(format!("expected header {:?}, found {:?}", expected.join(","), got.join(",")))
            .context(path.display()));
    }
    Ok(())
}

fn cell(text: &str, path: &Path, row: usize) -> CliResult<CellValue> {
    validate_cell(text).map_err(|e| Failure::from(e).context(format!("{} row {row}", path.display())))
}

/// Reads a single-column table.
pub fn read_column(path: &Path) -> CliResult<Vec<CellValue>> {
    let mut rdr = reader(path)?;
    check_header(&mut rdr, path, &["value"])?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Failure::from(e).context(path.display()))?;
        out.push(cell(rec.get(0).unwrap_or(""), path, i + 1)?);
    }
    Ok(out)
}

pub fn write_column(path: &Path, values: &[CellValue]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["value"])?;
    for v in values {
        w.write_record([v.as_str()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_examples(path: &Path) -> CliResult<ExampleSet> {
    let mut rdr = reader(path)?;
    check_header(&mut rdr, path, &["source", "target"])?;
    let mut pairs = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Failure::from(e).context(path.display()))?;
        let source = cell(rec.get(0).unwrap_or(""), path, i + 1)?;
        let target = cell(rec.get(1).unwrap_or(""), path, i + 1)?;
        pairs.push(ExamplePair { source, target });
    }
    ExampleSet::new(pairs).map_err(|e| Failure::from(e).context(path.display()))
}

pub fn write_examples(path: &Path, examples: &ExampleSet) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["source", "target"])?;
    for p in examples.pairs() {
        w.write_record([p.source.as_str(), p.target.as_str()])?;
    }
    w.flush()?;
    Ok(())
}

pub const MATCH_HEADER: [&str; 6] = ["source", "predicted", "matched", "distance", "support", "trials"];

/// One row per match; a source with no match gets one row with empty
/// `matched` and `distance`.
pub fn write_matches(path: &Path, results: &[JoinResult], targets: &[CellValue]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(MATCH_HEADER)?;
    for r in results {
        let predicted = r.predicted.as_ref().map_or("", CellValue::as_str);
        let (support, trials) = (r.support.to_string(), r.trials.to_string());
        if r.matches.is_empty() {
            w.write_record([r.source.as_str(), predicted, "", "", &support, &trials])?;
        }
        for m in &r.matches {
            let distance = m.distance.to_string();
            w.write_record([r.source.as_str(), predicted, targets[m.target_index].as_str(), &distance, &support, &trials])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads `matches.csv` as one outcome per row. An empty file means no row
/// was predicted.
pub fn read_matches(path: &Path) -> CliResult<Vec<RowOutcome>> {
    if fs::metadata(path).map_err(|e| Failure::data(e.to_string()).context(path.display()))?.len() == 0 {
        return Ok(Vec::new());
    }
    let mut rdr = reader(path)?;
    check_header(&mut rdr, path, &MATCH_HEADER)?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Failure::from(e).context(path.display()))?;
        let predicted = rec.get(1).unwrap_or("");
        let matched = rec.get(2).unwrap_or("");
        let has_match = !rec.get(3).unwrap_or("").is_empty();
        out.push(RowOutcome {
            predicted: (!predicted.is_empty()).then(|| cell(predicted, path, i + 1)).transpose()?,
            matched: has_match.then(|| cell(matched, path, i + 1)).transpose()?,
        });
    }
    Ok(out)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Failure::data(e.to_string()).context(path.display()))
}

pub fn create_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path).map_err(|e| Failure::data(e.to_string()).context(path.display()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: PathBuf,
    pub sha256: String,
}

pub fn digest(path: &Path) -> CliResult<InputDigest> {
    let bytes = fs::read(path).map_err(|e| Failure::data(e.to_string()).context(path.display()))?;
    Ok(InputDigest { path: path.to_path_buf(), sha256: hex::encode(Sha256::digest(&bytes)) })
}

/// Everything needed to re-run a command: written as `manifest.json` in
/// every output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Arguments with the seed made explicit; `tabxform replay` re-parses
    /// these.
    pub argv: Vec<String>,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub version: String,
    pub inputs: Vec<InputDigest>,
    pub started_at: String,
    pub finished_at: String,
}

pub fn read_manifest(path: &Path) -> CliResult<RunManifest> {
    let text = fs::read_to_string(path).map_err(|e| Failure::data(e.to_string()).context(path.display()))?;
    Ok(serde_json::from_str(&text)?)
}

/// Writes lines to `path`, each followed by `\n`.
pub fn write_lines<I: IntoIterator<Item = CliResult<String>>>(path: &Path, lines: I) -> CliResult<usize> {
    let file = fs::File::create(path).map_err(|e| Failure::data(e.to_string()).context(path.display()))?;
    let mut w = std::io::BufWriter::new(file);
    let mut n = 0;
    for line in lines {
        w.write_all(line?.as_bytes())?;
        w.write_all(b"\n")?;
        n += 1;
    }
    w.flush()?;
    Ok(n)
}
