//! Shared value types: cells, example pairs and sets, contexts, table pairs.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Markers reserved by the prompt format.
pub const MARKERS: [&str; 4] = ["<sos>", "<eos>", "<tr>", "<eoe>"];

/// The text of one table cell.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CellValue(String);

impl CellValue {
    pub fn new(text: impl Into<String>) -> Self {
        CellValue(text.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn into_string(self) -> String {
        self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Length in Unicode scalar values.
    pub fn char_len(&self) -> usize {
        self.0.chars().count()
    }

    /// Checks the marker invariant on an existing cell.
    pub fn validate(&self) -> Result<()> {
        match find_marker(&self.0) {
            Some((marker, position)) => Err(Error::MarkerCollision { marker, position }),
            None => Ok(()),
        }
    }
}

impl fmt::Display for CellValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for CellValue {
    fn from(s: &str) -> Self {
        CellValue(s.to_owned())
    }
}

impl From<String> for CellValue {
    fn from(s: String) -> Self {
        CellValue(s)
    }
}

impl AsRef<str> for CellValue {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

/// Earliest reserved marker in `text` and its character offset.
fn find_marker(text: &str) -> Option<(&'static str, usize)> {
    MARKERS
        .iter()
        .filter_map(|m| text.find(m).map(|byte| (*m, byte)))
        .min_by_key(|&(_, byte)| byte)
        .map(|(m, byte)| (m, text[..byte].chars().count()))
}

/// Accepts `value` as a cell if it contains no reserved marker.
pub fn validate_cell(value: &str) -> Result<CellValue> {
    let cell = CellValue::from(value);
    cell.validate()?;
    Ok(cell)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ExamplePair {
    pub source: CellValue,
    pub target: CellValue,
}

impl ExamplePair {
    pub fn new(source: impl Into<CellValue>, target: impl Into<CellValue>) -> Self {
        ExamplePair { source: source.into(), target: target.into() }
    }
}

/// The user-provided examples. Non-empty, no repeated `(source, target)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExampleSet {
    pairs: Vec<ExamplePair>,
}

impl ExampleSet {
    pub fn new(pairs: Vec<ExamplePair>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::EmptyExampleSet);
        }
        let mut seen = HashSet::with_capacity(pairs.len());
        for p in &pairs {
            if !seen.insert(p) {
                return Err(Error::DuplicatePair {
                    source_text: p.source.to_string(),
                    target: p.target.to_string(),
                });
            }
        }
        Ok(ExampleSet { pairs })
    }

    pub fn pairs(&self) -> &[ExamplePair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn into_pairs(self) -> Vec<ExamplePair> {
        self.pairs
    }
}

/// A k-subset of the examples used as prompt context, kept in canonical
/// order (ascending by source, then target).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Context {
    examples: Vec<ExamplePair>,
}

impl Context {
    pub fn new(mut examples: Vec<ExamplePair>) -> Result<Self> {
        examples.sort();
        if examples.windows(2).any(|w| w[0] == w[1]) {
            let p = examples.windows(2).find(|w| w[0] == w[1]).unwrap()[0].clone();
            return Err(Error::DuplicatePair {
                source_text: p.source.into_string(),
                target: p.target.into_string(),
            });
        }
        if examples.is_empty() {
            return Err(Error::EmptyExampleSet);
        }
        Ok(Context { examples })
    }

    pub fn examples(&self) -> &[ExamplePair] {
        &self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }
}

/// A source column and a target column. When `aligned`, row `i` of the
/// source corresponds to row `i` of the target.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TablePair {
    pub source_rows: Vec<CellValue>,
    pub target_rows: Vec<CellValue>,
    pub aligned: bool,
}

impl TablePair {
    pub fn aligned(source_rows: Vec<CellValue>, target_rows: Vec<CellValue>) -> Result<Self> {
        if source_rows.len() != target_rows.len() {
            return Err(Error::NotAligned);
        }
        Ok(TablePair { source_rows, target_rows, aligned: true })
    }

    pub fn unaligned(source_rows: Vec<CellValue>, target_rows: Vec<CellValue>) -> Self {
        TablePair { source_rows, target_rows, aligned: false }
    }

    pub fn len(&self) -> usize {
        self.source_rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.source_rows.is_empty()
    }
}

/// Splits an aligned table into the example half (the first `ceil(n/2)`
/// rows) and the held-out test half.
pub fn split_examples(table: &TablePair) -> Result<(ExampleSet, TablePair)> {
    if !table.aligned || table.source_rows.len() != table.target_rows.len() {
        return Err(Error::NotAligned);
    }
    let n = table.len();
    if n < 2 {
        return Err(Error::TooFewRows(n));
    }
    let cut = n.div_ceil(2);
    let examples = table.source_rows[..cut]
        .iter()
        .zip(&table.target_rows[..cut])
        .map(|(s, t)| ExamplePair::new(s.clone(), t.clone()))
        .collect();
    let test = TablePair {
        source_rows: table.source_rows[cut..].to_vec(),
        target_rows: table.target_rows[cut..].to_vec(),
        aligned: true,
    };
    Ok((ExampleSet::new(examples)?, test))
}
