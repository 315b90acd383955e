//! Context decomposition and the marker-delimited prompt format.
//!
//! A prompt for a `k`-example context looks like
//! `<sos>s1<tr>t1<eoe>s2<tr>t2<eoe>query<tr><eos>` and the matching label is
//! `<sos>target<eos>`. No whitespace is inserted anywhere.

use std::collections::HashSet;
use std::fmt;

use serde::Serialize;

use crate::model::{CellValue, Context, ExamplePair, ExampleSet};
use crate::rng::{self, Rng};
use crate::{Error, Result};

pub const SOS: &str = "<sos>";
pub const EOS: &str = "<eos>";
pub const TR: &str = "<tr>";
pub const EOE: &str = "<eoe>";

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
#[serde(transparent)]
pub struct Prompt(String);

impl Prompt {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn into_string(self) -> String {
        self.0
    }
}

impl fmt::Display for Prompt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
#[serde(transparent)]
pub struct LabelText(String);

impl LabelText {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for LabelText {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    acc
}

fn sorted_pairs(examples: &ExampleSet) -> Vec<ExamplePair> {
    let mut pairs = examples.pairs().to_vec();
    pairs.sort();
    pairs
}

fn context_of(pairs: &[ExamplePair], idx: &[usize]) -> Context {
    Context::new(idx.iter().map(|&i| pairs[i].clone()).collect())
        .expect("indices are distinct and example pairs are unique")
}

fn check_k(examples: &ExampleSet, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::config("context size must be at least 1"));
    }
    if examples.len() < k {
        return Err(Error::InsufficientExamples { needed: k, available: examples.len() });
    }
    Ok(())
}

/// All `k`-subsets of the examples, each in canonical order, listed
/// lexicographically by their members.
pub fn enumerate_contexts(examples: &ExampleSet, k: usize) -> Result<Vec<Context>> {
    check_k(examples, k)?;
    let pairs = sorted_pairs(examples);
    let n = pairs.len();
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(context_of(&pairs, &idx));
        // advance to the next combination in lexicographic order
        let Some(i) = (0..k).rev().find(|&i| idx[i] < n - k + i) else {
            break;
        };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
    Ok(out)
}

/// The combination with lexicographic rank `rank` among `k`-subsets of `0..n`.
pub(crate) fn unrank_combination(n: usize, k: usize, mut rank: u128) -> Vec<usize> {
    let mut out = Vec::with_capacity(k);
    let mut next = 0;
    for slot in 0..k {
        let remaining = k - slot;
        let mut v = next;
        loop {
            let count = binomial(n - v - 1, remaining - 1);
            if rank < count {
                break;
            }
            rank -= count;
            v += 1;
        }
        out.push(v);
        next = v + 1;
    }
    out
}

/// Above this many combinations, distinct subsets are found by rejection
/// instead of by ranking.
const RANK_LIMIT: u128 = 1 << 48;

/// `n` contexts drawn uniformly. Distinct while enough distinct contexts
/// exist; once every context has been used, the remainder is drawn with
/// replacement.
pub fn sample_contexts(examples: &ExampleSet, k: usize, n: usize, rng: &mut Rng) -> Result<Vec<Context>> {
    check_k(examples, k)?;
    if n == 0 {
        return Err(Error::config("number of contexts must be at least 1"));
    }
    let pairs = sorted_pairs(examples);
    let m = pairs.len();
    let total = binomial(m, k);
    if total < n as u128 {
        let mut all = enumerate_contexts(examples, k)?;
        let distinct = all.len();
        for _ in distinct..n {
            let pick = all[rng::index(rng, distinct)].clone();
            all.push(pick);
        }
        return Ok(all);
    }
    if total <= RANK_LIMIT {
        return Ok(rng::sample_distinct(rng, total as u64, n)
            .into_iter()
            .map(|r| context_of(&pairs, &unrank_combination(m, k, r as u128)))
            .collect());
    }
    let mut seen = HashSet::with_capacity(n);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let mut idx: Vec<usize> =
            rng::sample_distinct(rng, m as u64, k).into_iter().map(|i| i as usize).collect();
        idx.sort_unstable();
        if seen.insert(idx.clone()) {
            out.push(context_of(&pairs, &idx));
        }
    }
    Ok(out)
}

/// Renders the prompt for `query` under `context`.
pub fn serialize(context: &Context, query: &CellValue) -> Result<Prompt> {
    let mut out = String::from(SOS);
    for ex in context.examples() {
        ex.source.validate()?;
        ex.target.validate()?;
        out.push_str(ex.source.as_str());
        out.push_str(TR);
        out.push_str(ex.target.as_str());
        out.push_str(EOE);
    }
    query.validate()?;
    out.push_str(query.as_str());
    out.push_str(TR);
    out.push_str(EOS);
    Ok(Prompt(out))
}

pub fn serialize_label(target: &CellValue) -> Result<LabelText> {
    target.validate()?;
    Ok(LabelText(format!("{SOS}{target}{EOS}")))
}

/// Reads a predictor's raw output: drops one leading `<sos>`, cuts at the
/// first `<eos>`. Empty results mean no prediction.
pub fn parse_output(raw: &str) -> Option<CellValue> {
    let body = raw.strip_prefix(SOS).unwrap_or(raw);
    let body = match body.find(EOS) {
        Some(i) => &body[..i],
        None => body,
    };
    (!body.is_empty()).then(|| CellValue::from(body))
}

/// Per-row length budget when `k` examples plus the query share a model
/// input of `token_limit` tokens: `floor(token_limit / (2k + 1))`.
pub fn row_length_bound(k: usize, token_limit: usize) -> usize {
    token_limit / (2 * k + 1)
}

/// Cells of a context/query that are longer than [`row_length_bound`].
/// Advisory only; nothing is truncated.
pub fn lint_lengths(context: &Context, query: &CellValue, token_limit: usize) -> Vec<String> {
    let bound = row_length_bound(context.len(), token_limit);
    let cells = context
        .examples()
        .iter()
        .flat_map(|e| [&e.source, &e.target])
        .chain(std::iter::once(query));
    cells
        .filter(|c| c.as_str().len() > bound)
        .map(|c| format!("cell of {} bytes exceeds the per-row bound {bound}", c.as_str().len()))
        .collect()
}
