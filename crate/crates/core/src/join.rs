//! Matching predicted targets against a target column by edit distance.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregate::{aggregate, AggregatedPrediction, TrialSet};
use crate::model::{CellValue, ExampleSet};
use crate::predictor::{PredictorPool, PredictorSpec, TrialDiagnostics};
use crate::rng::Seed;
use crate::{Error, Result};

/// Unit-cost Levenshtein distance over Unicode scalar values.
pub fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    chars_distance(&a, &b)
}

fn chars_distance(a: &[char], b: &[char]) -> usize {
    let prefix = a.iter().zip(b).take_while(|(x, y)| x == y).count();
    let (a, b) = (&a[prefix..], &b[prefix..]);
    let suffix = a.iter().rev().zip(b.iter().rev()).take_while(|(x, y)| x == y).count();
    let (a, b) = (&a[..a.len() - suffix], &b[..b.len() - suffix]);
    let (short, long) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    if short.is_empty() {
        return long.len();
    }
    let mut row: Vec<usize> = (0..=short.len()).collect();
    for (i, &lc) in long.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, &sc) in short.iter().enumerate() {
            let above = row[j + 1];
            row[j + 1] = if lc == sc { diag } else { 1 + diag.min(above).min(row[j]) };
            diag = above;
        }
    }
    row[short.len()]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Match {
    pub target_index: usize,
    pub distance: usize,
}

/// The closest target to `pred`. Equidistant targets are ordered by text,
/// then by index.
pub fn best_match(pred: &str, targets: &[CellValue]) -> Result<Match> {
    let pred: Vec<char> = pred.chars().collect();
    let mut best: Option<(usize, usize)> = None; // (distance, index)
    for (i, t) in targets.iter().enumerate() {
        let len = t.char_len();
        let floor = len.abs_diff(pred.len());
        if let Some((d, _)) = best {
            // The length gap bounds the distance from below.
            if floor > d {
                continue;
            }
        }
        let tc: Vec<char> = t.as_str().chars().collect();
        let d = chars_distance(&pred, &tc);
        let better = match best {
            None => true,
            Some((bd, bi)) => d < bd || (d == bd && t.as_str() < targets[bi].as_str()),
        };
        if better {
            best = Some((d, i));
        }
    }
    best.map(|(distance, target_index)| Match { target_index, distance })
        .ok_or(Error::EmptyTargetTable)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JoinMode {
    #[default]
    OneToOne,
    /// Every target whose distance lies in `[min_distance, max_distance]`.
    Bounded,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct JoinConfig {
    pub mode: JoinMode,
    pub min_distance: Option<usize>,
    pub max_distance: Option<usize>,
}

impl JoinConfig {
    pub fn bounded(min_distance: Option<usize>, max_distance: Option<usize>) -> Self {
        JoinConfig { mode: JoinMode::Bounded, min_distance, max_distance }
    }

    pub fn validate(&self) -> Result<()> {
        if let (Some(lo), Some(hi)) = (self.min_distance, self.max_distance) {
            if lo > hi {
                return Err(Error::config(format!("min distance {lo} exceeds max distance {hi}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct JoinResult {
    pub source: CellValue,
    pub predicted: Option<CellValue>,
    pub matches: Vec<Match>,
    pub mode: JoinMode,
    pub support: usize,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JoinOutput {
    /// One result per source row, in source order.
    pub results: Vec<JoinResult>,
    pub diagnostics: TrialDiagnostics,
}

/// Matches for an already-aggregated prediction.
pub fn match_prediction(pred: &AggregatedPrediction, targets: &[CellValue], cfg: &JoinConfig) -> Result<JoinResult> {
    if targets.is_empty() {
        return Err(Error::EmptyTargetTable);
    }
    let matches = match &pred.target {
        None => Vec::new(),
        Some(p) => match cfg.mode {
            JoinMode::OneToOne => vec![best_match(p.as_str(), targets)?],
            JoinMode::Bounded => bounded_matches(p.as_str(), targets, cfg),
        },
    };
    Ok(JoinResult {
        source: pred.source.clone(),
        predicted: pred.target.clone(),
        matches,
        mode: cfg.mode,
        support: pred.support,
        trials: pred.trials,
    })
}

fn bounded_matches(pred: &str, targets: &[CellValue], cfg: &JoinConfig) -> Vec<Match> {
    let lo = cfg.min_distance.unwrap_or(0);
    let hi = cfg.max_distance.unwrap_or(usize::MAX);
    let pc: Vec<char> = pred.chars().collect();
    let mut out: Vec<Match> = targets
        .iter()
        .enumerate()
        .filter(|(_, t)| t.char_len().abs_diff(pc.len()) <= hi)
        .map(|(i, t)| {
            let tc: Vec<char> = t.as_str().chars().collect();
            Match { target_index: i, distance: chars_distance(&pc, &tc) }
        })
        .filter(|m| (lo..=hi).contains(&m.distance))
        .collect();
    out.sort_by(|a, b| {
        (a.distance, targets[a.target_index].as_str(), a.target_index)
            .cmp(&(b.distance, targets[b.target_index].as_str(), b.target_index))
    });
    out
}

/// Predicts every source row from `examples` and joins it to `targets`.
///
/// Each row draws `n_trials` contexts of size `k` per predictor, using a
/// generator derived from `seed` and the row index, so results do not
/// depend on scheduling.
#[allow(clippy::too_many_arguments)]
pub fn join(
    sources: &[CellValue],
    targets: &[CellValue],
    examples: &ExampleSet,
    specs: &[PredictorSpec],
    n_trials: usize,
    k: usize,
    cfg: &JoinConfig,
    seed: Seed,
) -> Result<JoinOutput> {
    let pool = PredictorPool::new(specs)?;
    join_with_pool(sources, targets, examples, &pool, n_trials, k, cfg, seed)
}

#[allow(clippy::too_many_arguments)]
pub fn join_with_pool(
    sources: &[CellValue],
    targets: &[CellValue],
    examples: &ExampleSet,
    pool: &PredictorPool,
    n_trials: usize,
    k: usize,
    cfg: &JoinConfig,
    seed: Seed,
) -> Result<JoinOutput> {
    cfg.validate()?;
    if targets.is_empty() {
        return Err(Error::EmptyTargetTable);
    }
    if k == 0 {
        return Err(Error::config("context size must be at least 1"));
    }
    if examples.len() < k {
        return Err(Error::InsufficientExamples { needed: k, available: examples.len() });
    }
    let rows: Vec<(JoinResult, TrialDiagnostics)> = sources
        .par_iter()
        .enumerate()
        .map(|(i, source)| {
            let mut rng = seed.child(&[i as u64]).rng();
            let (trials, diag) = pool.run_trials(examples, source, n_trials, k, &mut rng)?;
            let set = TrialSet { source: source.clone(), outputs: trials.into_iter().map(|t| t.output).collect() };
            Ok((match_prediction(&aggregate(&set), targets, cfg)?, diag))
        })
        .collect::<Result<_>>()?;
    let mut diagnostics = TrialDiagnostics::default();
    let results = rows
        .into_iter()
        .map(|(r, d)| {
            diagnostics.merge(&d);
            r
        })
        .collect();
    Ok(JoinOutput { results, diagnostics })
}
