//! Seeded generators for training corpora, benchmark tables, and noisy
//! example sets.
//!
//! Everything here is deterministic in the seed: item `i` (a grouping, a
//! table) draws from `seed.child(&[i])`, so output does not depend on the
//! order items are produced in.

use std::collections::HashSet;
use std::fmt;
use std::ops::RangeInclusive;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::grammar::{random_source, random_transformation, GrammarConfig, Transformation, Unit, UnitChain, DEFAULT_ALPHABET};
use crate::model::{CellValue, Context, ExamplePair, ExampleSet, TablePair};
use crate::rng::{self, sample_distinct, Rng, Seed};
use crate::serializer::{binomial, serialize, serialize_label, unrank_combination};
use crate::{Error, Result};

/// Largest allowed random text length.
pub const MAX_LEN: usize = 10_000;

fn check_len(len: &RangeInclusive<usize>) -> Result<()> {
    if *len.start() == 0 || len.start() > len.end() || *len.end() > MAX_LEN {
        return Err(Error::config(format!(
            "length range {}..={} must satisfy 1 <= min <= max <= {MAX_LEN}",
            len.start(),
            len.end()
        )));
    }
    Ok(())
}

/// `count` distinct random texts.
fn distinct_sources(rng: &mut Rng, count: usize, len: &RangeInclusive<usize>, alphabet: &[char]) -> Result<Vec<CellValue>> {
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0usize;
    while out.len() < count {
        attempts += 1;
        if attempts > 1000 * count.max(1) {
            return Err(Error::config("cannot draw enough distinct sources; widen the length range or alphabet"));
        }
        let s = random_source(rng, len.clone(), alphabet);
        if seen.insert(s.clone()) {
            out.push(s);
        }
    }
    Ok(out)
}

/// Pairs all produced by one transformation.
#[derive(Debug, Clone, PartialEq)]
pub struct Grouping {
    pub transformation: Transformation,
    pub pairs: Vec<ExamplePair>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub groupings: usize,
    pub pairs_per_grouping: usize,
    pub subsets_per_grouping: usize,
    pub len_min: usize,
    pub len_max: usize,
    pub train_fraction: f64,
    pub alphabet: String,
    pub grammar: GrammarConfig,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            groupings: 2000,
            pairs_per_grouping: 10,
            subsets_per_grouping: 10,
            len_min: 8,
            len_max: 35,
            train_fraction: 0.8,
            alphabet: DEFAULT_ALPHABET.to_string(),
            grammar: GrammarConfig::default(),
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.pairs_per_grouping < 3 {
            return Err(Error::config("each grouping needs at least 3 pairs"));
        }
        if self.subsets_per_grouping == 0 {
            return Err(Error::config("subsets per grouping must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.train_fraction) {
            return Err(Error::config("train fraction must lie in [0, 1]"));
        }
        if self.alphabet.is_empty() {
            return Err(Error::config("alphabet is empty"));
        }
        check_len(&(self.len_min..=self.len_max))?;
        self.grammar.validate()
    }

    /// Groupings with index below this are flagged as training data.
    pub fn train_groupings(&self) -> usize {
        (self.train_fraction * self.groupings as f64).ceil() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
}

/// One line of the training corpus; field order is the file's key order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSample {
    pub prompt: String,
    pub label: String,
    pub split: Split,
    pub grouping_id: usize,
    /// Canonical text form of the generating program.
    pub transformation: String,
}

pub fn gen_grouping(cfg: &TrainingConfig, rng: &mut Rng) -> Result<Grouping> {
    let alphabet: Vec<char> = cfg.alphabet.chars().collect();
    let transformation = random_transformation(rng, &cfg.grammar, 1..=cfg.grammar.max_chains);
    let sources = distinct_sources(rng, cfg.pairs_per_grouping, &(cfg.len_min..=cfg.len_max), &alphabet)?;
    let pairs = sources
        .into_iter()
        .map(|s| {
            let t = CellValue::from(transformation.apply(s.as_str()));
            ExamplePair { source: s, target: t }
        })
        .collect();
    Ok(Grouping { transformation, pairs })
}

/// Samples for grouping `g`: 3-subsets of its pairs, the last pair's
/// target masked and used as the label.
pub fn grouping_samples(cfg: &TrainingConfig, seed: Seed, g: usize) -> Result<Vec<TrainingSample>> {
    let mut rng = seed.child(&[g as u64]).rng();
    let grouping = gen_grouping(cfg, &mut rng)?;
    let p = grouping.pairs.len();
    let total = binomial(p, 3);
    let want = cfg.subsets_per_grouping;
    let ranks: Vec<u128> = if total >= want as u128 {
        sample_distinct(&mut rng, total as u64, want).into_iter().map(u128::from).collect()
    } else {
        let mut r: Vec<u128> = (0..total).collect();
        while r.len() < want {
            r.push(rng::index(&mut rng, total as usize) as u128);
        }
        r
    };
    let split = if g < cfg.train_groupings() { Split::Train } else { Split::Validation };
    let program = grouping.transformation.to_string();
    ranks
        .into_iter()
        .map(|rank| {
            let idx = unrank_combination(p, 3, rank);
            let context = Context::new(vec![grouping.pairs[idx[0]].clone(), grouping.pairs[idx[1]].clone()])?;
            let masked = &grouping.pairs[idx[2]];
            Ok(TrainingSample {
                prompt: serialize(&context, &masked.source)?.into_string(),
                label: serialize_label(&masked.target)?.as_str().to_string(),
                split,
                grouping_id: g,
                transformation: program.clone(),
            })
        })
        .collect()
}

/// The full corpus, grouping by grouping.
pub fn gen_training_corpus(cfg: &TrainingConfig, seed: Seed) -> Result<impl Iterator<Item = Result<TrainingSample>> + '_> {
    cfg.validate()?;
    Ok((0..cfg.groupings).flat_map(move |g| match grouping_samples(cfg, seed, g) {
        Ok(v) => v.into_iter().map(Ok).collect::<Vec<_>>(),
        Err(e) => vec![Err(e)],
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BenchmarkKind {
    Syn,
    SynRp,
    SynSt,
    SynRv,
}

impl BenchmarkKind {
    pub const ALL: [BenchmarkKind; 4] = [BenchmarkKind::Syn, BenchmarkKind::SynRp, BenchmarkKind::SynSt, BenchmarkKind::SynRv];

    pub fn name(self) -> &'static str {
        match self {
            BenchmarkKind::Syn => "syn",
            BenchmarkKind::SynRp => "syn-rp",
            BenchmarkKind::SynSt => "syn-st",
            BenchmarkKind::SynRv => "syn-rv",
        }
    }

    /// Default (tables, rows).
    pub fn default_shape(self) -> (usize, usize) {
        match self {
            BenchmarkKind::Syn => (10, 100),
            _ => (5, 50),
        }
    }
}

impl fmt::Display for BenchmarkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BenchmarkKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BenchmarkKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::config(format!("unknown benchmark kind {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSpec {
    pub kind: BenchmarkKind,
    pub tables: usize,
    pub rows: usize,
    pub len_min: usize,
    pub len_max: usize,
    pub seed: Seed,
    pub alphabet: String,
}

impl BenchmarkSpec {
    pub fn new(kind: BenchmarkKind, seed: Seed) -> Self {
        let (tables, rows) = kind.default_shape();
        BenchmarkSpec { kind, tables, rows, len_min: 8, len_max: 35, seed, alphabet: DEFAULT_ALPHABET.to_string() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.tables == 0 {
            return Err(Error::config("a benchmark needs at least one table"));
        }
        if self.rows < 2 {
            return Err(Error::config("benchmark tables need at least two rows"));
        }
        if self.alphabet.chars().count() < 2 {
            return Err(Error::config("alphabet needs at least two characters"));
        }
        check_len(&(self.len_min..=self.len_max))
    }
}

/// What was generated, written next to each table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableMeta {
    pub kind: BenchmarkKind,
    pub seed: Seed,
    pub table: usize,
    /// Description of the generating rule; canonical program text when the
    /// rule is expressible in the grammar.
    pub transformation: String,
    pub alphabet: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkTable {
    pub pair: TablePair,
    pub meta: TableMeta,
}

pub fn gen_benchmark(spec: &BenchmarkSpec) -> Result<Vec<BenchmarkTable>> {
    spec.validate()?;
    (0..spec.tables).map(|t| gen_table(spec, t)).collect()
}

fn gen_table(spec: &BenchmarkSpec, table: usize) -> Result<BenchmarkTable> {
    let mut rng = spec.seed.child(&[table as u64]).rng();
    let alphabet: Vec<char> = spec.alphabet.chars().collect();
    let len = spec.len_min..=spec.len_max;
    let (sources, targets, rule): (Vec<CellValue>, Vec<CellValue>, String) = match spec.kind {
        BenchmarkKind::Syn => {
            let program = random_transformation(&mut rng, &GrammarConfig::default(), 3..=6);
            let sources = distinct_sources(&mut rng, spec.rows, &len, &alphabet)?;
            let targets = sources.iter().map(|s| program.apply(s.as_str()).into()).collect();
            (sources, targets, program.to_string())
        }
        BenchmarkKind::SynRp => {
            let from = alphabet[rng::index(&mut rng, alphabet.len())];
            let others: Vec<char> = alphabet.iter().copied().filter(|&c| c != from).collect();
            let to = others[rng::index(&mut rng, others.len())];
            let mut sources = Vec::with_capacity(spec.rows);
            let mut seen = HashSet::new();
            let mut attempts = 0usize;
            while sources.len() < spec.rows {
                attempts += 1;
                if attempts > 100_000 * spec.rows {
                    return Err(Error::config("cannot draw sources containing the replaced character"));
                }
                let s = random_source(&mut rng, len.clone(), &alphabet);
                if s.as_str().contains(from) && seen.insert(s.clone()) {
                    sources.push(s);
                }
            }
            let targets = sources.iter().map(|s| s.as_str().replace(from, &to.to_string()).into()).collect();
            (sources, targets, format!("replace({from:?},{to:?})"))
        }
        BenchmarkKind::SynSt => {
            let start = rng::uniform(&mut rng, 0, spec.len_min - 1);
            let end = rng::uniform(&mut rng, start + 1, spec.len_max);
            let chain = UnitChain::new(vec![Unit::substr(start, end)])?;
            let program = Transformation::new(vec![chain])?;
            let sources = distinct_sources(&mut rng, spec.rows, &len, &alphabet)?;
            let targets = sources.iter().map(|s| program.apply(s.as_str()).into()).collect();
            (sources, targets, program.to_string())
        }
        BenchmarkKind::SynRv => {
            let sources = distinct_sources(&mut rng, spec.rows, &len, &alphabet)?;
            let targets = sources.iter().map(|s| s.as_str().chars().rev().collect::<String>().into()).collect();
            (sources, targets, "reverse".to_string())
        }
    };
    Ok(BenchmarkTable {
        pair: TablePair::aligned(sources, targets)?,
        meta: TableMeta { kind: spec.kind, seed: spec.seed, table, transformation: rule, alphabet: spec.alphabet.clone() },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub ratio: f64,
    pub seed: Seed,
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.ratio) {
            return Err(Error::config(format!("noise ratio {} must lie in [0, 1]", self.ratio)));
        }
        Ok(())
    }
}

/// How many of `n` pairs a ratio poisons (halves round to even).
pub fn noise_count(ratio: f64, n: usize) -> usize {
    (ratio * n as f64).round_ties_even() as usize
}

/// Replaces the targets of a random subset of pairs with random text of the
/// same length (length 1 for empty targets). Returns the new set and the
/// replaced positions, sorted.
pub fn inject_noise(examples: &ExampleSet, spec: &NoiseSpec, alphabet: &[char]) -> Result<(ExampleSet, Vec<usize>)> {
    spec.validate()?;
    if alphabet.len() < 2 {
        return Err(Error::config("noise alphabet needs at least two characters"));
    }
    let mut pairs = examples.pairs().to_vec();
    let count = noise_count(spec.ratio, pairs.len());
    let mut rng = spec.seed.rng();
    let mut chosen: Vec<usize> =
        sample_distinct(&mut rng, pairs.len() as u64, count).into_iter().map(|i| i as usize).collect();
    let mut taken: HashSet<ExamplePair> = pairs.iter().cloned().collect();
    for &i in &chosen {
        let original = pairs[i].clone();
        let len = original.target.char_len().max(1);
        let replaced = loop {
            let t = random_source(&mut rng, len..=len, alphabet);
            let candidate = ExamplePair { source: original.source.clone(), target: t };
            if candidate.target != original.target && !taken.contains(&candidate) {
                break candidate;
            }
        };
        taken.remove(&original);
        taken.insert(replaced.clone());
        pairs[i] = replaced;
    }
    chosen.sort_unstable();
    Ok((ExampleSet::new(pairs)?, chosen))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg(groupings: usize, pairs: usize, subsets: usize) -> TrainingConfig {
        TrainingConfig { groupings, pairs_per_grouping: pairs, subsets_per_grouping: subsets, ..TrainingConfig::default() }
    }

    fn corpus(cfg: &TrainingConfig, seed: u64) -> Vec<TrainingSample> {
        gen_training_corpus(cfg, Seed(seed)).unwrap().collect::<Result<_>>().unwrap()
    }

    #[test]
    fn single_subset_corpus() {
        let cfg = TrainingConfig { len_min: 8, len_max: 8, ..small_cfg(1, 3, 1) };
        let c = corpus(&cfg, 5);
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].prompt.matches("<eoe>").count(), 2);
        assert!(c[0].label.starts_with("<sos>") && c[0].label.ends_with("<eos>"));
    }

    #[test]
    fn label_matches_program() {
        let cfg = small_cfg(20, 5, 4);
        for s in corpus(&cfg, 11) {
            let program: Transformation = s.transformation.parse().unwrap();
            let query = crate::predictor::mock::query_of(&s.prompt).unwrap();
            assert_eq!(s.label, format!("<sos>{}<eos>", program.apply(query)));
        }
    }

    #[test]
    fn split_flags_by_grouping() {
        let cfg = small_cfg(10, 4, 2);
        let c = corpus(&cfg, 3);
        assert_eq!(c.len(), 20);
        assert_eq!(c.iter().filter(|s| s.split == Split::Train).count(), 16);
        assert!(c.iter().all(|s| (s.split == Split::Train) == (s.grouping_id < 8)));
    }

    #[test]
    fn subsets_are_distinct_when_possible() {
        let cfg = small_cfg(3, 5, 10);
        let c = corpus(&cfg, 1);
        for g in 0..3 {
            let prompts: HashSet<&str> =
                c.iter().filter(|s| s.grouping_id == g).map(|s| s.prompt.as_str()).collect();
            assert_eq!(prompts.len(), 10);
        }
    }

    #[test]
    fn corpus_is_deterministic() {
        let cfg = small_cfg(5, 6, 3);
        assert_eq!(corpus(&cfg, 42), corpus(&cfg, 42));
        assert_ne!(corpus(&cfg, 42), corpus(&cfg, 43));
    }

    #[test]
    fn corpus_rejects_bad_config() {
        assert!(gen_training_corpus(&small_cfg(1, 2, 1), Seed(0)).is_err());
        let cfg = TrainingConfig { len_min: 35, len_max: 8, ..TrainingConfig::default() };
        assert!(gen_training_corpus(&cfg, Seed(0)).is_err());
    }

    #[test]
    fn reversal_benchmark() {
        let spec = BenchmarkSpec::new(BenchmarkKind::SynRv, Seed(1));
        let tables = gen_benchmark(&spec).unwrap();
        assert_eq!(tables.len(), 5);
        for t in &tables {
            assert_eq!(t.pair.len(), 50);
            for (s, tg) in t.pair.source_rows.iter().zip(&t.pair.target_rows) {
                assert_eq!(tg.as_str(), s.as_str().chars().rev().collect::<String>());
            }
        }
        assert_eq!("Hello".chars().rev().collect::<String>(), "olleH");
    }

    #[test]
    fn benchmark_shapes() {
        for kind in BenchmarkKind::ALL {
            let spec = BenchmarkSpec::new(kind, Seed(9));
            let tables = gen_benchmark(&spec).unwrap();
            assert_eq!((tables.len(), tables[0].pair.len()), kind.default_shape());
            assert!(tables.iter().all(|t| t.pair.aligned && t.pair.source_rows.len() == t.pair.target_rows.len()));
            assert_eq!(gen_benchmark(&spec).unwrap(), tables);
        }
    }

    #[test]
    fn replace_benchmark() {
        let spec = BenchmarkSpec { rows: 20, ..BenchmarkSpec::new(BenchmarkKind::SynRp, Seed(4)) };
        for t in gen_benchmark(&spec).unwrap() {
            let rule = &t.meta.transformation;
            let mut it = rule.trim_start_matches("replace(").chars();
            // replace('c','d')
            let from = it.nth(1).unwrap();
            let to = rule.chars().rev().nth(2).unwrap();
            assert_ne!(from, to);
            for (s, tg) in t.pair.source_rows.iter().zip(&t.pair.target_rows) {
                assert!(s.as_str().contains(from));
                assert_eq!(tg.as_str(), s.as_str().replace(from, &to.to_string()));
            }
        }
        assert_eq!("a/b/c".replace('/', "-"), "a-b-c");
    }

    #[test]
    fn substring_benchmark_uses_one_unit() {
        let spec = BenchmarkSpec::new(BenchmarkKind::SynSt, Seed(2));
        for t in gen_benchmark(&spec).unwrap() {
            let program: Transformation = t.meta.transformation.parse().unwrap();
            assert_eq!(program.unit_count(), 1);
            let Unit::Substr { start, end } = program.chains()[0].units()[0] else { panic!("not a substring") };
            assert!(start < spec.len_min && end.unwrap() > start && end.unwrap() <= spec.len_max);
            for (s, tg) in t.pair.source_rows.iter().zip(&t.pair.target_rows) {
                assert_eq!(tg.as_str(), program.apply(s.as_str()));
                assert!(!tg.is_empty());
            }
        }
    }

    #[test]
    fn benchmark_kind_parsing() {
        assert_eq!("syn-rv".parse::<BenchmarkKind>().unwrap(), BenchmarkKind::SynRv);
        assert!("syn-xx".parse::<BenchmarkKind>().is_err());
    }

    fn examples(n: usize) -> ExampleSet {
        ExampleSet::new((0..n).map(|i| ExamplePair::new(format!("s{i}"), format!("target{i}"))).collect()).unwrap()
    }

    #[test]
    fn noise_counts() {
        let abc: Vec<char> = DEFAULT_ALPHABET.chars().collect();
        let e = examples(5);
        let (same, idx) = inject_noise(&e, &NoiseSpec { ratio: 0.0, seed: Seed(1) }, &abc).unwrap();
        assert_eq!((same, idx), (e.clone(), vec![]));
        let (_, idx) = inject_noise(&e, &NoiseSpec { ratio: 0.5, seed: Seed(1) }, &abc).unwrap();
        assert_eq!(idx.len(), 2);
        let (all, idx) = inject_noise(&examples(4), &NoiseSpec { ratio: 1.0, seed: Seed(1) }, &abc).unwrap();
        assert_eq!(idx, vec![0, 1, 2, 3]);
        for (a, b) in all.pairs().iter().zip(examples(4).pairs()) {
            assert_eq!(a.source, b.source);
            assert_ne!(a.target, b.target);
            assert_eq!(a.target.char_len(), b.target.char_len());
        }
        assert_eq!(noise_count(0.8, 10), 8);
        assert_eq!(noise_count(0.25, 2), 0);
        assert_eq!(noise_count(0.75, 2), 2);
        assert!(inject_noise(&e, &NoiseSpec { ratio: 1.5, seed: Seed(1) }, &abc).is_err());
    }

    #[test]
    fn noise_is_deterministic_and_touches_only_chosen_rows() {
        let abc: Vec<char> = DEFAULT_ALPHABET.chars().collect();
        let e = examples(10);
        let spec = NoiseSpec { ratio: 0.3, seed: Seed(8) };
        let (a, idx) = inject_noise(&e, &spec, &abc).unwrap();
        assert_eq!(inject_noise(&e, &spec, &abc).unwrap().0, a);
        for (i, (x, y)) in a.pairs().iter().zip(e.pairs()).enumerate() {
            assert_eq!(x == y, !idx.contains(&i));
        }
    }
}
