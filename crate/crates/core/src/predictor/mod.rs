//! Predictors: anything that, given a context and a query cell, proposes a
//! target cell.
//!
//! Three backends sit behind [`PredictorSpec`]: a program-synthesis search
//! over the transformation grammar, a client for a remote completion
//! endpoint, and an ensemble pooling several of the former.

pub mod mock;
pub mod remote;
mod synth;

use std::collections::HashMap;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::grammar::Transformation;
use crate::model::{CellValue, Context, ExampleSet};
use crate::rng::Rng;
use crate::serializer::sample_contexts;
use crate::{Error, Result};

pub use remote::{RemoteClient, RemoteLlmConfig};
pub use synth::{synthesize_transformation, SynthesisConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PredictorSpec {
    Synthesis(SynthesisConfig),
    RemoteLlm(RemoteLlmConfig),
    Ensemble { members: Vec<PredictorSpec> },
}

impl PredictorSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            PredictorSpec::Synthesis(cfg) => cfg.validate(),
            PredictorSpec::RemoteLlm(cfg) => cfg.validate(),
            PredictorSpec::Ensemble { members } => {
                if members.len() < 2 {
                    return Err(Error::config("an ensemble needs at least two members"));
                }
                if members.iter().any(|m| matches!(m, PredictorSpec::Ensemble { .. })) {
                    return Err(Error::config("ensembles cannot be nested"));
                }
                members.iter().try_for_each(PredictorSpec::validate)
            }
        }
    }

    /// The non-ensemble specs this spec stands for, in order.
    pub fn leaves(&self) -> Vec<&PredictorSpec> {
        match self {
            PredictorSpec::Ensemble { members } => members.iter().collect(),
            other => vec![other],
        }
    }
}

/// A ready-to-use, non-ensemble predictor.
pub enum Predictor {
    Synthesis { config: SynthesisConfig, cache: Mutex<HashMap<Context, Option<Transformation>>> },
    Remote(RemoteClient),
}

impl Predictor {
    pub fn synthesis(config: SynthesisConfig) -> Self {
        Predictor::Synthesis { config, cache: Mutex::new(HashMap::new()) }
    }

    /// Builds the predictors for `spec`, one per ensemble member.
    pub fn build_all(spec: &PredictorSpec) -> Result<Vec<Predictor>> {
        spec.validate()?;
        spec.leaves()
            .into_iter()
            .map(|leaf| match leaf {
                PredictorSpec::Synthesis(cfg) => Ok(Predictor::synthesis(cfg.clone())),
                PredictorSpec::RemoteLlm(cfg) => Ok(Predictor::Remote(RemoteClient::new(cfg.clone())?)),
                PredictorSpec::Ensemble { .. } => unreachable!("validated: no nesting"),
            })
            .collect()
    }

    pub fn is_remote(&self) -> bool {
        matches!(self, Predictor::Remote(_))
    }

    /// The program the synthesis backend finds for `context` (memoized).
    pub fn program_for(&self, context: &Context) -> Option<Transformation> {
        let Predictor::Synthesis { config, cache } = self else {
            return None;
        };
        if let Some(hit) = cache.lock().expect("cache lock").get(context) {
            return hit.clone();
        }
        let program = synthesize_transformation(context, config);
        cache.lock().expect("cache lock").insert(context.clone(), program.clone());
        program
    }

    pub fn predict(&self, context: &Context, query: &CellValue) -> Result<Option<CellValue>> {
        if context.is_empty() {
            return Err(Error::config("context must hold at least one example"));
        }
        match self {
            Predictor::Synthesis { .. } => Ok(self
                .program_for(context)
                .map(|p| p.apply(query.as_str()))
                .filter(|out| !out.is_empty())
                .map(CellValue::from)),
            Predictor::Remote(client) => client.predict(context, query),
        }
    }
}

/// One prediction under `spec`. An ensemble spec returns the majority
/// output of its members on this context.
pub fn predict(spec: &PredictorSpec, context: &Context, query: &CellValue) -> Result<Option<CellValue>> {
    let predictors = Predictor::build_all(spec)?;
    let outputs = predictors
        .iter()
        .map(|p| p.predict(context, query))
        .collect::<Result<Vec<_>>>()?;
    let set = crate::aggregate::TrialSet { source: query.clone(), outputs };
    Ok(crate::aggregate::aggregate(&set).target)
}

pub fn remote_predict(cfg: &RemoteLlmConfig, context: &Context, query: &CellValue) -> Result<Option<CellValue>> {
    RemoteClient::new(cfg.clone())?.predict(context, query)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trial {
    /// Index of the leaf predictor that produced this trial.
    pub predictor: usize,
    pub context: Context,
    pub output: Option<CellValue>,
    /// Set when the predictor failed; the output is then absent.
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TrialDiagnostics {
    pub trials: usize,
    pub failures: usize,
    pub remote_trials: usize,
    pub remote_failures: usize,
}

impl TrialDiagnostics {
    pub fn merge(&mut self, other: &TrialDiagnostics) {
        self.trials += other.trials;
        self.failures += other.failures;
        self.remote_trials += other.remote_trials;
        self.remote_failures += other.remote_failures;
    }
}

/// A set of predictors with equal weight in the vote.
pub struct PredictorPool {
    predictors: Vec<Predictor>,
}

impl PredictorPool {
    pub fn new(specs: &[PredictorSpec]) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::config("at least one predictor is required"));
        }
        let mut predictors = Vec::new();
        for s in specs {
            predictors.extend(Predictor::build_all(s)?);
        }
        Ok(PredictorPool { predictors })
    }

    pub fn from_predictors(predictors: Vec<Predictor>) -> Self {
        PredictorPool { predictors }
    }

    pub fn predictors(&self) -> &[Predictor] {
        &self.predictors
    }

    /// Samples `n_per_predictor` contexts of size `k` for each predictor and
    /// collects one trial per (predictor, context). Failures become absent
    /// outputs. Trials come back sorted by (predictor, context).
    pub fn run_trials(
        &self,
        examples: &ExampleSet,
        query: &CellValue,
        n_per_predictor: usize,
        k: usize,
        rng: &mut Rng,
    ) -> Result<(Vec<Trial>, TrialDiagnostics)> {
        if n_per_predictor == 0 {
            return Err(Error::config("trial count must be at least 1"));
        }
        let mut trials = Vec::with_capacity(self.predictors.len() * n_per_predictor);
        let mut diag = TrialDiagnostics::default();
        for (pi, predictor) in self.predictors.iter().enumerate() {
            for context in sample_contexts(examples, k, n_per_predictor, rng)? {
                let (output, error) = match predictor.predict(&context, query) {
                    Ok(out) => (out, None),
                    Err(e) => (None, Some(e.to_string())),
                };
                diag.trials += 1;
                if predictor.is_remote() {
                    diag.remote_trials += 1;
                }
                if error.is_some() {
                    diag.failures += 1;
                    if predictor.is_remote() {
                        diag.remote_failures += 1;
                    }
                }
                trials.push(Trial { predictor: pi, context, output, error });
            }
        }
        trials.sort_by(|a, b| (a.predictor, &a.context).cmp(&(b.predictor, &b.context)));
        Ok((trials, diag))
    }
}

/// [`PredictorPool::run_trials`] over freshly built predictors.
pub fn run_trials(
    specs: &[PredictorSpec],
    examples: &ExampleSet,
    query: &CellValue,
    n_per_spec: usize,
    k: usize,
    rng: &mut Rng,
) -> Result<(Vec<Trial>, TrialDiagnostics)> {
    PredictorPool::new(specs)?.run_trials(examples, query, n_per_spec, k, rng)
}
