//! Subcommand implementations.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use tabxform::datagen::{gen_benchmark, gen_training_corpus, inject_noise, BenchmarkSpec, NoiseSpec, TrainingConfig};
use tabxform::eval::{score_dataset, score_table, MetricsReport};
use tabxform::join::{join_with_pool, JoinConfig, JoinMode, JoinOutput};
use tabxform::model::{split_examples, TablePair};
use tabxform::predictor::mock::{MockScript, MockServer};
use tabxform::predictor::{PredictorPool, PredictorSpec, RemoteLlmConfig, SynthesisConfig, TrialDiagnostics};
use tabxform::rng::Seed;

use crate::failure::{CliResult, Failure};
use crate::files::{self, InputDigest, RunManifest};
use crate::{Backend, EvalArgs, GenBenchArgs, GenTrainArgs, JoinArgs, Mode, NoiseArgs, ServeMockArgs};

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

/// Replaces the value of `flag` in `argv`, or appends it.
pub fn set_flag(argv: &mut Vec<String>, flag: &str, value: &str) {
    let with_eq = format!("{flag}=");
    if let Some(i) = argv.iter().position(|a| a == flag) {
        if i + 1 < argv.len() {
            argv[i + 1] = value.to_string();
            return;
        }
        argv.truncate(i);
    }
    argv.retain(|a| !a.starts_with(&with_eq));
    argv.push(flag.to_string());
    argv.push(value.to_string());
}

/// The given seed, or a fresh one; either way recorded in `argv`.
fn resolve_seed(seed: Option<u64>, argv: &mut Vec<String>) -> u64 {
    let seed = seed.unwrap_or_else(rand::random);
    set_flag(argv, "--seed", &seed.to_string());
    seed
}

struct Run {
    command: &'static str,
    argv: Vec<String>,
    config: serde_json::Value,
    seed: Option<u64>,
    inputs: Vec<InputDigest>,
    started_at: String,
}

impl Run {
    fn start<T: serde::Serialize>(command: &'static str, argv: Vec<String>, config: &T, seed: Option<u64>) -> CliResult<Self> {
        Ok(Run {
            command,
            argv,
            config: serde_json::to_value(config)?,
            seed,
            inputs: Vec::new(),
            started_at: now(),
        })
    }

    fn input(&mut self, path: &Path) -> CliResult<()> {
        self.inputs.push(files::digest(path)?);
        Ok(())
    }

    fn finish(self, dir: &Path) -> CliResult<()> {
        let manifest = RunManifest {
            command: self.command.to_string(),
            argv: self.argv,
            config: self.config,
            seed: self.seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            inputs: self.inputs,
            started_at: self.started_at,
            finished_at: now(),
        };
        files::write_json(&dir.join("manifest.json"), &manifest)
    }
}

pub fn gen_train(mut args: GenTrainArgs, mut argv: Vec<String>) -> CliResult<()> {
    let seed = resolve_seed(args.seed, &mut argv);
    args.seed = Some(seed);
    let cfg = TrainingConfig {
        groupings: args.groupings,
        pairs_per_grouping: args.pairs,
        subsets_per_grouping: args.subsets,
        len_min: args.len_min,
        len_max: args.len_max,
        ..TrainingConfig::default()
    };
    let corpus = gen_training_corpus(&cfg, Seed(seed))?;
    let run = Run::start("gen-train", argv, &cfg, Some(seed))?;
    files::create_dir(&args.out)?;
    let lines = corpus.map(|s| {
        let s = s?;
        Ok(serde_json::to_string(&s)?)
    });
    let n = files::write_lines(&args.out.join("corpus.jsonl"), lines)?;
    log::info!("wrote {n} samples");
    run.finish(&args.out)
}

pub fn gen_bench(mut args: GenBenchArgs, mut argv: Vec<String>) -> CliResult<()> {
    let seed = resolve_seed(args.seed, &mut argv);
    args.seed = Some(seed);
    let base = BenchmarkSpec::new(args.kind, Seed(seed));
    let spec = BenchmarkSpec {
        tables: args.tables.unwrap_or(base.tables),
        rows: args.rows.unwrap_or(base.rows),
        len_min: args.len_min,
        len_max: args.len_max,
        ..base
    };
    let tables = gen_benchmark(&spec)?;
    let run = Run::start("gen-bench", argv, &spec, Some(seed))?;
    files::create_dir(&args.out)?;
    for t in &tables {
        let dir = args.out.join(format!("table{:03}", t.meta.table));
        files::create_dir(&dir)?;
        files::write_column(&dir.join("source.csv"), &t.pair.source_rows)?;
        files::write_column(&dir.join("target.csv"), &t.pair.target_rows)?;
        files::write_json(&dir.join("meta.json"), &t.meta)?;
    }
    run.finish(&args.out)
}

fn predictor_specs(args: &JoinArgs) -> CliResult<Vec<PredictorSpec>> {
    let synthesis = PredictorSpec::Synthesis(SynthesisConfig {
        max_candidates: args.max_candidates,
        time_budget_ms: args.time_budget_ms,
        ..SynthesisConfig::default()
    });
    let remote = || -> CliResult<PredictorSpec> {
        let endpoint = args.endpoint.clone().ok_or_else(|| Failure::usage("the remote backend needs --endpoint"))?;
        let auth_env = args.auth_env.clone().ok_or_else(|| Failure::usage("the remote backend needs --auth-env"))?;
        Ok(PredictorSpec::RemoteLlm(RemoteLlmConfig {
            temperature: args.temperature,
            max_tokens: args.max_tokens,
            timeout_ms: args.timeout_ms,
            retries: args.retries,
            backoff_ms: args.backoff_ms,
            max_prompt_chars: args.max_prompt_chars,
            max_in_flight: args.max_in_flight,
            ..RemoteLlmConfig::new(endpoint, auth_env)
        }))
    };
    let spec = match args.backend {
        Backend::Synthesis => synthesis,
        Backend::Remote => remote()?,
        Backend::Ensemble => PredictorSpec::Ensemble { members: vec![synthesis, remote()?] },
    };
    spec.validate()?;
    Ok(vec![spec])
}

fn join_config(args: &JoinArgs) -> CliResult<JoinConfig> {
    let cfg = JoinConfig {
        mode: match args.mode {
            Mode::OneToOne => JoinMode::OneToOne,
            Mode::Bounded => JoinMode::Bounded,
        },
        min_distance: args.min_dist,
        max_distance: args.max_dist,
    };
    if cfg.mode == JoinMode::OneToOne && (cfg.min_distance.is_some() || cfg.max_distance.is_some()) {
        return Err(Failure::usage("--min-dist and --max-dist apply only to --mode bounded"));
    }
    cfg.validate()?;
    Ok(cfg)
}

fn report(diag: &TrialDiagnostics, results: &JoinOutput) {
    let matched = results.results.iter().filter(|r| !r.matches.is_empty()).count();
    eprintln!(
        "{} rows, {} matched; {} trials, {} failed",
        results.results.len(),
        matched,
        diag.trials,
        diag.failures
    );
}

/// Sorted `tableNNN` subdirectories of `dir`.
fn table_dirs(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| Failure::data(e.to_string()).context(dir.display()))?;
    let mut out: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir() && p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with("table")))
        .collect();
    out.sort();
    if out.is_empty() {
        return Err(Failure::data(format!("no table directories in {}", dir.display())));
    }
    Ok(out)
}

pub fn join(mut args: JoinArgs, mut argv: Vec<String>) -> CliResult<()> {
    let seed = resolve_seed(args.seed, &mut argv);
    args.seed = Some(seed);
    let specs = predictor_specs(&args)?;
    let cfg = join_config(&args)?;
    let pool = PredictorPool::new(&specs)?;
    let mut run = Run::start("join", argv, &args, Some(seed))?;
    let mut diagnostics = TrialDiagnostics::default();

    if let Some(bench) = args.bench.clone() {
        let tables = table_dirs(&bench)?;
        files::create_dir(&args.out)?;
        for (i, dir) in tables.iter().enumerate() {
            let (src, tgt) = (dir.join("source.csv"), dir.join("target.csv"));
            run.input(&src)?;
            run.input(&tgt)?;
            let pair = TablePair::aligned(files::read_column(&src)?, files::read_column(&tgt)?)
                .map_err(|e| Failure::from(e).context(dir.display()))?;
            let (examples, test) = split_examples(&pair)?;
            let out = join_with_pool(
                &test.source_rows,
                &test.target_rows,
                &examples,
                &pool,
                args.trials,
                args.k,
                &cfg,
                Seed(seed).child(&[i as u64]),
            )?;
            let name = dir.file_name().expect("table directory has a name");
            let out_dir = args.out.join(name);
            files::create_dir(&out_dir)?;
            files::write_matches(&out_dir.join("matches.csv"), &out.results, &test.target_rows)?;
            files::write_column(&out_dir.join("truth.csv"), &test.target_rows)?;
            report(&out.diagnostics, &out);
            diagnostics.merge(&out.diagnostics);
        }
    } else {
        let (src, tgt, ex) = (
            args.source.clone().expect("clap enforces --source"),
            args.target.clone().expect("clap enforces --target"),
            args.examples.clone().expect("clap enforces --examples"),
        );
        for p in [&src, &tgt, &ex] {
            run.input(p)?;
        }
        let sources = files::read_column(&src)?;
        let targets = files::read_column(&tgt)?;
        let examples = files::read_examples(&ex)?;
        let out = join_with_pool(&sources, &targets, &examples, &pool, args.trials, args.k, &cfg, Seed(seed))?;
        files::create_dir(&args.out)?;
        files::write_matches(&args.out.join("matches.csv"), &out.results, &targets)?;
        report(&out.diagnostics, &out);
        diagnostics = out.diagnostics;
    }
    run.finish(&args.out)?;
    if diagnostics.remote_trials > 0 && diagnostics.remote_failures == diagnostics.remote_trials {
        return Err(Failure::remote(format!(
            "all {} remote trials failed; see the log for endpoint errors",
            diagnostics.remote_trials
        )));
    }
    Ok(())
}

fn emit(json: String, out: &Option<PathBuf>) -> CliResult<()> {
    match out {
        Some(path) => fs::write(path, json + "\n").map_err(|e| Failure::data(e.to_string()).context(path.display())),
        None => {
            println!("{json}");
            Ok(())
        }
    }
}

fn score_files(pred: &Path, truth: &Path) -> CliResult<MetricsReport> {
    let truth_rows = files::read_column(truth)?;
    let mut rows = files::read_matches(pred)?;
    if rows.is_empty() {
        rows = vec![tabxform::eval::RowOutcome { predicted: None, matched: None }; truth_rows.len()];
    }
    score_table(&rows, &truth_rows).map_err(|e| Failure::from(e).context(pred.display()))
}

pub fn eval(args: EvalArgs) -> CliResult<()> {
    let json = if let Some(dir) = &args.dataset {
        let mut reports = Vec::new();
        for t in table_dirs(dir)? {
            reports.push(score_files(&t.join("matches.csv"), &t.join("truth.csv"))?);
        }
        serde_json::to_string_pretty(&score_dataset(reports)?)?
    } else {
        let (pred, truth) = (args.pred.as_ref().expect("clap enforces --pred"), args.truth.as_ref().expect("clap enforces --truth"));
        serde_json::to_string_pretty(&score_files(pred, truth)?)?
    };
    emit(json, &args.out)
}

pub fn noise(mut args: NoiseArgs, mut argv: Vec<String>) -> CliResult<()> {
    let seed = resolve_seed(args.seed, &mut argv);
    args.seed = Some(seed);
    let spec = NoiseSpec { ratio: args.ratio, seed: Seed(seed) };
    spec.validate()?;
    let mut run = Run::start("noise", argv, &args, Some(seed))?;
    run.input(&args.examples)?;
    let examples = files::read_examples(&args.examples)?;
    let alphabet: Vec<char> = args.alphabet.chars().collect();
    let (noisy, replaced) = inject_noise(&examples, &spec, &alphabet)?;
    files::create_dir(&args.out)?;
    files::write_examples(&args.out.join("examples.csv"), &noisy)?;
    eprintln!("replaced {} of {} targets", replaced.len(), examples.len());
    run.finish(&args.out)
}

pub fn serve_mock(args: ServeMockArgs) -> CliResult<()> {
    let script = match &args.script {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Failure::data(e.to_string()).context(path.display()))?;
            serde_json::from_str::<MockScript>(&text)?
        }
        None => MockScript::default(),
    };
    let server = MockServer::bind(&args.addr, script).map_err(|e| Failure::usage(e.to_string()).context(&args.addr))?;
    println!("listening on {}", server.url());
    use std::io::Write;
    std::io::stdout().flush()?;
    server.wait();
    Ok(())
}
