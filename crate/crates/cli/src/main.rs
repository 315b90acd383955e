//! `tabxform`: generate synthetic data, join tables by example, and score
//! the results.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 remote endpoint error.

mod commands;
mod failure;
mod files;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::failure::{CliResult, Failure, EXIT_USAGE};

#[derive(Debug, Parser)]
#[command(name = "tabxform", version, about = "Example-driven column transformation and table joins")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a training corpus of serialized prompts and labels.
    GenTrain(GenTrainArgs),
    /// Generate synthetic benchmark table pairs.
    GenBench(GenBenchArgs),
    /// Predict target formatting for source rows and join them to a target table.
    Join(JoinArgs),
    /// Score join output against ground truth.
    Eval(EvalArgs),
    /// Replace a fraction of example targets with random text.
    Noise(NoiseArgs),
    /// Run a scripted completion endpoint for testing the remote backend.
    ServeMock(ServeMockArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GenTrainArgs {
    /// Number of transformation groupings.
    #[arg(long, default_value_t = 2000)]
    pub groupings: usize,
    /// Source-target pairs per grouping (at least 3).
    #[arg(long, default_value_t = 10)]
    pub pairs: usize,
    /// 3-example subsets sampled per grouping.
    #[arg(long, default_value_t = 10)]
    pub subsets: usize,
    /// Shortest generated source, in characters.
    #[arg(long, default_value_t = 8)]
    pub len_min: usize,
    /// Longest generated source, in characters.
    #[arg(long, default_value_t = 35)]
    pub len_max: usize,
    /// Random seed; drawn and recorded in the manifest when omitted.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory (receives corpus.jsonl and manifest.json).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GenBenchArgs {
    /// Benchmark kind: syn, syn-rp, syn-st or syn-rv.
    #[arg(long, value_parser = parse_kind)]
    pub kind: tabxform::datagen::BenchmarkKind,
    /// Number of tables (default 10 for syn, 5 otherwise).
    #[arg(long)]
    pub tables: Option<usize>,
    /// Rows per table (default 100 for syn, 50 otherwise).
    #[arg(long)]
    pub rows: Option<usize>,
    /// Shortest generated source, in characters.
    #[arg(long, default_value_t = 8)]
    pub len_min: usize,
    /// Longest generated source, in characters.
    #[arg(long, default_value_t = 35)]
    pub len_max: usize,
    /// Random seed; drawn and recorded in the manifest when omitted.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory (receives tableNNN/ directories and manifest.json).
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_kind(s: &str) -> Result<tabxform::datagen::BenchmarkKind, String> {
    s.parse().map_err(|e: tabxform::Error| e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    Synthesis,
    Remote,
    /// Synthesis and remote trials pooled with equal weight.
    Ensemble,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    OneToOne,
    Bounded,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct JoinArgs {
    /// Source column CSV (header `value`).
    #[arg(long, required_unless_present = "bench", conflicts_with = "bench")]
    pub source: Option<PathBuf>,
    /// Target column CSV (header `value`).
    #[arg(long, required_unless_present = "bench", conflicts_with = "bench")]
    pub target: Option<PathBuf>,
    /// Example pairs CSV (header `source,target`).
    #[arg(long, required_unless_present = "bench", conflicts_with = "bench")]
    pub examples: Option<PathBuf>,
    /// Benchmark directory from gen-bench: each table's first half becomes
    /// the examples and the second half is joined.
    #[arg(long)]
    pub bench: Option<PathBuf>,
    /// Predictor used for the trials.
    #[arg(long, value_enum, default_value_t = Backend::Synthesis)]
    pub backend: Backend,
    /// Trials per predictor and row.
    #[arg(long, default_value_t = 5)]
    pub trials: usize,
    /// Examples per context.
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    /// one-to-one keeps the closest target; bounded keeps every target within
    /// --min-dist..=--max-dist.
    #[arg(long, value_enum, default_value_t = Mode::OneToOne)]
    pub mode: Mode,
    /// Smallest distance accepted in bounded mode.
    #[arg(long)]
    pub min_dist: Option<usize>,
    /// Largest distance accepted in bounded mode.
    #[arg(long)]
    pub max_dist: Option<usize>,
    /// Random seed; drawn and recorded in the manifest when omitted.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Synthesis: candidate chains examined per context.
    #[arg(long, default_value_t = 200_000)]
    pub max_candidates: usize,
    /// Synthesis: milliseconds per context.
    #[arg(long, default_value_t = 2_000)]
    pub time_budget_ms: u64,
    /// Remote: completion endpoint URL.
    #[arg(long)]
    pub endpoint: Option<String>,
    /// Remote: name of the environment variable holding the bearer token.
    #[arg(long)]
    pub auth_env: Option<String>,
    /// Remote: sampling temperature.
    #[arg(long, default_value_t = 0.0)]
    pub temperature: f64,
    /// Remote: completion length limit.
    #[arg(long, default_value_t = 64)]
    pub max_tokens: u32,
    /// Remote: per-request timeout.
    #[arg(long, default_value_t = 30_000)]
    pub timeout_ms: u64,
    /// Remote: retries after a transport error, 429 or 5xx.
    #[arg(long, default_value_t = 2)]
    pub retries: u32,
    /// Remote: first retry delay, doubled on each retry.
    #[arg(long, default_value_t = 200)]
    pub backoff_ms: u64,
    /// Remote: longer prompts fail without a request.
    #[arg(long, default_value_t = 8_192)]
    pub max_prompt_chars: usize,
    /// Remote: concurrent requests.
    #[arg(long, default_value_t = 4)]
    pub max_in_flight: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvalArgs {
    /// matches.csv produced by `join`.
    #[arg(long, requires = "truth", conflicts_with = "dataset")]
    pub pred: Option<PathBuf>,
    /// Ground-truth target column CSV, aligned with the source rows.
    #[arg(long, requires = "pred", conflicts_with = "dataset")]
    pub truth: Option<PathBuf>,
    /// Output directory of `join --bench`; scores every table and the mean.
    #[arg(long, required_unless_present = "pred")]
    pub dataset: Option<PathBuf>,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct NoiseArgs {
    /// Example pairs CSV (header `source,target`).
    #[arg(long)]
    pub examples: PathBuf,
    /// Fraction of pairs to poison, in [0, 1].
    #[arg(long)]
    pub ratio: f64,
    /// Random seed; drawn and recorded in the manifest when omitted.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Characters for replacement targets.
    #[arg(long, default_value = tabxform::grammar::DEFAULT_ALPHABET)]
    pub alphabet: String,
    /// Output directory (receives examples.csv and manifest.json).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ServeMockArgs {
    /// JSON script: {"by_query": {...}, "by_prompt": {...}, "default": {...},
    /// "fail_first": n, "require_token": "..."}.
    #[arg(long)]
    pub script: Option<PathBuf>,
    /// Address to listen on.
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: String,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    /// manifest.json of an earlier run.
    pub manifest: PathBuf,
    /// Write to this directory instead of the recorded one.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn run(argv: Vec<String>) -> CliResult<()> {
    let cli = match Cli::try_parse_from(std::iter::once("tabxform".to_string()).chain(argv.iter().cloned())) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return Ok(());
            }
            return Err(Failure::usage(e.to_string().trim_end().to_string()));
        }
    };
    match cli.command {
        Command::GenTrain(a) => commands::gen_train(a, argv),
        Command::GenBench(a) => commands::gen_bench(a, argv),
        Command::Join(a) => commands::join(a, argv),
        Command::Eval(a) => commands::eval(a),
        Command::Noise(a) => commands::noise(a, argv),
        Command::ServeMock(a) => commands::serve_mock(a),
        Command::Replay(a) => {
            let manifest = files::read_manifest(&a.manifest)?;
            let mut argv = manifest.argv;
            if let Some(out) = a.out {
                commands::set_flag(&mut argv, "--out", &out.to_string_lossy());
            }
            if argv.first().map(String::as_str) == Some("replay") {
                return Err(Failure::usage("a manifest cannot replay another replay"));
            }
            run(argv)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(std::env::args().skip(1).collect()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            if f.code == EXIT_USAGE && f.message.starts_with("error:") {
                eprintln!("{}", f.message);
            } else {
                eprintln!("error: {}", f.message);
            }
            ExitCode::from(f.code)
        }
    }
}
