//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line
//! with the measured value and the pinned threshold; the test fails if any
//! criterion does. Set `ACCEPTANCE_ONLY=3,7` to run a subset.

#[path = "../../core/tests/support/oracle.rs"]
mod oracle;

use std::collections::HashSet;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use tabxform::aggregate::{aggregate, TrialSet};
use tabxform::datagen::{gen_benchmark, inject_noise, BenchmarkKind, BenchmarkSpec, NoiseSpec};
use tabxform::eval::{score_dataset, score_join, MetricsReport};
use tabxform::grammar::{apply_transformation, apply_unit, random_source, random_transformation, GrammarConfig, Unit, UnitChain, DEFAULT_ALPHABET};
use tabxform::join::{edit_distance, join_with_pool, JoinConfig};
use tabxform::model::{split_examples, CellValue, Context, ExamplePair, TablePair};
use tabxform::predictor::mock::{MockReply, MockScript, MockServer};
use tabxform::predictor::{synthesize_transformation, PredictorPool, PredictorSpec, SynthesisConfig};
use tabxform::rng::{self, Seed};
use tabxform::serializer::{parse_output, serialize, serialize_label};
use tempfile::TempDir;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn alphabet() -> Vec<char> {
    DEFAULT_ALPHABET.chars().collect()
}

fn synthesis_pool() -> PredictorPool {
    PredictorPool::new(&[PredictorSpec::Synthesis(SynthesisConfig::default())]).unwrap()
}

/// Joins the held-out half of each table using the first half as examples.
fn join_tables(pool: &PredictorPool, tables: &[TablePair], trials: usize, noise: Option<NoiseSpec>, seed: Seed) -> MetricsReport {
    let reports = tables
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let (mut examples, test) = split_examples(t).unwrap();
            if let Some(spec) = &noise {
                let spec = NoiseSpec { ratio: spec.ratio, seed: spec.seed.child(&[i as u64]) };
                examples = inject_noise(&examples, &spec, &alphabet()).unwrap().0;
            }
            let out = join_with_pool(
                &test.source_rows,
                &test.target_rows,
                &examples,
                pool,
                trials,
                2,
                &JoinConfig::default(),
                seed.child(&[i as u64]),
            )
            .unwrap();
            score_join(&out.results, &test.target_rows, &test.target_rows).unwrap()
        })
        .collect();
    score_dataset(reports).unwrap().mean
}

fn bench_tables(kind: BenchmarkKind, seed: Seed, tables: Option<usize>) -> Vec<TablePair> {
    let base = BenchmarkSpec::new(kind, seed);
    let spec = BenchmarkSpec { tables: tables.unwrap_or(base.tables), ..base };
    gen_benchmark(&spec).unwrap().into_iter().map(|t| t.pair).collect()
}

fn grammar_oracle() -> Outcome {
    let cfg = GrammarConfig::default();
    let mut rng = Seed(101).rng();
    let mut mismatches = 0;
    for _ in 0..10_000 {
        let t = random_transformation(&mut rng, &cfg, 1..=cfg.max_chains);
        let s = random_source(&mut rng, 0..=40, &cfg.literal_alphabet);
        if apply_transformation(&t, s.as_str()) != oracle::run(&t, s.as_str()) {
            mismatches += 1;
        }
    }
    outcome(mismatches == 0, format!("{mismatches} mismatches in 10000 pairs"))
}

fn edit_distance_oracle() -> Outcome {
    let mut rng = Seed(202).rng();
    let small: Vec<char> = "ab c".chars().collect();
    let full = alphabet();
    let text = |rng: &mut rng::Rng| {
        let pool = if rng::index(rng, 2) == 0 { &small } else { &full };
        random_source(rng, 0..=60, pool).into_string()
    };
    let mut mismatches = 0;
    let mut axiom_failures = 0;
    for _ in 0..10_000 {
        let (a, b) = (text(&mut rng), text(&mut rng));
        if edit_distance(&a, &b) != oracle::levenshtein(&a, &b) {
            mismatches += 1;
        }
    }
    for _ in 0..10_000 {
        let (a, b, c) = (text(&mut rng), text(&mut rng), text(&mut rng));
        let (ab, ba, bc, ac) = (edit_distance(&a, &b), edit_distance(&b, &a), edit_distance(&b, &c), edit_distance(&a, &c));
        if ab != ba || ac > ab + bc || (ab == 0) != (a == b) {
            axiom_failures += 1;
        }
    }
    outcome(
        mismatches == 0 && axiom_failures == 0,
        format!("{mismatches} oracle mismatches, {axiom_failures} axiom violations"),
    )
}

fn single_substring_join() -> Outcome {
    let tables = bench_tables(BenchmarkKind::SynSt, Seed(303), None);
    let mean = join_tables(&synthesis_pool(), &tables, 5, None, Seed(3));
    outcome(mean.f1 == 1.0, format!("{} tables, mean F1 {:.3} (need 1.000)", tables.len(), mean.f1))
}

fn run_units<'a>(units: impl Iterator<Item = &'a Unit>, input: &str) -> String {
    units.fold(input.to_string(), |text, u| apply_unit(u, &text))
}

/// Whether every unit of `chain` matters on `input`: dropping any one of
/// them changes the output. Substring bounds must also fit their input, so
/// an explicit end is never silently clipped.
fn exercises(chain: &UnitChain, input: &str) -> bool {
    let units = chain.units();
    let output = run_units(units.iter(), input);
    if output.is_empty() {
        return false;
    }
    let mut text = input.to_string();
    for unit in units {
        if let Unit::Substr { start, end } = unit {
            let n = text.chars().count();
            if *start >= n || end.is_some_and(|e| e > n) {
                return false;
            }
        }
        text = apply_unit(unit, &text);
    }
    // a chain without the unit; an empty chain passes its input through
    (0..units.len()).all(|skip| run_units(units.iter().enumerate().filter(|(i, _)| *i != skip).map(|(_, u)| u), input) != output)
}

/// Tables whose programs use at most 2 chains of at most 2 units with
/// parameters below 20. Rows are kept only when every unit matters;
/// behavior that shows up in few rows cannot be recovered from two
/// examples. Programs that rarely apply are redrawn.
fn shallow_tables(n: usize, rows: usize, seed: Seed) -> Vec<TablePair> {
    let cfg = GrammarConfig { max_chains: 2, max_stack: 2, param_bound: 20, ..GrammarConfig::default() };
    let alphabet = alphabet();
    let mut rng = seed.rng();
    let mut out = Vec::new();
    while out.len() < n {
        let t = random_transformation(&mut rng, &cfg, 1..=2);
        let mut seen = HashSet::new();
        let sources: Vec<CellValue> = std::iter::repeat_with(|| random_source(&mut rng, 8..=35, &alphabet))
            .take(2_000)
            .filter(|s| t.chains().iter().all(|c| exercises(c, s.as_str())))
            .filter(|s| seen.insert(s.clone()))
            .take(rows)
            .collect();
        if sources.len() < rows {
            continue;
        }
        let targets = sources.iter().map(|s| CellValue::from(apply_transformation(&t, s.as_str()))).collect();
        out.push(TablePair::aligned(sources, targets).unwrap());
    }
    out
}

fn shallow_completeness() -> Outcome {
    let tables = shallow_tables(100, 20, Seed(404));
    let pool = synthesis_pool();
    let reports: Vec<MetricsReport> = tables
        .iter()
        .enumerate()
        .map(|(i, t)| join_tables(&pool, std::slice::from_ref(t), 5, None, Seed(4).child(&[i as u64])))
        .collect();
    let perfect = reports.iter().filter(|r| r.f1 == 1.0).count();
    let mean = score_dataset(reports).unwrap().mean;
    outcome(
        mean.f1 == 1.0,
        format!("{perfect}/100 tables perfect, mean F1 {:.4} (need 1.000)", mean.f1),
    )
}

fn synthesis_soundness() -> Outcome {
    let cfg = GrammarConfig::default();
    let synth = SynthesisConfig::default();
    let alphabet = alphabet();
    let mut rng = Seed(505).rng();
    let (mut found, mut violations) = (0, 0);
    for _ in 0..10_000 {
        let t = random_transformation(&mut rng, &cfg, 1..=cfg.max_chains);
        let pairs: Vec<ExamplePair> = (0..2)
            .map(|_| {
                let s = random_source(&mut rng, 8..=35, &alphabet);
                let target = apply_transformation(&t, s.as_str());
                ExamplePair::new(s, target)
            })
            .collect();
        let Ok(ctx) = Context::new(pairs) else { continue };
        if let Some(p) = synthesize_transformation(&ctx, &synth) {
            found += 1;
            if ctx.examples().iter().any(|e| oracle::run(&p, e.source.as_str()) != e.target.as_str()) {
                violations += 1;
            }
        }
    }
    outcome(violations == 0, format!("{violations} violations among {found} returned programs"))
}

fn out_of_grammar_honesty() -> Outcome {
    let synth = SynthesisConfig::default();
    let mut rng = Seed(606).rng();
    let (mut total, mut absent) = (0, 0);
    for table in bench_tables(BenchmarkKind::SynRv, Seed(606), None) {
        let n = table.len();
        for _ in 0..100 {
            let picked = rng::sample_distinct(&mut rng, n as u64, 2);
            let pairs = picked
                .iter()
                .map(|&i| ExamplePair::new(table.source_rows[i as usize].clone(), table.target_rows[i as usize].clone()))
                .collect();
            let ctx = Context::new(pairs).unwrap();
            total += 1;
            if synthesize_transformation(&ctx, &synth).is_none() {
                absent += 1;
            }
        }
    }
    let rate = absent as f64 / total as f64;
    outcome(rate >= 0.99, format!("absent for {absent}/{total} contexts ({:.1}%, need >= 99%)", rate * 100.0))
}

fn noise_robustness() -> Outcome {
    let pool = synthesis_pool();
    let tables = bench_tables(BenchmarkKind::SynSt, Seed(707), None);
    let clean = join_tables(&pool, &tables, 5, None, Seed(7)).f1;
    let noisy = join_tables(&pool, &tables, 5, Some(NoiseSpec { ratio: 0.2, seed: Seed(70) }), Seed(7)).f1;
    let drop = clean - noisy;

    let (mut two, mut ten) = (0.0, 0.0);
    let reps = 20;
    for r in 0..reps {
        let table = bench_tables(BenchmarkKind::SynSt, Seed(7_000 + r), Some(1));
        let noise = Some(NoiseSpec { ratio: 0.6, seed: Seed(71).child(&[r]) });
        two += join_tables(&pool, &table, 2, noise, Seed(72).child(&[r])).f1;
        ten += join_tables(&pool, &table, 10, noise, Seed(72).child(&[r])).f1;
    }
    let (two, ten) = (two / reps as f64, ten / reps as f64);
    outcome(
        drop <= 0.05 && ten >= two,
        format!(
            "ratio 0.2: F1 {clean:.3} -> {noisy:.3}, drop {drop:.3} (need <= 0.05); ratio 0.6: F1 {two:.3} at 2 trials, {ten:.3} at 10 (need 10 >= 2)"
        ),
    )
}

fn majority_property() -> Outcome {
    let value = "[a-c]{0,3}";
    let strategy = (
        value,
        prop::collection::vec(prop::option::of(value), 0..12),
        0usize..4,
        any::<u64>(),
    );
    let mut runner = TestRunner::new(Config { cases: 10_000, failure_persistence: None, ..Config::default() });
    let result = runner.run(&strategy, |(winner, others, extra, shuffle)| {
        let winner = CellValue::from(winner);
        // strictly more than half: |others| + 1 + extra copies out of 2|others| + 1 + extra
        let mut outputs: Vec<Option<CellValue>> = others.iter().map(|o| o.clone().map(CellValue::from)).collect();
        outputs.extend(std::iter::repeat_n(Some(winner.clone()), others.len() + 1 + extra));
        let mut rng = Seed(shuffle).rng();
        for i in (1..outputs.len()).rev() {
            outputs.swap(i, rng::index(&mut rng, i + 1));
        }
        let a = aggregate(&TrialSet { source: "s".into(), outputs });
        prop_assert_eq!(a.target, Some(winner));
        Ok(())
    });
    match result {
        Ok(()) => outcome(true, "10000 generated trial sets"),
        Err(e) => outcome(false, format!("counterexample: {e}")),
    }
}

fn serialization() -> Outcome {
    let mut runner = TestRunner::new(Config { cases: 10_000, failure_persistence: None, ..Config::default() });
    let strategy = "[a-z<>/ sotre]{1,30}".prop_filter("marker-free", |s| tabxform::model::validate_cell(s).is_ok());
    let round_trip = runner.run(&strategy, |s| {
        let t = CellValue::from(s);
        let label = serialize_label(&t).unwrap();
        prop_assert_eq!(parse_output(label.as_str()), Some(t));
        Ok(())
    });
    let ctx = Context::new(vec![
        ExamplePair::new("Justin Trudeau", "jtrudeau"),
        ExamplePair::new("Paul Martin", "pmartin"),
    ])
    .unwrap();
    let prompt = serialize(&ctx, &"Jean Chretien".into()).unwrap();
    let expected = "<sos>Justin Trudeau<tr>jtrudeau<eoe>Paul Martin<tr>pmartin<eoe>Jean Chretien<tr><eos>";
    let label = serialize_label(&"jchretien".into()).unwrap();
    let worked = prompt.as_str() == expected && label.as_str() == "<sos>jchretien<eos>";
    let detail = match &round_trip {
        Ok(()) => format!("10000 round trips; worked example {}", if worked { "byte-exact" } else { "differs" }),
        Err(e) => format!("round trip failed: {e}"),
    };
    outcome(round_trip.is_ok() && worked, detail)
}

fn tabxform(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_tabxform")).args(args).output().expect("binary runs")
}

fn corpus_shape() -> Outcome {
    let dir = TempDir::new().unwrap();
    let mut bytes = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let r = tabxform(&["gen-train", "--seed", "10", "--out", out.to_str().unwrap()]);
        if !r.status.success() {
            return outcome(false, format!("gen-train failed: {}", String::from_utf8_lossy(&r.stderr)));
        }
        bytes.push(fs::read(out.join("corpus.jsonl")).unwrap());
    }
    let text = String::from_utf8(bytes[0].clone()).unwrap();
    let lines = text.lines().count();
    let train = text
        .lines()
        .filter(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["split"] == "train")
        .count();
    let identical = bytes[0] == bytes[1];
    outcome(
        lines == 20_000 && train == 16_000 && identical,
        format!("{lines} samples, {train} train, runs {}", if identical { "byte-identical" } else { "differ" }),
    )
}

const TOKEN_VAR: &str = "TABXFORM_ACCEPTANCE_TOKEN";

fn remote_join(dir: &Path, url: &str, out: &str) -> (i32, String) {
    let arg = |f: &str| dir.join(f).to_str().unwrap().to_string();
    let r = Command::new(env!("CARGO_BIN_EXE_tabxform"))
        .env(TOKEN_VAR, "secret")
        .args(["join", "--backend", "remote", "--endpoint", url, "--auth-env", TOKEN_VAR])
        .args(["--source", &arg("source.csv"), "--target", &arg("target.csv"), "--examples", &arg("examples.csv")])
        .args(["--retries", "1", "--backoff-ms", "1", "--seed", "11", "--out", &arg(out)])
        .output()
        .unwrap();
    let matches = fs::read_to_string(dir.join(out).join("matches.csv")).unwrap_or_default();
    (r.status.code().unwrap_or(-1), matches)
}

fn remote_contract() -> Outcome {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    fs::write(d.join("source.csv"), "value\nJean Chretien\nKim Campbell\nBrian Mulroney\n").unwrap();
    fs::write(d.join("target.csv"), "value\nbmulroney\njchretien\nkcampbell\n").unwrap();
    fs::write(
        d.join("examples.csv"),
        "source,target\nJustin Trudeau,jtrudeau\nStephen Harper,sharper\nPaul Martin,pmartin\n",
    )
    .unwrap();
    let canned = MockScript { require_token: Some("secret".into()), ..MockScript::default() }
        .complete("Jean Chretien", "<sos>jchretien<eos>")
        .complete("Kim Campbell", "kcampbel")
        .complete("Brian Mulroney", "bmulroney<eos>");
    let expected = "source,predicted,matched,distance,support,trials\n\
                    Jean Chretien,jchretien,jchretien,0,5,5\n\
                    Kim Campbell,kcampbel,kcampbell,1,5,5\n\
                    Brian Mulroney,bmulroney,bmulroney,0,5,5\n";

    let server = MockServer::start(canned.clone()).unwrap();
    let first = remote_join(d, &server.url(), "first");
    let second = remote_join(d, &server.url(), "second");
    let deterministic = first == second && first.0 == 0 && first.1 == expected;
    drop(server);

    let partial = canned.clone().reply("Kim Campbell", MockReply::status(500));
    let server = MockServer::start(partial).unwrap();
    let (partial_code, partial_matches) = remote_join(d, &server.url(), "partial");
    let absent_row = partial_matches.lines().nth(2).unwrap_or("");
    let partial_ok = partial_code == 0 && absent_row == "Kim Campbell,,,,0,5";
    drop(server);

    let failing = MockScript { default: MockReply::status(500), ..MockScript::default() };
    let server = MockServer::start(failing).unwrap();
    let (fail_code, _) = remote_join(d, &server.url(), "failing");
    drop(server);

    outcome(
        deterministic && partial_ok && fail_code == 3,
        format!(
            "canned run {}; one row scripted 500 -> exit {partial_code}, row absent {}; all rows 500 -> exit {fail_code}",
            if deterministic { "deterministic and as expected" } else { "unexpected" },
            absent_row == "Kim Campbell,,,,0,5"
        ),
    )
}

type Criterion = (u32, &'static str, Option<Duration>, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 11] = [
        (1, "grammar oracle equivalence", Some(Duration::from_secs(10)), grammar_oracle),
        (2, "edit distance oracle and metric axioms", Some(Duration::from_secs(30)), edit_distance_oracle),
        (3, "single-substring join", Some(Duration::from_secs(60)), single_substring_join),
        (4, "shallow grammar completeness", Some(Duration::from_secs(300)), shallow_completeness),
        (5, "synthesis soundness", None, synthesis_soundness),
        (6, "out-of-grammar honesty", Some(Duration::from_secs(60)), out_of_grammar_honesty),
        (7, "noise robustness", None, noise_robustness),
        (8, "aggregator majority", None, majority_property),
        (9, "serialization", None, serialization),
        (10, "corpus determinism and shape", None, corpus_shape),
        (11, "remote backend contract", None, remote_contract),
    ];
    let only: Option<Vec<u32>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect());
    let mut failed = Vec::new();
    for (id, name, limit, check) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let start = Instant::now();
        let mut result = check();
        let elapsed = start.elapsed();
        if let Some(limit) = limit {
            if elapsed > limit {
                result.pass = false;
                result.detail.push_str(&format!("; over the {}s limit", limit.as_secs()));
            }
        }
        let verdict = if result.pass { "PASS" } else { "FAIL" };
        println!("[{verdict}] {id:>2}. {name}: {} ({:.1}s)", result.detail, elapsed.as_secs_f64());
        if !result.pass {
            failed.push(id);
        }
    }
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
