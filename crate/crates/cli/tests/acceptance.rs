//! Acceptance checks, one PASS/FAIL line each. Run with
//! `cargo test -p weakpref-cli --test acceptance`.

use std::collections::HashMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use weakpref::evalharness::{lf_report, Selection};
use weakpref::features::{flesch_reading_ease, FLESCH_CEILING};
use weakpref::labelmodel::{confidence, filter_by_confidence, fit};
use weakpref::lfs::default_specs;
use weakpref::pipeline::{run, PipelineSettings};
use weakpref::stats::welch_t_test;
use weakpref::synth::{label_matrix, preference_corpus, CorpusSpec};
use weakpref::{rng, FeatureExtractor, LabelMatrix, LabelModelHyper, LabelingFunctions, Preference, Vote};

type Outcome = Result<String, String>;
type Check = (&'static str, fn() -> Option<Outcome>);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn within(limit: Duration, start: Instant) -> Result<(), String> {
    let took = start.elapsed();
    if took > limit {
        Err(format!("took {:.1}s, limit {:.0}s", took.as_secs_f64(), limit.as_secs_f64()))
    } else {
        Ok(())
    }
}

fn confidence_formula() -> Outcome {
    let start = Instant::now();
    let mut r = rng::seeded(1);
    for _ in 0..1000 {
        let p = rng::unit_f64(&mut r);
        let want = if p >= 0.5 { p } else { 1.0 - p };
        let got = confidence(p).map_err(|e| e.to_string())?;
        ensure!(got == want, "confidence({p}) = {got}, want {want}");
        let mirrored = confidence(1.0 - p).map_err(|e| e.to_string())?;
        ensure!((got - mirrored).abs() <= f64::EPSILON, "confidence({p}) != confidence(1 - {p})");
    }
    within(Duration::from_secs(1), start)?;
    Ok("1000 draws exact and symmetric".into())
}

fn flesch_ceiling() -> Outcome {
    let go = flesch_reading_ease("Go.").ok_or("no score for \"Go.\"")?;
    ensure!(go == FLESCH_CEILING && go == 121.22, "\"Go.\" scored {go}");
    let token = "[A-Za-z]{1,14}|[0-9]{1,4}|[A-Z]{2,6}";
    let sep = prop::sample::select(vec![" ", " ", ", ", ". ", "! ", "? ", "\n"]);
    let strategy = prop::collection::vec((token, sep), 1..60)
        .prop_map(|parts| parts.into_iter().map(|(t, s)| format!("{t}{s}")).collect::<String>());
    let mut runner = TestRunner::new(Config {
        cases: 10_000,
        failure_persistence: None,
        ..Config::default()
    });
    runner
        .run(&strategy, |text| {
            if let Some(score) = flesch_reading_ease(&text) {
                prop_assert!(score <= FLESCH_CEILING + 1e-9, "{score} for {text:?}");
            }
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok("\"Go.\" = 121.22, 10000 sequences under the ceiling".into())
}

fn all_patterns(m: usize) -> Vec<Vec<Vote>> {
    let mut rows = vec![Vec::new()];
    for _ in 0..m {
        rows = rows
            .into_iter()
            .flat_map(|r| {
                [Vote::PreferA, Vote::Abstain, Vote::PreferB].map(|v| {
                    let mut next = r.clone();
                    next.push(v);
                    next
                })
            })
            .collect();
    }
    rows
}

fn bayes(row: &[Vote], acc: &[f64], prior_b: f64) -> f64 {
    let joint = |y: Preference, prior: f64| {
        row.iter().zip(acc).fold(prior, |p, (v, a)| match v.preference() {
            None => p,
            Some(pref) if pref == y => p * a,
            Some(_) => p * (1.0 - a),
        })
    };
    let (b, a) = (joint(Preference::B, prior_b), joint(Preference::A, 1.0 - prior_b));
    b / (a + b)
}

fn posterior_enumeration() -> Outcome {
    let start = Instant::now();
    let mut checked = 0;
    let mut worst = 0.0f64;
    for m in 1..=4 {
        let truth = [0.85, 0.6, 0.7, 0.55];
        let (matrix, _) = label_matrix(2000, &truth[..m], 0.5, 0.2, 50 + m as u64);
        let fitted = fit(&matrix, &LabelModelHyper::default()).map_err(|e| e.to_string())?;
        for prior in [0.5, 0.3] {
            let mut params = fitted.clone();
            params.class_prior = prior;
            let acc = params.accuracies();
            for row in all_patterns(m) {
                let got = params.predict_proba(&row).map_err(|e| e.to_string())?;
                let diff = (got - bayes(&row, &acc, prior)).abs();
                worst = worst.max(diff);
                ensure!(diff <= 1e-10, "m={m} prior={prior} {row:?}: off by {diff:e}");
                checked += 1;
            }
        }
    }
    within(Duration::from_secs(1), start)?;
    Ok(format!("{checked} patterns, max error {worst:.1e}"))
}

fn parameter_recovery() -> Outcome {
    let start = Instant::now();
    let truth = [0.8, 0.6, 0.7];
    let mut worst = 0.0f64;
    for seed in 0..5 {
        let (matrix, _) = label_matrix(5000, &truth, 0.5, 0.1, seed);
        let params = fit(&matrix, &LabelModelHyper::default()).map_err(|e| e.to_string())?;
        for (got, want) in params.accuracies().iter().zip(truth) {
            let err = (got - want).abs();
            worst = worst.max(err);
            ensure!(err <= 0.05, "seed {seed}: accuracy {got:.3} for true {want}");
        }
    }
    within(Duration::from_secs(30), start)?;
    Ok(format!("5 seeds, max error {worst:.3}"))
}

fn standard_setup() -> (FeatureExtractor, LabelingFunctions) {
    let ex = FeatureExtractor::default();
    let lfs = LabelingFunctions::build(&default_specs(), &ex).expect("default LFs build");
    (ex, lfs)
}

fn filter_monotonicity() -> Outcome {
    let (ex, lfs) = standard_setup();
    let taus = [0.5, 0.6, 0.7, 0.8, 0.9];
    let mut wins = 0;
    let mut summary = Vec::new();
    for seed in 0..5u64 {
        let samples = preference_corpus(&CorpusSpec::standard(10_000, 100 + seed), &ex);
        let settings = PipelineSettings {
            seed,
            selections: Vec::new(),
            ..Default::default()
        };
        let out = run(&samples, &ex, &lfs, &settings).map_err(|e| e.to_string())?;
        let gold = out.split.hidden_gold.lookup();
        let mut kept = Vec::new();
        let mut acc = Vec::new();
        for &tau in &taus {
            let sel = filter_by_confidence(&out.labeling.predictions, tau).map_err(|e| e.to_string())?;
            let correct = sel.iter().filter(|p| gold.get(p.sample_id.as_str()) == Some(&p.weak_label)).count();
            kept.push(sel.len());
            acc.push(correct as f64 / sel.len().max(1) as f64);
        }
        ensure!(kept.windows(2).all(|w| w[1] <= w[0]), "seed {seed}: kept counts {kept:?} increase with tau");
        ensure!(kept[4] < kept[0], "seed {seed}: tau 0.9 keeps {} of {}", kept[4], kept[0]);
        if acc[4] > acc[0] {
            wins += 1;
        }
        summary.push(format!("{:.3}/{:.3} kept {}/{}", acc[4], acc[0], kept[4], kept[0]));
    }
    ensure!(wins >= 4, "accuracy at 0.9 beat 0.5 in only {wins}/5 seeds: {summary:?}");
    Ok(format!("acc(0.9) > acc(0.5) in {wins}/5 seeds [{}]", summary.join(", ")))
}

fn diminishing_returns() -> Outcome {
    let start = Instant::now();
    let (ex, lfs) = standard_setup();
    let selections = vec![
        Selection::TopN(250),
        Selection::TopN(500),
        Selection::TopN(1000),
        Selection::TopN(2000),
        Selection::TopN(4000),
        Selection::All,
    ];
    const REPLICATES: u64 = 8;
    let mut mean_gain: HashMap<&str, Vec<f64>> = HashMap::new();
    for r in 0..REPLICATES {
        let samples = preference_corpus(&CorpusSpec::standard(10_000, 100 + r), &ex);
        for (name, frac) in [("1%", 0.01), ("50%", 0.5)] {
            let settings = PipelineSettings {
                seed: r,
                baseline_frac: frac,
                selections: selections.clone(),
                ..Default::default()
            };
            let out = run(&samples, &ex, &lfs, &settings).map_err(|e| e.to_string())?;
            let gains = mean_gain.entry(name).or_insert_with(|| vec![0.0; selections.len()]);
            for (g, row) in gains.iter_mut().zip(&out.rows[1..]) {
                *g += (row.f1 - out.rows[0].f1) / REPLICATES as f64;
            }
        }
    }
    let best = |name: &str| mean_gain[name].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (small, large) = (best("1%"), best("50%"));
    within(Duration::from_secs(120), start)?;
    ensure!(small > 0.0, "1% baseline gain {small:+.4} not positive");
    ensure!(large <= small, "50% baseline gain {large:+.4} above 1% gain {small:+.4}");
    Ok(format!("best mean F1 gain {small:+.4} at 1%, {large:+.4} at 50%"))
}

fn lf_metric_arithmetic() -> Outcome {
    let gold: Vec<Preference> = (0..100).map(|i| if i % 3 == 0 { Preference::A } else { Preference::B }).collect();
    let against = |p: Preference| if p == Preference::A { Vote::PreferB } else { Vote::PreferA };
    let toward = |p: Preference| if p == Preference::A { Vote::PreferA } else { Vote::PreferB };
    // lf0: rows 0..52 right, 52..88 wrong, rest abstain.
    // lf1: every row, right unless i % 5 == 0 or i % 7 == 0.
    // lf2: never votes.
    let rows: Vec<Vec<Vote>> = gold
        .iter()
        .enumerate()
        .map(|(i, &g)| {
            let v0 = match i {
                0..52 => toward(g),
                52..88 => against(g),
                _ => Vote::Abstain,
            };
            let v1 = if i % 5 == 0 || i % 7 == 0 { against(g) } else { toward(g) };
            vec![v0, v1, Vote::Abstain]
        })
        .collect();
    let m = LabelMatrix::new(
        (0..100).map(|i| format!("r{i}")).collect(),
        vec!["lf0".into(), "lf1".into(), "lf2".into()],
        rows,
    )
    .map_err(|e| e.to_string())?;
    let gold: Vec<Option<Preference>> = gold.into_iter().map(Some).collect();
    let report = lf_report(&m, &gold).map_err(|e| e.to_string())?;
    // multiples of 5 or 7 below 100: 20 + 15 - 3 = 32 wrong
    let want = [(88, 52, 0.88, Some(52.0 / 88.0)), (100, 68, 1.0, Some(0.68)), (0, 0, 0.0, None)];
    for (s, (cast, correct, cov, acc)) in report.lfs.iter().zip(want) {
        ensure!(
            s.n_cast == cast && s.n_correct == correct && s.coverage == cov && s.accuracy == acc,
            "{}: got {}/{} cov {} acc {:?}",
            s.name,
            s.n_correct,
            s.n_cast,
            s.coverage,
            s.accuracy
        );
    }
    Ok(format!("88 cast / 52 correct -> {:.2} / {:.6}", report.lfs[0].coverage, report.lfs[0].accuracy.unwrap()))
}

// From crates/core/tests/oracles/welch_p.py, Simpson integration of the t density.
const WELCH_WORKED_P: f64 = 0.34659350708731973;

fn welch_oracle() -> Outcome {
    let r = welch_t_test(&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 3.0, 4.0, 5.0, 6.0]).map_err(|e| e.to_string())?;
    ensure!((r.stat + 1.0).abs() < 1e-12, "stat {}", r.stat);
    ensure!((r.p_value - WELCH_WORKED_P).abs() < 1e-3, "p {} vs oracle {WELCH_WORKED_P}", r.p_value);
    for xs in [vec![1.0, 2.0, 3.0, 4.0], vec![2.5, 2.5, 2.5]] {
        let same = welch_t_test(&xs, &xs).map_err(|e| e.to_string())?;
        ensure!(same.stat == 0.0 && same.p_value == 1.0, "identical {xs:?}: stat {} p {}", same.stat, same.p_value);
    }
    Ok(format!("stat -1, p {:.6} (oracle {WELCH_WORKED_P:.6})", r.p_value))
}

fn repo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn run_all(config: &Path, out: &Path, input: Option<&Path>) -> Result<(), String> {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_weakpref"));
    cmd.env_remove("WEAKPREF_INPUT").env_remove("WEAKPREF_OUT_DIR");
    cmd.arg("all").arg("--config").arg(config).arg("--out-dir").arg(out);
    if let Some(input) = input {
        cmd.arg("--input").arg(input);
    }
    let o = cmd.output().map_err(|e| e.to_string())?;
    ensure!(o.status.success(), "weakpref all failed: {}", String::from_utf8_lossy(&o.stderr));
    Ok(())
}

fn read_json(path: &Path) -> Result<serde_json::Value, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

/// `None` when no export is configured.
fn hh_rlhf_reproduction() -> Option<Outcome> {
    let input = PathBuf::from(std::env::var_os("WEAKPREF_HH_RLHF_JSONL")?);
    Some((|| {
        let out = tempfile::tempdir().map_err(|e| e.to_string())?;
        run_all(&repo().join("configs/hh_rlhf.toml"), out.path(), Some(&input))?;
        let analyze = read_json(&out.path().join("analyze.json"))?;
        let length = analyze["features"]
            .as_array()
            .and_then(|fs| fs.iter().find(|f| f["feature"] == "length_chars"))
            .ok_or("no length row in analyze.json")?;
        let r = &length["result"];
        let (chosen, rejected, p) = (r["mean_chosen"].as_f64(), r["mean_rejected"].as_f64(), r["p_value"].as_f64());
        let (chosen, rejected, p) = (chosen.unwrap_or(f64::NAN), rejected.unwrap_or(f64::NAN), p.unwrap_or(f64::NAN));
        ensure!(chosen > rejected && p < 0.01, "length chosen {chosen} rejected {rejected} p {p}");
        let evaluate = read_json(&out.path().join("evaluate.json"))?;
        let acc = evaluate["train_accuracy"].as_f64().ok_or("no train_accuracy")?;
        ensure!((0.50..=0.62).contains(&acc), "train accuracy {acc:.4} outside [0.50, 0.62]");
        Ok(format!("length {chosen:.1} > {rejected:.1} (p {p:.2e}), train accuracy {acc:.4}"))
    })())
}

fn tree(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let bytes = std::fs::read(&path).unwrap();
                out.push((path.strip_prefix(dir).unwrap().to_path_buf(), bytes));
            }
        }
    }
    out.sort();
    out
}

fn determinism() -> Outcome {
    let config = repo().join("configs/fixture.toml");
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_all(&config, a.path(), None)?;
    run_all(&config, b.path(), None)?;
    let (ta, tb) = (tree(a.path()), tree(b.path()));
    ensure!(!ta.is_empty(), "no output written");
    for ((pa, ba), (pb, bb)) in ta.iter().zip(&tb) {
        ensure!(pa == pb && ba == bb, "{} differs", pa.display());
    }
    ensure!(ta.len() == tb.len(), "different file counts");
    Ok(format!("{} files byte-identical", ta.len()))
}

fn main() -> ExitCode {
    let checks: [Check; 10] = [
        ("confidence formula", || Some(confidence_formula())),
        ("flesch ceiling", || Some(flesch_ceiling())),
        ("posterior enumeration", || Some(posterior_enumeration())),
        ("parameter recovery", || Some(parameter_recovery())),
        ("confidence filter monotonicity", || Some(filter_monotonicity())),
        ("weak label gain shrinks with baseline size", || Some(diminishing_returns())),
        ("lf metric arithmetic", || Some(lf_metric_arithmetic())),
        ("welch oracle", || Some(welch_oracle())),
        ("hh-rlhf reproduction", hh_rlhf_reproduction),
        ("determinism", || Some(determinism())),
    ];
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Some(Err("panicked".into())));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Some(Ok(detail)) => println!("PASS {:>2} {name}: {detail} ({secs:.2}s)", i + 1),
            Some(Err(why)) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why} ({secs:.2}s)", i + 1);
            }
            None => println!("SKIP {:>2} {name}: set WEAKPREF_HH_RLHF_JSONL to a local export", i + 1),
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
