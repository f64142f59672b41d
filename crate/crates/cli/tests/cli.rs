//! End-to-end runs of the `reasonconf` binary against scripted fixtures.

mod common;

use common::*;
use reasonconf_core::gateway::{FailureKind, FixtureEntry};
use reasonconf_core::pipeline::{read_jsonl, to_jsonl};
use reasonconf_core::prompts::render_judge;
use reasonconf_core::tasks::{render_prompt, TaskSpec};
use reasonconf_core::{ConfidenceReport, PreferenceRecord, SampleRecord};

struct Workspace {
    dir: tempfile::TempDir,
    questions: std::path::PathBuf,
    endpoint: String,
}

fn workspace() -> Workspace {
    let dir = tempfile::tempdir().unwrap();
    let (qs, outs) = three_questions();
    let questions = write_questions(dir.path(), &qs);
    let fixture = write_fixture(dir.path(), "fixture.jsonl", &generation_fixture(&qs, &outs));
    let endpoint = format!("mock://{}", p(&fixture));
    Workspace {
        dir,
        questions,
        endpoint,
    }
}

fn generate(ws: &Workspace) -> std::path::PathBuf {
    let out = ws.dir.path().join("samples.jsonl");
    run_ok(&[
        "--endpoint",
        &ws.endpoint,
        "generate",
        "--questions",
        p(&ws.questions),
        "--out",
        p(&out),
    ]);
    out
}

fn score(ws: &Workspace, samples: &std::path::Path, method: &str, name: &str) -> std::path::PathBuf {
    let out = ws.dir.path().join(name);
    run_ok(&[
        "--endpoint",
        &ws.endpoint,
        "score",
        "--samples",
        p(samples),
        "--out",
        p(&out),
        "--method",
        method,
    ]);
    out
}

fn records(path: &std::path::Path) -> Vec<SampleRecord> {
    read_jsonl(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn generate_writes_one_record_per_sample() {
    let ws = workspace();
    let out = generate(&ws);
    let recs = records(&out);
    assert_eq!(recs.len(), 15);
    assert_eq!(recs.iter().filter(|r| !r.is_parsed()).count(), 1);
    assert_eq!(recs[0].answer_correct, Some(true));
    assert_eq!(recs[1].answer_correct, Some(false));
    assert_eq!(recs[4].answer_correct, Some(false));

    let m = manifest(&out);
    assert_eq!(m["command"], "generate");
    assert_eq!(m["outputs"][0]["sha256"], sha256_file(&out));
    assert_eq!(m["inputs"].as_array().unwrap().len(), 2);
    assert!(!m.to_string().contains("timestamp"));
}

#[test]
fn empty_question_file_gives_empty_output() {
    let dir = tempfile::tempdir().unwrap();
    let questions = dir.path().join("q.jsonl");
    std::fs::write(&questions, "").unwrap();
    let out = dir.path().join("s.jsonl");
    // No endpoint is needed when there is nothing to sample.
    let res = run_ok(&["generate", "--questions", p(&questions), "--out", p(&out)]);
    assert_eq!(std::fs::read_to_string(&out).unwrap(), "");
    assert!(String::from_utf8_lossy(&res.stderr).contains("no questions"));
}

#[test]
fn malformed_question_line_exits_3_with_line_number() {
    let ws = workspace();
    let bad = ws.dir.path().join("bad.jsonl");
    let text = std::fs::read_to_string(&ws.questions).unwrap();
    std::fs::write(&bad, format!("{text}{{not json\n")).unwrap();
    let res = run(&[
        "--endpoint",
        &ws.endpoint,
        "generate",
        "--questions",
        p(&bad),
        "--out",
        p(&ws.dir.path().join("s.jsonl")),
    ]);
    assert_eq!(res.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&res.stderr).contains("line 4"));
}

#[test]
fn missing_endpoint_is_a_usage_error() {
    let ws = workspace();
    let res = run(&[
        "generate",
        "--questions",
        p(&ws.questions),
        "--out",
        p(&ws.dir.path().join("s.jsonl")),
    ]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn endpoint_can_come_from_the_environment_or_config() {
    let ws = workspace();
    let out = ws.dir.path().join("env.jsonl");
    let res = bin()
        .env("REASONCONF_ENDPOINT", &ws.endpoint)
        .args(["generate", "--questions", p(&ws.questions), "--out", p(&out)])
        .output()
        .unwrap();
    assert!(res.status.success());
    assert_eq!(records(&out).len(), 15);

    let cfg = ws.dir.path().join("cfg.toml");
    std::fs::write(&cfg, format!("endpoint = {:?}\n[presets.train]\nn = 2\n", ws.endpoint)).unwrap();
    let out = ws.dir.path().join("cfg.jsonl");
    run_ok(&["--config", p(&cfg), "generate", "--questions", p(&ws.questions), "--out", p(&out)]);
    assert_eq!(records(&out).len(), 6);

    std::fs::write(&cfg, "endpiont = \"x\"\n").unwrap();
    let res = run(&["--config", p(&cfg), "generate", "--questions", p(&ws.questions), "--out", p(&out)]);
    assert_eq!(res.status.code(), Some(3));
}

#[test]
fn unknown_selector_is_a_usage_error() {
    let ws = workspace();
    let samples = generate(&ws);
    let res = run(&["eval", "--samples", p(&samples), "--selector", "oracle"]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn gateway_failure_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let (qs, _) = three_questions();
    let questions = write_questions(dir.path(), &qs[..1]);
    let prompt = render_prompt(&TaskSpec::for_kind(qs[0].task), &qs[0]).unwrap();
    let fixture = write_fixture(
        dir.path(),
        "f.jsonl",
        &[FixtureEntry::failing(&prompt, FailureKind::Auth)],
    );
    let res = run(&[
        "--endpoint",
        &format!("mock://{}", p(&fixture)),
        "generate",
        "--questions",
        p(&questions),
        "--out",
        p(&dir.path().join("s.jsonl")),
    ]);
    assert_eq!(res.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&res.stderr).contains("q1"));
}

#[test]
fn scoring_makes_one_call_per_statement_plus_one() {
    let ws = workspace();
    let samples = generate(&ws);
    let recs = records(&samples);
    let parsed: Vec<&SampleRecord> = recs.iter().filter(|r| r.is_parsed()).collect();
    let statements: usize = parsed.iter().map(|r| r.statements.len()).sum();

    let sw = score(&ws, &samples, "statementwise", "sw.jsonl");
    let stats = &manifest(&sw)["settings"]["command"]["stats"];
    assert_eq!(stats["reasoning_calls"], statements);
    assert_eq!(stats["answer_calls"], parsed.len());
    assert_eq!(stats["skipped_unparsed"], 1);
    for r in records(&sw).iter().filter(|r| r.is_parsed()) {
        let c = r.confidence.as_ref().unwrap();
        assert_eq!(c.per_statement.as_ref().unwrap().len(), r.statements.len());
    }

    let mono = score(&ws, &samples, "monolithic", "mono.jsonl");
    let stats = &manifest(&mono)["settings"]["command"]["stats"];
    assert_eq!(stats["reasoning_calls"], parsed.len());
    assert_eq!(stats["answer_calls"], parsed.len());

    // Re-scoring with the same method leaves records alone and needs no endpoint.
    let again = ws.dir.path().join("again.jsonl");
    let res = run_ok(&["score", "--samples", p(&mono), "--out", p(&again), "--method", "monolithic"]);
    assert_eq!(std::fs::read(&again).unwrap(), std::fs::read(&mono).unwrap());
    assert!(String::from_utf8_lossy(&res.stderr).contains("already scored"));
}

#[test]
fn pairs_follow_the_rule() {
    let ws = workspace();
    let samples = generate(&ws);
    let scored = score(&ws, &samples, "monolithic", "scored.jsonl");
    let core = ws.dir.path().join("core.jsonl");
    run_ok(&["pairs", "--scored", p(&scored), "--out", p(&core), "--rule", "core-po"]);
    let pairs: Vec<PreferenceRecord> = read_jsonl(&std::fs::read_to_string(&core).unwrap()).unwrap();
    assert_eq!(pairs.len(), 3);
    for pair in &pairs {
        assert!(pair.meta.scores.chosen >= pair.meta.scores.rejected);
        assert_ne!(pair.chosen, pair.rejected);
        assert!(pair.prompt.contains("What is"));
    }

    // Vote gaps are 3-1 (q1), 3-1 (q2) and 4-1 (q3): only q3 reaches 3.
    let sc = ws.dir.path().join("sc.jsonl");
    run_ok(&["pairs", "--scored", p(&scored), "--out", p(&sc), "--rule", "sc-po"]);
    let pairs: Vec<PreferenceRecord> = read_jsonl(&std::fs::read_to_string(&sc).unwrap()).unwrap();
    assert_eq!(pairs.len(), 1);
    assert_eq!(pairs[0].meta.question_id, "q3");
    assert!(pairs[0].chosen.contains("$3$"));
    assert!(pairs[0].rejected.contains("$4$"));
}

#[test]
fn judge_labels_reasoning_of_correct_answers() {
    let ws = workspace();
    let samples = generate(&ws);
    let recs = records(&samples);
    let entries: Vec<FixtureEntry> = recs
        .iter()
        .filter(|r| r.answer_correct == Some(true))
        .map(|r| {
            let verdict = if r.statements.len() > 1 { "correct" } else { "incorrect" };
            FixtureEntry::completions(
                &render_judge(&r.question.display_text(), &r.reasoning_text),
                vec![format!("{{\"verdict\": \"{verdict}\"}}")],
            )
        })
        .collect();
    let judge_fixture = write_fixture(ws.dir.path(), "judge.jsonl", &entries);
    let out = ws.dir.path().join("judged.jsonl");
    run_ok(&[
        "--endpoint",
        &ws.endpoint,
        "--judge-endpoint",
        &format!("mock://{}", p(&judge_fixture)),
        "judge",
        "--samples",
        p(&samples),
        "--out",
        p(&out),
    ]);
    for r in records(&out) {
        use reasonconf_core::Verdict;
        let expected = match r.answer_correct {
            Some(true) if r.statements.len() > 1 => Some(Verdict::Correct),
            Some(_) => Some(Verdict::Incorrect),
            None => None,
        };
        assert_eq!(r.reasoning_verdict, expected, "{}:{}", r.question_id, r.sample_index);
    }
}

#[test]
fn sc_and_ptrue_pick_differently_on_a_crafted_file() {
    let dir = tempfile::tempdir().unwrap();
    let q = numeric("q", "What is 6 * 7?", "42");
    let raws = [output("Six sevens.", "42"), output("Guess.", "41"), output("Guess.", "41")];
    let confidences = [0.9, 0.2, 0.3];
    let recs: Vec<SampleRecord> = raws
        .iter()
        .zip(confidences)
        .enumerate()
        .map(|(i, (raw, c))| {
            let mut r = SampleRecord::from_output(&q, i, raw);
            r.confidence = Some(ConfidenceReport::monolithic(c, c, 0.0));
            r
        })
        .collect();
    let samples = dir.path().join("s.jsonl");
    std::fs::write(&samples, to_jsonl(&recs)).unwrap();

    let eval = |selector: &str| -> serde_json::Value {
        let out = run_ok(&["eval", "--samples", p(&samples), "--selector", selector]);
        serde_json::from_slice(&out.stdout).unwrap()
    };
    let sc = eval("sc");
    let ptrue = eval("ptrue");
    assert_eq!(sc["selections"][0]["sample_index"], 1);
    assert_eq!(sc["accuracy"], 0.0);
    assert_eq!(ptrue["selections"][0]["sample_index"], 0);
    assert_eq!(ptrue["accuracy"], 1.0);
    assert_eq!(eval("greedy")["selections"][0]["sample_index"], 0);
}

#[test]
fn curves_write_one_row_per_bin() {
    let ws = workspace();
    let samples = generate(&ws);
    let scored = score(&ws, &samples, "monolithic", "scored.jsonl");
    let mut recs = records(&scored);
    for r in &mut recs {
        if r.answer_correct.is_some() {
            r.reasoning_verdict = Some(if r.answer_correct == Some(true) {
                reasonconf_core::Verdict::Correct
            } else {
                reasonconf_core::Verdict::Incorrect
            });
        }
    }
    let judged = ws.dir.path().join("judged.jsonl");
    std::fs::write(&judged, to_jsonl(&recs)).unwrap();
    let out = ws.dir.path().join("curve.csv");
    run_ok(&["curves", "--samples", p(&judged), "--out", p(&out), "--bins", "5"]);
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "bin_lo,bin_hi,answer_acc,reason_acc,count");
    assert_eq!(lines.len(), 6);
    let total: usize = lines[1..]
        .iter()
        .map(|l| l.rsplit(',').next().unwrap().parse::<usize>().unwrap())
        .sum();
    assert_eq!(total, 14);

    let res = run(&["curves", "--samples", p(&judged), "--out", p(&out), "--bins", "0"]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn train_toy_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let go = |name: &str| {
        let log = dir.path().join(format!("{name}.jsonl"));
        let policy = dir.path().join(format!("{name}.json"));
        run_ok(&[
            "--seed",
            "5",
            "train-toy",
            "--out",
            p(&log),
            "--policy-out",
            p(&policy),
            "--steps",
            "30",
        ]);
        (std::fs::read(&log).unwrap(), std::fs::read(&policy).unwrap())
    };
    let (log_a, policy_a) = go("a");
    let (log_b, policy_b) = go("b");
    assert_eq!(log_a, log_b);
    assert_eq!(policy_a, policy_b);
    assert_eq!(String::from_utf8(log_a).unwrap().lines().count(), 30);
}

#[test]
fn train_toy_on_pairs_and_on_nothing() {
    let ws = workspace();
    let samples = generate(&ws);
    let scored = score(&ws, &samples, "monolithic", "scored.jsonl");
    let pairs = ws.dir.path().join("pairs.jsonl");
    run_ok(&["pairs", "--scored", p(&scored), "--out", p(&pairs)]);
    let log = ws.dir.path().join("log.jsonl");
    let policy = ws.dir.path().join("policy.json");
    run_ok(&["train-toy", "--pairs", p(&pairs), "--out", p(&log), "--policy-out", p(&policy)]);
    let steps: Vec<serde_json::Value> = read_jsonl(&std::fs::read_to_string(&log).unwrap()).unwrap();
    assert_eq!(steps.len(), 3);
    for s in &steps {
        if s["status"] == "updated" {
            assert!(s["margin_after"].as_f64() > s["margin_before"].as_f64());
        }
    }

    let empty = ws.dir.path().join("empty.jsonl");
    std::fs::write(&empty, "").unwrap();
    let res = run_ok(&["train-toy", "--pairs", p(&empty), "--out", p(&log), "--policy-out", p(&policy)]);
    assert_eq!(std::fs::read_to_string(&log).unwrap(), "");
    assert!(String::from_utf8_lossy(&res.stderr).contains("no preference pairs"));
}

#[test]
fn replay_reproduces_and_detects_changed_inputs() {
    let ws = workspace();
    let samples = generate(&ws);
    let scored = score(&ws, &samples, "statementwise", "scored.jsonl");
    let manifest_file = ws.dir.path().join("scored.jsonl.manifest.json");
    let before = std::fs::read(&scored).unwrap();
    std::fs::remove_file(&scored).unwrap();
    run_ok(&["replay", "--manifest", p(&manifest_file)]);
    assert_eq!(std::fs::read(&scored).unwrap(), before);

    std::fs::write(&samples, "").unwrap();
    let res = run(&["replay", "--manifest", p(&manifest_file)]);
    assert_eq!(res.status.code(), Some(3));
}

#[test]
fn unwritable_output_exits_5() {
    let ws = workspace();
    let blocker = ws.dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let res = run(&[
        "--endpoint",
        &ws.endpoint,
        "generate",
        "--questions",
        p(&ws.questions),
        "--out",
        p(&blocker.join("s.jsonl")),
    ]);
    assert_eq!(res.status.code(), Some(5));
}
