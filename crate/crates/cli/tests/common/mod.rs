//! Helpers shared by the CLI integration tests.
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use reasonconf_core::gateway::FixtureEntry;
use reasonconf_core::pipeline::to_jsonl;
use reasonconf_core::tasks::{render_prompt, TaskSpec};
use reasonconf_core::{Question, TaskKind};

pub fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_reasonconf"));
    cmd.env_remove("REASONCONF_ENDPOINT")
        .env_remove("REASONCONF_API_KEY")
        .env("RUST_LOG", "warn");
    cmd
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

#[track_caller]
pub fn run_ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed with {:?}\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 path")
}

pub fn numeric(id: &str, text: &str, answer: &str) -> Question {
    Question {
        question_id: id.into(),
        task: TaskKind::Numeric,
        question: text.into(),
        choices: vec![],
        numbers: vec![],
        code: String::new(),
        input: String::new(),
        answer: Some(answer.into()),
    }
}

/// A response in the expected two-section format.
pub fn output(reasoning: &str, value: &str) -> String {
    format!("**Reasoning:** {reasoning}\n**Final answer:** \"The answer is ${value}$\"")
}

/// Three arithmetic questions with five scripted outputs each. Sample
/// reasoning has between one and three statements.
pub fn three_questions() -> (Vec<Question>, Vec<Vec<String>>) {
    let qs = vec![
        numeric("q1", "What is 2 + 2?", "4"),
        numeric("q2", "What is 3 * 5?", "15"),
        numeric("q3", "What is 10 - 7?", "3"),
    ];
    let outs = vec![
        vec![
            output("Two plus two.\nThat makes four.", "4"),
            output("Two and two is five.", "5"),
            output("Add them.\nCount up.\nFour.", "4"),
            output("Double two.", "4"),
            "I am not sure.".to_string(),
        ],
        vec![
            output("Three fives.\nFifteen.", "15"),
            output("Five threes.", "15"),
            output("Three plus five.", "8"),
            output("Multiply.\nGet fifteen.", "15"),
            output("Guess.", "16"),
        ],
        vec![
            output("Ten minus seven.", "3"),
            output("Seven from ten.\nThree left.", "3"),
            output("Subtract badly.", "4"),
            output("Count down.\nThree.", "3"),
            output("Ten take seven.\nIs three.", "3"),
        ],
    ];
    (qs, outs)
}

pub fn write_questions(dir: &Path, qs: &[Question]) -> PathBuf {
    let path = dir.join("questions.jsonl");
    std::fs::write(&path, to_jsonl(qs)).unwrap();
    path
}

pub fn write_fixture(dir: &Path, name: &str, entries: &[FixtureEntry]) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, to_jsonl(entries)).unwrap();
    path
}

pub fn generation_fixture(qs: &[Question], outs: &[Vec<String>]) -> Vec<FixtureEntry> {
    qs.iter()
        .zip(outs)
        .map(|(q, o)| {
            let prompt = render_prompt(&TaskSpec::for_kind(q.task), q).unwrap();
            FixtureEntry::completions(&prompt, o.clone())
        })
        .collect()
}

pub fn sha256_file(path: &Path) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(std::fs::read(path).unwrap()))
}

pub fn manifest(out: &Path) -> serde_json::Value {
    let mut name = out.file_name().unwrap().to_os_string();
    name.push(".manifest.json");
    serde_json::from_str(&std::fs::read_to_string(out.with_file_name(name)).unwrap()).unwrap()
}
