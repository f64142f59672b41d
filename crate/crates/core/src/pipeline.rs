//! Pipeline stages over line-oriented records: generate, score, judge,
//! pair, evaluate and tabulate.
//!
//! Every stage keeps record order equal to input order, whatever order the
//! per-question work finishes in.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::confidence::{
    answer_confidence, monolithic_reasoning_confidence, select_distractors,
    statementwise_reasoning_confidence, vote_confidence, ConfidenceError, ConfidenceOptions,
    ConfidenceReport, ReasoningMethod,
};
use crate::gateway::{Gateway, GatewayError, SamplingConfig};
use crate::pairs::{
    build_core_pair, build_sc_pair, PairRule, PreferenceRecord, ScoredSample,
    DEFAULT_TIE_EPSILON, DEFAULT_VOTE_GAP,
};
use crate::selection::{
    select_best_by, select_ptrue, select_sc, Candidate, CurvePoint, Metric, SelectError,
};
use crate::tasks::{
    is_correct, judge_reasoning, parse_output, render_prompt, JudgeError, ParseFailure, Question,
    QuestionError, TaskSpec, Verdict,
};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error(transparent)]
    Question(#[from] QuestionError),
    #[error("question {question_id}: {source}")]
    Gateway {
        question_id: String,
        source: GatewayError,
    },
    #[error("question {question_id}: {message}")]
    Invariant { question_id: String, message: String },
}

impl PipelineError {
    fn from_confidence(question_id: &str, e: ConfidenceError) -> Self {
        match e {
            ConfidenceError::Gateway(source) => PipelineError::Gateway {
                question_id: question_id.to_string(),
                source,
            },
            other => PipelineError::Invariant {
                question_id: question_id.to_string(),
                message: other.to_string(),
            },
        }
    }
}

/// Parses one JSON value per non-blank line.
pub fn read_jsonl<T: DeserializeOwned>(text: &str) -> Result<Vec<T>, PipelineError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| PipelineError::Malformed {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn to_jsonl<T: Serialize>(items: &[T]) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("records serialize"));
        out.push('\n');
    }
    out
}

/// Runs `f` over `items` on up to `workers` threads; results keep input
/// order.
pub fn parallel_map<T: Sync, R: Send>(
    items: &[T],
    workers: usize,
    f: impl Fn(&T) -> R + Sync,
) -> Vec<R> {
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..workers.clamp(1, items.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                slots.lock().expect("result lock poisoned")[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .expect("result lock poisoned")
        .into_iter()
        .map(|r| r.expect("every item processed"))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseStatus {
    Ok,
    SplitError,
    ExtractError,
}

/// One sampled output and everything later stages attach to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub question_id: String,
    pub sample_index: usize,
    pub question: Question,
    pub raw_text: String,
    pub parse_status: ParseStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parse_error: Option<String>,
    #[serde(default)]
    pub reasoning_text: String,
    #[serde(default)]
    pub statements: Vec<String>,
    #[serde(default)]
    pub answer_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub canonical_answer: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer_correct: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<ConfidenceReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score_error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reasoning_verdict: Option<Verdict>,
}

impl SampleRecord {
    pub fn from_output(question: &Question, sample_index: usize, raw_text: &str) -> Self {
        let mut rec = SampleRecord {
            question_id: question.question_id.clone(),
            sample_index,
            question: question.clone(),
            raw_text: raw_text.to_string(),
            parse_status: ParseStatus::Ok,
            parse_error: None,
            reasoning_text: String::new(),
            statements: Vec::new(),
            answer_text: String::new(),
            canonical_answer: None,
            answer_correct: None,
            confidence: None,
            score_error: None,
            reasoning_verdict: None,
        };
        match parse_output(question.task, &question.question_id, sample_index, raw_text) {
            Ok(sample) => {
                rec.answer_correct = is_correct(question, &sample);
                rec.reasoning_text = sample.reasoning_text;
                rec.statements = sample.statements;
                rec.answer_text = sample.answer_text;
                rec.canonical_answer = Some(sample.canonical_answer);
            }
            Err(e) => {
                rec.parse_status = match e {
                    ParseFailure::Split(_) => ParseStatus::SplitError,
                    ParseFailure::Extract(_) => ParseStatus::ExtractError,
                };
                rec.parse_error = Some(e.to_string());
                if let Ok(s) = crate::tasks::split_sections(raw_text) {
                    rec.reasoning_text = s.reasoning_text().to_string();
                    rec.statements = crate::tasks::segment_statements(&rec.reasoning_text);
                    rec.answer_text = s.answer_text().to_string();
                }
                if question.task == crate::tasks::TaskKind::Game24 || question.answer.is_some() {
                    rec.answer_correct = Some(false);
                }
            }
        }
        rec
    }

    pub fn is_parsed(&self) -> bool {
        self.parse_status == ParseStatus::Ok
    }
}

/// Groups records by question, keeping first-appearance order.
pub fn group_by_question(records: &[SampleRecord]) -> Vec<Vec<&SampleRecord>> {
    let mut order: Vec<&str> = Vec::new();
    let mut groups: HashMap<&str, Vec<&SampleRecord>> = HashMap::new();
    for r in records {
        let g = groups.entry(&r.question_id).or_insert_with(|| {
            order.push(&r.question_id);
            Vec::new()
        });
        g.push(r);
    }
    order
        .into_iter()
        .map(|q| {
            let mut g = groups.remove(q).expect("grouped");
            g.sort_by_key(|r| r.sample_index);
            g
        })
        .collect()
}

/// Samples `cfg.n` outputs per question.
pub fn generate_samples<G: Gateway + ?Sized>(
    questions: &[Question],
    gateway: &G,
    cfg: &SamplingConfig,
    workers: usize,
) -> Result<Vec<SampleRecord>, PipelineError> {
    for q in questions {
        q.validate()?;
    }
    let results = parallel_map(questions, workers, |q| -> Result<Vec<SampleRecord>, PipelineError> {
        let prompt = render_prompt(&TaskSpec::for_kind(q.task), q)?;
        let completions = gateway
            .generate(&prompt, cfg)
            .map_err(|source| PipelineError::Gateway {
                question_id: q.question_id.clone(),
                source,
            })?;
        if completions.len() != cfg.n {
            return Err(PipelineError::Invariant {
                question_id: q.question_id.clone(),
                message: format!("asked for {} completions, got {}", cfg.n, completions.len()),
            });
        }
        Ok(completions
            .iter()
            .enumerate()
            .map(|(i, c)| SampleRecord::from_output(q, i, &c.text))
            .collect())
    });
    let mut out = Vec::new();
    for r in results {
        out.extend(r?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreStats {
    pub scored: usize,
    pub skipped_already_scored: usize,
    pub skipped_unparsed: usize,
    pub reasoning_calls: usize,
    pub answer_calls: usize,
}

impl ScoreStats {
    fn add(&mut self, o: &ScoreStats) {
        self.scored += o.scored;
        self.skipped_already_scored += o.skipped_already_scored;
        self.skipped_unparsed += o.skipped_unparsed;
        self.reasoning_calls += o.reasoning_calls;
        self.answer_calls += o.answer_calls;
    }
}

fn score_group<G: Gateway + ?Sized>(
    group: &[&SampleRecord],
    gateway: &G,
    method: ReasoningMethod,
    opts: &ConfidenceOptions,
) -> Result<(Vec<SampleRecord>, ScoreStats), PipelineError> {
    let mut stats = ScoreStats::default();
    let answers: Vec<Option<&str>> = group.iter().map(|r| r.canonical_answer.as_deref()).collect();
    let reasonings: Vec<&str> = group.iter().map(|r| r.reasoning_text.as_str()).collect();
    let mut out = Vec::with_capacity(group.len());
    for (i, rec) in group.iter().enumerate() {
        let mut rec = (*rec).clone();
        if rec.confidence.as_ref().is_some_and(|c| c.method == method) {
            stats.skipped_already_scored += 1;
            out.push(rec);
            continue;
        }
        let Some(answer) = rec.canonical_answer.clone() else {
            stats.skipped_unparsed += 1;
            rec.confidence = None;
            out.push(rec);
            continue;
        };
        let qid = rec.question_id.clone();
        let question = rec.question.display_text();
        let vote = vote_confidence(&answers, &Some(answer.as_str()))
            .map_err(|e| PipelineError::from_confidence(&qid, e))?;
        let report = match method {
            ReasoningMethod::Monolithic => {
                let distractors = select_distractors(&reasonings, i, opts.max_distractors);
                let r = monolithic_reasoning_confidence(
                    gateway,
                    &question,
                    &rec.reasoning_text,
                    &distractors,
                    opts,
                )
                .map_err(|e| PipelineError::from_confidence(&qid, e))?;
                stats.reasoning_calls += 1;
                let a = answer_confidence(gateway, &question, &rec.reasoning_text, &rec.answer_text, opts)
                    .map_err(|e| PipelineError::from_confidence(&qid, e))?;
                stats.answer_calls += 1;
                ConfidenceReport::monolithic(r, a, vote)
            }
            ReasoningMethod::StatementWise => {
                if rec.statements.is_empty() {
                    rec.confidence = None;
                    rec.score_error = Some("reasoning has no statements".into());
                    out.push(rec);
                    continue;
                }
                let (_, per) =
                    statementwise_reasoning_confidence(gateway, &question, &rec.statements, opts)
                        .map_err(|e| PipelineError::from_confidence(&qid, e))?;
                stats.reasoning_calls += per.len();
                let a = answer_confidence(gateway, &question, &rec.reasoning_text, &rec.answer_text, opts)
                    .map_err(|e| PipelineError::from_confidence(&qid, e))?;
                stats.answer_calls += 1;
                ConfidenceReport::statement_wise(per, a, vote)
                    .map_err(|e| PipelineError::from_confidence(&qid, e))?
            }
        };
        stats.scored += 1;
        rec.score_error = None;
        rec.confidence = Some(report);
        out.push(rec);
    }
    Ok((out, stats))
}

/// Attaches a confidence report to every parsed record. Records already
/// scored with `method` are passed through untouched.
pub fn score_samples<G: Gateway + ?Sized>(
    records: &[SampleRecord],
    gateway: &G,
    method: ReasoningMethod,
    opts: &ConfidenceOptions,
    workers: usize,
) -> Result<(Vec<SampleRecord>, ScoreStats), PipelineError> {
    let groups = group_by_question(records);
    let results = parallel_map(&groups, workers, |g| score_group(g, gateway, method, opts));
    let mut out = Vec::with_capacity(records.len());
    let mut stats = ScoreStats::default();
    for r in results {
        let (recs, s) = r?;
        out.extend(recs);
        stats.add(&s);
    }
    Ok((out, stats))
}

/// Labels reasoning of records whose answer correctness is known.
pub fn judge_samples<G: Gateway + ?Sized>(
    records: &[SampleRecord],
    judge: &G,
    workers: usize,
) -> Result<Vec<SampleRecord>, PipelineError> {
    let results = parallel_map(records, workers, |rec| -> Result<SampleRecord, PipelineError> {
        let mut rec = rec.clone();
        if rec.reasoning_verdict.is_some() {
            return Ok(rec);
        }
        let Some(correct) = rec.answer_correct else {
            return Ok(rec);
        };
        let verdict = judge_reasoning(&rec.question.display_text(), &rec.reasoning_text, correct, judge)
            .map_err(|e| match e {
                JudgeError::Gateway(source) => PipelineError::Gateway {
                    question_id: rec.question_id.clone(),
                    source,
                },
                other => PipelineError::Invariant {
                    question_id: rec.question_id.clone(),
                    message: other.to_string(),
                },
            })?;
        rec.reasoning_verdict = Some(verdict);
        Ok(rec)
    });
    results.into_iter().collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairStats {
    pub questions: usize,
    pub pairs: usize,
    pub no_pair: usize,
}

/// One preference record per question that yields a pair under `rule`.
pub fn build_pairs(
    records: &[SampleRecord],
    rule: PairRule,
) -> Result<(Vec<PreferenceRecord>, PairStats), PipelineError> {
    let mut out = Vec::new();
    let mut stats = PairStats::default();
    for group in group_by_question(records) {
        stats.questions += 1;
        let qid = &group[0].question_id;
        let invariant = |message: String| PipelineError::Invariant {
            question_id: qid.clone(),
            message,
        };
        let scored: Vec<ScoredSample> = match rule {
            PairRule::CorePo => group
                .iter()
                .filter_map(|r| {
                    r.confidence
                        .as_ref()
                        .map(|c| ScoredSample::combined(r.sample_index as u32, c.combined))
                })
                .collect(),
            PairRule::ScPo => group
                .iter()
                .map(|r| ScoredSample::voted(r.sample_index as u32, r.canonical_answer.as_deref()))
                .collect(),
        };
        if scored.len() < 2 {
            stats.no_pair += 1;
            continue;
        }
        let pair = match rule {
            PairRule::CorePo => build_core_pair(qid, &scored, DEFAULT_TIE_EPSILON),
            PairRule::ScPo => build_sc_pair(qid, &scored, DEFAULT_VOTE_GAP),
        }
        .map_err(|e| invariant(e.to_string()))?;
        let Some(pair) = pair else {
            stats.no_pair += 1;
            continue;
        };
        let find = |id: u32| {
            group
                .iter()
                .find(|r| r.sample_index as u32 == id)
                .ok_or_else(|| invariant(format!("sample {id} missing")))
        };
        let (w, l) = (find(pair.winner)?, find(pair.loser)?);
        let prompt = render_prompt(&TaskSpec::for_kind(w.question.task), &w.question)?;
        out.push(PreferenceRecord::new(&pair, &prompt, &w.raw_text, &l.raw_text));
        stats.pairs += 1;
    }
    Ok((out, stats))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selector {
    /// The first sample; meaningful for n = 1, T = 0 runs.
    Greedy,
    Sc,
    Ptrue,
    BestAnswer,
    BestReasoning,
}

impl std::str::FromStr for Selector {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "greedy" => Ok(Selector::Greedy),
            "sc" => Ok(Selector::Sc),
            "ptrue" => Ok(Selector::Ptrue),
            "best_answer" => Ok(Selector::BestAnswer),
            "best_reasoning" => Ok(Selector::BestReasoning),
            other => Err(format!(
                "unknown selector {other:?} (expected greedy, sc, ptrue, best_answer, best_reasoning)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub question_id: String,
    pub sample_index: usize,
    pub answer_correct: Option<bool>,
    pub reasoning_verdict: Option<Verdict>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub selector: Selector,
    pub questions: usize,
    /// Questions whose chosen answer could be checked.
    pub graded: usize,
    pub correct: usize,
    pub accuracy: Option<f64>,
    pub reasoning_judged: usize,
    pub reasoning_correct: usize,
    pub reasoning_accuracy: Option<f64>,
    pub selections: Vec<Selection>,
}

pub fn evaluate(
    records: &[SampleRecord],
    selector: Selector,
    best_of: usize,
) -> Result<EvalReport, PipelineError> {
    let mut selections = Vec::new();
    for group in group_by_question(records) {
        let qid = group[0].question_id.clone();
        let candidates: Vec<Candidate> = group
            .iter()
            .map(|r| Candidate {
                sample_id: r.sample_index as u32,
                answer: r.canonical_answer.clone(),
                report: r.confidence.clone(),
            })
            .collect();
        let chosen = match selector {
            Selector::Greedy => Ok(candidates[0].sample_id),
            Selector::Sc => select_sc(&candidates),
            Selector::Ptrue => select_ptrue(&candidates),
            Selector::BestAnswer => select_best_by(&candidates, Metric::AnswerLevel, best_of),
            Selector::BestReasoning => select_best_by(&candidates, Metric::ReasoningLevel, best_of),
        };
        let chosen = chosen.map_err(|e: SelectError| PipelineError::Invariant {
            question_id: qid.clone(),
            message: e.to_string(),
        })?;
        let rec = group
            .iter()
            .find(|r| r.sample_index as u32 == chosen)
            .expect("selected from group");
        selections.push(Selection {
            question_id: qid,
            sample_index: rec.sample_index,
            answer_correct: rec.answer_correct,
            reasoning_verdict: rec.reasoning_verdict,
        });
    }
    let graded = selections.iter().filter(|s| s.answer_correct.is_some()).count();
    let correct = selections.iter().filter(|s| s.answer_correct == Some(true)).count();
    let judged = selections.iter().filter(|s| s.reasoning_verdict.is_some()).count();
    let reasoning_correct = selections
        .iter()
        .filter(|s| s.reasoning_verdict == Some(Verdict::Correct))
        .count();
    let ratio = |a: usize, b: usize| (b > 0).then(|| a as f64 / b as f64);
    Ok(EvalReport {
        selector,
        questions: selections.len(),
        graded,
        correct,
        accuracy: ratio(correct, graded),
        reasoning_judged: judged,
        reasoning_correct,
        reasoning_accuracy: ratio(reasoning_correct, judged),
        selections,
    })
}

/// Points for the confidence/accuracy table. Records lacking a report,
/// answer correctness or a reasoning verdict are left out; their count is
/// returned alongside.
pub fn curve_points(records: &[SampleRecord], metric: Metric) -> (Vec<CurvePoint>, usize) {
    let points: Vec<CurvePoint> = records
        .iter()
        .filter_map(|r| {
            Some(CurvePoint {
                confidence: metric.of(r.confidence.as_ref()?),
                answer_correct: r.answer_correct?,
                reasoning_correct: r.reasoning_verdict? == Verdict::Correct,
            })
        })
        .collect();
    let skipped = records.len() - points.len();
    (points, skipped)
}
