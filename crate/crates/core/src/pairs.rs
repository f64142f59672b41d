//! Preference-pair construction from scored samples.
//!
//! `core_po` pairs the highest and lowest combined-confidence samples of a
//! question. `sc_po` pairs a sample from the most-voted answer class with
//! one from the least-voted class when their vote counts differ enough.

use std::fmt;

use serde::{Deserialize, Serialize};

pub const DEFAULT_TIE_EPSILON: f64 = 1e-6;
pub const DEFAULT_VOTE_GAP: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    CombinedPtrue,
    MajorityVote,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairRule {
    CorePo,
    ScPo,
}

impl PairRule {
    pub fn as_str(self) -> &'static str {
        match self {
            PairRule::CorePo => "core_po",
            PairRule::ScPo => "sc_po",
        }
    }
}

impl fmt::Display for PairRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for PairRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "core_po" => Ok(PairRule::CorePo),
            "sc_po" => Ok(PairRule::ScPo),
            other => Err(format!("unknown pair rule {other:?}")),
        }
    }
}

/// A sample of one question with its score. `answer` is the canonical
/// answer used for vote counting; samples without one do not vote.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredSample {
    pub sample_id: u32,
    pub score: f64,
    pub score_kind: ScoreKind,
    #[serde(default)]
    pub answer: Option<String>,
}

impl ScoredSample {
    pub fn combined(sample_id: u32, score: f64) -> Self {
        Self {
            sample_id,
            score,
            score_kind: ScoreKind::CombinedPtrue,
            answer: None,
        }
    }

    pub fn voted(sample_id: u32, answer: Option<&str>) -> Self {
        Self {
            sample_id,
            score: 0.0,
            score_kind: ScoreKind::MajorityVote,
            answer: answer.map(str::to_string),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferencePair {
    pub question_id: String,
    pub winner: u32,
    pub loser: u32,
    /// Score difference; for `sc_po` the vote-share difference.
    pub score_gap: f64,
    pub rule: PairRule,
    /// Vote-count difference, `sc_po` only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vote_gap: Option<u32>,
    pub winner_score: f64,
    pub loser_score: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PairError {
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("samples mix score kinds; expected {expected:?}")]
    InconsistentScores { expected: ScoreKind },
    #[error("sample {sample_id} has score {score} outside [0, 1]")]
    ScoreOutOfRange { sample_id: u32, score: f64 },
}

fn check_samples(samples: &[ScoredSample], kind: ScoreKind) -> Result<(), PairError> {
    if samples.len() < 2 {
        return Err(PairError::TooFewSamples(samples.len()));
    }
    if samples.iter().any(|s| s.score_kind != kind) {
        return Err(PairError::InconsistentScores { expected: kind });
    }
    Ok(())
}

/// Highest versus lowest score, ties to the lowest `sample_id`. `None` when
/// the spread is below `epsilon`.
pub fn build_core_pair(
    question_id: &str,
    samples: &[ScoredSample],
    epsilon: f64,
) -> Result<Option<PreferencePair>, PairError> {
    check_samples(samples, ScoreKind::CombinedPtrue)?;
    if let Some(s) = samples
        .iter()
        .find(|s| !(0.0..=1.0).contains(&s.score))
    {
        return Err(PairError::ScoreOutOfRange {
            sample_id: s.sample_id,
            score: s.score,
        });
    }
    let key = |s: &&ScoredSample| s.sample_id;
    let best = samples
        .iter()
        .min_by(|a, b| b.score.total_cmp(&a.score).then(key(a).cmp(&key(b))))
        .expect("non-empty");
    let worst = samples
        .iter()
        .min_by(|a, b| a.score.total_cmp(&b.score).then(key(a).cmp(&key(b))))
        .expect("non-empty");
    let gap = best.score - worst.score;
    if gap < epsilon {
        return Ok(None);
    }
    Ok(Some(PreferencePair {
        question_id: question_id.to_string(),
        winner: best.sample_id,
        loser: worst.sample_id,
        score_gap: gap,
        rule: PairRule::CorePo,
        vote_gap: None,
        winner_score: best.score,
        loser_score: worst.score,
    }))
}

/// Answer classes with their vote counts and lowest member id, ordered by
/// that id.
pub fn vote_classes(samples: &[ScoredSample]) -> Vec<(String, u32, u32)> {
    let mut ordered: Vec<&ScoredSample> = samples.iter().collect();
    ordered.sort_by_key(|s| s.sample_id);
    let mut classes: Vec<(String, u32, u32)> = Vec::new();
    for s in ordered {
        let Some(answer) = &s.answer else { continue };
        match classes.iter_mut().find(|c| &c.0 == answer) {
            Some(c) => c.1 += 1,
            None => classes.push((answer.clone(), 1, s.sample_id)),
        }
    }
    classes
}

/// Modal class versus least-voted class, represented by their lowest
/// `sample_id`s, when the count gap reaches `min_gap`. Count ties pick the
/// class whose representative id is lowest.
pub fn build_sc_pair(
    question_id: &str,
    samples: &[ScoredSample],
    min_gap: u32,
) -> Result<Option<PreferencePair>, PairError> {
    check_samples(samples, ScoreKind::MajorityVote)?;
    let classes = vote_classes(samples);
    let (Some(modal), Some(least)) = (
        classes
            .iter()
            .min_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2))),
        classes
            .iter()
            .min_by(|a, b| a.1.cmp(&b.1).then(a.2.cmp(&b.2))),
    ) else {
        return Ok(None);
    };
    let gap = modal.1 - least.1;
    if gap < min_gap.max(1) {
        return Ok(None);
    }
    let n = samples.len() as f64;
    let (ws, ls) = (modal.1 as f64 / n, least.1 as f64 / n);
    Ok(Some(PreferencePair {
        question_id: question_id.to_string(),
        winner: modal.2,
        loser: least.2,
        score_gap: ws - ls,
        rule: PairRule::ScPo,
        vote_gap: Some(gap),
        winner_score: ws,
        loser_score: ls,
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairScores {
    pub chosen: f64,
    pub rejected: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairMeta {
    pub rule: PairRule,
    pub score_gap: f64,
    pub scores: PairScores,
    pub question_id: String,
    pub chosen_sample: u32,
    pub rejected_sample: u32,
}

/// One line of the exported preference dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceRecord {
    pub prompt: String,
    pub chosen: String,
    pub rejected: String,
    pub meta: PairMeta,
}

impl PreferenceRecord {
    pub fn new(pair: &PreferencePair, prompt: &str, chosen: &str, rejected: &str) -> Self {
        Self {
            prompt: prompt.to_string(),
            chosen: chosen.to_string(),
            rejected: rejected.to_string(),
            meta: PairMeta {
                rule: pair.rule,
                score_gap: pair.score_gap,
                scores: PairScores {
                    chosen: pair.winner_score,
                    rejected: pair.loser_score,
                },
                question_id: pair.question_id.clone(),
                chosen_sample: pair.winner,
                rejected_sample: pair.loser,
            },
        }
    }
}
