//! Confidence measures over sampled reasoning–answer outputs.
//!
//! * `C(a|x)`: share of samples voting for an answer ([`vote_confidence`]).
//! * `C(r|x)`: P(True) of the reasoning, either judged at once
//!   ([`monolithic_reasoning_confidence`]) or statement by statement and
//!   averaged ([`statementwise_reasoning_confidence`]).
//! * `C(a|x,r)`: P(True) of the answer given the reasoning
//!   ([`answer_confidence`]).
//! * `C(a,r|x) = C(r|x) · C(a|x,r)` ([`combined_confidence`]).
//!
//! P(True) is read from the first generated token after a prompt offering
//! `A) True` / `B) False`.

use serde::{Deserialize, Serialize};

use crate::gateway::{Gateway, GatewayError, LogprobRequest, TokenLogprob, DEFAULT_TOP_K};
use crate::prompts::{self, PromptError};

pub const DEFAULT_MAX_DISTRACTORS: usize = 4;
/// Probabilities are kept inside `[PROB_FLOOR, 1 - PROB_FLOOR]` before they
/// enter products or reports.
pub const PROB_FLOOR: f64 = 1e-9;
/// A choice token missing from the top-k list is assigned the smallest
/// observed log-probability minus this gap.
pub const MISSING_TOKEN_GAP: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfidenceError {
    #[error("log-probabilities must be finite (true: {logprob_true}, false: {logprob_false})")]
    InvalidLogprob { logprob_true: f64, logprob_false: f64 },
    #[error("no samples to vote over")]
    EmptySample,
    #[error("reasoning has no statements")]
    EmptyReasoning,
    #[error("gateway returned no candidate tokens")]
    NoCandidates,
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

/// Natural-log probabilities of the "A" (true) and "B" (false) continuations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrueFalseLogprobs {
    pub logprob_true: f64,
    pub logprob_false: f64,
}

impl TrueFalseLogprobs {
    pub fn new(logprob_true: f64, logprob_false: f64) -> Self {
        Self {
            logprob_true,
            logprob_false,
        }
    }
}

/// `exp(t) / (exp(t) + exp(f))`, evaluated after subtracting the maximum.
pub fn p_true(lp: TrueFalseLogprobs) -> Result<f64, ConfidenceError> {
    let (t, f) = (lp.logprob_true, lp.logprob_false);
    if !t.is_finite() || !f.is_finite() {
        return Err(ConfidenceError::InvalidLogprob {
            logprob_true: t,
            logprob_false: f,
        });
    }
    let m = t.max(f);
    let et = (t - m).exp();
    let ef = (f - m).exp();
    Ok(et / (et + ef))
}

pub fn clamp_probability(p: f64) -> f64 {
    p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR)
}

fn log_sum_exp(values: impl Iterator<Item = f64>) -> Option<f64> {
    let v: Vec<f64> = values.collect();
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if v.is_empty() {
        return None;
    }
    Some(m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln())
}

/// Pulls the A/B log-probabilities out of a top-k list.
///
/// Tokens count as a choice when their text, trimmed, is exactly `A` or
/// `B`; several spellings of the same choice have their mass summed. A side
/// absent from the list gets the floor `min(top-k) - 1`. Returns the pair
/// and whether any side was floored.
pub fn extract_true_false(
    top: &[TokenLogprob],
) -> Result<(TrueFalseLogprobs, bool), ConfidenceError> {
    let floor = top
        .iter()
        .map(|t| t.logprob)
        .fold(f64::INFINITY, f64::min);
    if !floor.is_finite() {
        return Err(ConfidenceError::NoCandidates);
    }
    let side = |label: &str| {
        log_sum_exp(
            top.iter()
                .filter(|t| t.token.trim() == label)
                .map(|t| t.logprob),
        )
    };
    let a = side("A");
    let b = side("B");
    let floored = a.is_none() || b.is_none();
    let floor = floor - MISSING_TOKEN_GAP;
    Ok((
        TrueFalseLogprobs::new(a.unwrap_or(floor), b.unwrap_or(floor)),
        floored,
    ))
}

/// `(1/N) Σ 1[answer_i = target]`.
pub fn vote_confidence<T: PartialEq>(answers: &[T], target: &T) -> Result<f64, ConfidenceError> {
    if answers.is_empty() {
        return Err(ConfidenceError::EmptySample);
    }
    let hits = answers.iter().filter(|a| *a == target).count();
    Ok(hits as f64 / answers.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConfidenceOptions {
    pub top_k: usize,
    pub max_distractors: usize,
}

impl Default for ConfidenceOptions {
    fn default() -> Self {
        Self {
            top_k: DEFAULT_TOP_K,
            max_distractors: DEFAULT_MAX_DISTRACTORS,
        }
    }
}

/// Sends `prompt` and converts the first-token distribution into P(True).
pub fn score_prompt<G: Gateway + ?Sized>(
    gateway: &G,
    prompt: &str,
    top_k: usize,
) -> Result<f64, ConfidenceError> {
    let req = LogprobRequest {
        prompt: prompt.to_string(),
        top_k,
    };
    let top = gateway.next_token_logprobs(&req)?;
    let (lp, floored) = extract_true_false(&top)?;
    if floored {
        log::debug!("A/B token missing from top-{top_k}; floor applied");
    }
    p_true(lp)
}

/// The first `max` other reasonings for the same question, in sample order,
/// skipping the one being scored.
pub fn select_distractors<'a>(reasonings: &[&'a str], scored: usize, max: usize) -> Vec<&'a str> {
    reasonings
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != scored)
        .map(|(_, r)| *r)
        .take(max)
        .collect()
}

pub fn monolithic_reasoning_confidence<G: Gateway + ?Sized>(
    gateway: &G,
    question: &str,
    reasoning: &str,
    distractors: &[&str],
    opts: &ConfidenceOptions,
) -> Result<f64, ConfidenceError> {
    let prompt =
        prompts::render_monolithic(question, reasoning, distractors, opts.max_distractors)?;
    score_prompt(gateway, &prompt, opts.top_k)
}

/// Mean of per-statement P(True), each conditioned on the statements before
/// it. Statements are scored in order, one request each.
pub fn statementwise_reasoning_confidence<G: Gateway + ?Sized, S: AsRef<str>>(
    gateway: &G,
    question: &str,
    statements: &[S],
    opts: &ConfidenceOptions,
) -> Result<(f64, Vec<f64>), ConfidenceError> {
    if statements.is_empty() {
        return Err(ConfidenceError::EmptyReasoning);
    }
    let all: Vec<&str> = statements.iter().map(AsRef::as_ref).collect();
    let mut scores = Vec::with_capacity(all.len());
    for (k, statement) in all.iter().enumerate() {
        let prompt = prompts::render_statement(question, &all[..k], statement);
        scores.push(score_prompt(gateway, &prompt, opts.top_k)?);
    }
    Ok((mean(&scores), scores))
}

pub fn answer_confidence<G: Gateway + ?Sized>(
    gateway: &G,
    question: &str,
    reasoning: &str,
    answer: &str,
    opts: &ConfidenceOptions,
) -> Result<f64, ConfidenceError> {
    let prompt = prompts::render_answer_confidence(question, reasoning, answer);
    score_prompt(gateway, &prompt, opts.top_k)
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReasoningMethod {
    Monolithic,
    StatementWise,
}

/// Per-sample confidence scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceReport {
    /// `C(r|x)`
    pub reasoning_confidence: f64,
    /// `C(a|x,r)`
    pub answer_confidence: f64,
    /// `C(a|x)` from majority voting.
    pub vote_confidence: f64,
    /// `C(a,r|x)`
    pub combined: f64,
    pub method: ReasoningMethod,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_statement: Option<Vec<f64>>,
}

impl ConfidenceReport {
    /// Monolithic report. Inputs are clamped before the product is taken.
    pub fn monolithic(reasoning: f64, answer: f64, vote: f64) -> Self {
        let reasoning = clamp_probability(reasoning);
        let answer = clamp_probability(answer);
        Self {
            reasoning_confidence: reasoning,
            answer_confidence: answer,
            vote_confidence: vote,
            combined: reasoning * answer,
            method: ReasoningMethod::Monolithic,
            per_statement: None,
        }
    }

    /// Statement-wise report; the reasoning score is the mean of the
    /// clamped per-statement scores.
    pub fn statement_wise(
        per_statement: Vec<f64>,
        answer: f64,
        vote: f64,
    ) -> Result<Self, ConfidenceError> {
        if per_statement.is_empty() {
            return Err(ConfidenceError::EmptyReasoning);
        }
        let per_statement: Vec<f64> = per_statement.into_iter().map(clamp_probability).collect();
        let reasoning = mean(&per_statement);
        let answer = clamp_probability(answer);
        Ok(Self {
            reasoning_confidence: reasoning,
            answer_confidence: answer,
            vote_confidence: vote,
            combined: reasoning * answer,
            method: ReasoningMethod::StatementWise,
            per_statement: Some(per_statement),
        })
    }
}

/// `C(a,r|x) = C(r|x) · C(a|x,r)`.
pub fn combined_confidence(report: &ConfidenceReport) -> f64 {
    report.reasoning_confidence * report.answer_confidence
}

#[cfg(test)]
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;
    use crate::gateway::{FixtureEntry, MockFallback, MockGateway};

    fn lp(t: f64, f: f64) -> TrueFalseLogprobs {
        TrueFalseLogprobs::new(t, f)
    }

    #[test]
    fn p_true_symmetry_and_limit() {
        assert_eq!(p_true(lp(-0.7, -0.7)).unwrap(), 0.5);
        assert!((p_true(lp(0.0, -50.0)).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn p_true_matches_high_precision_value() {
        // exp(-0.1) / (exp(-0.1) + exp(-2.3)) at 40 digits.
        let expected = 0.900_249_510_880_314_853;
        assert!((p_true(lp(-0.1, -2.3)).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn p_true_is_stable_for_large_magnitudes() {
        let p = p_true(lp(-1000.0, -1001.0)).unwrap();
        assert!((p - 1.0 / (1.0 + (-1.0f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn p_true_rejects_non_finite() {
        assert!(matches!(
            p_true(lp(f64::NEG_INFINITY, -1.0)),
            Err(ConfidenceError::InvalidLogprob { .. })
        ));
        assert!(p_true(lp(-1.0, f64::NAN)).is_err());
    }

    #[test]
    fn vote_counts() {
        let answers = ["A", "A", "B", "A", "C"];
        assert_eq!(vote_confidence(&answers, &"A").unwrap(), 0.6);
        assert_eq!(vote_confidence(&["A"], &"A").unwrap(), 1.0);
        let empty: [&str; 0] = [];
        assert_eq!(vote_confidence(&empty, &"A"), Err(ConfidenceError::EmptySample));
    }

    #[test]
    fn vote_counts_eight() {
        let answers = ["x", "y", "x", "x", "z", "x", "y", "x"];
        // brute-force count of "x"
        let mut count = 0;
        for a in answers {
            if a == "x" {
                count += 1;
            }
        }
        assert_eq!(count, 5);
        assert_eq!(vote_confidence(&answers, &"x").unwrap(), count as f64 / 8.0);
        assert_eq!(vote_confidence(&answers, &"x").unwrap(), 0.625);
    }

    #[test]
    fn missing_side_is_floored() {
        let top = vec![TokenLogprob::new("B", -0.3), TokenLogprob::new("The", -2.0)];
        let (pair, floored) = extract_true_false(&top).unwrap();
        assert!(floored);
        assert_eq!(pair, lp(-3.0, -0.3));
        let (pair, floored) = extract_true_false(&[TokenLogprob::new(" A", -0.1), TokenLogprob::new("B ", -2.3)]).unwrap();
        assert!(!floored);
        assert_eq!(pair, lp(-0.1, -2.3));
        assert_eq!(extract_true_false(&[]), Err(ConfidenceError::NoCandidates));
    }

    #[test]
    fn duplicate_spellings_sum_mass() {
        let top = vec![
            TokenLogprob::new("A", (0.3f64).ln()),
            TokenLogprob::new(" A", (0.2f64).ln()),
            TokenLogprob::new("B", (0.5f64).ln()),
        ];
        let (pair, _) = extract_true_false(&top).unwrap();
        assert!((pair.logprob_true - 0.5f64.ln()).abs() < 1e-12);
    }

    fn scripted(prompt: &str, a: f64, b: f64) -> FixtureEntry {
        FixtureEntry::logprobs(prompt, vec![("A".into(), a), ("B".into(), b)])
    }

    #[test]
    fn monolithic_scores_scripted_gateway() {
        let d = ["other reasoning"];
        let prompt = prompts::render_monolithic("q", "r", &d, 4).unwrap();
        let gw = MockGateway::new([scripted(&prompt, -0.05, -3.0)], MockFallback::Error);
        let p = monolithic_reasoning_confidence(&gw, "q", "r", &d, &ConfidenceOptions::default())
            .unwrap();
        assert!((p - 0.950_263_488_441_443_27).abs() < 1e-12);

        let equal = prompts::render_monolithic("q", "r", &[], 4).unwrap();
        let gw = MockGateway::new([scripted(&equal, -0.4, -0.4)], MockFallback::Error);
        let p = monolithic_reasoning_confidence(&gw, "q", "r", &[], &ConfidenceOptions::default())
            .unwrap();
        assert_eq!(p, 0.5);
    }

    #[test]
    fn monolithic_rejects_too_many_distractors() {
        let gw = MockGateway::new([], MockFallback::Seeded(0));
        let d = ["a", "b", "c", "d", "e"];
        let r = monolithic_reasoning_confidence(&gw, "q", "r", &d, &ConfidenceOptions::default());
        assert!(matches!(r, Err(ConfidenceError::Prompt(_))));
        assert_eq!(gw.stats().logprob_calls, 0);
    }

    #[test]
    fn answer_confidence_scripted() {
        let prompt = prompts::render_answer_confidence("q", "r", "a");
        let gw = MockGateway::new([scripted(&prompt, -0.2, -1.8)], MockFallback::Error);
        let p = answer_confidence(&gw, "q", "r", "a", &ConfidenceOptions::default()).unwrap();
        assert!((p - 0.832_018_385_133_924_48).abs() < 1e-12);
    }

    #[test]
    fn answer_confidence_with_only_b() {
        let prompt = prompts::render_answer_confidence("q", "r", "a");
        let gw = MockGateway::new(
            [FixtureEntry::logprobs(&prompt, vec![("B".into(), -0.5)])],
            MockFallback::Error,
        );
        let p = answer_confidence(&gw, "q", "r", "a", &ConfidenceOptions::default()).unwrap();
        // A floored to -1.5: sigma(-1).
        assert!((p - 0.268_941_421_369_995_12).abs() < 1e-12);
    }

    #[test]
    fn statementwise_recomputes_from_script() {
        let statements = ["s1", "s2", "s3"];
        let script = [(-0.1, -2.0), (-1.0, -1.0), (-3.0, -0.2)];
        let mut entries = Vec::new();
        for k in 0..3 {
            let prompt = prompts::render_statement("q", &statements[..k], statements[k]);
            entries.push(scripted(&prompt, script[k].0, script[k].1));
        }
        let gw = MockGateway::new(entries, MockFallback::Error);
        let (m, per) =
            statementwise_reasoning_confidence(&gw, "q", &statements, &ConfidenceOptions::default())
                .unwrap();
        let expected: Vec<f64> = script
            .iter()
            .map(|(a, b): &(f64, f64)| a.exp() / (a.exp() + b.exp()))
            .collect();
        for (got, want) in per.iter().zip(&expected) {
            assert!((got - want).abs() < 1e-12);
        }
        assert!((m - expected.iter().sum::<f64>() / 3.0).abs() < 1e-12);
        assert_eq!(gw.stats().logprob_calls, 3);
    }

    #[test]
    fn statementwise_single_and_empty() {
        let prompt = prompts::render_statement("q", &[], "only");
        let p8 = 0.8f64;
        let gw = MockGateway::new(
            [scripted(&prompt, p8.ln(), (1.0 - p8).ln())],
            MockFallback::Error,
        );
        let (m, per) =
            statementwise_reasoning_confidence(&gw, "q", &["only"], &ConfidenceOptions::default())
                .unwrap();
        assert!((m - 0.8).abs() < 1e-12);
        assert_eq!(per.len(), 1);
        let none: [&str; 0] = [];
        assert_eq!(
            statementwise_reasoning_confidence(&gw, "q", &none, &ConfidenceOptions::default()),
            Err(ConfidenceError::EmptyReasoning)
        );
    }

    #[test]
    fn report_mean_of_statements() {
        let r = ConfidenceReport::statement_wise(vec![1.0, 0.5, 0.0], 0.9, 0.4).unwrap();
        assert!((r.reasoning_confidence - 0.5).abs() < 1e-12);
        assert_eq!(r.combined, r.reasoning_confidence * r.answer_confidence);
    }

    fn raw_report(reasoning: f64, answer: f64) -> ConfidenceReport {
        ConfidenceReport {
            reasoning_confidence: reasoning,
            answer_confidence: answer,
            vote_confidence: 1.0,
            combined: reasoning * answer,
            method: ReasoningMethod::Monolithic,
            per_statement: None,
        }
    }

    #[test]
    fn combined_product_cases() {
        assert!((combined_confidence(&raw_report(0.9, 0.8)) - 0.72).abs() < 1e-12);
        assert_eq!(combined_confidence(&raw_report(1.0, 0.37)), 0.37);
        assert_eq!(combined_confidence(&raw_report(0.0, 0.37)), 0.0);
    }

    #[test]
    fn reports_clamp_before_the_product() {
        let r = ConfidenceReport::monolithic(1.0, 0.0, 1.0);
        assert_eq!(r.reasoning_confidence, 1.0 - PROB_FLOOR);
        assert_eq!(r.answer_confidence, PROB_FLOOR);
        assert!(r.combined > 0.0);
        assert_eq!(r.combined, combined_confidence(&r));
    }

    #[test]
    fn distractors_skip_scored_sample() {
        let all = ["r0", "r1", "r2", "r3", "r4", "r5"];
        assert_eq!(select_distractors(&all, 1, 4), ["r0", "r2", "r3", "r4"]);
        assert_eq!(select_distractors(&all[..2], 0, 4), ["r1"]);
        assert!(select_distractors(&all[..1], 0, 4).is_empty());
    }
}
