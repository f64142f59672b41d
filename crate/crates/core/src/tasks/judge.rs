//! External judging of reasoning correctness, for evaluation only.

use serde::{Deserialize, Serialize};

use crate::gateway::{Gateway, GatewayError, SamplingConfig};
use crate::prompts::render_judge;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Correct,
    Incorrect,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum JudgeError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("judge reply has no usable verdict: {0}")]
    Unparsable(String),
}

/// Reads `{"verdict": "correct" | "incorrect"}` from a reply, tolerating
/// prose or code fences around the JSON object.
pub fn parse_verdict(reply: &str) -> Result<Verdict, JudgeError> {
    let unparsable = || JudgeError::Unparsable(reply.chars().take(120).collect());
    let start = reply.find('{').ok_or_else(unparsable)?;
    let end = reply.rfind('}').filter(|e| *e > start).ok_or_else(unparsable)?;
    let value: serde_json::Value =
        serde_json::from_str(&reply[start..=end]).map_err(|_| unparsable())?;
    match value
        .get("verdict")
        .and_then(|v| v.as_str())
        .map(|s| s.trim().to_ascii_lowercase())
        .as_deref()
    {
        Some("correct") => Ok(Verdict::Correct),
        Some("incorrect") => Ok(Verdict::Incorrect),
        _ => Err(unparsable()),
    }
}

/// A wrong final answer makes the reasoning incorrect without consulting the
/// judge; otherwise the judge prompt is sent once at T=0.
pub fn judge_reasoning<G: Gateway + ?Sized>(
    question: &str,
    reasoning: &str,
    answer_correct: bool,
    judge: &G,
) -> Result<Verdict, JudgeError> {
    if !answer_correct {
        return Ok(Verdict::Incorrect);
    }
    let prompt = render_judge(question, reasoning);
    let reply = judge.generate(&prompt, &SamplingConfig::greedy())?;
    let text = reply
        .first()
        .map(|c| c.text.as_str())
        .ok_or_else(|| JudgeError::Unparsable(String::new()))?;
    parse_verdict(text)
}
