//! Versioned prompt templates and a single-pass placeholder renderer.
//!
//! Templates live under `assets/prompts/` and are compiled into the binary.
//! Placeholders are bracketed names such as `[question]`. Substitution is a
//! single left-to-right pass, so substituted text is never re-scanned: a
//! question that itself contains `[reasoning]` is rendered literally.
//!
//! Two templates carry repeated blocks:
//!
//! * the monolithic reasoning prompt has one paragraph containing
//!   `[example i]`, expanded once per distractor (and dropped when there are
//!   none);
//! * the statement-wise prompt has a line that is exactly `[step-j]`,
//!   expanded into one line per previous statement.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Identifier of a compiled-in template.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateId {
    TaskNumeric,
    TaskMultipleChoice,
    TaskGame24,
    TaskCruxOut,
    ConfidenceMonolithic,
    ConfidenceStatement,
    ConfidenceAnswer,
    Judge,
}

impl TemplateId {
    pub const ALL: [TemplateId; 8] = [
        TemplateId::TaskNumeric,
        TemplateId::TaskMultipleChoice,
        TemplateId::TaskGame24,
        TemplateId::TaskCruxOut,
        TemplateId::ConfidenceMonolithic,
        TemplateId::ConfidenceStatement,
        TemplateId::ConfidenceAnswer,
        TemplateId::Judge,
    ];

    /// Asset name including the version suffix.
    pub fn asset_name(self) -> &'static str {
        match self {
            TemplateId::TaskNumeric => "task_numeric.v1",
            TemplateId::TaskMultipleChoice => "task_multiple_choice.v1",
            TemplateId::TaskGame24 => "task_game24.v1",
            TemplateId::TaskCruxOut => "task_crux_out.v1",
            TemplateId::ConfidenceMonolithic => "confidence_monolithic.v1",
            TemplateId::ConfidenceStatement => "confidence_statement.v1",
            TemplateId::ConfidenceAnswer => "confidence_answer.v1",
            TemplateId::Judge => "judge.v1",
        }
    }

    pub fn text(self) -> &'static str {
        match self {
            TemplateId::TaskNumeric => include_str!("../assets/prompts/task_numeric.v1.txt"),
            TemplateId::TaskMultipleChoice => {
                include_str!("../assets/prompts/task_multiple_choice.v1.txt")
            }
            TemplateId::TaskGame24 => include_str!("../assets/prompts/task_game24.v1.txt"),
            TemplateId::TaskCruxOut => include_str!("../assets/prompts/task_crux_out.v1.txt"),
            TemplateId::ConfidenceMonolithic => {
                include_str!("../assets/prompts/confidence_monolithic.v1.txt")
            }
            TemplateId::ConfidenceStatement => {
                include_str!("../assets/prompts/confidence_statement.v1.txt")
            }
            TemplateId::ConfidenceAnswer => {
                include_str!("../assets/prompts/confidence_answer.v1.txt")
            }
            TemplateId::Judge => include_str!("../assets/prompts/judge.v1.txt"),
        }
    }

    /// Placeholders this template expects (repeat markers excluded).
    pub fn placeholders(self) -> &'static [&'static str] {
        match self {
            TemplateId::TaskNumeric | TemplateId::TaskMultipleChoice => &["question"],
            TemplateId::TaskGame24 => &["four digits"],
            TemplateId::TaskCruxOut => &["code", "input"],
            TemplateId::ConfidenceMonolithic => &["question", "reasoning"],
            TemplateId::ConfidenceStatement => &["question", "step-k"],
            TemplateId::ConfidenceAnswer => &["question", "reasoning", "answer"],
            TemplateId::Judge => &["question", "reasoning"],
        }
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.asset_name())
    }
}

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("template {template} is missing a value for [{name}]")]
    MissingValue { template: TemplateId, name: String },
    #[error("{count} distractors exceed the configured maximum of {max}")]
    TooManyDistractors { count: usize, max: usize },
}

/// Substitutes `[name]` markers whose name appears in `values`; any other
/// bracketed text is copied through untouched.
pub fn substitute(template: &str, values: &HashMap<&str, &str>) -> String {
    let mut out = String::with_capacity(template.len() + 256);
    let mut rest = template;
    while let Some(open) = rest.find('[') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        match after.find(']') {
            Some(close) if values.contains_key(&after[..close]) => {
                out.push_str(values[&after[..close]]);
                rest = &after[close + 1..];
            }
            _ => {
                out.push('[');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

fn render_plain(id: TemplateId, values: &HashMap<&str, &str>) -> Result<String, PromptError> {
    if let Some(missing) = id.placeholders().iter().find(|p| !values.contains_key(*p)) {
        return Err(PromptError::MissingValue {
            template: id,
            name: (*missing).to_string(),
        });
    }
    Ok(substitute(id.text(), values))
}

/// Renders one of the four task prompts.
pub fn render_task(id: TemplateId, values: &HashMap<&str, &str>) -> Result<String, PromptError> {
    render_plain(id, values)
}

pub fn render_answer_confidence(question: &str, reasoning: &str, answer: &str) -> String {
    let values = HashMap::from([
        ("question", question),
        ("reasoning", reasoning),
        ("answer", answer),
    ]);
    substitute(TemplateId::ConfidenceAnswer.text(), &values)
}

pub fn render_judge(question: &str, reasoning: &str) -> String {
    let values = HashMap::from([("question", question), ("reasoning", reasoning)]);
    substitute(TemplateId::Judge.text(), &values)
}

/// Monolithic reasoning prompt with `distractors.len()` randomly generated
/// reasoning blocks ahead of the selected one.
pub fn render_monolithic(
    question: &str,
    reasoning: &str,
    distractors: &[&str],
    max_distractors: usize,
) -> Result<String, PromptError> {
    if distractors.len() > max_distractors {
        return Err(PromptError::TooManyDistractors {
            count: distractors.len(),
            max: max_distractors,
        });
    }
    let template = TemplateId::ConfidenceMonolithic.text();
    let mut paragraphs = Vec::new();
    for paragraph in template.split("\n\n") {
        if paragraph.contains("[example i]") {
            for (i, example) in distractors.iter().enumerate() {
                let number = (i + 1).to_string();
                let values = HashMap::from([("i", number.as_str()), ("example i", *example)]);
                paragraphs.push(substitute(paragraph, &values));
            }
        } else {
            let values = HashMap::from([("question", question), ("reasoning", reasoning)]);
            paragraphs.push(substitute(paragraph, &values));
        }
    }
    Ok(paragraphs.join("\n\n"))
}

/// Statement-wise prompt for statement `previous.len() + 1`.
pub fn render_statement(question: &str, previous: &[&str], statement: &str) -> String {
    let template = TemplateId::ConfidenceStatement.text();
    let values = HashMap::from([("question", question), ("step-k", statement)]);
    let mut lines = Vec::new();
    for line in template.split('\n') {
        if line == "[step-j]" {
            lines.extend(previous.iter().map(|s| s.to_string()));
        } else {
            lines.push(substitute(line, &values));
        }
    }
    lines.join("\n")
}
