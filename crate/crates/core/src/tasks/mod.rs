//! Task adapters: prompt rendering, response parsing, answer
//! canonicalization and correctness checks for the four answer formats.

pub mod choice;
pub mod crux;
pub mod game24;
pub mod judge;
pub mod numeric;
pub mod split;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::prompts::{render_task, PromptError, TemplateId};

pub use choice::{extract_choice, Choice};
pub use crux::{compare_crux_literal, crux_output_from_answer, Literal};
pub use game24::{verify_game24, Game24Expr, Game24Verdict, InvalidReason};
pub use judge::{judge_reasoning, parse_verdict, JudgeError, Verdict};
pub use numeric::{canonicalize_numeric, extract_numeric, NumericAnswer};
pub use split::{segment_statements, split_reasoning_answer, split_sections, SplitError};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExtractError {
    #[error("no $-delimited value in the answer")]
    NoValue,
    #[error("no bracketed choice in the answer")]
    NoChoice,
    #[error("more than one distinct choice in the answer: {0}")]
    AmbiguousChoice(String),
    #[error("no equation in the answer")]
    NoEquation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    /// GSM8K / MATH style `$<value>$` answers.
    Numeric,
    /// ARC / GPQA style `[I]`..`[IV]` answers.
    MultipleChoice,
    Game24,
    CruxOut,
}

impl TaskKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::Numeric => "numeric",
            TaskKind::MultipleChoice => "multiple_choice",
            TaskKind::Game24 => "game24",
            TaskKind::CruxOut => "crux_out",
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "numeric" => Ok(TaskKind::Numeric),
            "multiple_choice" => Ok(TaskKind::MultipleChoice),
            "game24" => Ok(TaskKind::Game24),
            "crux_out" => Ok(TaskKind::CruxOut),
            other => Err(format!("unknown task kind {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerPattern {
    DollarValue,
    BracketedNumeral,
    DollarEquation,
    AssertionLiteral,
}

/// Binds a task format to its prompt template and answer pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TaskSpec {
    pub kind: TaskKind,
    pub prompt_template: TemplateId,
    pub answer_pattern: AnswerPattern,
}

impl TaskSpec {
    pub fn for_kind(kind: TaskKind) -> Self {
        let (prompt_template, answer_pattern) = match kind {
            TaskKind::Numeric => (TemplateId::TaskNumeric, AnswerPattern::DollarValue),
            TaskKind::MultipleChoice => {
                (TemplateId::TaskMultipleChoice, AnswerPattern::BracketedNumeral)
            }
            TaskKind::Game24 => (TemplateId::TaskGame24, AnswerPattern::DollarEquation),
            TaskKind::CruxOut => (TemplateId::TaskCruxOut, AnswerPattern::AssertionLiteral),
        };
        Self {
            kind,
            prompt_template,
            answer_pattern,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum QuestionError {
    #[error("question {id}: {message}")]
    Invalid { id: String, message: String },
    #[error(transparent)]
    Prompt(#[from] PromptError),
}

/// One input question. Which fields are required depends on `task`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub question_id: String,
    pub task: TaskKind,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub question: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub choices: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub numbers: Vec<i64>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub code: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub input: String,
    /// Reference answer, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer: Option<String>,
}

impl Question {
    pub fn validate(&self) -> Result<(), QuestionError> {
        let invalid = |message: &str| {
            Err(QuestionError::Invalid {
                id: self.question_id.clone(),
                message: message.to_string(),
            })
        };
        if self.question_id.is_empty() {
            return invalid("empty question_id");
        }
        match self.task {
            TaskKind::Numeric if self.question.is_empty() => invalid("missing question text"),
            TaskKind::MultipleChoice if self.question.is_empty() => invalid("missing question text"),
            TaskKind::MultipleChoice if !(2..=4).contains(&self.choices.len()) => {
                invalid("multiple-choice questions need 2 to 4 choices")
            }
            TaskKind::Game24 if self.numbers.len() != 4 => invalid("game24 needs four numbers"),
            TaskKind::CruxOut if self.code.is_empty() || self.input.is_empty() => {
                invalid("crux_out needs code and input")
            }
            _ => Ok(()),
        }
    }

    pub fn numbers_text(&self) -> String {
        let parts: Vec<String> = self.numbers.iter().map(i64::to_string).collect();
        format!("[{}]", parts.join(", "))
    }

    /// The question as shown to confidence and judge prompts.
    pub fn display_text(&self) -> String {
        match self.task {
            TaskKind::Numeric => self.question.clone(),
            TaskKind::MultipleChoice => choice::format_question(&self.question, &self.choices),
            TaskKind::Game24 => format!(
                "Write an expression using exactly the given numbers {} that results in $24$.",
                self.numbers_text()
            ),
            TaskKind::CruxOut => format!("{}\nassert f({}) == ??", self.code, self.input),
        }
    }
}

/// Renders the task prompt for `question`.
pub fn render_prompt(spec: &TaskSpec, question: &Question) -> Result<String, QuestionError> {
    question.validate()?;
    let text;
    let numbers;
    let values: HashMap<&str, &str> = match spec.kind {
        TaskKind::Numeric => HashMap::from([("question", question.question.as_str())]),
        TaskKind::MultipleChoice => {
            text = choice::format_question(&question.question, &question.choices);
            HashMap::from([("question", text.as_str())])
        }
        TaskKind::Game24 => {
            numbers = question.numbers_text();
            HashMap::from([("four digits", numbers.as_str())])
        }
        TaskKind::CruxOut => HashMap::from([
            ("code", question.code.as_str()),
            ("input", question.input.as_str()),
        ]),
    };
    Ok(render_task(spec.prompt_template, &values)?)
}

/// A parsed model output: `s = [r, a]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputSample {
    pub question_id: String,
    pub sample_index: usize,
    pub raw_text: String,
    pub reasoning_text: String,
    pub statements: Vec<String>,
    pub answer_text: String,
    /// Voting key; derived only from `answer_text`.
    pub canonical_answer: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseFailure {
    #[error(transparent)]
    Split(#[from] SplitError),
    #[error(transparent)]
    Extract(#[from] ExtractError),
}

/// Canonical answer key for `answer_text` under `kind`.
pub fn canonical_answer(kind: TaskKind, answer_text: &str) -> Result<String, ExtractError> {
    match kind {
        TaskKind::Numeric => Ok(extract_numeric(answer_text)?.to_string()),
        TaskKind::MultipleChoice => Ok(extract_choice(answer_text)?.to_string()),
        TaskKind::Game24 => {
            let eq = game24::equation_from_answer(answer_text);
            if eq.is_empty() {
                return Err(ExtractError::NoEquation);
            }
            Ok(eq.split_whitespace().collect())
        }
        TaskKind::CruxOut => Ok(crux::canonical_output(crux_output_from_answer(answer_text))),
    }
}

pub fn parse_output(
    kind: TaskKind,
    question_id: &str,
    sample_index: usize,
    raw_text: &str,
) -> Result<OutputSample, ParseFailure> {
    let sections = split_sections(raw_text)?;
    let reasoning_text = sections.reasoning_text().to_string();
    let answer_text = sections.answer_text().to_string();
    let canonical_answer = canonical_answer(kind, &answer_text)?;
    Ok(OutputSample {
        question_id: question_id.to_string(),
        sample_index,
        raw_text: raw_text.to_string(),
        statements: segment_statements(&reasoning_text),
        reasoning_text,
        answer_text,
        canonical_answer,
    })
}

/// Whether the sample's answer is correct for `question`. Game of 24 is
/// checked by verification; the other formats need a reference answer.
pub fn is_correct(question: &Question, sample: &OutputSample) -> Option<bool> {
    match question.task {
        TaskKind::Game24 => Some(
            verify_game24(game24::equation_from_answer(&sample.answer_text), &question.numbers)
                .is_valid(),
        ),
        TaskKind::Numeric => {
            let gold = canonicalize_numeric(question.answer.as_deref()?);
            Some(canonicalize_numeric(&sample.canonical_answer) == gold)
        }
        TaskKind::MultipleChoice => {
            let gold = question.answer.as_deref()?;
            let gold = extract_choice(gold).or_else(|_| gold.parse::<Choice>()).ok()?;
            Some(sample.canonical_answer == gold.to_string())
        }
        TaskKind::CruxOut => Some(compare_crux_literal(
            crux_output_from_answer(&sample.answer_text),
            question.answer.as_deref()?,
        )),
    }
}
