//! Multiple-choice answers written as bracketed roman numerals.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ExtractError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Choice {
    I,
    II,
    III,
    IV,
}

impl Choice {
    pub const ALL: [Choice; 4] = [Choice::I, Choice::II, Choice::III, Choice::IV];

    pub fn numeral(self) -> &'static str {
        match self {
            Choice::I => "I",
            Choice::II => "II",
            Choice::III => "III",
            Choice::IV => "IV",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Choice> {
        Choice::ALL.get(i).copied()
    }
}

impl fmt::Display for Choice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.numeral())
    }
}

impl FromStr for Choice {
    type Err = ExtractError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "I" => Ok(Choice::I),
            "II" => Ok(Choice::II),
            "III" => Ok(Choice::III),
            "IV" => Ok(Choice::IV),
            _ => Err(ExtractError::NoChoice),
        }
    }
}

/// Finds bracketed numerals such as `[II]` (any case). All bracketed
/// numerals must agree; two different ones make the answer ambiguous.
pub fn extract_choice(answer_text: &str) -> Result<Choice, ExtractError> {
    let mut found: Vec<Choice> = Vec::new();
    let mut rest = answer_text;
    while let Some(open) = rest.find('[') {
        let after = &rest[open + 1..];
        match after.find(']') {
            Some(close) => {
                if let Ok(c) = after[..close].parse::<Choice>() {
                    if !found.contains(&c) {
                        found.push(c);
                    }
                }
                rest = &after[close + 1..];
            }
            None => break,
        }
    }
    match found.as_slice() {
        [] => Err(ExtractError::NoChoice),
        [only] => Ok(*only),
        many => Err(ExtractError::AmbiguousChoice(
            many.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(", "),
        )),
    }
}

/// Question text with its options laid out as `[I] a, [II] b, ...` on the
/// line after the stem.
pub fn format_question(stem: &str, options: &[String]) -> String {
    let listed: Vec<String> = options
        .iter()
        .zip(Choice::ALL)
        .map(|(o, c)| format!("[{c}] {o}"))
        .collect();
    format!("{stem}\n{}", listed.join(", "))
}
