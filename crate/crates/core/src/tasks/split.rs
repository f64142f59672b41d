//! Response-format parsing: locating the reasoning and final-answer sections
//! and segmenting reasoning into statements.

pub const REASONING_MARKER: &str = "**Reasoning:**";
pub const ANSWER_MARKER: &str = "**Final answer:**";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SplitError {
    #[error("empty output")]
    Empty,
    #[error("output has no final-answer marker")]
    MissingAnswerMarker,
}

/// Untrimmed slices of a raw output. Concatenating `preamble`,
/// `reasoning_marker`, `reasoning`, `answer_marker` and `answer` gives back
/// the raw text exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Sections<'a> {
    pub preamble: &'a str,
    pub reasoning_marker: &'a str,
    pub reasoning: &'a str,
    pub answer_marker: &'a str,
    pub answer: &'a str,
}

impl Sections<'_> {
    pub fn reasoning_text(&self) -> &str {
        self.reasoning.trim()
    }

    pub fn answer_text(&self) -> &str {
        self.answer.trim()
    }

    pub fn reassemble(&self) -> String {
        [
            self.preamble,
            self.reasoning_marker,
            self.reasoning,
            self.answer_marker,
            self.answer,
        ]
        .concat()
    }
}

fn find_ci(haystack: &str, needle: &str) -> Vec<usize> {
    let h = haystack.as_bytes();
    let n = needle.as_bytes();
    if n.len() > h.len() {
        return Vec::new();
    }
    (0..=h.len() - n.len())
        .filter(|&i| h[i..i + n.len()].eq_ignore_ascii_case(n))
        .collect()
}

/// Splits a model output at the last final-answer marker. The reasoning is
/// whatever follows the first reasoning marker before it; without a
/// reasoning marker, everything ahead of the answer marker is reasoning.
/// Markers match ASCII case-insensitively.
pub fn split_sections(raw: &str) -> Result<Sections<'_>, SplitError> {
    if raw.trim().is_empty() {
        return Err(SplitError::Empty);
    }
    let answer_at = *find_ci(raw, ANSWER_MARKER)
        .last()
        .ok_or(SplitError::MissingAnswerMarker)?;
    let answer_end = answer_at + ANSWER_MARKER.len();
    let head = &raw[..answer_at];
    let (preamble, reasoning_marker, reasoning) = match find_ci(head, REASONING_MARKER).first() {
        Some(&r) => {
            let r_end = r + REASONING_MARKER.len();
            (&raw[..r], &raw[r..r_end], &raw[r_end..answer_at])
        }
        None => ("", "", head),
    };
    Ok(Sections {
        preamble,
        reasoning_marker,
        reasoning,
        answer_marker: &raw[answer_at..answer_end],
        answer: &raw[answer_end..],
    })
}

/// Trimmed `(reasoning_text, answer_text)`.
pub fn split_reasoning_answer(raw: &str) -> Result<(String, String), SplitError> {
    let s = split_sections(raw)?;
    Ok((s.reasoning_text().to_string(), s.answer_text().to_string()))
}

/// Breaks reasoning into statements: one per non-empty line, with lines
/// shorter than three characters folded into the previous statement. A
/// single resulting statement is further split at ". " boundaries.
pub fn segment_statements(reasoning: &str) -> Vec<String> {
    let mut statements: Vec<String> = Vec::new();
    for line in reasoning.lines().map(str::trim).filter(|l| !l.is_empty()) {
        match statements.last_mut() {
            Some(prev) if line.chars().count() < 3 => {
                prev.push(' ');
                prev.push_str(line);
            }
            _ => statements.push(line.to_string()),
        }
    }
    if statements.len() == 1 {
        let only = statements.pop().unwrap();
        statements = split_sentences(&only);
    }
    statements
}

fn split_sentences(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(i) = rest.find(". ") {
        let sentence = rest[..=i].trim();
        if !sentence.is_empty() {
            out.push(sentence.to_string());
        }
        rest = &rest[i + 2..];
    }
    let tail = rest.trim();
    if !tail.is_empty() {
        out.push(tail.to_string());
    }
    out
}
