//! Choosing one output among several, and confidence-versus-accuracy
//! tables.

use serde::{Deserialize, Serialize};

use crate::confidence::ConfidenceReport;

pub const DEFAULT_BINS: usize = 10;
pub const DEFAULT_BEST_OF: usize = 16;
pub const CURVE_HEADER: &str = "bin_lo,bin_hi,answer_acc,reason_acc,count";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SelectError {
    #[error("no samples to select from")]
    Empty,
    #[error("sample {0} has no confidence report")]
    MissingScore(u32),
    #[error("bin count must be positive")]
    NoBins,
    #[error("confidence {value} of sample {index} is outside [0, 1]")]
    ConfidenceRange { index: usize, value: f64 },
}

/// One sampled output as seen by the selectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub sample_id: u32,
    pub answer: Option<String>,
    pub report: Option<ConfidenceReport>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// P(True) of the answer given the reasoning.
    AnswerLevel,
    /// P(True) of the reasoning.
    ReasoningLevel,
    /// Product of the two.
    Combined,
}

impl Metric {
    pub fn of(self, report: &ConfidenceReport) -> f64 {
        match self {
            Metric::AnswerLevel => report.answer_confidence,
            Metric::ReasoningLevel => report.reasoning_confidence,
            Metric::Combined => report.combined,
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "answer_level" | "answer" => Ok(Metric::AnswerLevel),
            "reasoning_level" | "reasoning" => Ok(Metric::ReasoningLevel),
            "combined" => Ok(Metric::Combined),
            other => Err(format!("unknown metric {other:?}")),
        }
    }
}

/// A sample from the most common answer, lowest `sample_id` within it.
/// Count ties go to the class holding the lowest id. Samples without an
/// answer do not vote; if none has one, the lowest id is returned.
pub fn select_sc(samples: &[Candidate]) -> Result<u32, SelectError> {
    let lowest = samples.iter().map(|c| c.sample_id).min().ok_or(SelectError::Empty)?;
    let mut classes: Vec<(&str, usize, u32)> = Vec::new();
    for c in samples {
        let Some(a) = c.answer.as_deref() else { continue };
        match classes.iter_mut().find(|k| k.0 == a) {
            Some(k) => {
                k.1 += 1;
                k.2 = k.2.min(c.sample_id);
            }
            None => classes.push((a, 1, c.sample_id)),
        }
    }
    Ok(classes
        .iter()
        .min_by(|x, y| y.1.cmp(&x.1).then(x.2.cmp(&y.2)))
        .map_or(lowest, |k| k.2))
}

/// Highest `metric` among the `k` lowest-id samples, ties to the lowest id.
pub fn select_best_by(samples: &[Candidate], metric: Metric, k: usize) -> Result<u32, SelectError> {
    let mut pool: Vec<&Candidate> = samples.iter().collect();
    pool.sort_by_key(|c| c.sample_id);
    pool.truncate(k.max(1));
    let mut best: Option<(f64, u32)> = None;
    for c in pool {
        let report = c.report.as_ref().ok_or(SelectError::MissingScore(c.sample_id))?;
        let v = metric.of(report);
        if best.is_none_or(|(bv, _)| v > bv) {
            best = Some((v, c.sample_id));
        }
    }
    best.map(|b| b.1).ok_or(SelectError::Empty)
}

/// Highest combined confidence, ties to the lowest id.
pub fn select_ptrue(samples: &[Candidate]) -> Result<u32, SelectError> {
    select_best_by(samples, Metric::Combined, usize::MAX)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub confidence: f64,
    pub answer_correct: bool,
    pub reasoning_correct: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub bin_lo: f64,
    pub bin_hi: f64,
    pub answer_acc: Option<f64>,
    pub reason_acc: Option<f64>,
    pub count: usize,
}

/// Index of the bin `[i/B, (i+1)/B)` holding `c`; the last bin also holds 1.
pub fn bin_index(c: f64, bins: usize) -> usize {
    let b = bins as f64;
    let mut i = ((c * b).floor() as usize).min(bins - 1);
    if i > 0 && c < i as f64 / b {
        i -= 1;
    } else if i + 1 < bins && c >= (i + 1) as f64 / b {
        i += 1;
    }
    i
}

/// Equal-width bins over `[0, 1]` with per-bin answer and reasoning
/// accuracy. Empty bins are kept with `count = 0`.
pub fn confidence_accuracy_curve(
    points: &[CurvePoint],
    bins: usize,
) -> Result<Vec<CurveRow>, SelectError> {
    if bins == 0 {
        return Err(SelectError::NoBins);
    }
    let mut counts = vec![(0usize, 0usize, 0usize); bins];
    for (index, p) in points.iter().enumerate() {
        if !(0.0..=1.0).contains(&p.confidence) {
            return Err(SelectError::ConfidenceRange {
                index,
                value: p.confidence,
            });
        }
        let slot = &mut counts[bin_index(p.confidence, bins)];
        slot.0 += 1;
        slot.1 += p.answer_correct as usize;
        slot.2 += p.reasoning_correct as usize;
    }
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(i, (n, a, r))| {
            let acc = |k: usize| (n > 0).then(|| k as f64 / n as f64);
            CurveRow {
                bin_lo: i as f64 / bins as f64,
                bin_hi: (i + 1) as f64 / bins as f64,
                answer_acc: acc(a),
                reason_acc: acc(r),
                count: n,
            }
        })
        .collect())
}

/// CSV with header [`CURVE_HEADER`]; empty bins leave the accuracy fields
/// blank.
pub fn curve_csv(rows: &[CurveRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("in-memory csv write");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("csv is utf-8")
}
