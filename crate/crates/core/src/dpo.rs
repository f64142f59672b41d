//! Preference optimisation on a tabular softmax policy.
//!
//! The policy is an n-gram table: each context (the previous
//! `context_order` tokens, padded with a start symbol) owns a row of logits
//! over the vocabulary. Sequence log-probabilities, the pairwise loss and
//! its analytic gradient are exact, so the loss can be checked against
//! finite differences and enumeration.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::pairs::{build_core_pair, ScoredSample, DEFAULT_TIE_EPSILON};

pub const DEFAULT_BETA: f64 = 0.1;
pub const MAX_VOCAB: usize = 16;
pub const MAX_HALVINGS: u32 = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossForm {
    /// `-log σ(z)`.
    Canonical,
    /// `log σ(-z)`, unbounded below.
    AsPrinted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpoConfig {
    pub beta: f64,
    pub loss_form: LossForm,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for DpoConfig {
    fn default() -> Self {
        Self {
            beta: DEFAULT_BETA,
            loss_form: LossForm::Canonical,
            learning_rate: 1.0,
            seed: 0,
        }
    }
}

impl DpoConfig {
    pub fn validate(&self) -> Result<(), DpoError> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(DpoError::InvalidConfig(format!("beta must be > 0, got {}", self.beta)));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(DpoError::InvalidConfig(format!(
                "learning_rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DpoError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("vocabulary must have 1..={MAX_VOCAB} distinct symbols, got {0}")]
    Vocab(usize),
    #[error("token {token} outside vocabulary of size {size}")]
    Token { token: usize, size: usize },
    #[error("parameter table has {found} entries, expected {expected}")]
    Shape { expected: usize, found: usize },
    #[error("non-finite log-probability")]
    NonFinite,
    #[error("sampler produced {0} sequences; need at least 2")]
    TooFewSamples(usize),
    #[error("scorer returned {0}, outside [0, 1]")]
    Score(f64),
}

/// `-ln σ(x)`, stable for large |x|.
fn neg_log_sigmoid(x: f64) -> f64 {
    if x > 0.0 {
        (-x).exp().ln_1p()
    } else {
        -x + x.exp().ln_1p()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyPolicy {
    pub vocab: Vec<String>,
    pub context_order: usize,
    /// Row-major `contexts × vocab` logits.
    pub params: Vec<f64>,
}

impl ToyPolicy {
    pub fn uniform(vocab: &[&str], context_order: usize) -> Result<Self, DpoError> {
        let mut distinct = vocab.to_vec();
        distinct.sort_unstable();
        distinct.dedup();
        if vocab.is_empty() || vocab.len() > MAX_VOCAB || distinct.len() != vocab.len() {
            return Err(DpoError::Vocab(vocab.len()));
        }
        let v = vocab.len();
        let contexts = (v + 1).pow(context_order as u32);
        Ok(Self {
            vocab: vocab.iter().map(|s| s.to_string()).collect(),
            context_order,
            params: vec![0.0; contexts * v],
        })
    }

    /// Logits drawn uniformly from `[-scale, scale]`.
    pub fn random(
        vocab: &[&str],
        context_order: usize,
        scale: f64,
        rng: &mut impl Rng,
    ) -> Result<Self, DpoError> {
        let mut p = Self::uniform(vocab, context_order)?;
        for x in &mut p.params {
            *x = rng.random_range(-scale..=scale);
        }
        Ok(p)
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn num_contexts(&self) -> usize {
        (self.vocab_size() + 1).pow(self.context_order as u32)
    }

    pub fn validate(&self) -> Result<(), DpoError> {
        let v = self.vocab_size();
        if v == 0 || v > MAX_VOCAB {
            return Err(DpoError::Vocab(v));
        }
        let expected = self.num_contexts() * v;
        if self.params.len() != expected {
            return Err(DpoError::Shape {
                expected,
                found: self.params.len(),
            });
        }
        Ok(())
    }

    pub fn token_index(&self, symbol: &str) -> Option<usize> {
        self.vocab.iter().position(|s| s == symbol)
    }

    /// Row index of the context preceding position `t`.
    fn context_index(&self, tokens: &[usize], t: usize) -> usize {
        let start = self.vocab_size();
        let base = start + 1;
        let mut idx = 0;
        for j in 1..=self.context_order {
            let sym = if t >= j { tokens[t - j] } else { start };
            idx = idx * base + sym;
        }
        idx
    }

    pub fn row(&self, context: usize) -> &[f64] {
        let v = self.vocab_size();
        &self.params[context * v..(context + 1) * v]
    }

    fn softmax_row(&self, context: usize) -> Vec<f64> {
        let row = self.row(context);
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = row.iter().map(|x| (x - m).exp()).collect();
        let s: f64 = e.iter().sum();
        e.into_iter().map(|x| x / s).collect()
    }

    fn log_softmax_at(&self, context: usize, token: usize) -> f64 {
        let row = self.row(context);
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + row.iter().map(|x| (x - m).exp()).sum::<f64>().ln();
        row[token] - lse
    }

    fn check_tokens(&self, tokens: &[usize]) -> Result<(), DpoError> {
        let size = self.vocab_size();
        match tokens.iter().find(|&&t| t >= size) {
            Some(&token) => Err(DpoError::Token { token, size }),
            None => Ok(()),
        }
    }

    /// Next-token distribution after `prefix`.
    pub fn next_distribution(&self, prefix: &[usize]) -> Vec<f64> {
        self.softmax_row(self.context_index(prefix, prefix.len()))
    }

    pub fn sample(&self, len: usize, rng: &mut impl Rng) -> Vec<usize> {
        let mut seq = Vec::with_capacity(len);
        for _ in 0..len {
            let probs = self.next_distribution(&seq);
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut pick = probs.len() - 1;
            for (i, p) in probs.iter().enumerate() {
                acc += p;
                if u < acc {
                    pick = i;
                    break;
                }
            }
            seq.push(pick);
        }
        seq
    }

    pub fn greedy(&self, len: usize) -> Vec<usize> {
        let mut seq = Vec::with_capacity(len);
        for _ in 0..len {
            let probs = self.next_distribution(&seq);
            let best = (0..probs.len())
                .min_by(|&a, &b| probs[b].total_cmp(&probs[a]).then(a.cmp(&b)))
                .expect("non-empty vocab");
            seq.push(best);
        }
        seq
    }
}

/// `Σ_t log softmax(row(context_t))[token_t]`.
pub fn sequence_logprob(policy: &ToyPolicy, tokens: &[usize]) -> Result<f64, DpoError> {
    policy.check_tokens(tokens)?;
    Ok((0..tokens.len())
        .map(|t| policy.log_softmax_at(policy.context_index(tokens, t), tokens[t]))
        .sum())
}

/// Gradient of `sequence_logprob` with respect to every logit.
pub fn sequence_logprob_grad(policy: &ToyPolicy, tokens: &[usize]) -> Result<Vec<f64>, DpoError> {
    policy.check_tokens(tokens)?;
    let v = policy.vocab_size();
    let mut grad = vec![0.0; policy.params.len()];
    for t in 0..tokens.len() {
        let ctx = policy.context_index(tokens, t);
        let probs = policy.softmax_row(ctx);
        let row = &mut grad[ctx * v..(ctx + 1) * v];
        for (g, p) in row.iter_mut().zip(&probs) {
            *g -= p;
        }
        row[tokens[t]] += 1.0;
    }
    Ok(grad)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairLogprobs {
    pub theta_w: f64,
    pub theta_l: f64,
    pub ref_w: f64,
    pub ref_l: f64,
}

impl PairLogprobs {
    pub fn compute(
        policy: &ToyPolicy,
        reference: &ToyPolicy,
        winner: &[usize],
        loser: &[usize],
    ) -> Result<Self, DpoError> {
        Ok(Self {
            theta_w: sequence_logprob(policy, winner)?,
            theta_l: sequence_logprob(policy, loser)?,
            ref_w: sequence_logprob(reference, winner)?,
            ref_l: sequence_logprob(reference, loser)?,
        })
    }

    pub fn is_finite(&self) -> bool {
        [self.theta_w, self.theta_l, self.ref_w, self.ref_l]
            .iter()
            .all(|x| x.is_finite())
    }

    /// `z = β((θ_w − ref_w) − (θ_l − ref_l))`.
    pub fn margin(&self, beta: f64) -> f64 {
        beta * ((self.theta_w - self.ref_w) - (self.theta_l - self.ref_l))
    }
}

pub fn loss_from_margin(z: f64, form: LossForm) -> f64 {
    match form {
        LossForm::Canonical => neg_log_sigmoid(z),
        LossForm::AsPrinted => -neg_log_sigmoid(-z),
    }
}

/// Derivative of the loss with respect to the margin.
pub fn loss_slope(z: f64, form: LossForm) -> f64 {
    match form {
        LossForm::Canonical => sigmoid(z) - 1.0,
        LossForm::AsPrinted => -sigmoid(z),
    }
}

pub fn dpo_loss(lp: &PairLogprobs, cfg: &DpoConfig) -> f64 {
    loss_from_margin(lp.margin(cfg.beta), cfg.loss_form)
}

/// `dL/dθ = L'(z) · β · (∇log π(w) − ∇log π(l))`. The reference only enters
/// through `z`.
pub fn dpo_grad(
    policy: &ToyPolicy,
    reference: &ToyPolicy,
    winner: &[usize],
    loser: &[usize],
    cfg: &DpoConfig,
) -> Result<Vec<f64>, DpoError> {
    let lp = PairLogprobs::compute(policy, reference, winner, loser)?;
    let scale = loss_slope(lp.margin(cfg.beta), cfg.loss_form) * cfg.beta;
    let gw = sequence_logprob_grad(policy, winner)?;
    let gl = sequence_logprob_grad(policy, loser)?;
    Ok(gw
        .iter()
        .zip(&gl)
        .map(|(w, l)| scale * (w - l))
        .collect())
}

/// Central finite differences of the loss over every parameter.
pub fn finite_difference_grad(
    policy: &ToyPolicy,
    reference: &ToyPolicy,
    winner: &[usize],
    loser: &[usize],
    cfg: &DpoConfig,
    h: f64,
) -> Result<Vec<f64>, DpoError> {
    let mut probe = policy.clone();
    let mut grad = vec![0.0; policy.params.len()];
    for (i, g) in grad.iter_mut().enumerate() {
        let x = policy.params[i];
        probe.params[i] = x + h;
        let up = dpo_loss(&PairLogprobs::compute(&probe, reference, winner, loser)?, cfg);
        probe.params[i] = x - h;
        let down = dpo_loss(&PairLogprobs::compute(&probe, reference, winner, loser)?, cfg);
        probe.params[i] = x;
        *g = (up - down) / (2.0 * h);
    }
    Ok(grad)
}

/// Largest entrywise `|a − n| / max(|a|, |n|, floor)`.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepStatus {
    Updated,
    /// Every sample scored the same; nothing to prefer.
    NoPair,
    /// No step size in the halving schedule reduced the loss.
    NoDescent,
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub step: u64,
    pub question_id: String,
    pub status: StepStatus,
    pub loss_before: Option<f64>,
    pub loss_after: Option<f64>,
    pub margin_before: Option<f64>,
    pub margin_after: Option<f64>,
    pub pair_scores: Option<[f64; 2]>,
    pub step_size: Option<f64>,
}

impl StepReport {
    fn skipped(step: u64, question_id: &str, status: StepStatus) -> Self {
        Self {
            step,
            question_id: question_id.to_string(),
            status,
            loss_before: None,
            loss_after: None,
            margin_before: None,
            margin_after: None,
            pair_scores: None,
            step_size: None,
        }
    }
}

/// One gradient-descent step on a single pair. The step size starts at the
/// configured learning rate and halves until the loss decreases and the
/// margin grows; if neither happens within [`MAX_HALVINGS`] the policy is
/// left untouched.
pub fn pair_step(
    policy: &mut ToyPolicy,
    reference: &ToyPolicy,
    winner: &[usize],
    loser: &[usize],
    cfg: &DpoConfig,
) -> Result<PairStep, DpoError> {
    let lp = PairLogprobs::compute(policy, reference, winner, loser)?;
    if !lp.is_finite() {
        return Err(DpoError::NonFinite);
    }
    let z0 = lp.margin(cfg.beta);
    let l0 = loss_from_margin(z0, cfg.loss_form);
    let grad = dpo_grad(policy, reference, winner, loser, cfg)?;
    let mut candidate = policy.clone();
    let mut lr = cfg.learning_rate;
    for _ in 0..=MAX_HALVINGS {
        for ((c, p), g) in candidate.params.iter_mut().zip(&policy.params).zip(&grad) {
            *c = p - lr * g;
        }
        let z1 = PairLogprobs::compute(&candidate, reference, winner, loser)?.margin(cfg.beta);
        let l1 = loss_from_margin(z1, cfg.loss_form);
        if l1 < l0 && z1 > z0 {
            std::mem::swap(policy, &mut candidate);
            return Ok(PairStep {
                loss_before: l0,
                loss_after: l1,
                margin_before: z0,
                margin_after: z1,
                step_size: Some(lr),
            });
        }
        lr /= 2.0;
    }
    Ok(PairStep {
        loss_before: l0,
        loss_after: l0,
        margin_before: z0,
        margin_after: z0,
        step_size: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairStep {
    pub loss_before: f64,
    pub loss_after: f64,
    pub margin_before: f64,
    pub margin_after: f64,
    /// `None` when no step was taken.
    pub step_size: Option<f64>,
}

/// Samples, scores, pairs the best and worst sample and takes one step.
pub fn online_dpo_step<E, S, C>(
    step: u64,
    policy: &mut ToyPolicy,
    reference: &ToyPolicy,
    question_id: &str,
    sampler: &mut S,
    scorer: &mut C,
    cfg: &DpoConfig,
) -> Result<StepReport, E>
where
    E: From<DpoError>,
    S: FnMut(&ToyPolicy) -> Result<Vec<Vec<usize>>, E>,
    C: FnMut(&[usize]) -> Result<f64, E>,
{
    cfg.validate()?;
    let samples = sampler(policy)?;
    if samples.len() < 2 {
        return Err(DpoError::TooFewSamples(samples.len()).into());
    }
    let mut scored = Vec::with_capacity(samples.len());
    for (i, s) in samples.iter().enumerate() {
        let score = scorer(s)?;
        if !(0.0..=1.0).contains(&score) {
            return Err(DpoError::Score(score).into());
        }
        scored.push(ScoredSample::combined(i as u32, score));
    }
    let pair = build_core_pair(question_id, &scored, DEFAULT_TIE_EPSILON)
        .map_err(|e| DpoError::InvalidConfig(e.to_string()))?;
    let Some(pair) = pair else {
        return Ok(StepReport::skipped(step, question_id, StepStatus::NoPair));
    };
    let winner = &samples[pair.winner as usize];
    let loser = &samples[pair.loser as usize];
    let outcome = pair_step(policy, reference, winner, loser, cfg)?;
    Ok(StepReport {
        step,
        question_id: question_id.to_string(),
        status: if outcome.step_size.is_some() {
            StepStatus::Updated
        } else {
            StepStatus::NoDescent
        },
        loss_before: Some(outcome.loss_before),
        loss_after: Some(outcome.loss_after),
        margin_before: Some(outcome.margin_before),
        margin_after: Some(outcome.margin_after),
        pair_scores: Some([pair.winner_score, pair.loser_score]),
        step_size: outcome.step_size,
    })
}

/// A toy question whose outputs are fixed-length token strings: all but
/// the last token are reasoning, the last token is the answer.
///
/// * the single `correct` sequence scores `correct_score`;
/// * other sequences ending in `correct[last]` are right by luck and score
///   `lucky_score`;
/// * everything else scores `wrong_score`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTask {
    pub question_id: String,
    pub vocab: Vec<String>,
    pub correct: Vec<String>,
    pub correct_score: f64,
    pub lucky_score: f64,
    pub wrong_score: f64,
}

impl Default for SyntheticTask {
    fn default() -> Self {
        Self {
            question_id: "synthetic-0".into(),
            vocab: ["g", "e", "A", "W"].map(String::from).to_vec(),
            correct: ["g", "g", "A"].map(String::from).to_vec(),
            correct_score: 0.9,
            lucky_score: 0.3,
            wrong_score: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SequenceFamily {
    Correct,
    Lucky,
    Wrong,
}

impl SyntheticTask {
    pub fn vocab_refs(&self) -> Vec<&str> {
        self.vocab.iter().map(String::as_str).collect()
    }

    pub fn len(&self) -> usize {
        self.correct.len()
    }

    pub fn is_empty(&self) -> bool {
        self.correct.is_empty()
    }

    pub fn encode(&self, symbols: &[&str]) -> Result<Vec<usize>, DpoError> {
        symbols
            .iter()
            .map(|s| {
                self.vocab
                    .iter()
                    .position(|v| v == s)
                    .ok_or(DpoError::Token {
                        token: usize::MAX,
                        size: self.vocab.len(),
                    })
            })
            .collect()
    }

    pub fn correct_tokens(&self) -> Result<Vec<usize>, DpoError> {
        let refs: Vec<&str> = self.correct.iter().map(String::as_str).collect();
        self.encode(&refs)
    }

    pub fn family(&self, tokens: &[usize]) -> Result<SequenceFamily, DpoError> {
        let correct = self.correct_tokens()?;
        Ok(if tokens == correct.as_slice() {
            SequenceFamily::Correct
        } else if tokens.len() == correct.len() && tokens.last() == correct.last() {
            SequenceFamily::Lucky
        } else {
            SequenceFamily::Wrong
        })
    }

    /// Scores reasoning and answer jointly.
    pub fn oracle_score(&self, tokens: &[usize]) -> Result<f64, DpoError> {
        Ok(match self.family(tokens)? {
            SequenceFamily::Correct => self.correct_score,
            SequenceFamily::Lucky => self.lucky_score,
            SequenceFamily::Wrong => self.wrong_score,
        })
    }

    /// Looks at the final answer only.
    pub fn answer_only_score(&self, tokens: &[usize]) -> Result<f64, DpoError> {
        Ok(match self.family(tokens)? {
            SequenceFamily::Correct | SequenceFamily::Lucky => 1.0,
            SequenceFamily::Wrong => 0.0,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scorer {
    Oracle,
    AnswerOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticRunConfig {
    pub task: SyntheticTask,
    pub dpo: DpoConfig,
    pub steps: u64,
    pub samples_per_step: usize,
    pub context_order: usize,
    pub scorer: Scorer,
}

impl Default for SyntheticRunConfig {
    fn default() -> Self {
        Self {
            task: SyntheticTask::default(),
            dpo: DpoConfig {
                learning_rate: 2.0,
                ..DpoConfig::default()
            },
            steps: 200,
            samples_per_step: 8,
            context_order: 1,
            scorer: Scorer::Oracle,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticRun {
    pub initial: ToyPolicy,
    pub policy: ToyPolicy,
    pub reports: Vec<StepReport>,
    pub p_correct_initial: f64,
    pub p_correct_final: f64,
    pub greedy_score_initial: f64,
    pub greedy_score_final: f64,
}

/// Online self-training from a uniform policy, fully determined by the seed.
pub fn run_synthetic(cfg: &SyntheticRunConfig) -> Result<SyntheticRun, DpoError> {
    cfg.dpo.validate()?;
    let task = &cfg.task;
    let reference = ToyPolicy::uniform(&task.vocab_refs(), cfg.context_order)?;
    let mut policy = reference.clone();
    let correct = task.correct_tokens()?;
    let p_correct_initial = sequence_logprob(&policy, &correct)?.exp();
    let greedy_score_initial = task.oracle_score(&policy.greedy(task.len()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.dpo.seed);
    let mut reports = Vec::with_capacity(cfg.steps as usize);
    for step in 0..cfg.steps {
        let mut sampler = |p: &ToyPolicy| -> Result<Vec<Vec<usize>>, DpoError> {
            Ok((0..cfg.samples_per_step)
                .map(|_| p.sample(task.len(), &mut rng))
                .collect())
        };
        let mut scorer = |s: &[usize]| match cfg.scorer {
            Scorer::Oracle => task.oracle_score(s),
            Scorer::AnswerOnly => task.answer_only_score(s),
        };
        let report = online_dpo_step(
            step,
            &mut policy,
            &reference,
            &task.question_id,
            &mut sampler,
            &mut scorer,
            &cfg.dpo,
        )?;
        reports.push(report);
    }
    Ok(SyntheticRun {
        p_correct_final: sequence_logprob(&policy, &correct)?.exp(),
        greedy_score_final: task.oracle_score(&policy.greedy(task.len()))?,
        initial: reference,
        policy,
        reports,
        p_correct_initial,
        greedy_score_initial,
    })
}
