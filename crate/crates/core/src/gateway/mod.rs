//! Access to chat-completion models.
//!
//! Everything downstream talks to a [`Gateway`]: sampled generation for task
//! prompts and first-token log-probabilities for the confidence prompts.
//! [`HttpGateway`] speaks the OpenAI-compatible wire format, [`MockGateway`]
//! answers from a fixture script, [`MockServer`] exposes a `MockGateway` over
//! HTTP, and [`BoundedGateway`] caps the number of in-flight requests.

mod bounded;
mod http;
mod mock;
mod server;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use bounded::BoundedGateway;
pub use http::{retry, HttpConfig, HttpGateway, RetryPolicy};
pub use mock::{FailureKind, FixtureEntry, MockFallback, MockGateway, MockStats};
pub use server::MockServer;

/// System prompt sent with every request.
pub const SYSTEM_PROMPT: &str = "Be a helpful assistant.";

pub const DEFAULT_TOP_K: usize = 20;
pub const DEFAULT_MAX_TOKENS: u32 = 1024;
pub const DEFAULT_PARALLELISM: usize = 8;
pub const DEFAULT_TIMEOUT_SECS: u64 = 120;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingConfig {
    pub temperature: f64,
    pub top_p: f64,
    pub n: usize,
    pub max_tokens: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl SamplingConfig {
    /// Self-training sampling: five outputs per question at T=1.0, top-p 0.9.
    pub fn train() -> Self {
        Self {
            temperature: 1.0,
            top_p: 0.9,
            n: 5,
            max_tokens: DEFAULT_MAX_TOKENS,
            seed: None,
        }
    }

    /// Inference-time scaling: eight outputs at T=0.7, top-p 0.9.
    pub fn scale() -> Self {
        Self {
            temperature: 0.7,
            top_p: 0.9,
            n: 8,
            max_tokens: DEFAULT_MAX_TOKENS,
            seed: None,
        }
    }

    /// Greedy decoding is a single T=0 sample.
    pub fn greedy() -> Self {
        Self {
            temperature: 0.0,
            top_p: 1.0,
            n: 1,
            max_tokens: DEFAULT_MAX_TOKENS,
            seed: None,
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "train" => Some(Self::train()),
            "scale" => Some(Self::scale()),
            "greedy" => Some(Self::greedy()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(GatewayError::InvalidRequest(format!(
                "temperature must be >= 0, got {}",
                self.temperature
            )));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(GatewayError::InvalidRequest(format!(
                "top_p must lie in (0, 1], got {}",
                self.top_p
            )));
        }
        if self.n == 0 {
            return Err(GatewayError::InvalidRequest("n must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    #[serde(default)]
    pub finish_reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenLogprob {
    pub token: String,
    pub logprob: f64,
}

impl TokenLogprob {
    pub fn new(token: impl Into<String>, logprob: f64) -> Self {
        Self {
            token: token.into(),
            logprob,
        }
    }
}

/// Asks for the distribution of the first generated token after `prompt`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogprobRequest {
    pub prompt: String,
    pub top_k: usize,
}

impl LogprobRequest {
    pub fn new(prompt: impl Into<String>) -> Self {
        Self {
            prompt: prompt.into(),
            top_k: DEFAULT_TOP_K,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GatewayError {
    #[error("authentication rejected: {0}")]
    Auth(String),
    #[error("request timed out after {attempts} attempt(s)")]
    Timeout { attempts: u32 },
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("no scripted response for prompt {prompt_sha256}")]
    Unscripted { prompt_sha256: String },
}

impl GatewayError {
    /// Failures worth retrying with backoff.
    pub fn is_transient(&self) -> bool {
        match self {
            GatewayError::Timeout { .. } | GatewayError::Transport(_) => true,
            GatewayError::Http { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }
}

pub trait Gateway: Send + Sync {
    /// Returns exactly `cfg.n` completions.
    fn generate(&self, prompt: &str, cfg: &SamplingConfig) -> Result<Vec<Completion>, GatewayError>;

    /// Top-k candidates for the first generated token, sorted by descending
    /// log-probability.
    fn next_token_logprobs(&self, req: &LogprobRequest)
        -> Result<Vec<TokenLogprob>, GatewayError>;
}

impl<G: Gateway + ?Sized> Gateway for &G {
    fn generate(&self, prompt: &str, cfg: &SamplingConfig) -> Result<Vec<Completion>, GatewayError> {
        (**self).generate(prompt, cfg)
    }
    fn next_token_logprobs(
        &self,
        req: &LogprobRequest,
    ) -> Result<Vec<TokenLogprob>, GatewayError> {
        (**self).next_token_logprobs(req)
    }
}

impl<G: Gateway + ?Sized> Gateway for Arc<G> {
    fn generate(&self, prompt: &str, cfg: &SamplingConfig) -> Result<Vec<Completion>, GatewayError> {
        (**self).generate(prompt, cfg)
    }
    fn next_token_logprobs(
        &self,
        req: &LogprobRequest,
    ) -> Result<Vec<TokenLogprob>, GatewayError> {
        (**self).next_token_logprobs(req)
    }
}

impl<G: Gateway + ?Sized> Gateway for Box<G> {
    fn generate(&self, prompt: &str, cfg: &SamplingConfig) -> Result<Vec<Completion>, GatewayError> {
        (**self).generate(prompt, cfg)
    }
    fn next_token_logprobs(
        &self,
        req: &LogprobRequest,
    ) -> Result<Vec<TokenLogprob>, GatewayError> {
        (**self).next_token_logprobs(req)
    }
}

/// Hex SHA-256 of the user prompt; the key used by mock fixtures.
pub fn prompt_sha256(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

/// Enforces the log-probability contract: finite, `<= 0`, sorted descending,
/// at most `top_k` entries.
pub fn normalize_logprobs(
    mut pairs: Vec<TokenLogprob>,
    top_k: usize,
) -> Result<Vec<TokenLogprob>, GatewayError> {
    if let Some(bad) = pairs
        .iter()
        .find(|p| !p.logprob.is_finite() || p.logprob > 0.0)
    {
        return Err(GatewayError::Malformed(format!(
            "log-probability {} for token {:?} is not a finite value <= 0",
            bad.logprob, bad.token
        )));
    }
    pairs.sort_by(|a, b| b.logprob.total_cmp(&a.logprob));
    pairs.truncate(top_k);
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_match_sampling_setup() {
        let t = SamplingConfig::train();
        assert_eq!((t.temperature, t.top_p, t.n), (1.0, 0.9, 5));
        let s = SamplingConfig::scale();
        assert_eq!((s.temperature, s.top_p, s.n), (0.7, 0.9, 8));
        let g = SamplingConfig::greedy();
        assert_eq!((g.temperature, g.n), (0.0, 1));
        assert!(SamplingConfig::preset("beam").is_none());
    }

    #[test]
    fn validation_rejects_bad_configs() {
        let mut c = SamplingConfig::train();
        c.top_p = 0.0;
        assert!(c.validate().is_err());
        c = SamplingConfig::train();
        c.n = 0;
        assert!(c.validate().is_err());
        c = SamplingConfig::train();
        c.temperature = -0.1;
        assert!(c.validate().is_err());
    }

    #[test]
    fn normalize_sorts_and_truncates() {
        let pairs = vec![
            TokenLogprob::new("B", -2.0),
            TokenLogprob::new("A", -0.1),
            TokenLogprob::new("C", -5.0),
        ];
        let out = normalize_logprobs(pairs, 2).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].token, "A");
        assert_eq!(out[1].token, "B");
    }

    #[test]
    fn normalize_rejects_positive_or_nan() {
        assert!(normalize_logprobs(vec![TokenLogprob::new("A", 0.5)], 20).is_err());
        assert!(normalize_logprobs(vec![TokenLogprob::new("A", f64::NAN)], 20).is_err());
    }

    #[test]
    fn transient_classification() {
        assert!(GatewayError::Timeout { attempts: 1 }.is_transient());
        assert!(GatewayError::Http { status: 503, body: String::new() }.is_transient());
        assert!(GatewayError::Http { status: 429, body: String::new() }.is_transient());
        assert!(!GatewayError::Http { status: 400, body: String::new() }.is_transient());
        assert!(!GatewayError::Auth("no".into()).is_transient());
    }
}
