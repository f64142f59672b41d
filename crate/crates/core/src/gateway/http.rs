//! OpenAI-compatible chat-completions client.

use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{
    normalize_logprobs, Completion, Gateway, GatewayError, LogprobRequest, SamplingConfig,
    TokenLogprob, DEFAULT_TIMEOUT_SECS, SYSTEM_PROMPT,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            attempts: 3,
            base_delay: Duration::from_millis(500),
        }
    }
}

/// Runs `op` until it succeeds, fails permanently, or exhausts the policy.
/// The delay doubles after every transient failure. A timeout on the last
/// attempt is reported with the total attempt count.
pub fn retry<T>(
    policy: RetryPolicy,
    mut op: impl FnMut(u32) -> Result<T, GatewayError>,
) -> Result<T, GatewayError> {
    let attempts = policy.attempts.max(1);
    let mut delay = policy.base_delay;
    for attempt in 1..=attempts {
        match op(attempt) {
            Ok(v) => return Ok(v),
            Err(e) if e.is_transient() && attempt < attempts => {
                log::warn!("attempt {attempt}/{attempts} failed: {e}; retrying in {delay:?}");
                thread::sleep(delay);
                delay *= 2;
            }
            Err(GatewayError::Timeout { .. }) => return Err(GatewayError::Timeout { attempts: attempt }),
            Err(e) => return Err(e),
        }
    }
    unreachable!("loop returns on the final attempt")
}

#[derive(Debug, Clone)]
pub struct HttpConfig {
    /// Base URL up to and including the API version, e.g. `http://host:8000/v1`.
    pub base_url: String,
    pub api_key: Option<String>,
    pub model: String,
    pub timeout: Duration,
    pub retry: RetryPolicy,
}

impl HttpConfig {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            api_key: None,
            model: model.into(),
            timeout: Duration::from_secs(DEFAULT_TIMEOUT_SECS),
            retry: RetryPolicy::default(),
        }
    }
}

#[derive(Debug, Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Debug, Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: Vec<ChatMessage<'a>>,
    temperature: f64,
    top_p: f64,
    n: usize,
    max_tokens: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    logprobs: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    top_logprobs: Option<usize>,
}

#[derive(Debug, Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Debug, Deserialize)]
struct ChatChoice {
    #[serde(default)]
    index: usize,
    message: ResponseMessage,
    #[serde(default)]
    finish_reason: Option<String>,
    #[serde(default)]
    logprobs: Option<ChoiceLogprobs>,
}

#[derive(Debug, Deserialize)]
struct ResponseMessage {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Debug, Deserialize)]
struct ChoiceLogprobs {
    #[serde(default)]
    content: Vec<TokenPosition>,
}

#[derive(Debug, Deserialize)]
struct TokenPosition {
    #[serde(default)]
    top_logprobs: Vec<WireLogprob>,
}

#[derive(Debug, Deserialize)]
struct WireLogprob {
    token: String,
    logprob: f64,
}

pub struct HttpGateway {
    config: HttpConfig,
    client: reqwest::blocking::Client,
    url: String,
}

impl HttpGateway {
    pub fn new(config: HttpConfig) -> Result<Self, GatewayError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| GatewayError::Transport(e.to_string()))?;
        let url = format!("{}/chat/completions", config.base_url.trim_end_matches('/'));
        Ok(Self {
            config,
            client,
            url,
        })
    }

    pub fn config(&self) -> &HttpConfig {
        &self.config
    }

    fn post_once(&self, body: &ChatRequest<'_>) -> Result<ChatResponse, GatewayError> {
        let mut req = self.client.post(&self.url).json(body);
        if let Some(key) = &self.config.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(classify_reqwest)?;
        let status = resp.status();
        let text = resp.text().map_err(classify_reqwest)?;
        if status.as_u16() == 401 || status.as_u16() == 403 {
            return Err(GatewayError::Auth(format!("HTTP {}: {}", status.as_u16(), text)));
        }
        if !status.is_success() {
            return Err(GatewayError::Http {
                status: status.as_u16(),
                body: text,
            });
        }
        serde_json::from_str(&text).map_err(|e| GatewayError::Malformed(e.to_string()))
    }

    fn post(&self, body: &ChatRequest<'_>) -> Result<ChatResponse, GatewayError> {
        retry(self.config.retry, |_| self.post_once(body))
    }

    fn request<'a>(&'a self, prompt: &'a str, cfg: &SamplingConfig) -> ChatRequest<'a> {
        ChatRequest {
            model: &self.config.model,
            messages: vec![
                ChatMessage {
                    role: "system",
                    content: SYSTEM_PROMPT,
                },
                ChatMessage {
                    role: "user",
                    content: prompt,
                },
            ],
            temperature: cfg.temperature,
            top_p: cfg.top_p,
            n: cfg.n,
            max_tokens: cfg.max_tokens,
            seed: cfg.seed,
            logprobs: None,
            top_logprobs: None,
        }
    }
}

fn classify_reqwest(e: reqwest::Error) -> GatewayError {
    if e.is_timeout() {
        GatewayError::Timeout { attempts: 1 }
    } else if e.is_decode() {
        GatewayError::Malformed(e.to_string())
    } else {
        GatewayError::Transport(e.to_string())
    }
}

impl Gateway for HttpGateway {
    fn generate(&self, prompt: &str, cfg: &SamplingConfig) -> Result<Vec<Completion>, GatewayError> {
        cfg.validate()?;
        let body = self.request(prompt, cfg);
        let mut resp = self.post(&body)?;
        if resp.choices.len() != cfg.n {
            return Err(GatewayError::Malformed(format!(
                "expected {} choices, got {}",
                cfg.n,
                resp.choices.len()
            )));
        }
        resp.choices.sort_by_key(|c| c.index);
        resp.choices
            .into_iter()
            .map(|c| {
                let text = c
                    .message
                    .content
                    .ok_or_else(|| GatewayError::Malformed("choice without content".into()))?;
                Ok(Completion {
                    text,
                    finish_reason: c.finish_reason,
                })
            })
            .collect()
    }

    fn next_token_logprobs(
        &self,
        req: &LogprobRequest,
    ) -> Result<Vec<TokenLogprob>, GatewayError> {
        if req.top_k < 2 {
            return Err(GatewayError::InvalidRequest(format!(
                "top_k must be >= 2, got {}",
                req.top_k
            )));
        }
        let mut cfg = SamplingConfig::greedy();
        cfg.max_tokens = 1;
        let mut body = self.request(&req.prompt, &cfg);
        body.logprobs = Some(true);
        body.top_logprobs = Some(req.top_k);
        let resp = self.post(&body)?;
        let first = resp
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.logprobs)
            .and_then(|l| l.content.into_iter().next())
            .ok_or_else(|| GatewayError::Malformed("response carries no token logprobs".into()))?;
        let pairs = first
            .top_logprobs
            .into_iter()
            .map(|w| TokenLogprob::new(w.token, w.logprob))
            .collect();
        normalize_logprobs(pairs, req.top_k)
    }
}
