//! Script-driven gateway for tests and offline runs.
//!
//! Fixture files are JSONL, one entry per prompt:
//!
//! ```text
//! {"prompt_sha256": "<hex>", "completions": ["...", "..."], "logprobs": [["A", -0.1], ["B", -2.4]]}
//! ```
//!
//! Repeated `generate` calls for the same prompt walk through `completions`
//! in order, wrapping around. An optional `"fail"` field injects a failure
//! (`timeout`, `auth`, `malformed`, `server_error`) on every call for that
//! prompt.

use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{
    normalize_logprobs, prompt_sha256, Completion, Gateway, GatewayError, LogprobRequest,
    SamplingConfig, TokenLogprob,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    Timeout,
    Auth,
    Malformed,
    ServerError,
}

impl FailureKind {
    fn as_error(self) -> GatewayError {
        match self {
            FailureKind::Timeout => GatewayError::Timeout { attempts: 1 },
            FailureKind::Auth => GatewayError::Auth("mock: scripted auth failure".into()),
            FailureKind::Malformed => GatewayError::Malformed("mock: scripted malformed body".into()),
            FailureKind::ServerError => GatewayError::Http {
                status: 500,
                body: "mock: scripted server error".into(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureEntry {
    pub prompt_sha256: String,
    #[serde(default)]
    pub completions: Vec<String>,
    #[serde(default)]
    pub logprobs: Vec<(String, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fail: Option<FailureKind>,
}

impl FixtureEntry {
    pub fn completions(prompt: &str, completions: Vec<String>) -> Self {
        Self {
            prompt_sha256: prompt_sha256(prompt),
            completions,
            logprobs: Vec::new(),
            fail: None,
        }
    }

    pub fn logprobs(prompt: &str, logprobs: Vec<(String, f64)>) -> Self {
        Self {
            prompt_sha256: prompt_sha256(prompt),
            completions: Vec::new(),
            logprobs,
            fail: None,
        }
    }

    pub fn failing(prompt: &str, kind: FailureKind) -> Self {
        Self {
            prompt_sha256: prompt_sha256(prompt),
            completions: Vec::new(),
            logprobs: Vec::new(),
            fail: Some(kind),
        }
    }
}

/// Behaviour for prompts that have no fixture entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MockFallback {
    /// Every unscripted call fails with [`GatewayError::Unscripted`].
    Error,
    /// Unscripted log-probability requests get a two-token A/B distribution
    /// derived from `sha256(seed || prompt)`. Generation still fails.
    Seeded(u64),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MockStats {
    pub generate_calls: usize,
    pub logprob_calls: usize,
    pub max_in_flight: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum FixtureError {
    #[error("cannot read fixture file: {0}")]
    Io(#[from] std::io::Error),
    #[error("fixture line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub struct MockGateway {
    entries: HashMap<String, FixtureEntry>,
    fallback: MockFallback,
    cursors: Mutex<HashMap<String, usize>>,
    delay: Option<Duration>,
    generate_calls: AtomicUsize,
    logprob_calls: AtomicUsize,
    in_flight: AtomicUsize,
    max_in_flight: AtomicUsize,
}

impl MockGateway {
    pub fn new(entries: impl IntoIterator<Item = FixtureEntry>, fallback: MockFallback) -> Self {
        Self {
            entries: entries
                .into_iter()
                .map(|e| (e.prompt_sha256.clone(), e))
                .collect(),
            fallback,
            cursors: Mutex::new(HashMap::new()),
            delay: None,
            generate_calls: AtomicUsize::new(0),
            logprob_calls: AtomicUsize::new(0),
            in_flight: AtomicUsize::new(0),
            max_in_flight: AtomicUsize::new(0),
        }
    }

    pub fn parse_jsonl(text: &str, fallback: MockFallback) -> Result<Self, FixtureError> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let entry: FixtureEntry = serde_json::from_str(line).map_err(|e| FixtureError::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
            entries.push(entry);
        }
        Ok(Self::new(entries, fallback))
    }

    pub fn load(path: &Path, fallback: MockFallback) -> Result<Self, FixtureError> {
        Self::parse_jsonl(&std::fs::read_to_string(path)?, fallback)
    }

    /// Holds every call for `delay` so concurrent callers overlap.
    pub fn with_delay(mut self, delay: Duration) -> Self {
        self.delay = Some(delay);
        self
    }

    pub fn stats(&self) -> MockStats {
        MockStats {
            generate_calls: self.generate_calls.load(Ordering::SeqCst),
            logprob_calls: self.logprob_calls.load(Ordering::SeqCst),
            max_in_flight: self.max_in_flight.load(Ordering::SeqCst),
        }
    }

    pub fn failure_for(&self, prompt: &str) -> Option<FailureKind> {
        self.entries.get(&prompt_sha256(prompt)).and_then(|e| e.fail)
    }

    fn track<T>(&self, f: impl FnOnce() -> T) -> T {
        let now = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        self.max_in_flight.fetch_max(now, Ordering::SeqCst);
        if let Some(d) = self.delay {
            thread::sleep(d);
        }
        let out = f();
        self.in_flight.fetch_sub(1, Ordering::SeqCst);
        out
    }

    fn seeded_logprobs(seed: u64, prompt: &str) -> Vec<TokenLogprob> {
        let mut h = Sha256::new();
        h.update(seed.to_le_bytes());
        h.update(prompt.as_bytes());
        let digest = h.finalize();
        let mut bytes = [0u8; 8];
        bytes.copy_from_slice(&digest[..8]);
        let u = (u64::from_le_bytes(bytes) >> 11) as f64 / (1u64 << 53) as f64;
        let p = 0.05 + 0.9 * u;
        vec![
            TokenLogprob::new("A", p.ln()),
            TokenLogprob::new("B", (1.0 - p).ln()),
        ]
    }
}

impl Gateway for MockGateway {
    fn generate(&self, prompt: &str, cfg: &SamplingConfig) -> Result<Vec<Completion>, GatewayError> {
        self.generate_calls.fetch_add(1, Ordering::SeqCst);
        cfg.validate()?;
        self.track(|| {
            let key = prompt_sha256(prompt);
            let entry = match self.entries.get(&key) {
                Some(e) => e,
                None => return Err(GatewayError::Unscripted { prompt_sha256: key }),
            };
            if let Some(kind) = entry.fail {
                return Err(kind.as_error());
            }
            if entry.completions.is_empty() {
                return Err(GatewayError::Unscripted { prompt_sha256: key });
            }
            let mut cursors = self.cursors.lock().expect("cursor lock poisoned");
            let cursor = cursors.entry(key).or_insert(0);
            let out = (0..cfg.n)
                .map(|i| Completion {
                    text: entry.completions[(*cursor + i) % entry.completions.len()].clone(),
                    finish_reason: Some("stop".into()),
                })
                .collect();
            *cursor = (*cursor + cfg.n) % entry.completions.len();
            Ok(out)
        })
    }

    fn next_token_logprobs(
        &self,
        req: &LogprobRequest,
    ) -> Result<Vec<TokenLogprob>, GatewayError> {
        self.logprob_calls.fetch_add(1, Ordering::SeqCst);
        if req.top_k < 2 {
            return Err(GatewayError::InvalidRequest(format!(
                "top_k must be >= 2, got {}",
                req.top_k
            )));
        }
        self.track(|| {
            let key = prompt_sha256(&req.prompt);
            let pairs = match (self.entries.get(&key), self.fallback) {
                (Some(e), _) if e.fail.is_some() => return Err(e.fail.unwrap().as_error()),
                (Some(e), _) if !e.logprobs.is_empty() => e
                    .logprobs
                    .iter()
                    .map(|(t, lp)| TokenLogprob::new(t.clone(), *lp))
                    .collect(),
                (_, MockFallback::Seeded(seed)) => Self::seeded_logprobs(seed, &req.prompt),
                _ => return Err(GatewayError::Unscripted { prompt_sha256: key }),
            };
            normalize_logprobs(pairs, req.top_k)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scripted_completions_come_back_in_order() {
        let texts: Vec<String> = (0..5).map(|i| format!("c{i}")).collect();
        let gw = MockGateway::new(
            [FixtureEntry::completions("p", texts.clone())],
            MockFallback::Error,
        );
        let out = gw.generate("p", &SamplingConfig::train()).unwrap();
        assert_eq!(out.len(), 5);
        assert_eq!(out.iter().map(|c| c.text.clone()).collect::<Vec<_>>(), texts);
    }

    #[test]
    fn cursor_advances_between_calls() {
        let gw = MockGateway::new(
            [FixtureEntry::completions("p", vec!["a".into(), "b".into(), "c".into()])],
            MockFallback::Error,
        );
        let mut cfg = SamplingConfig::greedy();
        let first = gw.generate("p", &cfg).unwrap();
        cfg.n = 3;
        let next = gw.generate("p", &cfg).unwrap();
        assert_eq!(first[0].text, "a");
        let texts: Vec<_> = next.iter().map(|c| c.text.as_str()).collect();
        assert_eq!(texts, ["b", "c", "a"]);
    }

    #[test]
    fn scripted_logprobs_are_returned_sorted() {
        let gw = MockGateway::new(
            [FixtureEntry::logprobs(
                "p",
                vec![("B".into(), -2.0), ("A".into(), -0.2), ("C".into(), -4.0)],
            )],
            MockFallback::Error,
        );
        let out = gw.next_token_logprobs(&LogprobRequest::new("p")).unwrap();
        assert_eq!(
            out,
            vec![
                TokenLogprob::new("A", -0.2),
                TokenLogprob::new("B", -2.0),
                TokenLogprob::new("C", -4.0)
            ]
        );
        let mut small = LogprobRequest::new("p");
        small.top_k = 2;
        assert_eq!(gw.next_token_logprobs(&small).unwrap().len(), 2);
    }

    #[test]
    fn unscripted_prompt_errors_without_fallback() {
        let gw = MockGateway::new([], MockFallback::Error);
        assert!(matches!(
            gw.next_token_logprobs(&LogprobRequest::new("x")),
            Err(GatewayError::Unscripted { .. })
        ));
        assert!(matches!(
            gw.generate("x", &SamplingConfig::greedy()),
            Err(GatewayError::Unscripted { .. })
        ));
    }

    #[test]
    fn seeded_fallback_is_deterministic_and_normalized() {
        let a = MockGateway::new([], MockFallback::Seeded(7));
        let b = MockGateway::new([], MockFallback::Seeded(7));
        let c = MockGateway::new([], MockFallback::Seeded(8));
        let req = LogprobRequest::new("some prompt");
        let la = a.next_token_logprobs(&req).unwrap();
        assert_eq!(la, b.next_token_logprobs(&req).unwrap());
        assert_ne!(la, c.next_token_logprobs(&req).unwrap());
        let mass: f64 = la.iter().map(|t| t.logprob.exp()).sum();
        assert!((mass - 1.0).abs() < 1e-12);
    }

    #[test]
    fn injected_failures_are_typed() {
        let gw = MockGateway::new(
            [
                FixtureEntry::failing("t", FailureKind::Timeout),
                FixtureEntry::failing("a", FailureKind::Auth),
            ],
            MockFallback::Seeded(0),
        );
        assert!(matches!(
            gw.generate("t", &SamplingConfig::greedy()),
            Err(GatewayError::Timeout { .. })
        ));
        assert!(matches!(
            gw.next_token_logprobs(&LogprobRequest::new("a")),
            Err(GatewayError::Auth(_))
        ));
    }

    #[test]
    fn fixture_parse_error_names_line() {
        let text = format!(
            "{}\nnot json\n",
            serde_json::to_string(&FixtureEntry::completions("p", vec!["x".into()])).unwrap()
        );
        match MockGateway::parse_jsonl(&text, MockFallback::Error) {
            Err(FixtureError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {:?}", other.err()),
        }
    }
}
