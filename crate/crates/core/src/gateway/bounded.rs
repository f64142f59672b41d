use std::sync::{Condvar, Mutex};

use super::{Completion, Gateway, GatewayError, LogprobRequest, SamplingConfig, TokenLogprob};

/// Wraps a gateway so that at most `limit` requests are outstanding at once.
pub struct BoundedGateway<G> {
    inner: G,
    limit: usize,
    active: Mutex<usize>,
    freed: Condvar,
}

struct Permit<'a, G> {
    owner: &'a BoundedGateway<G>,
}

impl<G> Drop for Permit<'_, G> {
    fn drop(&mut self) {
        let mut active = self.owner.active.lock().expect("permit lock poisoned");
        *active -= 1;
        self.owner.freed.notify_one();
    }
}

impl<G> BoundedGateway<G> {
    pub fn new(inner: G, limit: usize) -> Self {
        Self {
            inner,
            limit: limit.max(1),
            active: Mutex::new(0),
            freed: Condvar::new(),
        }
    }

    pub fn limit(&self) -> usize {
        self.limit
    }

    pub fn inner(&self) -> &G {
        &self.inner
    }

    fn acquire(&self) -> Permit<'_, G> {
        let mut active = self.active.lock().expect("permit lock poisoned");
        while *active >= self.limit {
            active = self.freed.wait(active).expect("permit lock poisoned");
        }
        *active += 1;
        Permit { owner: self }
    }
}

impl<G: Gateway> Gateway for BoundedGateway<G> {
    fn generate(&self, prompt: &str, cfg: &SamplingConfig) -> Result<Vec<Completion>, GatewayError> {
        let _permit = self.acquire();
        self.inner.generate(prompt, cfg)
    }

    fn next_token_logprobs(
        &self,
        req: &LogprobRequest,
    ) -> Result<Vec<TokenLogprob>, GatewayError> {
        let _permit = self.acquire();
        self.inner.next_token_logprobs(req)
    }
}
