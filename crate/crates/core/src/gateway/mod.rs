//! Access to chat-with-images and embedding backends.
//!
//! [`Gateway`] wraps a [`ChatBackend`] with a content-addressed response
//! cache, in-flight request coalescing, a sliding-window rate limiter, and
//! retries with exponential backoff.

mod cache;
mod clock;
mod embed;
mod hash;
pub mod http;
pub mod mock;
mod ratelimit;
mod request;
mod retry;

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use thiserror::Error;

pub use cache::{CacheEntry, ResponseCache};
pub use clock::{Clock, SystemClock, VirtualClock};
pub use embed::{embed, EmbedItem, EmbeddingBackend, MockEmbedder};
pub use hash::{hash_request, request_digest, sha256_hex, RequestDigest};
pub use http::{HttpChatBackend, HttpConfig, HttpEmbeddingBackend};
pub use mock::{MockBackend, MockMode, MockRoutes, MockScript};
pub use ratelimit::RateLimiter;
pub use request::{
    estimate_text_tokens, CallRole, ChatRequest, ChatResponse, Part, RequestMeta, Usage,
};
pub use retry::{ErrorClass, RetryPolicy};

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("backend unavailable after {attempts} attempts: {last}")]
    Unavailable { attempts: u32, last: String },
    #[error("backend rejected the payload size: {0}")]
    PayloadTooLarge(String),
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("request timed out: {0}")]
    Timeout(String),
    #[error("rate limited: {0}")]
    RateLimited(String),
    #[error("server error {status}: {body}")]
    Server { status: u16, body: String },
    #[error("request rejected with status {status}: {body}")]
    Client { status: u16, body: String },
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("malformed backend response: {0}")]
    BadResponse(String),
    #[error("invalid request: {0}")]
    BadRequest(String),
    #[error("item {index} is {tokens} tokens, over the limit of {limit}")]
    ItemTooLong {
        index: usize,
        tokens: usize,
        limit: usize,
    },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("mock script: {0}")]
    Mock(String),
    #[error("response cache: {0}")]
    Cache(String),
}

impl GatewayError {
    pub fn class(&self) -> Option<ErrorClass> {
        match self {
            GatewayError::Timeout(_) => Some(ErrorClass::Timeout),
            GatewayError::RateLimited(_) => Some(ErrorClass::RateLimited),
            GatewayError::Server { .. } | GatewayError::Transport(_) => Some(ErrorClass::Server),
            _ => None,
        }
    }
}

/// A chat-with-images backend.
pub trait ChatBackend: Send + Sync {
    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, GatewayError>;
}

impl<T: ChatBackend + ?Sized> ChatBackend for Arc<T> {
    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        (**self).complete(req)
    }
}

/// Result of one logical call through the gateway.
#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub response: ChatResponse,
    pub cache_hit: bool,
}

#[derive(Debug, Default)]
struct Counters {
    backend_calls: AtomicUsize,
    cache_hits: AtomicUsize,
    retries: AtomicUsize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct GatewayStats {
    pub backend_calls: usize,
    pub cache_hits: usize,
    pub retries: usize,
}

pub struct Gateway {
    backend: Arc<dyn ChatBackend>,
    cache: Option<ResponseCache>,
    limiter: Option<RateLimiter>,
    retry: RetryPolicy,
    clock: Arc<dyn Clock>,
    inflight: Mutex<HashMap<String, Arc<Mutex<()>>>>,
    counters: Counters,
}

impl Gateway {
    pub fn new(backend: Arc<dyn ChatBackend>) -> Self {
        Self {
            backend,
            cache: None,
            limiter: None,
            retry: RetryPolicy::default(),
            clock: Arc::new(SystemClock::default()),
            inflight: Mutex::default(),
            counters: Counters::default(),
        }
    }

    pub fn with_cache(mut self, cache: ResponseCache) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    /// Replaces the clock used for backoff sleeps and rate limiting. Call
    /// before [`Gateway::with_rate_limit`].
    pub fn with_clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    pub fn with_rate_limit(mut self, per_minute: usize) -> Self {
        self.limiter = Some(RateLimiter::new(per_minute, self.clock.clone()));
        self
    }

    pub fn stats(&self) -> GatewayStats {
        GatewayStats {
            backend_calls: self.counters.backend_calls.load(Ordering::SeqCst),
            cache_hits: self.counters.cache_hits.load(Ordering::SeqCst),
            retries: self.counters.retries.load(Ordering::SeqCst),
        }
    }

    /// Sends `req`, serving it from the cache when possible. Concurrent calls
    /// with the same key wait for a single backend round trip when caching
    /// is enabled.
    pub fn complete(&self, req: &ChatRequest) -> Result<Completion, GatewayError> {
        let Some(cache) = &self.cache else {
            // Hashing every image is only worth it when a cache reads the key.
            let response = self.dispatch(req, None)?;
            return Ok(Completion {
                response,
                cache_hit: false,
            });
        };
        let key = hash_request(req);

        let slot = self
            .inflight
            .lock()
            .unwrap()
            .entry(key.clone())
            .or_default()
            .clone();
        let result = {
            let _guard = slot.lock().unwrap();
            match cache.load(&key)? {
                Some(response) => {
                    self.counters.cache_hits.fetch_add(1, Ordering::SeqCst);
                    Ok(Completion {
                        response,
                        cache_hit: true,
                    })
                }
                None => self.dispatch(req, Some(&key)).and_then(|response| {
                    cache.store(&key, request_digest(req), &response)?;
                    Ok(Completion {
                        response,
                        cache_hit: false,
                    })
                }),
            }
        };
        let mut inflight = self.inflight.lock().unwrap();
        if Arc::strong_count(&slot) <= 2 {
            inflight.remove(&key);
        }
        result
    }

    /// Calls the backend with retries. Backoff jitter is seeded from the
    /// request key, computed on the first retry when not given.
    fn dispatch(&self, req: &ChatRequest, key: Option<&str>) -> Result<ChatResponse, GatewayError> {
        let jitter_seed = || {
            let key = key.map_or_else(|| hash_request(req), str::to_string);
            u64::from_str_radix(&key[..16], 16).unwrap_or(0)
        };
        let max_attempts = self.retry.max_attempts.max(1);
        let mut attempt = 0;
        loop {
            attempt += 1;
            if let Some(limiter) = &self.limiter {
                limiter.acquire();
            }
            self.counters.backend_calls.fetch_add(1, Ordering::SeqCst);
            match self.backend.complete(req) {
                Ok(resp) => return Ok(resp),
                Err(e) if self.retry.retries(e.class()) => {
                    if attempt >= max_attempts {
                        return Err(GatewayError::Unavailable {
                            attempts: attempt,
                            last: e.to_string(),
                        });
                    }
                    tracing::warn!(attempt, error = %e, "retrying backend call");
                    self.counters.retries.fetch_add(1, Ordering::SeqCst);
                    self.clock.sleep(self.retry.backoff(attempt, jitter_seed()));
                }
                Err(e) => return Err(e),
            }
        }
    }
}

/// Free-function form of [`Gateway::complete`].
pub fn complete_chat(req: &ChatRequest, gateway: &Gateway) -> Result<Completion, GatewayError> {
    gateway.complete(req)
}
