use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Transient failure classes that may be retried.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorClass {
    Timeout,
    RateLimited,
    Server,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_backoff_ms: u64,
    pub max_backoff_ms: u64,
    pub retryable: Vec<ErrorClass>,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 4,
            base_backoff_ms: 500,
            max_backoff_ms: 30_000,
            retryable: vec![
                ErrorClass::Timeout,
                ErrorClass::RateLimited,
                ErrorClass::Server,
            ],
        }
    }
}

impl RetryPolicy {
    pub fn none() -> Self {
        Self {
            max_attempts: 1,
            ..Self::default()
        }
    }

    pub fn retries(&self, class: Option<ErrorClass>) -> bool {
        class.is_some_and(|c| self.retryable.contains(&c))
    }

    /// Delay before attempt `failed_attempts + 1`: exponential in the number of
    /// failures, capped, plus jitter of at most half the base delay.
    pub fn backoff(&self, failed_attempts: u32, jitter_seed: u64) -> Duration {
        let exp = failed_attempts.saturating_sub(1).min(20);
        let raw = self
            .base_backoff_ms
            .saturating_mul(1u64 << exp)
            .min(self.max_backoff_ms);
        let jitter_cap = self.base_backoff_ms / 2;
        let jitter = if jitter_cap == 0 {
            0
        } else {
            ChaCha8Rng::seed_from_u64(jitter_seed ^ u64::from(failed_attempts))
                .random_range(0..=jitter_cap)
        };
        Duration::from_millis(raw + jitter)
    }
}
