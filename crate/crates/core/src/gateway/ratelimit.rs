use std::collections::VecDeque;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use super::clock::Clock;

const WINDOW: Duration = Duration::from_secs(60);

/// Sliding-window limiter: at most `per_minute` dispatches in any 60 s window.
pub struct RateLimiter {
    per_minute: usize,
    clock: Arc<dyn Clock>,
    stamps: Mutex<VecDeque<Duration>>,
}

impl RateLimiter {
    pub fn new(per_minute: usize, clock: Arc<dyn Clock>) -> Self {
        Self {
            per_minute: per_minute.max(1),
            clock,
            stamps: Mutex::new(VecDeque::new()),
        }
    }

    /// Blocks until a dispatch slot is free, then claims it.
    pub fn acquire(&self) {
        loop {
            let wait = {
                let mut stamps = self.stamps.lock().unwrap();
                let now = self.clock.now();
                while stamps
                    .front()
                    .is_some_and(|&t| now.saturating_sub(t) >= WINDOW)
                {
                    stamps.pop_front();
                }
                if stamps.len() < self.per_minute {
                    stamps.push_back(now);
                    return;
                }
                (stamps[0] + WINDOW).saturating_sub(now)
            };
            self.clock.sleep(wait.max(Duration::from_millis(1)));
        }
    }
}
