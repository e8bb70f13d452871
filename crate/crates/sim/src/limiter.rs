//! Per-identity sliding-window request metering, plus the served/rejected
//! counters the experiment harness reads back.

use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};

/// The upstream's advertised limits.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LimitSpec {
    pub window_seconds: u64,
    pub max_requests: usize,
    /// Total records reachable for any single query.
    pub per_query_record_cap: usize,
    pub page_size: usize,
}

impl Default for LimitSpec {
    fn default() -> Self {
        LimitSpec { window_seconds: 900, max_requests: 15, per_query_record_cap: 800, page_size: 20 }
    }
}

/// Sliding-window ledger: at most `max_requests` successful responses per
/// identity within any trailing window. 429s never consume budget.
pub struct WindowLedger {
    window_ms: u64,
    max_requests: usize,
    entries: HashMap<String, VecDeque<u64>>,
    served: HashMap<String, u64>,
    rejected: u64,
}

impl WindowLedger {
    pub fn new(limits: &LimitSpec) -> WindowLedger {
        WindowLedger {
            window_ms: limits.window_seconds * 1000,
            max_requests: limits.max_requests,
            entries: HashMap::new(),
            served: HashMap::new(),
            rejected: 0,
        }
    }

    /// Admit or reject a request at `now_ms`. Rejection returns whole seconds
    /// until the oldest in-window grant expires (at least 1).
    pub fn check(&mut self, identity: &str, now_ms: u64) -> Result<(), u64> {
        let window = self.entries.entry(identity.to_string()).or_default();
        while window.front().is_some_and(|&t| t + self.window_ms <= now_ms) {
            window.pop_front();
        }
        if window.len() < self.max_requests {
            window.push_back(now_ms);
            *self.served.entry(identity.to_string()).or_insert(0) += 1;
            Ok(())
        } else {
            self.rejected += 1;
            let oldest = *window.front().expect("window is full");
            let wait_ms = (oldest + self.window_ms).saturating_sub(now_ms);
            Err(wait_ms.div_ceil(1000).max(1))
        }
    }

    pub fn served(&self) -> &HashMap<String, u64> {
        &self.served
    }

    pub fn rejected(&self) -> u64 {
        self.rejected
    }
}
