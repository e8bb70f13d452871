//! Per-identity sliding-window token governor mirroring the upstream's rate
//! window. A small safety margin widens the local window so that a grant
//! issued here is always inside the upstream's own budget even after
//! client-to-server latency skew.

use std::collections::{HashMap, VecDeque};
use std::time::Duration;

use parking_lot::Mutex;

use crate::clock::Clock;

pub const DEFAULT_SAFETY_MARGIN_MS: u64 = 250;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Acquire {
    Granted,
    /// Exact time until the oldest in-window grant leaves the window.
    WaitFor(Duration),
}

pub struct RateGovernor {
    window_ms: u64,
    max_requests: usize,
    margin_ms: u64,
    ledger: Mutex<HashMap<String, VecDeque<u64>>>,
    clock: Clock,
}

impl RateGovernor {
    pub fn new(window_s: u64, max_requests: usize, margin_ms: u64, clock: Clock) -> RateGovernor {
        RateGovernor {
            window_ms: window_s * 1000,
            max_requests: max_requests.max(1),
            margin_ms,
            ledger: Mutex::new(HashMap::new()),
            clock,
        }
    }

    pub fn acquire(&self, identity: &str) -> Acquire {
        self.acquire_at(identity, (self.clock)())
    }

    /// Grant iff fewer than `max_requests` grants sit in the trailing
    /// (window + margin); otherwise report exactly how long to wait.
    pub fn acquire_at(&self, identity: &str, now_ms: u64) -> Acquire {
        let effective = self.window_ms + self.margin_ms;
        let mut ledger = self.ledger.lock();
        let grants = ledger.entry(identity.to_string()).or_default();
        while grants.front().is_some_and(|&t| t + effective <= now_ms) {
            grants.pop_front();
        }
        if grants.len() < self.max_requests {
            grants.push_back(now_ms);
            Acquire::Granted
        } else {
            let oldest = *grants.front().expect("ledger is full");
            Acquire::WaitFor(Duration::from_millis(oldest + effective - now_ms))
        }
    }

    /// Block (async) until a grant is available, honoring the advertised
    /// waits.
    pub async fn acquire_waiting(&self, identity: &str) {
        loop {
            match self.acquire(identity) {
                Acquire::Granted => return,
                Acquire::WaitFor(wait) => tokio::time::sleep(wait).await,
            }
        }
    }
}
