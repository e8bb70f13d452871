//! Millisecond clock abstraction so window-based components (governor,
//! frontier TTL, frequency guard) run on real time in production and on a
//! hand-advanced clock in tests.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Instant;

pub type Clock = Arc<dyn Fn() -> u64 + Send + Sync>;

/// Monotonic milliseconds since the clock was created.
pub fn system_clock() -> Clock {
    let origin = Instant::now();
    Arc::new(move || origin.elapsed().as_millis() as u64)
}

/// Test clock advanced explicitly.
#[derive(Clone, Default)]
pub struct ManualClock {
    now_ms: Arc<AtomicU64>,
}

impl ManualClock {
    pub fn new() -> ManualClock {
        ManualClock::default()
    }

    pub fn clock(&self) -> Clock {
        let now = self.now_ms.clone();
        Arc::new(move || now.load(Ordering::SeqCst))
    }

    pub fn advance(&self, ms: u64) {
        self.now_ms.fetch_add(ms, Ordering::SeqCst);
    }

    pub fn set(&self, ms: u64) {
        self.now_ms.store(ms, Ordering::SeqCst);
    }

    pub fn now(&self) -> u64 {
        self.now_ms.load(Ordering::SeqCst)
    }
}
