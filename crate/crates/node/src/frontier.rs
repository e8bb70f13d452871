//! The bounded crawl frontier: a FIFO task queue deduplicated by
//! `(kind, term)` within a TTL, so recursive expansion is breadth-first and
//! recurring terms are re-crawled only after the seen window lapses.

use std::collections::{HashMap, VecDeque};

use parking_lot::Mutex;

use crate::clock::Clock;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TaskKind {
    Query,
    Hashtag,
    Mention,
}

impl TaskKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            TaskKind::Query => "QUERY",
            TaskKind::Hashtag => "HASHTAG",
            TaskKind::Mention => "MENTION",
        }
    }

    pub fn parse(s: &str) -> Option<TaskKind> {
        match s {
            "QUERY" => Some(TaskKind::Query),
            "HASHTAG" => Some(TaskKind::Hashtag),
            "MENTION" => Some(TaskKind::Mention),
            _ => None,
        }
    }
}

/// A frontier entry. Terms are stored lowercase.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CrawlTask {
    pub kind: TaskKind,
    pub term: String,
    pub depth_remaining: u32,
    pub campaign_id: Option<String>,
}

impl CrawlTask {
    pub fn new(kind: TaskKind, term: &str, depth_remaining: u32) -> CrawlTask {
        CrawlTask {
            kind,
            term: term.trim().to_ascii_lowercase(),
            depth_remaining,
            campaign_id: None,
        }
    }

    pub fn for_campaign(mut self, campaign_id: &str) -> CrawlTask {
        self.campaign_id = Some(campaign_id.to_string());
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnqueueReason {
    Ok,
    Duplicate,
    Full,
}

impl EnqueueReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            EnqueueReason::Ok => "OK",
            EnqueueReason::Duplicate => "DUPLICATE",
            EnqueueReason::Full => "FULL",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnqueueOutcome {
    pub accepted: bool,
    pub reason: EnqueueReason,
}

struct FrontierInner {
    queue: VecDeque<CrawlTask>,
    seen: HashMap<(TaskKind, String), u64>,
}

pub struct Frontier {
    inner: Mutex<FrontierInner>,
    capacity: usize,
    seen_ttl_ms: u64,
    clock: Clock,
}

impl Frontier {
    pub fn new(capacity: usize, seen_ttl_ms: u64, clock: Clock) -> Frontier {
        Frontier {
            inner: Mutex::new(FrontierInner { queue: VecDeque::new(), seen: HashMap::new() }),
            capacity: capacity.max(1),
            seen_ttl_ms,
            clock,
        }
    }

    /// Accept iff `(kind, term)` is unseen within the TTL and there is room.
    /// Rejection is a value, not an error.
    pub fn enqueue(&self, task: CrawlTask) -> EnqueueOutcome {
        let now = (self.clock)();
        let mut inner = self.inner.lock();
        if inner.seen.len() > self.capacity.saturating_mul(4) {
            let ttl = self.seen_ttl_ms;
            inner.seen.retain(|_, &mut t| now < t.saturating_add(ttl));
        }
        let key = (task.kind, task.term.clone());
        if let Some(&seen_at) = inner.seen.get(&key) {
            if now < seen_at.saturating_add(self.seen_ttl_ms) {
                return EnqueueOutcome { accepted: false, reason: EnqueueReason::Duplicate };
            }
        }
        if inner.queue.len() >= self.capacity {
            return EnqueueOutcome { accepted: false, reason: EnqueueReason::Full };
        }
        inner.seen.insert(key, now);
        inner.queue.push_back(task);
        EnqueueOutcome { accepted: true, reason: EnqueueReason::Ok }
    }

    pub fn dequeue(&self) -> Option<CrawlTask> {
        self.inner.lock().queue.pop_front()
    }

    /// Re-insert at the head without touching the seen set (used when a
    /// distributed task could not be handed to any peer yet).
    pub fn requeue_front(&self, task: CrawlTask) {
        self.inner.lock().queue.push_front(task);
    }

    /// Pop the first queued task belonging to `campaign_id`.
    pub fn dequeue_campaign(&self, campaign_id: &str) -> Option<CrawlTask> {
        let mut inner = self.inner.lock();
        let pos = inner
            .queue
            .iter()
            .position(|t| t.campaign_id.as_deref() == Some(campaign_id))?;
        inner.queue.remove(pos)
    }

    pub fn has_campaign_tasks(&self, campaign_id: &str) -> bool {
        self.inner
            .lock()
            .queue
            .iter()
            .any(|t| t.campaign_id.as_deref() == Some(campaign_id))
    }

    pub fn len(&self) -> usize {
        self.inner.lock().queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
