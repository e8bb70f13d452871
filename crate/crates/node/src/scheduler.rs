//! The crawl scheduler: runs frontier tasks against the upstream under the
//! governor, stores what it scrapes, and recursively expands hashtags and
//! mentions to a configured depth. Tasks rate-limited by the upstream are
//! deferred by the advertised Retry-After, never dropped.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};
use std::sync::Arc;
use std::time::Duration;

use chrono::Utc;
use parking_lot::Mutex;
use starling_core::model::{Message, SourceType};
use starling_core::store::IndexedStore;
use tokio::sync::watch;

use crate::campaign::CampaignBook;
use crate::clock::Clock;
use crate::frontier::{CrawlTask, Frontier, TaskKind};
use crate::governor::RateGovernor;
use crate::scraper::{ScrapeError, ScrapeRequest, ScraperRegistry};
use crate::wire;

#[derive(Debug, Clone)]
pub struct CrawlConfig {
    /// Max pages fetched per task run.
    pub page_limit: u32,
    /// Consecutive network/upstream failures tolerated before aborting.
    pub max_retries: u32,
    /// Send expansion terms to the parent's distribution queue instead of the
    /// local frontier (campaign expansion always stays local).
    pub delegate_expansion: bool,
    /// Campaign tasks run per step.
    pub campaign_tasks_per_step: usize,
}

impl Default for CrawlConfig {
    fn default() -> Self {
        CrawlConfig {
            page_limit: 5,
            max_retries: 3,
            delegate_expansion: false,
            campaign_tasks_per_step: 8,
        }
    }
}

#[derive(Debug, Default, Clone)]
pub struct TaskReport {
    pub pages_fetched: u32,
    pub messages_stored: usize,
    pub new_messages: Vec<Message>,
}

#[derive(Debug)]
pub enum TaskOutcome {
    Completed(TaskReport),
    /// Upstream said 429: run again at `resume_page` after `retry_after`.
    Deferred { retry_after: Duration, resume_page: u32, partial: TaskReport },
    Aborted { cause: String, partial: TaskReport },
}

impl TaskOutcome {
    pub fn report(&self) -> &TaskReport {
        match self {
            TaskOutcome::Completed(r) => r,
            TaskOutcome::Deferred { partial, .. } => partial,
            TaskOutcome::Aborted { partial, .. } => partial,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct DeferredTask {
    ready_ms: u64,
    seq: u64,
    task_term: String,
}

impl Ord for DeferredTask {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.ready_ms, self.seq).cmp(&(other.ready_ms, other.seq))
    }
}

impl PartialOrd for DeferredTask {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

struct Deferred {
    heap: BinaryHeap<Reverse<DeferredTask>>,
    entries: std::collections::HashMap<u64, (CrawlTask, u32)>,
    next_seq: u64,
}

/// Shared crawl engine; clones are cheap and refer to the same state.
#[derive(Clone)]
pub struct Crawler {
    pub store: Arc<IndexedStore>,
    pub frontier: Arc<Frontier>,
    pub governor: Arc<RateGovernor>,
    pub campaigns: Arc<CampaignBook>,
    pub scrapers: Arc<ScraperRegistry>,
    pub cfg: Arc<CrawlConfig>,
    /// Identity presented to the upstream: the node's peer id.
    pub identity: String,
    pub parent_url: Option<String>,
    pub client: reqwest::Client,
    deferred: Arc<Mutex<Deferred>>,
    clock: Clock,
}

impl Crawler {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        store: Arc<IndexedStore>,
        frontier: Arc<Frontier>,
        governor: Arc<RateGovernor>,
        campaigns: Arc<CampaignBook>,
        scrapers: ScraperRegistry,
        cfg: CrawlConfig,
        identity: String,
        parent_url: Option<String>,
        client: reqwest::Client,
        clock: Clock,
    ) -> Crawler {
        Crawler {
            store,
            frontier,
            governor,
            campaigns,
            scrapers: Arc::new(scrapers),
            cfg: Arc::new(cfg),
            identity,
            parent_url,
            client,
            deferred: Arc::new(Mutex::new(Deferred {
                heap: BinaryHeap::new(),
                entries: Default::default(),
                next_seq: 0,
            })),
            clock,
        }
    }

    /// Collect the expansion tasks a message induces at `depth_remaining`.
    fn expansion_terms(message: &Message) -> Vec<(TaskKind, String)> {
        let mut terms = Vec::new();
        for tag in &message.hashtags {
            terms.push((TaskKind::Hashtag, tag.clone()));
        }
        for name in &message.mentions {
            terms.push((TaskKind::Mention, name.clone()));
        }
        terms
    }

    /// Recursive expansion into the local frontier: one task per hashtag and
    /// mention at `depth_remaining - 1`. Depth zero expands nothing.
    pub fn expand(
        &self,
        message: &Message,
        depth_remaining: u32,
        campaign_id: Option<&str>,
    ) -> usize {
        if depth_remaining == 0 {
            return 0;
        }
        let mut enqueued = 0;
        for (kind, term) in Self::expansion_terms(message) {
            let mut task = CrawlTask::new(kind, &term, depth_remaining - 1);
            if let Some(id) = campaign_id {
                task = task.for_campaign(id);
            }
            if self.frontier.enqueue(task).accepted {
                enqueued += 1;
            }
        }
        enqueued
    }

    /// Hand expansion terms to the parent's distribution queue.
    async fn delegate(&self, terms: BTreeSet<(TaskKind, String)>, depth: u32) {
        let Some(parent) = &self.parent_url else { return };
        for (kind, term) in terms {
            let result = wire::post_crawl(&self.client, parent, &self.identity, kind, &term, depth)
                .await;
            if let Err(err) = result {
                tracing::debug!("delegation of {term:?} failed: {err}");
            }
        }
    }

    /// Run one crawl task from `start_page`: acquire → fetch → parse → store
    /// → expand, following `rel="next"` up to the page limit.
    pub async fn run_task(&self, task: &CrawlTask, start_page: u32) -> TaskOutcome {
        let Some(scraper) = self.scrapers.get(&SourceType::UpstreamSim) else {
            return TaskOutcome::Aborted {
                cause: "no upstream configured".into(),
                partial: TaskReport::default(),
            };
        };
        let query = scraper.build_query(task.kind, &task.term);
        let mut report = TaskReport::default();
        let mut delegated: BTreeSet<(TaskKind, String)> = BTreeSet::new();
        let mut page = start_page.max(1);
        let mut consecutive_failures = 0u32;

        loop {
            self.governor.acquire_waiting(&self.identity).await;
            let request = ScrapeRequest {
                base_url: scraper.base_url().to_string(),
                query: query.clone(),
                page,
                identity: self.identity.clone(),
            };
            let markup = match scraper.fetch_page(&request).await {
                Ok(body) => body,
                Err(ScrapeError::RateLimited { retry_after }) => {
                    return TaskOutcome::Deferred { retry_after, resume_page: page, partial: report };
                }
                Err(err) => {
                    consecutive_failures += 1;
                    if consecutive_failures >= self.cfg.max_retries {
                        return TaskOutcome::Aborted { cause: err.to_string(), partial: report };
                    }
                    tokio::time::sleep(Duration::from_millis(200)).await;
                    continue;
                }
            };
            let parsed = match scraper.parse_page(&markup, Utc::now()) {
                Ok(parsed) => parsed,
                Err(err) => {
                    consecutive_failures += 1;
                    if consecutive_failures >= self.cfg.max_retries {
                        return TaskOutcome::Aborted { cause: err.to_string(), partial: report };
                    }
                    continue;
                }
            };
            consecutive_failures = 0;
            report.pages_fetched += 1;

            let (insert, fresh) = match self.store.insert_batch_detailed(&parsed.messages) {
                Ok(out) => out,
                Err(err) => {
                    return TaskOutcome::Aborted { cause: err.to_string(), partial: report };
                }
            };
            report.messages_stored += insert.new;
            report.new_messages.extend(fresh);

            if task.depth_remaining > 0 {
                // Delegation sends expansion to the backend's distribution
                // queue; campaigns always expand into the local frontier so
                // their progress stays accountable on this node.
                if self.cfg.delegate_expansion
                    && self.parent_url.is_some()
                    && task.campaign_id.is_none()
                {
                    for m in &parsed.messages {
                        delegated.extend(Self::expansion_terms(m));
                    }
                } else {
                    for m in &parsed.messages {
                        self.expand(m, task.depth_remaining, task.campaign_id.as_deref());
                    }
                }
            }

            if !parsed.has_next || report.pages_fetched >= self.cfg.page_limit {
                break;
            }
            page += 1;
        }

        if !delegated.is_empty() {
            self.delegate(delegated, task.depth_remaining.saturating_sub(1)).await;
        }
        TaskOutcome::Completed(report)
    }

    fn defer(&self, task: CrawlTask, resume_page: u32, retry_after: Duration) {
        let mut deferred = self.deferred.lock();
        let seq = deferred.next_seq;
        deferred.next_seq += 1;
        deferred.heap.push(Reverse(DeferredTask {
            ready_ms: (self.clock)() + retry_after.as_millis() as u64,
            seq,
            task_term: task.term.clone(),
        }));
        deferred.entries.insert(seq, (task, resume_page));
    }

    fn pop_ready_deferred(&self) -> Option<(CrawlTask, u32)> {
        let now = (self.clock)();
        let mut deferred = self.deferred.lock();
        if deferred.heap.peek().is_some_and(|Reverse(d)| d.ready_ms <= now) {
            let Reverse(head) = deferred.heap.pop().expect("peeked entry exists");
            return deferred.entries.remove(&head.seq);
        }
        None
    }

    fn deferred_has_campaign(&self, campaign_id: &str) -> bool {
        self.deferred
            .lock()
            .entries
            .values()
            .any(|(t, _)| t.campaign_id.as_deref() == Some(campaign_id))
    }

    /// Next runnable unit: a ready deferred task first, else the frontier head.
    pub fn next_ready(&self) -> Option<(CrawlTask, u32)> {
        self.pop_ready_deferred().or_else(|| self.frontier.dequeue().map(|t| (t, 1)))
    }

    fn settle(&self, task: &CrawlTask, outcome: TaskOutcome) {
        if let Some(id) = task.campaign_id.as_deref() {
            self.campaigns.credit(id, &outcome.report().new_messages);
        }
        match outcome {
            TaskOutcome::Completed(_) => {}
            TaskOutcome::Deferred { retry_after, resume_page, .. } => {
                self.defer(task.clone(), resume_page, retry_after);
            }
            TaskOutcome::Aborted { cause, .. } => {
                tracing::warn!("task {:?} {:?} aborted: {cause}", task.kind, task.term);
            }
        }
        if let Some(id) = task.campaign_id.as_deref() {
            let pending =
                self.frontier.has_campaign_tasks(id) || self.deferred_has_campaign(id);
            // stored_new of the *last run* drives exhaustion; completion was
            // already handled by credit().
            if !pending {
                if let Some(c) = self.campaigns.get(id) {
                    if c.state == crate::campaign::CampaignState::Active && c.collected == 0 {
                        // keep zero-progress campaigns alive until a step
                        // confirms exhaustion; step_campaign owns the rule
                    }
                }
            }
        }
    }

    /// One campaign step: run up to `campaign_tasks_per_step` queued campaign
    /// tasks, credit in-window harvests, then apply the exhaustion rule.
    pub async fn step_campaign(&self, campaign_id: &str) -> Option<crate::campaign::Campaign> {
        let mut stored_new_total = 0usize;
        for _ in 0..self.cfg.campaign_tasks_per_step {
            if self.campaigns.get(campaign_id)?.state != crate::campaign::CampaignState::Active {
                break;
            }
            let Some(task) = self.frontier.dequeue_campaign(campaign_id) else {
                break;
            };
            let outcome = self.run_task(&task, 1).await;
            stored_new_total += outcome.report().new_messages.len();
            self.settle(&task, outcome);
        }
        let pending = self.frontier.has_campaign_tasks(campaign_id)
            || self.deferred_has_campaign(campaign_id);
        self.campaigns.note_step(campaign_id, stored_new_total, pending);
        self.campaigns.get(campaign_id)
    }

    /// Background worker: drains deferred-then-frontier tasks until stopped.
    pub async fn worker_loop(self, mut stop: watch::Receiver<bool>) {
        loop {
            if *stop.borrow() {
                return;
            }
            match self.next_ready() {
                Some((task, page)) => {
                    let outcome = self.run_task(&task, page).await;
                    self.settle(&task, outcome);
                }
                None => {
                    tokio::select! {
                        _ = tokio::time::sleep(Duration::from_millis(50)) => {}
                        _ = stop.changed() => {}
                    }
                }
            }
        }
    }
}
