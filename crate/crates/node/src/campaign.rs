//! Campaigns: date-bounded, count-targeted scrape jobs. A campaign's frontier
//! tasks carry effectively unbounded depth (the queue capacity is the real
//! limit) and only messages created inside the campaign window count toward
//! the target.

use chrono::{DateTime, Utc};
use parking_lot::Mutex;
use serde_json::{json, Value};
use starling_core::model::{format_ts, DedupKey, Message};
use std::collections::{HashMap, HashSet};
use std::sync::atomic::{AtomicU64, Ordering};

/// Depth assigned to campaign tasks: practically infinite, bounded only by
/// frontier capacity.
pub const CAMPAIGN_DEPTH: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CampaignState {
    Active,
    Complete,
    Exhausted,
}

impl CampaignState {
    pub fn as_str(&self) -> &'static str {
        match self {
            CampaignState::Active => "ACTIVE",
            CampaignState::Complete => "COMPLETE",
            CampaignState::Exhausted => "EXHAUSTED",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Campaign {
    pub id: String,
    pub term: String,
    pub start_date: DateTime<Utc>,
    pub end_date: DateTime<Utc>,
    pub target_count: usize,
    pub collected: usize,
    pub state: CampaignState,
    /// Keys already credited, so a message counts at most once.
    counted: HashSet<DedupKey>,
}

impl Campaign {
    pub fn to_json(&self) -> Value {
        json!({
            "id": self.id,
            "term": self.term,
            "start_date": format_ts(&self.start_date),
            "end_date": format_ts(&self.end_date),
            "target_count": self.target_count,
            "collected": self.collected,
            "state": self.state.as_str(),
        })
    }

    pub fn counted_keys(&self) -> Vec<DedupKey> {
        self.counted.iter().cloned().collect()
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("invalid campaign: {0}")]
pub struct InvalidCampaign(pub String);

#[derive(Default)]
pub struct CampaignBook {
    inner: Mutex<HashMap<String, Campaign>>,
    counter: AtomicU64,
}

impl CampaignBook {
    pub fn new() -> CampaignBook {
        CampaignBook::default()
    }

    pub fn create(
        &self,
        term: &str,
        start_date: DateTime<Utc>,
        end_date: DateTime<Utc>,
        target_count: usize,
    ) -> Result<Campaign, InvalidCampaign> {
        if term.trim().is_empty() {
            return Err(InvalidCampaign("term must be nonempty".into()));
        }
        if start_date > end_date {
            return Err(InvalidCampaign("start_date is after end_date".into()));
        }
        if target_count == 0 {
            return Err(InvalidCampaign("target_count must be at least 1".into()));
        }
        let id = format!("c{:05}", self.counter.fetch_add(1, Ordering::SeqCst) + 1);
        let campaign = Campaign {
            id: id.clone(),
            term: term.trim().to_ascii_lowercase(),
            start_date,
            end_date,
            target_count,
            collected: 0,
            state: CampaignState::Active,
            counted: HashSet::new(),
        };
        self.inner.lock().insert(id, campaign.clone());
        Ok(campaign)
    }

    pub fn get(&self, id: &str) -> Option<Campaign> {
        self.inner.lock().get(id).cloned()
    }

    pub fn list(&self) -> Vec<Campaign> {
        let mut all: Vec<Campaign> = self.inner.lock().values().cloned().collect();
        all.sort_by(|a, b| a.id.cmp(&b.id));
        all
    }

    pub fn active_ids(&self) -> Vec<String> {
        self.inner
            .lock()
            .values()
            .filter(|c| c.state == CampaignState::Active)
            .map(|c| c.id.clone())
            .collect()
    }

    /// Credit newly stored messages: only those inside the campaign window
    /// count, each key at most once. Transitions to COMPLETE on target.
    pub fn credit(&self, id: &str, new_messages: &[Message]) -> usize {
        let mut inner = self.inner.lock();
        let Some(campaign) = inner.get_mut(id) else {
            return 0;
        };
        if campaign.state != CampaignState::Active {
            return 0;
        }
        let mut counted = 0;
        for m in new_messages {
            if m.created_at >= campaign.start_date
                && m.created_at <= campaign.end_date
                && campaign.counted.insert(m.dedup_key())
            {
                counted += 1;
            }
        }
        campaign.collected += counted;
        if campaign.collected >= campaign.target_count {
            campaign.state = CampaignState::Complete;
        }
        counted
    }

    /// Called after a campaign step: with no pending tasks left and nothing
    /// new stored in the step, an active campaign is exhausted.
    pub fn note_step(&self, id: &str, stored_new: usize, tasks_pending: bool) {
        let mut inner = self.inner.lock();
        if let Some(campaign) = inner.get_mut(id) {
            if campaign.state == CampaignState::Active && stored_new == 0 && !tasks_pending {
                campaign.state = CampaignState::Exhausted;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use starling_core::model::{parse_ts, Message, SourceType};

    fn ts(s: &str) -> DateTime<Utc> {
        parse_ts(s).unwrap()
    }

    fn msg(id: u32, created: &str) -> Message {
        Message::compose(
            SourceType::UpstreamSim,
            id.to_string(),
            ts(created),
            "a",
            "t",
            ts("2026-01-01T00:00:00Z"),
            "l",
        )
        .unwrap()
    }

    #[test]
    fn end_before_start_is_invalid() {
        let book = CampaignBook::new();
        let err = book
            .create("x", ts("2025-02-01T00:00:00Z"), ts("2025-01-01T00:00:00Z"), 10)
            .unwrap_err();
        assert!(err.0.contains("start_date"));
        assert!(book.create("x", ts("2025-01-01T00:00:00Z"), ts("2025-02-01T00:00:00Z"), 0).is_err());
        assert!(book.create(" ", ts("2025-01-01T00:00:00Z"), ts("2025-02-01T00:00:00Z"), 1).is_err());
    }

    #[test]
    fn only_in_window_messages_count_once() {
        let book = CampaignBook::new();
        let c = book
            .create("x", ts("2025-03-01T00:00:00Z"), ts("2025-03-31T00:00:00Z"), 2)
            .unwrap();
        let inside = msg(1, "2025-03-10T00:00:00Z");
        let outside = msg(2, "2025-05-10T00:00:00Z");
        assert_eq!(book.credit(&c.id, &[inside.clone(), outside]), 1);
        // same message again: no double counting
        assert_eq!(book.credit(&c.id, &[inside]), 0);
        assert_eq!(book.get(&c.id).unwrap().collected, 1);
        assert_eq!(book.get(&c.id).unwrap().state, CampaignState::Active);
    }

    #[test]
    fn completes_on_target_and_exhausts_when_dry() {
        let book = CampaignBook::new();
        let c = book
            .create("x", ts("2025-03-01T00:00:00Z"), ts("2025-03-31T00:00:00Z"), 1)
            .unwrap();
        book.credit(&c.id, &[msg(1, "2025-03-10T00:00:00Z")]);
        assert_eq!(book.get(&c.id).unwrap().state, CampaignState::Complete);

        let d = book
            .create("y", ts("2025-03-01T00:00:00Z"), ts("2025-03-31T00:00:00Z"), 5)
            .unwrap();
        book.note_step(&d.id, 0, true);
        assert_eq!(book.get(&d.id).unwrap().state, CampaignState::Active);
        book.note_step(&d.id, 0, false);
        assert_eq!(book.get(&d.id).unwrap().state, CampaignState::Exhausted);
    }
}
