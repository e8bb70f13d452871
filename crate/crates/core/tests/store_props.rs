//! Store properties checked against brute-force oracles: dedup counting,
//! linear-scan search equivalence, and dump-replay durability.

mod common;

use std::collections::{HashMap, HashSet};

use common::{arb_message, ts};
use proptest::prelude::*;
use starling_core::model::{DedupKey, Message, SourceType};
use starling_core::store::{IndexedStore, QueryFilter};
use tempfile::TempDir;

fn mk(id: String, text: &str, created: i64) -> Message {
    Message::compose(
        SourceType::UpstreamSim,
        id,
        ts(created),
        "gen",
        text,
        ts(created + 10),
        "https://upstream.sim/gen",
    )
    .unwrap()
}

/// 10k-message batch with ~30% duplicate keys; `new` must equal the distinct
/// count computed by an independent set oracle.
#[test]
fn bulk_insert_matches_set_oracle() {
    let dir = TempDir::new().unwrap();
    let store = IndexedStore::open(dir.path()).unwrap();
    let batch: Vec<Message> = (0u64..10_000)
        .map(|i| {
            // multiplicative hashing folds the id space to force collisions
            let id = (i.wrapping_mul(2_654_435_761)) % 7_000;
            mk(id.to_string(), &format!("body {i}"), 1_600_000_000 + i as i64)
        })
        .collect();

    let distinct: HashSet<&str> = batch.iter().map(|m| m.id_str.as_str()).collect();
    let report = store.insert_batch(&batch).unwrap();
    assert_eq!(report.received, 10_000);
    assert_eq!(report.new, distinct.len());
    assert_eq!(report.known, 10_000 - distinct.len());
    assert_eq!(store.len(), distinct.len());
}

/// Independent predicate: tokenization and matching re-implemented from the
/// grammar, not shared with the store.
fn oracle_matches(m: &Message, f: &QueryFilter) -> bool {
    let words: HashSet<String> = m
        .text
        .split(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
        .filter(|w| !w.is_empty())
        .map(|w| w.to_ascii_lowercase())
        .collect();
    f.terms.iter().all(|t| words.contains(&t.to_ascii_lowercase()))
        && f.hashtags.iter().all(|t| m.hashtags.contains(&t.to_ascii_lowercase()))
        && f.mentions.iter().all(|t| m.mentions.contains(&t.to_ascii_lowercase()))
        && f.since.map_or(true, |s| m.created_at >= s)
        && f.until.map_or(true, |u| m.created_at <= u)
}

fn oracle_search(messages: &[Message], f: &QueryFilter) -> Vec<Message> {
    let mut seen = HashSet::new();
    let mut hits: Vec<&Message> = messages
        .iter()
        .filter(|m| seen.insert(m.dedup_key()))
        .filter(|m| oracle_matches(m, f))
        .collect();
    hits.sort_by(|a, b| {
        (b.created_at, &b.id_str, b.source_type).cmp(&(a.created_at, &a.id_str, a.source_type))
    });
    hits.into_iter().take(f.limit).cloned().collect()
}

fn arb_filter() -> impl Strategy<Value = QueryFilter> {
    let token = prop_oneof!["[a-c]", "[a-z]{1,2}", Just("zz".to_string())];
    (
        proptest::collection::vec(token.clone(), 0..2),
        proptest::collection::vec(token.clone(), 0..2),
        proptest::collection::vec(token, 0..2),
        proptest::option::of(1_500_000_000i64..1_900_000_000),
        proptest::option::of(1_500_000_000i64..1_900_000_000),
        1usize..40,
    )
        .prop_map(|(terms, hashtags, mentions, since, until, limit)| {
            let (since, until) = match (since, until) {
                (Some(a), Some(b)) if a > b => (Some(b), Some(a)),
                pair => pair,
            };
            QueryFilter {
                terms,
                hashtags,
                mentions,
                since: since.map(ts),
                until: until.map(ts),
                limit,
            }
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn search_equals_linear_scan(
        messages in proptest::collection::vec(arb_message(), 0..120),
        filter in arb_filter(),
    ) {
        let dir = TempDir::new().unwrap();
        let store = IndexedStore::open(dir.path()).unwrap();
        store.insert_batch(&messages).unwrap();
        prop_assert_eq!(store.search(&filter), oracle_search(&messages, &filter));
    }

    /// Any interleaving of inserts and flushes replays from the dump log into
    /// an identical store.
    #[test]
    fn replay_converges_after_any_schedule(
        batches in proptest::collection::vec(proptest::collection::vec(arb_message(), 0..12), 1..6),
        flush_picks in proptest::collection::vec(proptest::collection::vec(any::<u16>(), 0..8), 1..6),
    ) {
        let dir = TempDir::new().unwrap();
        let mut model: HashMap<DedupKey, Message> = HashMap::new();
        {
            let store = IndexedStore::open(dir.path()).unwrap();
            for (batch, picks) in batches.iter().zip(&flush_picks) {
                store.insert_batch(batch).unwrap();
                for m in batch {
                    model.entry(m.dedup_key()).or_insert_with(|| m.clone());
                }
                let keys: Vec<DedupKey> = model.keys().cloned().collect();
                if !keys.is_empty() {
                    let victims: Vec<DedupKey> =
                        picks.iter().map(|p| keys[*p as usize % keys.len()].clone()).collect();
                    store.flush(&victims).unwrap();
                    for v in &victims {
                        model.remove(v);
                    }
                }
            }
        }
        let replayed = IndexedStore::open(dir.path()).unwrap();
        prop_assert_eq!(replayed.len(), model.len());
        for (key, expected) in &model {
            let got = replayed.get(key);
            prop_assert_eq!(got.as_ref(), Some(expected));
        }
    }
}

// Insert idempotence as a property: double insert leaves the store
// indistinguishable from a single insert from a search point of view.
proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn double_insert_is_single_insert(messages in proptest::collection::vec(arb_message(), 0..40)) {
        let d1 = TempDir::new().unwrap();
        let d2 = TempDir::new().unwrap();
        let once = IndexedStore::open(d1.path()).unwrap();
        let twice = IndexedStore::open(d2.path()).unwrap();
        once.insert_batch(&messages).unwrap();
        twice.insert_batch(&messages).unwrap();
        twice.insert_batch(&messages).unwrap();
        let all = QueryFilter::default().with_limit(usize::MAX);
        prop_assert_eq!(once.search(&all), twice.search(&all));
    }
}
