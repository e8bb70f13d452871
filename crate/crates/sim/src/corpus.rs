//! Seeded synthetic corpus generation plus the brute-force oracle queries
//! tests use to know ground truth (match counts per term and per date span).

use chrono::{DateTime, Duration, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use starling_core::model::{parse_ts, Message, SourceType};
use starling_core::tokenize::text_tokens;

use crate::words::WORDS;

/// Everything that determines a corpus. Identical specs generate
/// byte-identical corpora.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub seed: u64,
    pub users: usize,
    pub messages: usize,
    pub date_start: DateTime<Utc>,
    pub date_end: DateTime<Utc>,
    /// Number of distinct hashtag tokens available to the generator.
    pub hashtag_vocab: usize,
    /// Probability a message mentions someone (then 1-2 mentions).
    pub mention_prob: f64,
    /// Probability a message carries hashtags (then 1-2 tags).
    pub hashtag_prob: f64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        CorpusSpec {
            seed: 42,
            users: 100,
            messages: 50_000,
            date_start: parse_ts("2025-01-01T00:00:00Z").unwrap(),
            date_end: parse_ts("2025-12-31T23:59:59Z").unwrap(),
            hashtag_vocab: 200,
            mention_prob: 0.3,
            hashtag_prob: 0.5,
        }
    }
}

/// The generated corpus: messages sorted newest-first (ties by numeric id
/// descending), which is exactly the order search pages serve them in.
pub struct Corpus {
    pub spec: CorpusSpec,
    pub messages: Vec<Message>,
}

impl CorpusSpec {
    pub fn generate(&self) -> Corpus {
        assert!((0.0..=1.0).contains(&self.mention_prob));
        assert!((0.0..=1.0).contains(&self.hashtag_prob));
        assert!(self.date_start <= self.date_end);

        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let handles: Vec<String> = (0..self.users)
            .map(|i| format!("{}_{:03}", WORDS[rng.gen_range(0..WORDS.len())], i))
            .collect();
        let tags: Vec<String> = (0..self.hashtag_vocab)
            .map(|i| {
                if i < WORDS.len() {
                    WORDS[i].to_string()
                } else {
                    format!("{}{}", WORDS[i % WORDS.len()], i / WORDS.len())
                }
            })
            .collect();
        let span_secs = (self.date_end - self.date_start).num_seconds().max(1);

        let mut messages = Vec::with_capacity(self.messages);
        for id in 1..=self.messages {
            let created = self.date_start + Duration::seconds(rng.gen_range(0..span_secs));
            let author = handles[rng.gen_range(0..handles.len())].clone();
            let word_count = rng.gen_range(5..=12);
            let mut text = (0..word_count)
                .map(|_| WORDS[rng.gen_range(0..WORDS.len())])
                .collect::<Vec<_>>()
                .join(" ");
            if !tags.is_empty() && rng.gen_bool(self.hashtag_prob) {
                for _ in 0..rng.gen_range(1..=2usize) {
                    text.push_str(" #");
                    text.push_str(&tags[rng.gen_range(0..tags.len())]);
                }
            }
            if !handles.is_empty() && rng.gen_bool(self.mention_prob) {
                for _ in 0..rng.gen_range(1..=2usize) {
                    text.push_str(" @");
                    text.push_str(&handles[rng.gen_range(0..handles.len())]);
                }
            }
            let link = format!("https://upstream.sim/{author}/status/{id}");
            messages.push(
                Message::compose(
                    SourceType::UpstreamSim,
                    id.to_string(),
                    created,
                    &author,
                    text,
                    created,
                    link,
                )
                .expect("generated message is valid"),
            );
        }
        messages.sort_by(|a, b| {
            let ka = (a.created_at, a.id_str.parse::<u64>().unwrap_or(0));
            let kb = (b.created_at, b.id_str.parse::<u64>().unwrap_or(0));
            kb.cmp(&ka)
        });
        Corpus { spec: self.clone(), messages }
    }
}

/// Does a message match a search term? `#x` filters hashtags, `@x` mentions;
/// a bare term matches a text word, hashtag, or mention.
pub fn term_matches(m: &Message, term: &str) -> bool {
    let t = term.trim().to_ascii_lowercase();
    if let Some(tag) = t.strip_prefix('#') {
        m.hashtags.contains(tag)
    } else if let Some(name) = t.strip_prefix('@') {
        m.mentions.contains(name)
    } else {
        m.hashtags.contains(&t)
            || m.mentions.contains(&t)
            || text_tokens(&m.text).contains(&t)
    }
}

impl Corpus {
    /// Brute-force scan: every matching message, newest first.
    pub fn scan_matches(&self, term: &str) -> Vec<&Message> {
        self.messages.iter().filter(|m| term_matches(m, term)).collect()
    }

    pub fn count_matching(&self, term: &str) -> usize {
        self.scan_matches(term).len()
    }

    pub fn count_in_span(
        &self,
        term: &str,
        since: DateTime<Utc>,
        until: DateTime<Utc>,
    ) -> usize {
        self.scan_matches(term)
            .into_iter()
            .filter(|m| m.created_at >= since && m.created_at <= until)
            .count()
    }

    /// Hashtags by frequency, most common first (handy for choosing seed
    /// terms in experiments).
    pub fn top_hashtags(&self, n: usize) -> Vec<(String, usize)> {
        let mut counts: std::collections::HashMap<&str, usize> = Default::default();
        for m in &self.messages {
            for tag in &m.hashtags {
                *counts.entry(tag).or_insert(0) += 1;
            }
        }
        let mut ranked: Vec<(String, usize)> =
            counts.into_iter().map(|(t, c)| (t.to_string(), c)).collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        ranked.truncate(n);
        ranked
    }

    /// Canonical serialization used by determinism checks.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for m in &self.messages {
            out.push_str(&starling_core::model::message_to_json(m).to_string());
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec() -> CorpusSpec {
        CorpusSpec { messages: 2_000, users: 30, hashtag_vocab: 40, ..Default::default() }
    }

    #[test]
    fn same_seed_same_corpus() {
        let a = small_spec().generate();
        let b = small_spec().generate();
        assert_eq!(a.to_jsonl(), b.to_jsonl());
    }

    #[test]
    fn different_seed_different_corpus() {
        let a = small_spec().generate();
        let b = CorpusSpec { seed: 43, ..small_spec() }.generate();
        assert_ne!(a.to_jsonl(), b.to_jsonl());
    }

    #[test]
    fn empty_spec_gives_empty_corpus() {
        let corpus = CorpusSpec { messages: 0, ..small_spec() }.generate();
        assert!(corpus.messages.is_empty());
        assert_eq!(corpus.count_matching("anything"), 0);
    }

    #[test]
    fn messages_are_newest_first_and_within_span() {
        let corpus = small_spec().generate();
        let spec = &corpus.spec;
        for pair in corpus.messages.windows(2) {
            assert!(pair[0].created_at >= pair[1].created_at);
        }
        for m in &corpus.messages {
            assert!(m.created_at >= spec.date_start && m.created_at <= spec.date_end);
        }
    }

    #[test]
    fn span_counts_partition_total() {
        let corpus = small_spec().generate();
        let (tag, total) = corpus.top_hashtags(1).pop().unwrap();
        let term = format!("#{tag}");
        let spec = &corpus.spec;
        let mid = spec.date_start + (spec.date_end - spec.date_start) / 2;
        let early = corpus.count_in_span(&term, spec.date_start, mid);
        let late = corpus.count_in_span(&term, mid + chrono::Duration::seconds(1), spec.date_end);
        assert_eq!(early + late, total);
        assert_eq!(total, corpus.count_matching(&term));
    }
}
