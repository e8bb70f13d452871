//! Scrapers turn upstream result pages into messages. One implementation per
//! source keyed by [`SourceType`]; new sources plug in by implementing
//! [`Scraper`] and registering it. Rate discipline is the scheduler's job —
//! a scraper just fetches and parses.

use std::collections::HashMap;
use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use chrono::{DateTime, Utc};
use starling_core::model::{parse_ts, Message, SourceType};

use crate::frontier::TaskKind;

#[derive(Debug, Clone)]
pub struct ScrapeRequest {
    pub base_url: String,
    pub query: String,
    pub page: u32,
    /// Opaque identity presented to the upstream as `X-Identity`.
    pub identity: String,
}

#[derive(Debug, Clone)]
pub struct ScrapedPage {
    pub messages: Vec<Message>,
    pub has_next: bool,
    pub page: u32,
    /// Article blocks that failed field extraction and were skipped.
    pub skipped: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum ScrapeError {
    #[error("rate limited, retry after {retry_after:?}")]
    RateLimited { retry_after: Duration },
    #[error("network error: {0}")]
    Network(String),
    #[error("upstream returned HTTP {0}")]
    Upstream(u16),
    #[error("unparseable page: {0}")]
    Parse(String),
}

#[async_trait]
pub trait Scraper: Send + Sync {
    fn source_type(&self) -> SourceType;

    fn base_url(&self) -> &str;

    /// Map a frontier task onto the upstream's query syntax.
    fn build_query(&self, kind: TaskKind, term: &str) -> String {
        match kind {
            TaskKind::Query => term.to_string(),
            TaskKind::Hashtag => format!("#{term}"),
            TaskKind::Mention => format!("@{term}"),
        }
    }

    async fn fetch_page(&self, req: &ScrapeRequest) -> Result<String, ScrapeError>;

    fn parse_page(&self, markup: &str, retrieved_at: DateTime<Utc>)
        -> Result<ScrapedPage, ScrapeError>;
}

pub type ScraperRegistry = HashMap<SourceType, Arc<dyn Scraper>>;

/// Reference scraper bound to the simulated upstream's frozen markup.
pub struct UpstreamSimScraper {
    client: reqwest::Client,
    base_url: String,
}

impl UpstreamSimScraper {
    pub fn new(client: reqwest::Client, base_url: impl Into<String>) -> UpstreamSimScraper {
        UpstreamSimScraper { client, base_url: base_url.into().trim_end_matches('/').to_string() }
    }
}

fn between<'a>(haystack: &'a str, prefix: &str, suffix: &str) -> Option<&'a str> {
    let start = haystack.find(prefix)? + prefix.len();
    let end = haystack[start..].find(suffix)? + start;
    Some(&haystack[start..end])
}

fn unescape(text: &str) -> String {
    // &amp; must come last so escaped escapes survive.
    text.replace("&lt;", "<")
        .replace("&gt;", ">")
        .replace("&quot;", "\"")
        .replace("&amp;", "&")
}

const ARTICLE_OPEN: &str = "<article id=\"msg-";
const ARTICLE_CLOSE: &str = "</article>";
const PAGE_FRAME: &str = "<main class=\"results\"";
const NEXT_ANCHOR: &str = "rel=\"next\"";

fn parse_article(
    block: &str,
    base_url: &str,
    retrieved_at: DateTime<Utc>,
) -> Option<Message> {
    let id = between(block, "\"msg-", "\"")?;
    let name = between(block, "<span class=\"user\">@", "</span>")?;
    let created = parse_ts(between(block, "<time datetime=\"", "\"")?)?;
    let raw_text = between(block, "<p class=\"text\">", "</p>")?;
    if id.is_empty() || name.is_empty() {
        return None;
    }
    let link = format!("{base_url}/{}/status/{id}", name.to_ascii_lowercase());
    Message::compose(
        SourceType::UpstreamSim,
        id,
        created,
        name,
        unescape(raw_text),
        retrieved_at,
        link,
    )
    .ok()
}

/// Parse the frozen page grammar. Malformed article blocks are skipped and
/// counted; a parse error means the payload is not a results page at all.
pub fn parse_sim_page(
    markup: &str,
    base_url: &str,
    retrieved_at: DateTime<Utc>,
    page: u32,
) -> Result<ScrapedPage, ScrapeError> {
    let mut messages = Vec::new();
    let mut skipped = 0;
    let mut blocks_seen = 0;
    let mut rest = markup;
    while let Some(start) = rest.find(ARTICLE_OPEN) {
        let Some(end) = rest[start..].find(ARTICLE_CLOSE) else {
            skipped += 1;
            blocks_seen += 1;
            break;
        };
        let block = &rest[start..start + end + ARTICLE_CLOSE.len()];
        blocks_seen += 1;
        match parse_article(block, base_url, retrieved_at) {
            Some(m) => messages.push(m),
            None => skipped += 1,
        }
        rest = &rest[start + end + ARTICLE_CLOSE.len()..];
    }
    if blocks_seen == 0 && !markup.contains(PAGE_FRAME) {
        return Err(ScrapeError::Parse("no article blocks and no results frame".into()));
    }
    Ok(ScrapedPage { messages, has_next: markup.contains(NEXT_ANCHOR), page, skipped })
}

#[async_trait]
impl Scraper for UpstreamSimScraper {
    fn source_type(&self) -> SourceType {
        SourceType::UpstreamSim
    }

    fn base_url(&self) -> &str {
        &self.base_url
    }

    async fn fetch_page(&self, req: &ScrapeRequest) -> Result<String, ScrapeError> {
        let response = self
            .client
            .get(format!("{}/search", self.base_url))
            .query(&[("q", req.query.as_str()), ("page", &req.page.to_string())])
            .header("X-Identity", &req.identity)
            .send()
            .await
            .map_err(|e| ScrapeError::Network(e.to_string()))?;
        let status = response.status();
        if status.as_u16() == 429 {
            let retry_after = response
                .headers()
                .get("retry-after")
                .and_then(|v| v.to_str().ok())
                .and_then(|v| v.parse::<u64>().ok())
                .unwrap_or(1);
            return Err(ScrapeError::RateLimited {
                retry_after: Duration::from_secs(retry_after),
            });
        }
        if !status.is_success() {
            return Err(ScrapeError::Upstream(status.as_u16()));
        }
        response.text().await.map_err(|e| ScrapeError::Network(e.to_string()))
    }

    fn parse_page(
        &self,
        markup: &str,
        retrieved_at: DateTime<Utc>,
    ) -> Result<ScrapedPage, ScrapeError> {
        parse_sim_page(markup, &self.base_url, retrieved_at, 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn now() -> DateTime<Utc> {
        parse_ts("2026-01-01T00:00:00Z").unwrap()
    }

    const BASE: &str = "http://127.0.0.1:9";

    #[test]
    fn parses_well_formed_articles() {
        let markup = "<main class=\"results\">\n\
            <article id=\"msg-5\"><span class=\"user\">@bob</span><time datetime=\"2025-02-03T04:05:06Z\"></time><p class=\"text\">hi &amp; bye #x</p></article>\n\
            <article id=\"msg-6\"><span class=\"user\">@eve</span><time datetime=\"2025-02-03T04:05:07Z\"></time><p class=\"text\">&lt;b&gt;</p></article>\n\
            </main>";
        let page = parse_sim_page(markup, BASE, now(), 1).unwrap();
        assert_eq!(page.messages.len(), 2);
        assert_eq!(page.skipped, 0);
        assert!(!page.has_next);
        let m = &page.messages[0];
        assert_eq!(m.id_str, "5");
        assert_eq!(m.screen_name, "bob");
        assert_eq!(m.text, "hi & bye #x");
        assert_eq!(m.hashtags.iter().cloned().collect::<Vec<_>>(), ["x"]);
        assert_eq!(page.messages[1].text, "<b>");
    }

    #[test]
    fn empty_results_page_is_not_an_error() {
        let page =
            parse_sim_page("<main class=\"results\">\n</main>", BASE, now(), 1).unwrap();
        assert!(page.messages.is_empty());
        assert!(!page.has_next);
    }

    #[test]
    fn garbage_without_frame_is_parse_error() {
        assert!(matches!(
            parse_sim_page("<html>not search</html>", BASE, now(), 1),
            Err(ScrapeError::Parse(_))
        ));
    }

    #[test]
    fn malformed_block_is_skipped_not_fatal() {
        let markup = "<main class=\"results\">\
            <article id=\"msg-1\"><span class=\"user\">@a</span><time datetime=\"BADDATE\"></time><p class=\"text\">x</p></article>\
            <article id=\"msg-2\"><span class=\"user\">@b</span><time datetime=\"2025-02-03T04:05:06Z\"></time><p class=\"text\">y</p></article>\
            </main>";
        let page = parse_sim_page(markup, BASE, now(), 1).unwrap();
        assert_eq!(page.messages.len(), 1);
        assert_eq!(page.skipped, 1);
    }

    #[test]
    fn next_anchor_sets_has_next() {
        let markup = "<main class=\"results\"></main>\n<a rel=\"next\" href=\"/search?q=x&amp;page=2\">more</a>";
        assert!(parse_sim_page(markup, BASE, now(), 1).unwrap().has_next);
    }
}
