//! End-to-end checks of the simulator over real HTTP: pagination under the
//! per-query record cap, the 429 path with Retry-After, per-identity
//! budgets, and byte-determinism of served pages.

use starling_core::model::parse_ts;
use starling_sim::{start, Corpus, CorpusSpec, LimitSpec};

fn dense_spec() -> CorpusSpec {
    // Single-tag vocabulary with certain tagging: roughly half the corpus
    // carries "#time", giving a query with well over the record cap.
    CorpusSpec {
        seed: 7,
        users: 20,
        messages: 1_800,
        date_start: parse_ts("2025-01-01T00:00:00Z").unwrap(),
        date_end: parse_ts("2025-06-30T00:00:00Z").unwrap(),
        hashtag_vocab: 1,
        mention_prob: 0.1,
        hashtag_prob: 1.0,
    }
}

fn corpus() -> Corpus {
    dense_spec().generate()
}

async fn get(
    client: &reqwest::Client,
    base: &str,
    q: &str,
    page: u32,
    identity: &str,
) -> reqwest::Response {
    client
        .get(format!("{base}/search"))
        .query(&[("q", q), ("page", &page.to_string())])
        .header("X-Identity", identity)
        .send()
        .await
        .expect("request succeeds")
}

#[tokio::test]
async fn pagination_honors_record_cap() {
    let corpus = corpus();
    let matching = corpus.count_matching("#time");
    assert!(matching > 800, "corpus must exceed the cap, got {matching}");

    let limits = LimitSpec {
        window_seconds: 900,
        max_requests: 10_000,
        per_query_record_cap: 800,
        page_size: 20,
    };
    let sim = start(corpus, limits, 0).await.unwrap();
    let client = reqwest::Client::new();

    // 800 / 20 = 40 pages; page 40 is the last.
    let p1 = get(&client, &sim.base_url, "#time", 1, "t").await.text().await.unwrap();
    assert_eq!(p1.matches("<article").count(), 20);
    assert!(p1.contains("rel=\"next\""));

    let p40 = get(&client, &sim.base_url, "#time", 40, "t").await.text().await.unwrap();
    assert_eq!(p40.matches("<article").count(), 20);
    assert!(!p40.contains("rel=\"next\""), "page 40 must be the last reachable page");

    let p41 = get(&client, &sim.base_url, "#time", 41, "t").await.text().await.unwrap();
    assert_eq!(p41.matches("<article").count(), 0);
    assert!(p41.contains("<main class=\"results\">"));

    let none = get(&client, &sim.base_url, "no_such_term_here", 1, "t").await;
    let body = none.text().await.unwrap();
    assert_eq!(body.matches("<article").count(), 0);
    assert!(body.contains("<main class=\"results\">"));
    assert!(!body.contains("rel=\"next\""));

    sim.shutdown().await;
}

#[tokio::test]
async fn sixteenth_request_in_window_is_rejected() {
    let limits = LimitSpec { window_seconds: 900, max_requests: 15, ..Default::default() };
    let sim = start(CorpusSpec { messages: 50, ..dense_spec() }.generate(), limits, 0)
        .await
        .unwrap();
    let client = reqwest::Client::new();

    for i in 0..15 {
        let resp = get(&client, &sim.base_url, "time", 1, "me").await;
        assert_eq!(resp.status(), 200, "request {i}");
    }
    let resp = get(&client, &sim.base_url, "time", 1, "me").await;
    assert_eq!(resp.status(), 429);
    let retry: u64 = resp
        .headers()
        .get("retry-after")
        .expect("Retry-After present")
        .to_str()
        .unwrap()
        .parse()
        .unwrap();
    assert!(retry > 0 && retry <= 900);
    assert_eq!(resp.text().await.unwrap(), r#"{"error":"rate limit exceeded"}"#);

    // A different identity is unaffected.
    let other = get(&client, &sim.base_url, "time", 1, "someone_else").await;
    assert_eq!(other.status(), 200);

    let stats: serde_json::Value =
        client.get(format!("{}/stats.json", sim.base_url)).send().await.unwrap().json().await.unwrap();
    assert_eq!(stats["rejected_429"], 1);
    assert_eq!(stats["served"]["me"], 15);

    sim.shutdown().await;
}

#[tokio::test]
async fn served_pages_are_byte_deterministic() {
    let limits = LimitSpec::default();
    let a = start(corpus(), limits, 0).await.unwrap();
    let b = start(corpus(), limits, 0).await.unwrap();
    let client = reqwest::Client::new();
    for page in 1..=3 {
        let pa = get(&client, &a.base_url, "#time", page, "x").await.text().await.unwrap();
        let pb = get(&client, &b.base_url, "#time", page, "x").await.text().await.unwrap();
        assert_eq!(pa, pb, "page {page} differs");
    }
    a.shutdown().await;
    b.shutdown().await;
}

#[tokio::test]
async fn missing_query_is_bad_request() {
    let sim = start(CorpusSpec { messages: 10, ..dense_spec() }.generate(), LimitSpec::default(), 0)
        .await
        .unwrap();
    let client = reqwest::Client::new();
    let resp = client.get(format!("{}/search", sim.base_url)).send().await.unwrap();
    assert_eq!(resp.status(), 400);
    let resp = client
        .get(format!("{}/search", sim.base_url))
        .query(&[("q", "x"), ("page", "0")])
        .send()
        .await
        .unwrap();
    assert_eq!(resp.status(), 400);
    sim.shutdown().await;
}

#[tokio::test]
async fn index_agrees_with_scan_oracle() {
    let corpus = CorpusSpec { messages: 1_000, hashtag_vocab: 25, ..dense_spec() }.generate();
    let oracle_counts: Vec<(String, usize)> = ["#time", "@", "time", "people", "#year"]
        .iter()
        .map(|t| (t.to_string(), corpus.scan_matches(t).len()))
        .collect();
    let limits =
        LimitSpec { max_requests: 100_000, per_query_record_cap: 100_000, page_size: 50, ..Default::default() };
    let sim = start(corpus, limits, 0).await.unwrap();
    let client = reqwest::Client::new();
    for (term, expected) in oracle_counts {
        let mut seen = 0usize;
        let mut page = 1;
        loop {
            let body = get(&client, &sim.base_url, &term, page, "o").await.text().await.unwrap();
            seen += body.matches("<article").count();
            if !body.contains("rel=\"next\"") {
                break;
            }
            page += 1;
        }
        assert_eq!(seen, expected, "term {term:?}");
    }
    sim.shutdown().await;
}
