//! HTTP face of the simulator: `GET /search?q=&page=` behind the sliding
//! window, plus `GET /stats.json` so harnesses can audit served/429 counts.

use std::collections::{BTreeSet, HashMap};
use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Instant;

use axum::extract::{ConnectInfo, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::Router;
use parking_lot::Mutex;
use serde_json::json;
use starling_core::model::Message;
use starling_core::tokenize::text_tokens;
use tokio::net::TcpListener;
use tokio::sync::oneshot;

use crate::corpus::Corpus;
use crate::limiter::{LimitSpec, WindowLedger};
use crate::render;

/// Posting lists over the newest-first corpus; index order is page order.
struct SearchIndex {
    text: HashMap<String, Vec<u32>>,
    tags: HashMap<String, Vec<u32>>,
    mentions: HashMap<String, Vec<u32>>,
}

impl SearchIndex {
    fn build(messages: &[Message]) -> SearchIndex {
        let mut index = SearchIndex {
            text: HashMap::new(),
            tags: HashMap::new(),
            mentions: HashMap::new(),
        };
        for (i, m) in messages.iter().enumerate() {
            let i = i as u32;
            let unique: BTreeSet<String> = text_tokens(&m.text).into_iter().collect();
            for token in unique {
                index.text.entry(token).or_default().push(i);
            }
            for tag in &m.hashtags {
                index.tags.entry(tag.clone()).or_default().push(i);
            }
            for name in &m.mentions {
                index.mentions.entry(name.clone()).or_default().push(i);
            }
        }
        index
    }

    fn query(&self, term: &str) -> Vec<u32> {
        let t = term.trim().to_ascii_lowercase();
        if let Some(tag) = t.strip_prefix('#') {
            self.tags.get(tag).cloned().unwrap_or_default()
        } else if let Some(name) = t.strip_prefix('@') {
            self.mentions.get(name).cloned().unwrap_or_default()
        } else {
            let mut hits: BTreeSet<u32> = BTreeSet::new();
            for map in [&self.text, &self.tags, &self.mentions] {
                if let Some(list) = map.get(&t) {
                    hits.extend(list.iter().copied());
                }
            }
            hits.into_iter().collect()
        }
    }
}

struct SimState {
    corpus: Arc<Corpus>,
    index: SearchIndex,
    limits: LimitSpec,
    ledger: Mutex<WindowLedger>,
    origin: Instant,
}

impl SimState {
    fn now_ms(&self) -> u64 {
        self.origin.elapsed().as_millis() as u64
    }
}

fn error_json(status: StatusCode, message: &str) -> Response {
    (
        status,
        [(header::CONTENT_TYPE, "application/json")],
        json!({ "error": message }).to_string(),
    )
        .into_response()
}

async fn handle_search(
    State(state): State<Arc<SimState>>,
    ConnectInfo(addr): ConnectInfo<SocketAddr>,
    headers: HeaderMap,
    Query(params): Query<HashMap<String, String>>,
) -> Response {
    let Some(query) = params.get("q").map(|q| q.trim().to_string()).filter(|q| !q.is_empty())
    else {
        return error_json(StatusCode::BAD_REQUEST, "missing query");
    };
    let page: u32 = match params.get("page").map(|p| p.parse()).unwrap_or(Ok(1)) {
        Ok(p) if p >= 1 => p,
        _ => return error_json(StatusCode::BAD_REQUEST, "page must be a positive integer"),
    };
    let identity = headers
        .get("x-identity")
        .and_then(|v| v.to_str().ok())
        .map(|v| v.to_string())
        .unwrap_or_else(|| addr.ip().to_string());

    if let Err(retry_after) = state.ledger.lock().check(&identity, state.now_ms()) {
        let mut response = error_json(StatusCode::TOO_MANY_REQUESTS, "rate limit exceeded");
        response
            .headers_mut()
            .insert(header::RETRY_AFTER, retry_after.to_string().parse().unwrap());
        return response;
    }

    let hits = state.index.query(&query);
    let total = hits.len().min(state.limits.per_query_record_cap);
    let page_size = state.limits.page_size;
    let start = (page as usize - 1).saturating_mul(page_size);
    let slice: Vec<&Message> = hits[..total]
        .iter()
        .skip(start)
        .take(page_size)
        .map(|&i| &state.corpus.messages[i as usize])
        .collect();
    let has_next = (page as usize) * page_size < total;
    let body = render::render_page(&query, &slice, has_next.then(|| page + 1));
    ([(header::CONTENT_TYPE, "text/html; charset=utf-8")], body).into_response()
}

async fn handle_stats(State(state): State<Arc<SimState>>) -> Response {
    let ledger = state.ledger.lock();
    let total: u64 = ledger.served().values().sum();
    (
        [(header::CONTENT_TYPE, "application/json")],
        json!({
            "served": ledger.served(),
            "rejected_429": ledger.rejected(),
            "total_served": total,
        })
        .to_string(),
    )
        .into_response()
}

/// A running simulator.
pub struct SimHandle {
    pub addr: SocketAddr,
    pub base_url: String,
    shutdown: Option<oneshot::Sender<()>>,
    task: tokio::task::JoinHandle<()>,
}

impl SimHandle {
    pub async fn shutdown(mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        let _ = (&mut self.task).await;
    }
}

/// Bind `127.0.0.1:port` (0 picks a free port) and serve the simulator.
pub async fn start(corpus: Corpus, limits: LimitSpec, port: u16) -> std::io::Result<SimHandle> {
    let index = SearchIndex::build(&corpus.messages);
    let state = Arc::new(SimState {
        corpus: Arc::new(corpus),
        index,
        limits,
        ledger: Mutex::new(WindowLedger::new(&limits)),
        origin: Instant::now(),
    });
    let app = Router::new()
        .route("/search", get(handle_search))
        .route("/stats.json", get(handle_stats))
        .with_state(state);

    let listener = TcpListener::bind(("127.0.0.1", port)).await?;
    let addr = listener.local_addr()?;
    let (tx, rx) = oneshot::channel();
    let task = tokio::spawn(async move {
        let service = app.into_make_service_with_connect_info::<SocketAddr>();
        let server = axum::serve(listener, service).with_graceful_shutdown(async {
            let _ = rx.await;
        });
        if let Err(err) = server.await {
            tracing::error!("upstream simulator exited: {err}");
        }
    });
    Ok(SimHandle { addr, base_url: format!("http://{addr}"), shutdown: Some(tx), task })
}
