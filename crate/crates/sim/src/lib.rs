//! A deterministic simulated microblogging site: seeded synthetic corpus,
//! HTML-like search pages with pagination, and a per-identity sliding
//! rate-limit window answering 429 once the budget is spent.
//!
//! The simulator stands in for the real upstream so the harvester's
//! rate-limit and scraping behaviour can be tested hermetically. Identical
//! [`CorpusSpec`]s produce byte-identical corpora, and identical request
//! sequences produce byte-identical pages.

pub mod corpus;
pub mod limiter;
pub mod render;
pub mod server;
mod words;

pub use corpus::{Corpus, CorpusSpec};
pub use limiter::{LimitSpec, WindowLedger};
pub use server::{start, SimHandle};
