//! A harvester node: scrapes a rate-limited upstream under a sliding-window
//! governor, stores messages in the embedded index, expands hashtags and
//! mentions into a bounded crawl frontier, and speaks the peer protocol —
//! join, periodic push-then-flush to a backend, broadcast search fan-out,
//! and instructed crawls — behind a Twitter-like REST gateway.

pub mod campaign;
pub mod caretaker;
pub mod clock;
pub mod config;
pub mod frontier;
pub mod gateway;
pub mod governor;
pub mod guard;
pub mod node;
pub mod peers;
pub mod scheduler;
pub mod scraper;
pub mod wire;

pub use config::{ConfigError, NodeConfig};
pub use node::{start, NodeError, NodeHandle};
