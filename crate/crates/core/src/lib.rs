//! Core data model and embedded storage for the starling harvester network.
//!
//! This crate holds everything the other components agree on:
//!
//! - [`model`]: the `Message` schema, the entity-extraction grammar that
//!   derives hashtags and mentions from text, the `(source, id)` dedup key,
//!   and the canonical JSON wire mapping.
//! - [`store`]: an embedded message store — in-memory inverted index with
//!   append-only JSONL dump persistence, dedup insert, filtered search,
//!   flush tombstones, and dump import/export.
//! - [`classifier`]: a multinomial naive Bayes text classifier usable as an
//!   opt-in message annotator.
//! - [`tokenize`]: the shared word tokenizer used by the text index and the
//!   classifier.

pub mod classifier;
pub mod model;
pub mod store;
pub mod tokenize;

pub use model::{
    extract_entities, json_to_message, message_to_json, DedupKey, EntitySet, Message, SchemaError,
    SourceType,
};
pub use store::{ImportReport, IndexedStore, InsertReport, QueryFilter, StoreError};
