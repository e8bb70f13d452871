//! Message schema, entity extraction, and the canonical JSON wire mapping.
//!
//! A [`Message`] is one harvested microblog post. Its `hashtags` and
//! `mentions` are always derived from `text` by [`extract_entities`] — they
//! are never free-form — and `(source_type, id_str)` is the global dedup
//! identity used across the whole network.

use std::collections::BTreeSet;
use std::fmt;

use chrono::{DateTime, SecondsFormat, Utc};
use serde_json::{json, Value};

/// Hard cap on message text length, in characters.
pub const MAX_TEXT_CHARS: usize = 560;

/// Which provider a message came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SourceType {
    UpstreamSim,
    Import,
}

impl SourceType {
    pub fn as_str(&self) -> &'static str {
        match self {
            SourceType::UpstreamSim => "UPSTREAM_SIM",
            SourceType::Import => "IMPORT",
        }
    }

    pub fn parse(s: &str) -> Option<SourceType> {
        match s {
            "UPSTREAM_SIM" => Some(SourceType::UpstreamSim),
            "IMPORT" => Some(SourceType::Import),
            _ => None,
        }
    }
}

impl fmt::Display for SourceType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Hashtags and mentions pulled out of a message text.
///
/// Tokens match `[A-Za-z0-9_]+`, lowercased, with duplicates collapsed.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EntitySet {
    pub hashtags: BTreeSet<String>,
    pub mentions: BTreeSet<String>,
}

fn is_word_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_'
}

/// Extract hashtags (`#token`) and mentions (`@token`) from arbitrary text.
///
/// A marker starts an entity only when it is not immediately preceded by a
/// word character, so `a#b` yields nothing. Consuming an entity resets that
/// boundary, so back-to-back entities like `#a#b` yield both tokens. Tokens
/// are maximal `[A-Za-z0-9_]+` runs, lowercased.
pub fn extract_entities(text: &str) -> EntitySet {
    let bytes = text.as_bytes();
    let mut out = EntitySet::default();
    let mut i = 0;
    let mut prev_is_word = false;
    while i < bytes.len() {
        let b = bytes[i];
        if (b == b'#' || b == b'@') && !prev_is_word {
            let mut j = i + 1;
            while j < bytes.len() && is_word_byte(bytes[j]) {
                j += 1;
            }
            if j > i + 1 {
                // Token bytes are ASCII word characters, always valid UTF-8.
                let token = text[i + 1..j].to_ascii_lowercase();
                if b == b'#' {
                    out.hashtags.insert(token);
                } else {
                    out.mentions.insert(token);
                }
                i = j;
                prev_is_word = false;
                continue;
            }
        }
        prev_is_word = is_word_byte(b);
        i += 1;
    }
    out
}

/// The global message identity: provider plus upstream-assigned id.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DedupKey {
    pub source_type: SourceType,
    pub id_str: String,
}

impl DedupKey {
    pub fn new(source_type: SourceType, id_str: impl Into<String>) -> Self {
        DedupKey { source_type, id_str: id_str.into() }
    }

    /// Compact `SOURCE:id` encoding used in flush tombstones. Unambiguous
    /// because the source tag is drawn from a fixed enum.
    pub fn encode(&self) -> String {
        format!("{}:{}", self.source_type.as_str(), self.id_str)
    }

    pub fn decode(s: &str) -> Option<DedupKey> {
        let (src, id) = s.split_once(':')?;
        let source_type = SourceType::parse(src)?;
        if id.is_empty() {
            return None;
        }
        Some(DedupKey { source_type, id_str: id.to_string() })
    }
}

impl fmt::Display for DedupKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.encode())
    }
}

/// One harvested microblog post. Construct via [`Message::compose`] so the
/// derived-entity and timestamp invariants hold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    pub id_str: String,
    pub source_type: SourceType,
    pub created_at: DateTime<Utc>,
    pub screen_name: String,
    pub text: String,
    pub hashtags: BTreeSet<String>,
    pub mentions: BTreeSet<String>,
    pub retrieved_at: DateTime<Utc>,
    pub link: String,
}

/// Violations of the message invariants.
#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("id_str must be nonempty")]
    EmptyId,
    #[error("text exceeds {MAX_TEXT_CHARS} characters")]
    TextTooLong,
    #[error("created_at is after retrieved_at")]
    TimeOrder,
}

impl Message {
    /// Build a message, deriving hashtags/mentions from `text`, lowercasing
    /// the screen name (leading `@` stripped), and truncating timestamps to
    /// second precision.
    pub fn compose(
        source_type: SourceType,
        id_str: impl Into<String>,
        created_at: DateTime<Utc>,
        screen_name: &str,
        text: impl Into<String>,
        retrieved_at: DateTime<Utc>,
        link: impl Into<String>,
    ) -> Result<Message, ModelError> {
        let id_str = id_str.into();
        if id_str.is_empty() {
            return Err(ModelError::EmptyId);
        }
        let text = text.into();
        if text.chars().count() > MAX_TEXT_CHARS {
            return Err(ModelError::TextTooLong);
        }
        let created_at = truncate_seconds(created_at);
        let retrieved_at = truncate_seconds(retrieved_at);
        if created_at > retrieved_at {
            return Err(ModelError::TimeOrder);
        }
        let entities = extract_entities(&text);
        Ok(Message {
            id_str,
            source_type,
            created_at,
            screen_name: screen_name.trim_start_matches('@').to_ascii_lowercase(),
            text,
            hashtags: entities.hashtags,
            mentions: entities.mentions,
            retrieved_at,
            link: link.into(),
        })
    }

    pub fn dedup_key(&self) -> DedupKey {
        DedupKey { source_type: self.source_type, id_str: self.id_str.clone() }
    }
}

fn truncate_seconds(dt: DateTime<Utc>) -> DateTime<Utc> {
    DateTime::from_timestamp(dt.timestamp(), 0).expect("timestamp in range")
}

/// Canonical timestamp form: ISO-8601 UTC, second precision, `Z` suffix.
pub fn format_ts(dt: &DateTime<Utc>) -> String {
    dt.to_rfc3339_opts(SecondsFormat::Secs, true)
}

/// Parse an RFC 3339 timestamp, normalizing to UTC second precision.
pub fn parse_ts(s: &str) -> Option<DateTime<Utc>> {
    DateTime::parse_from_rfc3339(s).ok().map(|dt| truncate_seconds(dt.with_timezone(&Utc)))
}

/// A JSON payload that does not fit the message schema; names the first
/// missing or ill-typed field.
#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
#[error("schema error at field `{field}`: {detail}")]
pub struct SchemaError {
    pub field: String,
    pub detail: String,
}

impl SchemaError {
    fn new(field: &str, detail: impl Into<String>) -> Self {
        SchemaError { field: field.to_string(), detail: detail.into() }
    }
}

/// Render a message as its canonical JSON object.
pub fn message_to_json(m: &Message) -> Value {
    json!({
        "id_str": m.id_str,
        "source_type": m.source_type.as_str(),
        "created_at": format_ts(&m.created_at),
        "screen_name": m.screen_name,
        "text": m.text,
        "hashtags": m.hashtags.iter().cloned().collect::<Vec<_>>(),
        "mentions": m.mentions.iter().cloned().collect::<Vec<_>>(),
        "retrieved_at": format_ts(&m.retrieved_at),
        "link": m.link,
    })
}

fn field_str<'a>(j: &'a Value, field: &str) -> Result<&'a str, SchemaError> {
    match j.get(field) {
        None => Err(SchemaError::new(field, "missing")),
        Some(Value::String(s)) => Ok(s),
        Some(other) => Err(SchemaError::new(field, format!("expected string, got {other}"))),
    }
}

fn field_string_array(j: &Value, field: &str) -> Result<(), SchemaError> {
    match j.get(field) {
        None => Err(SchemaError::new(field, "missing")),
        Some(Value::Array(items)) => {
            if items.iter().all(Value::is_string) {
                Ok(())
            } else {
                Err(SchemaError::new(field, "expected array of strings"))
            }
        }
        Some(other) => Err(SchemaError::new(field, format!("expected array, got {other}"))),
    }
}

/// Parse a message from its JSON object. Fields are checked in schema order
/// and the first offender is reported. `hashtags`/`mentions` must be present
/// and well-typed, but their contents are re-derived from `text` so the
/// derived-entity invariant holds no matter what the payload claims.
pub fn json_to_message(j: &Value) -> Result<Message, SchemaError> {
    if !j.is_object() {
        return Err(SchemaError::new("", "expected a JSON object"));
    }
    let id_str = field_str(j, "id_str")?;
    if id_str.is_empty() {
        return Err(SchemaError::new("id_str", "must be nonempty"));
    }
    let source_raw = field_str(j, "source_type")?;
    let source_type = SourceType::parse(source_raw)
        .ok_or_else(|| SchemaError::new("source_type", format!("unknown value {source_raw:?}")))?;
    let created_at = parse_ts(field_str(j, "created_at")?)
        .ok_or_else(|| SchemaError::new("created_at", "not an ISO-8601 timestamp"))?;
    let screen_name = field_str(j, "screen_name")?;
    let text = field_str(j, "text")?;
    field_string_array(j, "hashtags")?;
    field_string_array(j, "mentions")?;
    let retrieved_at = parse_ts(field_str(j, "retrieved_at")?)
        .ok_or_else(|| SchemaError::new("retrieved_at", "not an ISO-8601 timestamp"))?;
    let link = field_str(j, "link")?;

    Message::compose(source_type, id_str, created_at, screen_name, text, retrieved_at, link)
        .map_err(|e| match e {
            ModelError::EmptyId => SchemaError::new("id_str", "must be nonempty"),
            ModelError::TextTooLong => {
                SchemaError::new("text", format!("longer than {MAX_TEXT_CHARS} characters"))
            }
            ModelError::TimeOrder => SchemaError::new("created_at", "after retrieved_at"),
        })
}
