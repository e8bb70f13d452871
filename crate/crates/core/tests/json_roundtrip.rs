//! Wire-format properties: lossless JSON round-trips, and escaping checked
//! against a second, unrelated JSON parser (the `json` crate).

mod common;

use common::{arb_message, ts};
use proptest::prelude::*;
use starling_core::model::{json_to_message, message_to_json, Message, SourceType};

proptest! {
    #[test]
    fn json_round_trip_is_lossless(m in arb_message()) {
        let j = message_to_json(&m);
        prop_assert_eq!(json_to_message(&j).unwrap(), m);
    }

    /// Serialized bytes parse identically under an independent JSON parser.
    #[test]
    fn independent_parser_agrees(m in arb_message()) {
        let encoded = message_to_json(&m).to_string();
        let other = json::parse(&encoded).expect("independent parser accepts our output");
        prop_assert_eq!(other["text"].as_str().unwrap(), m.text.as_str());
        prop_assert_eq!(other["id_str"].as_str().unwrap(), m.id_str.as_str());
        prop_assert_eq!(other["screen_name"].as_str().unwrap(), m.screen_name.as_str());
        prop_assert_eq!(other["link"].as_str().unwrap(), m.link.as_str());
    }
}

#[test]
fn quotes_and_newlines_escape_correctly() {
    let m = Message::compose(
        SourceType::Import,
        "42",
        ts(1_700_000_000),
        "quoter",
        "she said \"hi\"\nthen left\t\\done",
        ts(1_700_000_100),
        "https://x.sim/q",
    )
    .unwrap();
    let encoded = message_to_json(&m).to_string();
    // Round-trip through both parsers.
    let back = json_to_message(&serde_json::from_str(&encoded).unwrap()).unwrap();
    assert_eq!(back, m);
    let other = json::parse(&encoded).unwrap();
    assert_eq!(other["text"].as_str().unwrap(), m.text);
}
