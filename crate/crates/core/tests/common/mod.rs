//! Shared generators for core property tests.

use chrono::{DateTime, Utc};
use proptest::prelude::*;
use starling_core::model::{Message, SourceType};

pub fn ts(secs: i64) -> DateTime<Utc> {
    DateTime::from_timestamp(secs, 0).unwrap()
}

prop_compose! {
    /// Random-but-valid message. Texts include markers, quotes, newlines and
    /// non-ASCII so serialization and entity derivation get exercised.
    pub fn arb_message()(
        id in "[0-9]{1,9}",
        source in prop_oneof![Just(SourceType::UpstreamSim), Just(SourceType::Import)],
        created in 1_500_000_000i64..1_900_000_000,
        delta in 0i64..100_000,
        name in "[a-z0-9_]{1,15}",
        text in proptest::collection::vec(
            prop_oneof![
                4 => proptest::char::range('a', 'z').prop_map(|c| c.to_string()),
                1 => Just("#".to_string()),
                1 => Just("@".to_string()),
                2 => Just(" ".to_string()),
                1 => Just("\"".to_string()),
                1 => Just("\n".to_string()),
                1 => Just("é".to_string()),
                1 => Just("0".to_string()),
            ],
            0..80,
        ).prop_map(|v| v.concat()),
        link in "https://[a-z]{3,8}\\.sim/[a-z0-9/]{0,12}",
    ) -> Message {
        Message::compose(source, id, ts(created), &name, text, ts(created + delta), link)
            .expect("generated message is valid")
    }
}
