//! Shared word tokenizer: lowercase, split on anything outside `[A-Za-z0-9_]`.
//!
//! The text index and the classifier must agree on tokenization, so both use
//! this function. The alphabet intentionally matches the entity grammar in
//! [`crate::model::extract_entities`].

/// Split text into lowercase word tokens, in order, duplicates kept.
pub fn text_tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
        .filter(|t| !t.is_empty())
        .map(|t| t.to_ascii_lowercase())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::text_tokens;

    #[test]
    fn splits_and_lowercases() {
        assert_eq!(text_tokens("Hello, #World_1!"), ["hello", "world_1"]);
        assert_eq!(text_tokens(""), Vec::<String>::new());
        assert_eq!(text_tokens("a--b  c"), ["a", "b", "c"]);
    }
}
