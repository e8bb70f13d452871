//! Frozen page markup. The per-message article block and the pagination
//! anchor are bit-exact contracts the scraper is written against — change
//! nothing here without changing the scraper grammar in lockstep.

use starling_core::model::{format_ts, Message};

/// HTML-escape `& < > "` (in that order of concern; `&` first).
pub fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// One message block:
/// `<article id="msg-ID"><span class="user">@NAME</span><time datetime="TS"></time><p class="text">TEXT</p></article>`
pub fn render_message(m: &Message) -> String {
    format!(
        "<article id=\"msg-{id}\"><span class=\"user\">@{name}</span><time datetime=\"{ts}\"></time><p class=\"text\">{text}</p></article>",
        id = m.id_str,
        name = m.screen_name,
        ts = format_ts(&m.created_at),
        text = escape(&m.text),
    )
}

/// A full results page. `next_page` present renders the `rel="next"` anchor.
pub fn render_page(query: &str, messages: &[&Message], next_page: Option<u32>) -> String {
    let mut out = String::with_capacity(256 + messages.len() * 256);
    out.push_str("<!DOCTYPE html>\n<html>\n<head><title>search</title></head>\n<body>\n<main class=\"results\">\n");
    for m in messages {
        out.push_str(&render_message(m));
        out.push('\n');
    }
    out.push_str("</main>\n");
    if let Some(next) = next_page {
        out.push_str(&format!(
            "<a rel=\"next\" href=\"/search?q={q}&amp;page={next}\">more</a>\n",
            q = escape(query),
        ));
    }
    out.push_str("</body>\n</html>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use starling_core::model::{parse_ts, Message, SourceType};

    #[test]
    fn article_markup_is_frozen() {
        let m = Message::compose(
            SourceType::UpstreamSim,
            "17",
            parse_ts("2025-03-04T05:06:07Z").unwrap(),
            "alice_001",
            "a < b & \"c\" #x",
            parse_ts("2025-03-04T05:06:07Z").unwrap(),
            "https://upstream.sim/alice_001/status/17",
        )
        .unwrap();
        assert_eq!(
            render_message(&m),
            "<article id=\"msg-17\"><span class=\"user\">@alice_001</span>\
             <time datetime=\"2025-03-04T05:06:07Z\"></time>\
             <p class=\"text\">a &lt; b &amp; &quot;c&quot; #x</p></article>"
                .replace("             ", ""),
        );
    }

    #[test]
    fn empty_page_has_frame_and_no_next() {
        let page = render_page("nothing", &[], None);
        assert!(page.contains("<main class=\"results\">"));
        assert!(!page.contains("rel=\"next\""));
        assert!(!page.contains("<article"));
    }

    #[test]
    fn next_anchor_escapes_ampersand() {
        let page = render_page("#tag", &[], Some(3));
        assert!(page.contains("<a rel=\"next\" href=\"/search?q=#tag&amp;page=3\">more</a>"));
    }
}
