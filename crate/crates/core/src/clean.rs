//! Tweet text cleansing.
//!
//! Rules, applied in order: decode HTML entities, drop URLs, drop `@`-mentions,
//! strip `#` (keeping the tag word), lowercase, collapse whitespace. There is
//! deliberately no spelling correction.
//!
//! A single pass is not idempotent (`"ht#tp://x"` only becomes a URL after the
//! `#` is gone, `"&amp;lt;"` decodes one level at a time), so the rule list is
//! re-applied until the text stops changing. Every pass that changes an already
//! cleaned string strictly shortens it, which bounds the loop.

use std::sync::LazyLock;

use regex::{Captures, Regex};

static ENTITY: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"&(#[0-9]{1,7}|#[xX][0-9a-fA-F]{1,6}|[A-Za-z]{2,6});").unwrap());
static URL: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)(?:https?://|www\.)\S*").unwrap());
static MENTION: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"@\w+").unwrap());

pub fn clean_text(raw: &str) -> String {
    let mut current = clean_once(raw);
    loop {
        let next = clean_once(&current);
        if next == current {
            return current;
        }
        current = next;
    }
}

fn clean_once(raw: &str) -> String {
    let decoded = decode_entities(raw);
    // Replace with a space so removal never glues neighbouring tokens together.
    let no_urls = URL.replace_all(&decoded, " ");
    let no_mentions = MENTION.replace_all(&no_urls, " ");
    let no_hashes = no_mentions.replace('#', "");
    let lowered = no_hashes.to_lowercase();
    lowered.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn decode_entities(s: &str) -> String {
    ENTITY
        .replace_all(s, |caps: &Captures<'_>| {
            let body = &caps[1];
            decode_entity(body).map_or_else(|| caps[0].to_string(), |c| c.to_string())
        })
        .into_owned()
}

fn decode_entity(body: &str) -> Option<char> {
    if let Some(num) = body.strip_prefix('#') {
        let code = match num.strip_prefix(['x', 'X']) {
            Some(hex) => u32::from_str_radix(hex, 16).ok()?,
            None => num.parse::<u32>().ok()?,
        };
        return char::from_u32(code);
    }
    match body.to_ascii_lowercase().as_str() {
        "amp" => Some('&'),
        "lt" => Some('<'),
        "gt" => Some('>'),
        "quot" => Some('"'),
        "apos" => Some('\''),
        "nbsp" => Some('\u{a0}'),
        _ => None,
    }
}
