//! Word-boundary helpers shared by template validation and response mapping.

/// Byte range of a match inside a string.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

fn is_word_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_' || b >= 0x80
}

/// Every ASCII-case-insensitive occurrence of `needle` in `haystack` that is
/// bounded by non-word characters on both sides. Matches do not overlap.
pub fn find_word_spans(haystack: &str, needle: &str) -> Vec<Span> {
    let hay = haystack.to_ascii_lowercase();
    let needle = needle.trim().to_ascii_lowercase();
    let mut spans = Vec::new();
    if needle.is_empty() {
        return spans;
    }
    let bytes = hay.as_bytes();
    let mut from = 0;
    while let Some(pos) = hay[from..].find(&needle) {
        let start = from + pos;
        let end = start + needle.len();
        let left_ok = start == 0 || !is_word_byte(bytes[start - 1]);
        let right_ok = end == bytes.len() || !is_word_byte(bytes[end]);
        if left_ok && right_ok {
            spans.push(Span { start, end });
            from = end;
        } else {
            from = start + hay[start..].chars().next().map_or(1, char::len_utf8);
        }
    }
    spans
}
