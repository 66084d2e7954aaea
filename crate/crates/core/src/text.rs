//! String normalization and phrase matching shared by the loaders, the
//! filter and the metrics.
//!
//! All comparisons in the crate go through [`normalize`]: lowercase,
//! whitespace collapsed to single spaces, trailing sentence punctuation
//! stripped. Phrase lookups are substring matches anchored on word
//! boundaries, where a boundary is any non-alphanumeric character.

/// Lowercase, collapse whitespace and strip terminal punctuation.
pub fn normalize(s: &str) -> String {
    let collapsed = s
        .split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ");
    collapsed
        .trim_end_matches(['.', '!', '?', ',', ';', ':'])
        .trim_end()
        .to_string()
}

/// Lowercase and collapse whitespace, keeping punctuation intact.
pub fn collapse(s: &str) -> String {
    s.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

fn is_boundary(c: Option<char>) -> bool {
    c.is_none_or(|c| !c.is_alphanumeric())
}

/// Byte offsets of every word-bounded, non-overlapping occurrence of
/// `needle` in `haystack`. Both sides are expected to be normalized already.
pub fn find_phrase(haystack: &str, needle: &str) -> Vec<usize> {
    let mut hits = Vec::new();
    if needle.is_empty() {
        return hits;
    }
    let mut from = 0;
    while let Some(pos) = haystack[from..].find(needle) {
        let start = from + pos;
        let end = start + needle.len();
        let before = haystack[..start].chars().next_back();
        let after = haystack[end..].chars().next();
        if is_boundary(before) && is_boundary(after) {
            hits.push(start);
            from = end;
        } else {
            // advance one char past the false hit
            from = start + haystack[start..].chars().next().map_or(1, char::len_utf8);
        }
        if from >= haystack.len() {
            break;
        }
    }
    hits
}

pub fn contains_phrase(haystack: &str, needle: &str) -> bool {
    !find_phrase(haystack, needle).is_empty()
}

/// Split a normalized utterance into clauses at sentence and clause
/// punctuation. Empty clauses are dropped.
pub fn clauses(s: &str) -> Vec<&str> {
    s.split(['.', ',', ';', '!', '?'])
        .map(str::trim)
        .filter(|c| !c.is_empty())
        .collect()
}

/// Whitespace tokens with surrounding punctuation trimmed (apostrophes kept).
pub fn tokens(s: &str) -> Vec<&str> {
    s.split_whitespace()
        .map(|t| t.trim_matches(|c: char| !c.is_alphanumeric() && c != '\''))
        .filter(|t| !t.is_empty())
        .collect()
}

/// Token-level search for a (possibly multi-word) phrase; returns the index
/// of the first token of each match.
pub fn token_positions(toks: &[&str], phrase: &str) -> Vec<usize> {
    let needle = tokens(phrase);
    if needle.is_empty() || needle.len() > toks.len() {
        return Vec::new();
    }
    (0..=toks.len() - needle.len())
        .filter(|&i| toks[i..i + needle.len()] == needle[..])
        .collect()
}
