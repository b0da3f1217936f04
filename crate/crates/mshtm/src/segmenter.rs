//! Sentence segmentation and chunking.
//!
//! Turns are split into sentences at `.`, `!`, or `?` followed by
//! whitespace, except when the period belongs to a known abbreviation
//! (`Mr.`, `e.g.`, ...). Consecutive sentences are then grouped greedily
//! into chunks of at most `max_chunk` sentences, each chunk becoming one
//! [`SentenceDocument`] that keeps its source file id and timestamp.

use crate::corpus::CleanDocument;

const ABBREVIATIONS: &str = include_str!("../data/abbreviations.txt");

/// One chunk of up to `max_chunk` consecutive sentences from a single turn.
#[derive(Debug, Clone, PartialEq)]
pub struct SentenceDocument {
    /// Stable id: `{doc_id}#{turn index}#{chunk index}`.
    pub sent_id: String,
    pub doc_id: String,
    pub timestamp: String,
    pub text: String,
    /// Number of sentences merged into this chunk.
    pub sentence_count: usize,
}

fn abbreviation_set() -> &'static [&'static str] {
    use std::sync::OnceLock;
    static SET: OnceLock<Vec<&'static str>> = OnceLock::new();
    SET.get_or_init(|| {
        ABBREVIATIONS
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .collect()
    })
}

/// Does the text ending at byte `end` (exclusive, just past a `.`) end with
/// a guarded abbreviation?
fn ends_with_abbreviation(text: &str, end: usize) -> bool {
    let head = &text[..end];
    abbreviation_set().iter().any(|abbr| {
        if !head.to_lowercase().ends_with(abbr) {
            return false;
        }
        // The character before the abbreviation must not extend the word
        // ("St." guards, "Aug." does not become one by ending in "g.").
        let start = head.len() - abbr.len();
        head[..start]
            .chars()
            .next_back()
            .map(|c| !c.is_alphanumeric())
            .unwrap_or(true)
    })
}

/// Splits text into sentences. Boundary characters stay with their
/// sentence, so joining the result with single spaces reproduces the
/// (whitespace-normalized) input.
pub fn split_into_sentences(text: &str) -> Vec<String> {
    let mut sentences = Vec::new();
    let mut start = 0usize;
    let mut iter = text.char_indices().peekable();
    while let Some((i, c)) = iter.next() {
        if c != '.' && c != '!' && c != '?' {
            continue;
        }
        let followed_by_space = matches!(iter.peek(), Some(&(_, next)) if next.is_whitespace());
        if !followed_by_space {
            continue;
        }
        if c == '.' && ends_with_abbreviation(text, i + c.len_utf8()) {
            continue;
        }
        let sentence = text[start..i + c.len_utf8()].trim();
        if !sentence.is_empty() {
            sentences.push(sentence.to_string());
        }
        start = i + c.len_utf8();
    }
    let tail = text[start..].trim();
    if !tail.is_empty() {
        sentences.push(tail.to_string());
    }
    sentences
}

/// Splits every turn of `doc` into sentences and groups them into chunks of
/// at most `max_chunk` consecutive sentences (the final chunk of a turn may
/// be smaller). Empty turns produce nothing.
pub fn split_sentences(doc: &CleanDocument, max_chunk: usize) -> Vec<SentenceDocument> {
    assert!(max_chunk >= 1, "max_chunk must be at least 1");
    let mut out = Vec::new();
    for (turn_idx, turn) in doc.turns.iter().enumerate() {
        let sentences = split_into_sentences(&turn.text);
        if sentences.is_empty() {
            continue;
        }
        for (chunk_idx, chunk) in sentences.chunks(max_chunk).enumerate() {
            out.push(SentenceDocument {
                sent_id: format!("{}#{:04}#{:02}", doc.doc_id, turn_idx, chunk_idx),
                doc_id: doc.doc_id.clone(),
                timestamp: turn.timestamp.clone(),
                text: chunk.join(" "),
                sentence_count: chunk.len(),
            });
        }
    }
    out
}
