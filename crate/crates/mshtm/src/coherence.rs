//! Topic quality scoring via normalized pointwise mutual information.
//!
//! Sentences act as co-occurrence windows. For a word pair with window
//! probabilities `p(x)`, `p(y)` and joint `p(x, y)`:
//!
//! ```text
//! npmi(x, y) = ln((p(x,y) + eps) / (p(x) * p(y)))  /  -ln(p(x,y) + eps)
//! ```
//!
//! clamped to `[-1, 1]`. Two conventions make the edges exact rather than
//! epsilon-dependent: a pair that never co-occurs scores -1 (the limit as
//! eps goes to zero), and a degenerate denominator (joint probability at
//! or above 1) scores +1.
//!
//! A topic's coherence is the mean over all unordered pairs of its words;
//! words missing from the corpus are skipped and reported.

use std::collections::HashMap;

use crate::vectorizer::Vocabulary;

pub const DEFAULT_EPS: f64 = 1e-12;

#[derive(Debug, thiserror::Error)]
pub enum CoherenceError {
    #[error("term {0:?} does not occur in the corpus")]
    MissingTerm(String),
    #[error("need at least 2 scorable words, got {got}")]
    TooFewWords { got: usize },
    #[error("eps must be positive and finite, got {0}")]
    InvalidEps(f64),
    #[error("the corpus has no windows")]
    EmptyCorpus,
}

/// Which windows each term occurs in, over a fixed window count.
#[derive(Debug, Clone)]
pub struct CooccurrenceStats {
    n_windows: usize,
    postings: HashMap<String, Vec<u32>>,
}

/// Indexes the given windows (typically sentence texts), keeping only
/// vocabulary terms. Every window counts toward the total, occupied or not.
pub fn cooccurrence_stats(windows: &[String], vocab: &Vocabulary) -> CooccurrenceStats {
    let mut postings: HashMap<String, Vec<u32>> = HashMap::new();
    for (idx, window) in windows.iter().enumerate() {
        let mut terms = vocab.extract_terms(window);
        terms.retain(|t| vocab.index_of(t).is_some());
        terms.sort_unstable();
        terms.dedup();
        for term in terms {
            postings.entry(term).or_default().push(idx as u32);
        }
    }
    CooccurrenceStats { n_windows: windows.len(), postings }
}

impl CooccurrenceStats {
    pub fn n_windows(&self) -> usize {
        self.n_windows
    }

    pub fn document_frequency(&self, term: &str) -> usize {
        self.postings.get(term).map(|p| p.len()).unwrap_or(0)
    }

    fn joint_count(&self, a: &[u32], b: &[u32]) -> usize {
        let mut i = 0;
        let mut j = 0;
        let mut count = 0;
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    count += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        count
    }
}

/// NPMI for one word pair. Errors if either word never occurs.
pub fn npmi_pair(
    stats: &CooccurrenceStats,
    x: &str,
    y: &str,
    eps: f64,
) -> Result<f64, CoherenceError> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(CoherenceError::InvalidEps(eps));
    }
    if stats.n_windows == 0 {
        return Err(CoherenceError::EmptyCorpus);
    }
    let px_list = stats
        .postings
        .get(x)
        .ok_or_else(|| CoherenceError::MissingTerm(x.to_string()))?;
    let py_list = stats
        .postings
        .get(y)
        .ok_or_else(|| CoherenceError::MissingTerm(y.to_string()))?;

    let n = stats.n_windows as f64;
    let p_xy = stats.joint_count(px_list, py_list) as f64 / n;
    if p_xy == 0.0 {
        return Ok(-1.0);
    }
    let p_x = px_list.len() as f64 / n;
    let p_y = py_list.len() as f64 / n;
    let pmi = ((p_xy + eps) / (p_x * p_y)).ln();
    let denom = -(p_xy + eps).ln();
    if denom <= 0.0 {
        return Ok(1.0);
    }
    Ok((pmi / denom).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopicCoherence {
    pub score: f64,
    pub pairs_scored: usize,
    pub words_skipped: Vec<String>,
}

/// Mean NPMI over all unordered pairs of the topic's distinct words.
/// Words absent from the corpus are skipped and listed; fewer than two
/// scorable words is an error.
pub fn topic_npmi(
    stats: &CooccurrenceStats,
    words: &[String],
    eps: f64,
) -> Result<TopicCoherence, CoherenceError> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(CoherenceError::InvalidEps(eps));
    }
    let mut present = Vec::new();
    let mut skipped = Vec::new();
    for word in words {
        if present.iter().any(|p| p == word) || skipped.iter().any(|s| s == word) {
            continue;
        }
        if stats.postings.contains_key(word) {
            present.push(word.clone());
        } else {
            skipped.push(word.clone());
        }
    }
    if present.len() < 2 {
        return Err(CoherenceError::TooFewWords { got: present.len() });
    }
    let mut sum = 0.0;
    let mut pairs = 0;
    for i in 0..present.len() {
        for j in (i + 1)..present.len() {
            sum += npmi_pair(stats, &present[i], &present[j], eps)?;
            pairs += 1;
        }
    }
    Ok(TopicCoherence { score: sum / pairs as f64, pairs_scored: pairs, words_skipped: skipped })
}
