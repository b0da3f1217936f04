//! Tokenization, vocabulary construction, and TF-IDF weighting.
//!
//! Tokens are maximal runs of Unicode word characters, lowercased; an
//! apostrophe is a separator, so "don't" yields `don` and `t`. Stopwords are
//! removed before n-grams are formed. The weighting is raw term count times
//! a smoothed idf, `ln((1 + n) / (1 + df)) + 1`, with each document column
//! L2-normalized afterwards.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::io;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

const BASE_STOPWORDS: &str = include_str!("../data/stopwords_english.txt");

#[derive(Debug, Error)]
pub enum VectorizerError {
    #[error("no input documents")]
    EmptyInput,
    #[error(
        "document-frequency thresholds left no terms (min count {min_count}, max count \
         {max_count}); loosen min_df or max_df"
    )]
    EmptyVocabulary { min_count: usize, max_count: usize },
    #[error(
        "resolved min_df count {min_count} is not below resolved max_df count {max_count}"
    )]
    ThresholdConflict { min_count: usize, max_count: usize },
    #[error("invalid vectorizer config: {0}")]
    InvalidConfig(String),
}

/// Minimum document frequency, either a fraction of the corpus (resolved
/// with a ceiling) or an absolute document count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MinDf {
    Fraction(f64),
    Count(usize),
}

#[derive(Debug, Clone)]
pub struct VectorizerConfig {
    /// Maximum document frequency as a fraction of the corpus, resolved with
    /// a floor: terms appearing in more documents are dropped.
    pub max_df: f64,
    pub min_df: MinDf,
    /// Inclusive n-gram range; `(1, 1)` means unigrams only.
    pub ngram_range: (usize, usize),
    pub stopwords: BTreeSet<String>,
    pub lowercase: bool,
}

impl Default for VectorizerConfig {
    fn default() -> Self {
        VectorizerConfig {
            max_df: 0.8,
            min_df: MinDf::Fraction(0.05),
            ngram_range: (1, 1),
            stopwords: BTreeSet::new(),
            lowercase: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StopwordProfile {
    Shoah,
    Mediasum,
    Custom,
}

/// Returns the vendored English stopword list plus the profile's additions
/// and any caller-supplied extras.
pub fn load_stopwords(profile: StopwordProfile, extra: &BTreeSet<String>) -> BTreeSet<String> {
    let mut words: BTreeSet<String> = BASE_STOPWORDS
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect();
    let additions: &[&str] = match profile {
        StopwordProfile::Shoah => &["um", "uh"],
        StopwordProfile::Mediasum => &["s", "t", "don", "ve", "did", "got"],
        StopwordProfile::Custom => &[],
    };
    words.extend(additions.iter().map(|s| s.to_string()));
    words.extend(extra.iter().cloned());
    words
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Splits text into lowercased word tokens. Any non-word character,
/// including apostrophes, separates tokens.
pub fn tokenize(text: &str, lowercase: bool) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for c in text.chars() {
        if is_word_char(c) {
            if lowercase {
                current.extend(c.to_lowercase());
            } else {
                current.push(c);
            }
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// Tokenizes, removes stopwords, then forms n-grams over the surviving
/// token sequence (n-gram terms join their tokens with single spaces).
fn term_stream(
    text: &str,
    lowercase: bool,
    stopwords: &BTreeSet<String>,
    ngram_range: (usize, usize),
) -> Vec<String> {
    let tokens: Vec<String> = tokenize(text, lowercase)
        .into_iter()
        .filter(|t| !stopwords.contains(t))
        .collect();
    let (lo, hi) = ngram_range;
    if lo == 1 && hi == 1 {
        return tokens;
    }
    let mut terms = Vec::new();
    for n in lo..=hi {
        if n == 0 || n > tokens.len() {
            continue;
        }
        for window in tokens.windows(n) {
            terms.push(window.join(" "));
        }
    }
    terms
}

/// The frozen term set: lexicographically sorted terms, their indices, and
/// the document frequencies observed when the vocabulary was built. The
/// tokenization settings are stored so later encodes stay compatible.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    terms: Vec<String>,
    term_index: HashMap<String, usize>,
    doc_freq: Vec<u32>,
    n_docs: usize,
    lowercase: bool,
    ngram_range: (usize, usize),
    stopwords: BTreeSet<String>,
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn term(&self, index: usize) -> &str {
        &self.terms[index]
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.term_index.get(term).copied()
    }

    pub fn doc_freq(&self, index: usize) -> u32 {
        self.doc_freq[index]
    }

    /// Smoothed inverse document frequency for a term index.
    pub fn idf(&self, index: usize) -> f64 {
        let n = self.n_docs as f64;
        let df = self.doc_freq[index] as f64;
        ((1.0 + n) / (1.0 + df)).ln() + 1.0
    }

    /// Applies the stored tokenization settings to arbitrary text.
    pub fn extract_terms(&self, text: &str) -> Vec<String> {
        term_stream(text, self.lowercase, &self.stopwords, self.ngram_range)
    }

    /// SHA-256 over the sorted term list; identifies the vocabulary in
    /// persisted models.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        for term in &self.terms {
            hasher.update(term.as_bytes());
            hasher.update([0u8]);
        }
        format!("{:x}", hasher.finalize())
    }
}

fn resolve_min_df(min_df: MinDf, n_docs: usize) -> usize {
    match min_df {
        MinDf::Count(c) => c,
        // Nudge before the ceiling so fractions that are exactly integral in
        // decimal do not round up from float error.
        MinDf::Fraction(f) => (f * n_docs as f64 - 1e-9).ceil().max(0.0) as usize,
    }
}

fn resolve_max_df(max_df: f64, n_docs: usize) -> usize {
    (max_df * n_docs as f64 + 1e-9).floor() as usize
}

/// Builds the vocabulary over document-level texts. Terms outside the
/// resolved document-frequency band are dropped; the survivors are sorted
/// lexicographically.
pub fn build_vocabulary(
    docs: &[String],
    cfg: &VectorizerConfig,
) -> Result<Vocabulary, VectorizerError> {
    let (lo, hi) = cfg.ngram_range;
    if lo == 0 || lo > hi {
        return Err(VectorizerError::InvalidConfig(format!(
            "ngram_range ({lo}, {hi}) must satisfy 1 <= lo <= hi"
        )));
    }
    if !(cfg.max_df > 0.0 && cfg.max_df <= 1.0) {
        return Err(VectorizerError::InvalidConfig(format!(
            "max_df {} must be in (0, 1]",
            cfg.max_df
        )));
    }
    if let MinDf::Fraction(f) = cfg.min_df {
        if !(0.0..=1.0).contains(&f) {
            return Err(VectorizerError::InvalidConfig(format!(
                "min_df fraction {f} must be in [0, 1]"
            )));
        }
    }
    if docs.is_empty() {
        return Err(VectorizerError::EmptyInput);
    }

    let n_docs = docs.len();
    let min_count = resolve_min_df(cfg.min_df, n_docs);
    let max_count = resolve_max_df(cfg.max_df, n_docs);
    if min_count >= max_count {
        return Err(VectorizerError::ThresholdConflict {
            min_count,
            max_count,
        });
    }

    let mut df: HashMap<String, u32> = HashMap::new();
    for doc in docs {
        let distinct: HashSet<String> =
            term_stream(doc, cfg.lowercase, &cfg.stopwords, cfg.ngram_range)
                .into_iter()
                .collect();
        for term in distinct {
            *df.entry(term).or_insert(0) += 1;
        }
    }

    let mut kept: Vec<(String, u32)> = df
        .into_iter()
        .filter(|&(_, f)| (f as usize) >= min_count && (f as usize) <= max_count)
        .collect();
    if kept.is_empty() {
        return Err(VectorizerError::EmptyVocabulary {
            min_count,
            max_count,
        });
    }
    kept.sort_by(|a, b| a.0.cmp(&b.0));

    let terms: Vec<String> = kept.iter().map(|(t, _)| t.clone()).collect();
    let doc_freq: Vec<u32> = kept.iter().map(|&(_, f)| f).collect();
    let term_index = terms
        .iter()
        .enumerate()
        .map(|(i, t)| (t.clone(), i))
        .collect();
    Ok(Vocabulary {
        terms,
        term_index,
        doc_freq,
        n_docs,
        lowercase: cfg.lowercase,
        ngram_range: cfg.ngram_range,
        stopwords: cfg.stopwords.clone(),
    })
}

/// Encodes documents against a frozen vocabulary: raw counts weighted by the
/// vocabulary's idf, columns L2-normalized. Documents containing no
/// vocabulary term become all-zero columns.
pub fn tfidf(docs: &[String], vocab: &Vocabulary) -> TermDocMatrix {
    let columns: Vec<Vec<(usize, f64)>> = docs
        .iter()
        .map(|doc| {
            let mut counts: HashMap<usize, f64> = HashMap::new();
            for term in vocab.extract_terms(doc) {
                if let Some(idx) = vocab.index_of(&term) {
                    *counts.entry(idx).or_insert(0.0) += 1.0;
                }
            }
            let mut entries: Vec<(usize, f64)> = counts
                .into_iter()
                .map(|(idx, tf)| (idx, tf * vocab.idf(idx)))
                .collect();
            entries.sort_by_key(|&(idx, _)| idx);
            let norm = entries.iter().map(|&(_, v)| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                for entry in &mut entries {
                    entry.1 /= norm;
                }
            }
            entries
        })
        .collect();
    TermDocMatrix::from_columns(vocab.len(), columns)
        .expect("tfidf columns are sorted, in-bounds, and nonnegative")
}

/// Sparse nonnegative matrix in compressed-column form; rows are terms,
/// columns are documents.
#[derive(Debug, Clone, PartialEq)]
pub struct TermDocMatrix {
    n_rows: usize,
    n_cols: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl TermDocMatrix {
    /// Assembles a matrix from per-column `(row, value)` entry lists. Each
    /// column must be sorted by row with no duplicates; values must be
    /// finite and nonnegative. Exact zeros are dropped.
    pub fn from_columns(
        n_rows: usize,
        columns: Vec<Vec<(usize, f64)>>,
    ) -> Result<Self, String> {
        let n_cols = columns.len();
        let mut col_ptr = Vec::with_capacity(n_cols + 1);
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        col_ptr.push(0);
        for (j, column) in columns.into_iter().enumerate() {
            let mut last: Option<usize> = None;
            for (row, value) in column {
                if row >= n_rows {
                    return Err(format!("row {row} out of bounds in column {j}"));
                }
                if let Some(prev) = last {
                    if row <= prev {
                        return Err(format!("column {j} rows not strictly increasing"));
                    }
                }
                last = Some(row);
                if !value.is_finite() || value < 0.0 {
                    return Err(format!(
                        "entry ({row}, {j}) = {value} is not finite and nonnegative"
                    ));
                }
                if value != 0.0 {
                    row_idx.push(row);
                    values.push(value);
                }
            }
            col_ptr.push(row_idx.len());
        }
        Ok(TermDocMatrix {
            n_rows,
            n_cols,
            col_ptr,
            row_idx,
            values,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Row indices and values of column `j`.
    pub fn col(&self, j: usize) -> (&[usize], &[f64]) {
        let range = self.col_ptr[j]..self.col_ptr[j + 1];
        (&self.row_idx[range.clone()], &self.values[range])
    }

    pub fn fro_norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Mean over all (including implicit zero) entries.
    pub fn mean(&self) -> f64 {
        if self.n_rows == 0 || self.n_cols == 0 {
            0.0
        } else {
            self.sum() / (self.n_rows as f64 * self.n_cols as f64)
        }
    }

    /// `self (d x n) * b (n x k)`.
    pub fn mul_dense(&self, b: &Array2<f64>) -> Array2<f64> {
        assert_eq!(self.n_cols, b.nrows(), "inner dimensions must agree");
        let k = b.ncols();
        let mut out = Array2::<f64>::zeros((self.n_rows, k));
        for j in 0..self.n_cols {
            let (rows, vals) = self.col(j);
            let b_row = b.row(j);
            for (&i, &v) in rows.iter().zip(vals) {
                let mut out_row = out.row_mut(i);
                for c in 0..k {
                    out_row[c] += v * b_row[c];
                }
            }
        }
        out
    }

    /// `self^T (n x d) * b (d x k)`.
    pub fn t_mul_dense(&self, b: &Array2<f64>) -> Array2<f64> {
        assert_eq!(self.n_rows, b.nrows(), "inner dimensions must agree");
        let k = b.ncols();
        let mut out = Array2::<f64>::zeros((self.n_cols, k));
        for j in 0..self.n_cols {
            let (rows, vals) = self.col(j);
            let mut out_row = out.row_mut(j);
            for (&i, &v) in rows.iter().zip(vals) {
                let b_row = b.row(i);
                for c in 0..k {
                    out_row[c] += v * b_row[c];
                }
            }
        }
        out
    }

    /// New matrix containing the given columns, in the given order.
    pub fn select_columns(&self, indices: &[usize]) -> TermDocMatrix {
        let columns = indices
            .iter()
            .map(|&j| {
                let (rows, vals) = self.col(j);
                rows.iter().copied().zip(vals.iter().copied()).collect()
            })
            .collect();
        TermDocMatrix::from_columns(self.n_rows, columns)
            .expect("selected columns come from a valid matrix")
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::<f64>::zeros((self.n_rows, self.n_cols));
        for j in 0..self.n_cols {
            let (rows, vals) = self.col(j);
            for (&i, &v) in rows.iter().zip(vals) {
                out[(i, j)] = v;
            }
        }
        out
    }

    /// Writes `row col value` triplets, one entry per line, in column-major
    /// order, preceded by a `dims rows cols nnz` header line.
    pub fn write_triplets<W: io::Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "dims {} {} {}", self.n_rows, self.n_cols, self.nnz())?;
        for j in 0..self.n_cols {
            let (rows, vals) = self.col(j);
            for (&i, &v) in rows.iter().zip(vals) {
                writeln!(w, "{i} {j} {v}")?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn docs(items: &[&str]) -> Vec<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    fn no_filter_cfg() -> VectorizerConfig {
        VectorizerConfig {
            max_df: 1.0,
            min_df: MinDf::Count(1),
            ..VectorizerConfig::default()
        }
    }

    #[test]
    fn tokenize_lowercases_and_splits_apostrophes() {
        assert_eq!(tokenize("Don't STOP", true), vec!["don", "t", "stop"]);
        assert_eq!(tokenize("one-two_three", true), vec!["one", "two_three"]);
        assert_eq!(tokenize("it\u{2019}s", true), vec!["it", "s"]);
        assert_eq!(tokenize("１９４４ год", true), vec!["１９４４", "год"]);
    }

    #[test]
    fn base_stopword_list_matches_pinned_checksum() {
        let mut hasher = Sha256::new();
        hasher.update(BASE_STOPWORDS.as_bytes());
        assert_eq!(
            format!("{:x}", hasher.finalize()),
            "4e22be0ad71ae1c41dd7a8f944e851ead671d114edf4faad1ee8c698d2ba5084"
        );
        let words = load_stopwords(StopwordProfile::Custom, &BTreeSet::new());
        assert_eq!(words.len(), 318);
        assert!(words.contains("the"));
        assert!(words.contains("whence"));
    }

    #[test]
    fn stopword_profiles_add_their_terms() {
        let shoah = load_stopwords(StopwordProfile::Shoah, &BTreeSet::new());
        assert!(shoah.contains("um") && shoah.contains("uh"));
        assert_eq!(shoah.len(), 320);
        let mediasum = load_stopwords(StopwordProfile::Mediasum, &BTreeSet::new());
        for w in ["s", "t", "don", "ve", "did", "got"] {
            assert!(mediasum.contains(w), "missing {w}");
        }
        let extra: BTreeSet<String> = ["crosstalk".to_string()].into();
        assert!(load_stopwords(StopwordProfile::Custom, &extra).contains("crosstalk"));
    }

    #[test]
    fn stopwords_removed_before_ngrams() {
        // With "the" removed first, the bigram bridges the gap.
        let stopwords: BTreeSet<String> = ["the".to_string()].into();
        let terms = term_stream("cat the mat", true, &stopwords, (2, 2));
        assert_eq!(terms, vec!["cat mat"]);
    }

    #[test]
    fn vocabulary_is_sorted_and_df_filtered() {
        let corpus = docs(&[
            "apple banana", "apple cherry", "apple banana", "apple date",
            "apple banana", "apple cherry", "apple fig", "apple banana",
            "apple cherry", "apple grape",
        ]);
        let cfg = VectorizerConfig {
            max_df: 0.8,
            min_df: MinDf::Count(2),
            ..VectorizerConfig::default()
        };
        let vocab = build_vocabulary(&corpus, &cfg).unwrap();
        // "apple" is in 10 of 10 docs: 10 > floor(0.8 * 10) = 8, dropped.
        // Singletons (date, fig, grape) fall below min_df.
        assert_eq!(vocab.terms(), &["banana".to_string(), "cherry".to_string()]);
        assert_eq!(vocab.doc_freq(0), 4);
    }

    #[test]
    fn max_df_floor_excludes_nine_of_ten() {
        let mut corpus: Vec<String> = (0..9).map(|i| format!("common w{i}")).collect();
        corpus.push("alone w0".to_string());
        let cfg = VectorizerConfig {
            max_df: 0.8,
            min_df: MinDf::Count(1),
            ..VectorizerConfig::default()
        };
        let vocab = build_vocabulary(&corpus, &cfg).unwrap();
        assert!(vocab.index_of("common").is_none(), "df 9 > 8 must be dropped");
        assert!(vocab.index_of("alone").is_some());
    }

    #[test]
    fn min_df_fraction_resolves_with_ceiling() {
        assert_eq!(resolve_min_df(MinDf::Fraction(0.05), 984), 50);
        assert_eq!(resolve_min_df(MinDf::Fraction(0.1), 10), 1);
        assert_eq!(resolve_max_df(0.8, 10), 8);
        assert_eq!(resolve_max_df(0.7, 10), 7);
        assert_eq!(resolve_max_df(1.0, 10), 10);
    }

    #[test]
    fn conflicting_thresholds_error() {
        let corpus = docs(&["a b", "a c"]);
        let cfg = VectorizerConfig {
            max_df: 0.5,
            min_df: MinDf::Count(2),
            ..VectorizerConfig::default()
        };
        match build_vocabulary(&corpus, &cfg) {
            Err(VectorizerError::ThresholdConflict { min_count, max_count }) => {
                assert_eq!((min_count, max_count), (2, 1));
            }
            other => panic!("expected threshold conflict, got {other:?}"),
        }
    }

    #[test]
    fn empty_vocabulary_errors() {
        let corpus = docs(&["the of", "the of"]);
        let cfg = VectorizerConfig {
            stopwords: load_stopwords(StopwordProfile::Custom, &BTreeSet::new()),
            ..no_filter_cfg()
        };
        assert!(matches!(
            build_vocabulary(&corpus, &cfg),
            Err(VectorizerError::EmptyVocabulary { .. })
        ));
    }

    #[test]
    fn vocabulary_is_permutation_stable() {
        let corpus = docs(&["b a c", "c d", "a d b", "e c a"]);
        let vocab = build_vocabulary(&corpus, &no_filter_cfg()).unwrap();
        let mut shuffled = corpus.clone();
        shuffled.rotate_left(2);
        shuffled.swap(0, 1);
        let vocab2 = build_vocabulary(&shuffled, &no_filter_cfg()).unwrap();
        assert_eq!(vocab.terms(), vocab2.terms());
        assert_eq!(vocab.doc_freq, vocab2.doc_freq);
    }

    #[test]
    fn tfidf_matches_hand_computed_two_doc_example() {
        let corpus = docs(&["cat sat", "cat cat"]);
        let vocab = build_vocabulary(&corpus, &no_filter_cfg()).unwrap();
        assert_eq!(vocab.terms(), &["cat".to_string(), "sat".to_string()]);
        let x = tfidf(&corpus, &vocab).to_dense();

        let idf_cat = (3.0f64 / 3.0).ln() + 1.0;
        let idf_sat = (3.0f64 / 2.0).ln() + 1.0;
        let norm0 = (idf_cat * idf_cat + idf_sat * idf_sat).sqrt();
        assert!((x[(0, 0)] - idf_cat / norm0).abs() < 1e-12);
        assert!((x[(1, 0)] - idf_sat / norm0).abs() < 1e-12);
        // Doc 2 is all "cat": weight 1 after normalization, above doc 1's.
        assert!((x[(0, 1)] - 1.0).abs() < 1e-12);
        assert_eq!(x[(1, 1)], 0.0);
        assert!(x[(0, 1)] > x[(0, 0)]);
    }

    #[test]
    fn tfidf_columns_are_unit_norm_or_zero() {
        let corpus = docs(&["cat sat mat", "dog", "", "cat dog cat"]);
        let vocab = build_vocabulary(&corpus[..2].to_vec(), &no_filter_cfg()).unwrap();
        let x = tfidf(&corpus, &vocab);
        for j in 0..x.n_cols() {
            let (_, vals) = x.col(j);
            let norm_sq: f64 = vals.iter().map(|v| v * v).sum();
            if vals.is_empty() {
                assert_eq!(j, 2, "only the empty doc may be a zero column");
            } else {
                assert!((norm_sq - 1.0).abs() < 1e-9, "column {j} norm^2 {norm_sq}");
            }
        }
    }

    /// Independent dense recount used to cross-check the sparse encoder.
    fn brute_force_tfidf(corpus: &[String], vocab: &Vocabulary) -> Array2<f64> {
        let mut x = Array2::<f64>::zeros((vocab.len(), corpus.len()));
        for (j, doc) in corpus.iter().enumerate() {
            for term in vocab.extract_terms(doc) {
                if let Some(i) = vocab.index_of(&term) {
                    x[(i, j)] += 1.0;
                }
            }
            for i in 0..vocab.len() {
                let n = vocab.n_docs() as f64;
                let df = vocab.doc_freq(i) as f64;
                x[(i, j)] *= ((1.0 + n) / (1.0 + df)).ln() + 1.0;
            }
            let norm = x.column(j).iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                x.column_mut(j).mapv_inplace(|v| v / norm);
            }
        }
        x
    }

    #[test]
    fn tfidf_matches_brute_force_on_varied_corpus() {
        let corpus = docs(&[
            "the cat sat on the mat",
            "a dog don't sit",
            "cats and dogs and cats",
            "mat dog mat cat",
            "nothing shared here",
        ]);
        let cfg = VectorizerConfig {
            ngram_range: (1, 2),
            stopwords: ["the".to_string(), "a".to_string(), "and".to_string()].into(),
            ..no_filter_cfg()
        };
        let vocab = build_vocabulary(&corpus, &cfg).unwrap();
        let sparse = tfidf(&corpus, &vocab).to_dense();
        let dense = brute_force_tfidf(&corpus, &vocab);
        for ((i, j), v) in sparse.indexed_iter() {
            assert!((v - dense[(i, j)]).abs() < 1e-12, "mismatch at ({i}, {j})");
        }
    }

    #[test]
    fn frozen_vocabulary_keeps_training_idf_for_new_docs() {
        let train = docs(&["cat sat", "cat cat"]);
        let vocab = build_vocabulary(&train, &no_filter_cfg()).unwrap();
        let x_new = tfidf(&docs(&["sat sat unknownword"]), &vocab).to_dense();
        // Only "sat" is known; its column normalizes to exactly 1.
        assert!((x_new[(1, 0)] - 1.0).abs() < 1e-12);
        assert_eq!(x_new[(0, 0)], 0.0);
    }

    #[test]
    fn matrix_rejects_bad_columns() {
        assert!(TermDocMatrix::from_columns(3, vec![vec![(0, 1.0), (0, 2.0)]]).is_err());
        assert!(TermDocMatrix::from_columns(3, vec![vec![(3, 1.0)]]).is_err());
        assert!(TermDocMatrix::from_columns(3, vec![vec![(0, -1.0)]]).is_err());
        assert!(TermDocMatrix::from_columns(3, vec![vec![(0, f64::NAN)]]).is_err());
    }

    #[test]
    fn matrix_drops_explicit_zeros_and_multiplies() {
        let x = TermDocMatrix::from_columns(
            3,
            vec![vec![(0, 1.0), (2, 2.0)], vec![(1, 0.0)], vec![(1, 3.0)]],
        )
        .unwrap();
        assert_eq!(x.nnz(), 3);
        let b = Array2::from_shape_vec((3, 2), vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let y = x.mul_dense(&b);
        // Dense equivalent: [[1,0,0],[0,0,3],[2,0,0]] (rows) x b.
        assert_eq!(y[(0, 0)], 1.0);
        assert_eq!(y[(0, 1)], 2.0);
        assert_eq!(y[(1, 0)], 15.0);
        assert_eq!(y[(2, 0)], 2.0);
        let z = x.t_mul_dense(&Array2::eye(3));
        assert_eq!(z[(0, 0)], 1.0);
        assert_eq!(z[(0, 2)], 2.0);
        assert_eq!(z[(2, 1)], 3.0);
    }

    #[test]
    fn triplet_export_is_stable() {
        let x = TermDocMatrix::from_columns(2, vec![vec![(0, 1.5)], vec![(1, 2.0)]]).unwrap();
        let mut buf = Vec::new();
        x.write_triplets(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "dims 2 2 2\n0 0 1.5\n1 1 2\n"
        );
    }
}
