//! Keyword scoring for clusters of sentences, and a dendrogram over the
//! resulting keyword profiles.
//!
//! Scoring is class-based TF-IDF: all sentences of a cluster are treated
//! as one document, and a term's score in cluster `c` is
//!
//! ```text
//! score(x, c) = count(x, c) * ln(1 + A / count(x))
//! ```
//!
//! where `count(x)` sums over all clusters and `A` is the average number
//! of in-vocabulary tokens per cluster. Noise (label -1) is excluded
//! throughout, so junk sentences cannot dilute the keyword profiles.
//!
//! The dendrogram is average-linkage (UPGMA) agglomeration over cosine
//! distances between the clusters' score vectors. Merge records follow
//! the usual convention: leaves are `0..m-1` and merge `s` creates node
//! `m + s`.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::vectorizer::Vocabulary;

#[derive(Debug, thiserror::Error)]
pub enum ReprError {
    #[error("{texts} texts but {labels} labels")]
    LengthMismatch { texts: usize, labels: usize },
    #[error("no non-noise clusters to score")]
    NoClasses,
}

/// Per-cluster term scores. Rows follow `classes` (ascending cluster
/// labels), columns follow the vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassTermScores {
    pub classes: Vec<i64>,
    pub scores: Array2<f64>,
}

/// Scores every vocabulary term against every non-noise cluster.
pub fn ctfidf(
    texts: &[String],
    labels: &[i64],
    vocab: &Vocabulary,
) -> Result<ClassTermScores, ReprError> {
    if texts.len() != labels.len() {
        return Err(ReprError::LengthMismatch { texts: texts.len(), labels: labels.len() });
    }
    let mut classes: Vec<i64> = labels.iter().copied().filter(|&l| l >= 0).collect();
    classes.sort_unstable();
    classes.dedup();
    if classes.is_empty() {
        return Err(ReprError::NoClasses);
    }
    let class_row: std::collections::HashMap<i64, usize> =
        classes.iter().enumerate().map(|(row, &label)| (label, row)).collect();

    let mut counts = Array2::<f64>::zeros((classes.len(), vocab.len()));
    for (text, &label) in texts.iter().zip(labels) {
        if label < 0 {
            continue;
        }
        let row = class_row[&label];
        for term in vocab.extract_terms(text) {
            if let Some(col) = vocab.index_of(&term) {
                counts[[row, col]] += 1.0;
            }
        }
    }

    let term_totals: Vec<f64> =
        (0..vocab.len()).map(|col| counts.column(col).sum()).collect();
    let grand_total: f64 = term_totals.iter().sum();
    let avg_per_class = grand_total / classes.len() as f64;

    let mut scores = counts;
    for (col, &total) in term_totals.iter().enumerate() {
        if total == 0.0 {
            continue;
        }
        let weight = (1.0 + avg_per_class / total).ln();
        scores.column_mut(col).mapv_inplace(|c| c * weight);
    }
    Ok(ClassTermScores { classes, scores })
}

impl ClassTermScores {
    /// Top `n` positive-scoring terms per cluster, highest score first,
    /// alphabetical on ties.
    pub fn top_words(&self, vocab: &Vocabulary, n: usize) -> Vec<Vec<(String, f64)>> {
        self.scores
            .rows()
            .into_iter()
            .map(|row| {
                let mut ranked: Vec<(usize, f64)> = row
                    .iter()
                    .enumerate()
                    .filter(|&(_, &s)| s > 0.0)
                    .map(|(col, &s)| (col, s))
                    .collect();
                ranked.sort_by(|a, b| {
                    b.1.total_cmp(&a.1).then_with(|| vocab.term(a.0).cmp(vocab.term(b.0)))
                });
                ranked
                    .into_iter()
                    .take(n)
                    .map(|(col, s)| (vocab.term(col).to_string(), s))
                    .collect()
            })
            .collect()
    }
}

/// One agglomeration step: clusters `left` and `right` merge at `distance`
/// into a node covering `size` leaves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkageMerge {
    pub left: usize,
    pub right: usize,
    pub distance: f64,
    pub size: usize,
}

fn cosine_distance(a: ndarray::ArrayView1<f64>, b: ndarray::ArrayView1<f64>) -> f64 {
    let dot = a.dot(&b);
    let na = a.dot(&a).sqrt();
    let nb = b.dot(&b).sqrt();
    if na == 0.0 || nb == 0.0 {
        return 1.0;
    }
    (1.0 - dot / (na * nb)).max(0.0)
}

/// Average-linkage dendrogram over the rows of `scores` using cosine
/// distance. A single row yields no merges.
pub fn topic_linkage(scores: &Array2<f64>) -> Vec<LinkageMerge> {
    let m = scores.nrows();
    if m < 2 {
        return Vec::new();
    }

    struct Active {
        id: usize,
        size: usize,
        /// Distance to every other active entry, indexed by slot.
        dist: Vec<f64>,
    }

    let mut active: Vec<Active> = (0..m)
        .map(|i| Active { id: i, size: 1, dist: vec![0.0; m] })
        .collect();
    for i in 0..m {
        for j in (i + 1)..m {
            let d = cosine_distance(scores.row(i), scores.row(j));
            active[i].dist[j] = d;
            active[j].dist[i] = d;
        }
    }

    let mut merges = Vec::with_capacity(m - 1);
    for step in 0..(m - 1) {
        let mut best: Option<(f64, usize, usize)> = None;
        for a in 0..active.len() {
            for b in (a + 1)..active.len() {
                let d = active[a].dist[b];
                let (lo, hi) = if active[a].id < active[b].id {
                    (active[a].id, active[b].id)
                } else {
                    (active[b].id, active[a].id)
                };
                let better = match &best {
                    None => true,
                    Some((bd, blo, bhi)) => {
                        d < *bd || (d == *bd && (lo, hi) < (*blo, *bhi))
                    }
                };
                if better {
                    best = Some((d, lo, hi));
                }
            }
        }
        let (distance, left_id, right_id) = best.expect("at least two active clusters");
        let a = active.iter().position(|x| x.id == left_id).unwrap();
        let b = active.iter().position(|x| x.id == right_id).unwrap();
        let (a, b) = (a.min(b), a.max(b));

        let size = active[a].size + active[b].size;
        merges.push(LinkageMerge { left: left_id, right: right_id, distance, size });

        let wa = active[a].size as f64;
        let wb = active[b].size as f64;
        let mut merged_dist = Vec::with_capacity(active.len() - 1);
        for k in 0..active.len() {
            if k == a || k == b {
                continue;
            }
            merged_dist.push((wa * active[a].dist[k] + wb * active[b].dist[k]) / (wa + wb));
        }

        // Drop the higher slot first so the lower index stays valid.
        active.remove(b);
        active.remove(a);
        for entry in active.iter_mut() {
            entry.dist.remove(b);
            entry.dist.remove(a);
        }
        let mut dist = merged_dist;
        for (k, entry) in active.iter_mut().enumerate() {
            entry.dist.push(dist[k]);
        }
        dist.push(0.0);
        active.push(Active { id: m + step, size, dist });
    }
    merges
}
