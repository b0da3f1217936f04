//! Threshold-based multi-label topic assignment.
//!
//! For each topic, the threshold is the mean of that topic's coding row
//! plus `k` population standard deviations. A sentence belongs to every
//! topic whose threshold its coding meets (inclusive), so it can carry
//! several labels or none.

use std::io;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::segmenter::SentenceDocument;

#[derive(Debug, Error)]
pub enum AssignerError {
    #[error("coding matrix has no columns to assign")]
    EmptyInput,
    #[error("coding matrix entry ({row}, {col}) is not finite")]
    NonFinite { row: usize, col: usize },
    #[error("k must be finite, got {0}")]
    InvalidK(f64),
    #[error("got {got} thresholds for {expected} topic rows")]
    ThresholdMismatch { got: usize, expected: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicThreshold {
    pub topic: usize,
    pub mean: f64,
    /// Population standard deviation (divide by n, not n - 1).
    pub std_dev: f64,
    pub k: f64,
    pub threshold: f64,
}

/// Topic memberships of one coding column.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicAssignment {
    pub column: usize,
    /// Ascending topic indices; empty means unassigned.
    pub topics: Vec<usize>,
}

fn check_finite(h: &Array2<f64>) -> Result<(), AssignerError> {
    for ((row, col), &v) in h.indexed_iter() {
        if !v.is_finite() {
            return Err(AssignerError::NonFinite { row, col });
        }
    }
    Ok(())
}

/// Per-topic `mean + k * std` thresholds over the coding rows.
pub fn compute_thresholds(
    h: &Array2<f64>,
    k: f64,
) -> Result<Vec<TopicThreshold>, AssignerError> {
    if h.ncols() == 0 || h.nrows() == 0 {
        return Err(AssignerError::EmptyInput);
    }
    if !k.is_finite() {
        return Err(AssignerError::InvalidK(k));
    }
    check_finite(h)?;
    let n = h.ncols() as f64;
    Ok((0..h.nrows())
        .map(|topic| {
            let row = h.row(topic);
            let mean = row.sum() / n;
            let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let std_dev = var.sqrt();
            TopicThreshold {
                topic,
                mean,
                std_dev,
                k,
                threshold: mean + k * std_dev,
            }
        })
        .collect())
}

/// Applies the thresholds to every column. Output is index-aligned with the
/// columns of `h`.
pub fn assign(
    h: &Array2<f64>,
    thresholds: &[TopicThreshold],
) -> Result<Vec<TopicAssignment>, AssignerError> {
    if thresholds.len() != h.nrows() {
        return Err(AssignerError::ThresholdMismatch {
            got: thresholds.len(),
            expected: h.nrows(),
        });
    }
    check_finite(h)?;
    Ok((0..h.ncols())
        .map(|column| {
            let topics = thresholds
                .iter()
                .filter(|t| h[(t.topic, column)] >= t.threshold)
                .map(|t| t.topic)
                .collect();
            TopicAssignment { column, topics }
        })
        .collect())
}

/// Writes one row per sentence: sent_id, doc_id, timestamp, and the
/// semicolon-joined topic indices (empty when unassigned).
pub fn write_assignments_csv<W: io::Write>(
    writer: W,
    assignments: &[TopicAssignment],
    sentences: &[SentenceDocument],
) -> io::Result<()> {
    assert_eq!(
        assignments.len(),
        sentences.len(),
        "assignments must align with sentences"
    );
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(["sent_id", "doc_id", "time_stamp", "topics"])?;
    for (assignment, sentence) in assignments.iter().zip(sentences) {
        let topics = assignment
            .topics
            .iter()
            .map(|t| t.to_string())
            .collect::<Vec<_>>()
            .join(";");
        out.write_record([
            sentence.sent_id.as_str(),
            sentence.doc_id.as_str(),
            sentence.timestamp.as_str(),
            topics.as_str(),
        ])?;
    }
    out.flush()
}
