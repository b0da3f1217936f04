//! Multi-scale hybrid topic modeling.
//!
//! The pipeline factorizes a TF-IDF term-document matrix with NMF to find
//! broad topics, re-encodes sentence chunks against the frozen dictionary,
//! assigns sentences to topics with a mean-plus-k-std threshold rule, and
//! then clusters each topic's sentences (HDBSCAN over reduced embeddings)
//! into subtopics described by c-TF-IDF keywords and scored with NPMI
//! coherence.

pub mod assigner;
pub mod cluster;
pub mod coherence;
pub mod corpus;
pub mod embedder;
pub mod instrument;
pub mod linalg;
pub mod nmf;
pub mod pipeline;
pub mod representation;
pub mod segmenter;
pub mod vectorizer;
