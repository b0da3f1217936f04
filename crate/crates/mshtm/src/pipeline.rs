//! End-to-end run orchestration: documents in, report and artifacts out.
//!
//! A run learns broad topics from whole documents, re-encodes individual
//! sentences against the learned dictionary, assigns each sentence to every
//! topic whose threshold it meets, and then looks for finer structure
//! inside each topic by clustering sentence embeddings. Each cluster gets
//! class-based TF-IDF keywords and an NPMI coherence score against the
//! full sentence corpus.
//!
//! Output files are split by stability: `report.json` holds only
//! deterministic results (two runs with the same inputs and seed produce
//! byte-identical files), while wall-clock timings and memory readings go
//! to a `metrics.json` sidecar that is expected to differ between runs.
//! `assignments.csv` lists per-sentence topic memberships and
//! `report.html` is a self-contained visual summary.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assigner::{assign, compute_thresholds, AssignerError, TopicAssignment, TopicThreshold};
use crate::cluster::{hdbscan, reduce, ClusterError, HdbscanConfig, Metric, ReduceConfig};
use crate::coherence::{cooccurrence_stats, topic_npmi, CoherenceError, CooccurrenceStats};
use crate::corpus::{CleanDocument, CorpusError, LoadStats};
use crate::embedder::{EmbedError, Embedder, EmbedderConfig};
use crate::instrument::{self, BuildCounters, StageMetrics, StageRecorder};
use crate::nmf::{
    factorize, hierarchical_split, top_keywords, transform, NmfConfig, NmfError, SplitRule,
};
use crate::representation::{ctfidf, topic_linkage, LinkageMerge, ReprError};
use crate::segmenter::{split_sentences, SentenceDocument};
use crate::vectorizer::{build_vocabulary, tfidf, VectorizerConfig, VectorizerError, Vocabulary};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("corpus stage: {0}")]
    Corpus(#[from] CorpusError),
    #[error("vectorizer stage: {0}")]
    Vectorizer(#[from] VectorizerError),
    #[error("topic-model stage: {0}")]
    Nmf(#[from] NmfError),
    #[error("assignment stage: {0}")]
    Assigner(#[from] AssignerError),
    #[error("embedding stage: {0}")]
    Embed(#[from] EmbedError),
    #[error("clustering stage: {0}")]
    Cluster(#[from] ClusterError),
    #[error("keyword stage: {0}")]
    Representation(#[from] ReprError),
    #[error("coherence stage: {0}")]
    Coherence(#[from] CoherenceError),
    #[error("output stage: {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("report stage: {0}")]
    ReportFormat(#[from] serde_json::Error),
    #[error("report schema version {got} is not supported (expected {expected})")]
    SchemaVersion { got: u32, expected: u32 },
    #[error("no documents to process")]
    EmptyCorpus,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub vectorizer: VectorizerConfig,
    /// Broad topic model; `rank` is the number of broad topics.
    pub nmf: NmfConfig,
    /// Multiplier on the per-topic standard deviation when thresholding.
    pub threshold_k: f64,
    pub top_words: usize,
    /// Maximum sentences per chunk when splitting turns.
    pub max_chunk: usize,
    pub embedder: EmbedderConfig,
    pub reduce: ReduceConfig,
    pub min_cluster_size: usize,
    pub min_samples: Option<usize>,
    pub metric: Metric,
    /// Replace each broad topic with `hnmf_sub_rank` finer dictionary
    /// atoms learned from the documents it claims.
    pub hnmf_first_layer: bool,
    pub hnmf_sub_rank: usize,
    /// Process topics on the thread pool; results are merged in topic
    /// order, so output is identical either way.
    pub parallel_topics: bool,
    /// Master seed, applied to the topic model and the projection.
    pub seed: u64,
    pub npmi_eps: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            vectorizer: VectorizerConfig::default(),
            nmf: NmfConfig::default(),
            threshold_k: 1.0,
            top_words: 15,
            max_chunk: 12,
            embedder: EmbedderConfig::default(),
            reduce: ReduceConfig::default(),
            min_cluster_size: 15,
            min_samples: None,
            metric: Metric::Euclidean,
            hnmf_first_layer: false,
            hnmf_sub_rank: 2,
            parallel_topics: false,
            seed: 0,
            npmi_eps: crate::coherence::DEFAULT_EPS,
        }
    }
}

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub documents: usize,
    pub turns: usize,
    pub sentences: usize,
    pub vocabulary_size: usize,
    pub records_skipped: usize,
    pub utf8_replacements: usize,
}

/// The scalar settings that shaped a run, echoed for reproducibility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettingsEcho {
    pub topics: usize,
    pub threshold_k: f64,
    pub top_words: usize,
    pub max_chunk: usize,
    pub min_cluster_size: usize,
    pub min_samples: usize,
    pub metric: Metric,
    pub reduce: ReduceConfig,
    pub embed_provider: String,
    pub nmf_max_iter: usize,
    pub nmf_tol: f64,
    pub hnmf_first_layer: bool,
    pub hnmf_sub_rank: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopicStatus {
    /// Enough sentences; subtopic clustering ran.
    Clustered,
    /// Fewer sentences than `min_cluster_size`; clustering skipped.
    TooSmall,
    /// Clustering ran but everything came back as noise.
    NoClusters,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeywordEntry {
    pub word: String,
    pub score: f64,
}

/// Where a sentence came from, kept so every subtopic member can be traced
/// back to its source turn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceRef {
    pub sent_id: String,
    pub doc_id: String,
    pub timestamp: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubtopicReport {
    pub subtopic_id: i64,
    pub size: usize,
    pub keywords: Vec<KeywordEntry>,
    /// Mean pairwise NPMI of the keywords; absent when fewer than two of
    /// them are scorable.
    pub npmi: Option<f64>,
    pub npmi_skipped_words: Vec<String>,
    pub members: Vec<SentenceRef>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicReport {
    pub topic_id: usize,
    /// Broad topic this one was split from, when a first layer ran.
    pub parent_topic: Option<usize>,
    pub keywords: Vec<String>,
    pub document_count: usize,
    pub sentence_count: usize,
    pub status: TopicStatus,
    pub noise_sentences: usize,
    pub subtopics: Vec<SubtopicReport>,
    /// Average-linkage dendrogram over the subtopic keyword profiles.
    pub linkage: Vec<LinkageMerge>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub corpus: CorpusSummary,
    pub settings: SettingsEcho,
    pub nmf_iterations: usize,
    pub final_objective: f64,
    pub thresholds: Vec<TopicThreshold>,
    pub topics: Vec<TopicReport>,
    pub multi_label_sentences: usize,
    pub unassigned_sentences: usize,
    pub assignments_file: String,
    pub counters: BuildCounters,
}

/// Timings and memory readings; deliberately kept out of the report so
/// reports stay reproducible byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub total_wall_ms: f64,
    pub peak_alloc_bytes: Option<u64>,
    pub vm_hwm_kb: Option<u64>,
    pub stages: Vec<StageMetrics>,
}

pub struct RunOutput {
    pub report: RunReport,
    pub metrics: RunMetrics,
    pub sentences: Vec<SentenceDocument>,
    pub assignments: Vec<TopicAssignment>,
    pub model: crate::nmf::NmfModel,
    pub vocabulary: Vocabulary,
}

/// One text per document: its turns joined by single spaces. This is the
/// document view the vocabulary and the broad topic model are built from.
pub fn document_texts(documents: &[CleanDocument]) -> Vec<String> {
    documents
        .iter()
        .map(|d| d.turns.iter().map(|t| t.text.as_str()).collect::<Vec<_>>().join(" "))
        .collect()
}

/// The final dictionary the sentences are encoded against: either the
/// broad topics as learned, or their finer split.
struct Dictionary {
    w: Array2<f64>,
    doc_h: Array2<f64>,
    parents: Vec<Option<usize>>,
}

fn split_first_layer(
    x_docs: &crate::vectorizer::TermDocMatrix,
    model: &crate::nmf::NmfModel,
    config: &PipelineConfig,
    nmf_cfg: &NmfConfig,
) -> Result<Dictionary, PipelineError> {
    let n_docs = x_docs.n_cols();
    let subs = hierarchical_split(x_docs, &model.h, &SplitRule::MeanPlusKStd(config.threshold_k))?;

    let mut w_cols: Vec<Vec<f64>> = Vec::new();
    let mut h_rows: Vec<Vec<f64>> = Vec::new();
    let mut parents = Vec::new();
    for (parent, sub) in subs.iter().enumerate() {
        let rank = config.hnmf_sub_rank.min(sub.matrix.n_cols()).min(sub.matrix.n_rows());
        let sub_model = if rank == 0 {
            None
        } else {
            let sub_cfg = NmfConfig { rank, ..*nmf_cfg };
            match factorize(&sub.matrix, &sub_cfg) {
                Ok(m) => Some(m),
                Err(NmfError::DegenerateInput) => None,
                Err(e) => return Err(e.into()),
            }
        };
        match sub_model {
            Some(m) => {
                for r in 0..m.w.ncols() {
                    w_cols.push(m.w.column(r).to_vec());
                    let mut row = vec![0.0; n_docs];
                    for (j, &orig) in sub.column_map.iter().enumerate() {
                        row[orig] = m.h[[r, j]];
                    }
                    h_rows.push(row);
                    parents.push(Some(parent));
                }
            }
            None => {
                // Too few or degenerate member documents: the broad topic
                // itself carries on as a single atom.
                w_cols.push(model.w.column(parent).to_vec());
                h_rows.push(model.h.row(parent).to_vec());
                parents.push(Some(parent));
            }
        }
    }

    let n_terms = model.w.nrows();
    let total = w_cols.len();
    let mut w = Array2::<f64>::zeros((n_terms, total));
    for (c, col) in w_cols.iter().enumerate() {
        for (r, &v) in col.iter().enumerate() {
            w[[r, c]] = v;
        }
    }
    let mut doc_h = Array2::<f64>::zeros((total, n_docs));
    for (r, row) in h_rows.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            doc_h[[r, c]] = v;
        }
    }
    Ok(Dictionary { w, doc_h, parents })
}

struct TopicJob<'a> {
    topic_id: usize,
    parent: Option<usize>,
    keywords: Vec<String>,
    document_count: usize,
    member_sentences: Vec<usize>,
    sentences: &'a [SentenceDocument],
    vocab: &'a Vocabulary,
    stats: &'a CooccurrenceStats,
    embedder: &'a Embedder,
    cluster_cfg: &'a HdbscanConfig,
    reduce_cfg: &'a ReduceConfig,
    config: &'a PipelineConfig,
}

fn run_topic(job: TopicJob<'_>) -> Result<TopicReport, PipelineError> {
    let sentence_count = job.member_sentences.len();
    let base = TopicReport {
        topic_id: job.topic_id,
        parent_topic: job.parent,
        keywords: job.keywords,
        document_count: job.document_count,
        sentence_count,
        status: TopicStatus::TooSmall,
        noise_sentences: 0,
        subtopics: Vec::new(),
        linkage: Vec::new(),
    };
    if sentence_count < job.config.min_cluster_size {
        return Ok(base);
    }

    let texts: Vec<String> = job
        .member_sentences
        .iter()
        .map(|&i| job.sentences[i].text.clone())
        .collect();
    let embedded = job.embedder.embed(&texts)?;
    let reduced = reduce(&embedded.rows, job.reduce_cfg);
    let clusters = hdbscan(&reduced, job.cluster_cfg)?;

    if clusters.n_clusters == 0 {
        return Ok(TopicReport {
            status: TopicStatus::NoClusters,
            noise_sentences: clusters.n_noise(),
            ..base
        });
    }

    let scores = ctfidf(&texts, &clusters.labels, job.vocab)?;
    let ranked = scores.top_words(job.vocab, job.config.top_words);
    let linkage = topic_linkage(&scores.scores);

    let mut subtopics = Vec::with_capacity(scores.classes.len());
    for (row, &class) in scores.classes.iter().enumerate() {
        let members: Vec<SentenceRef> = clusters
            .labels
            .iter()
            .zip(&job.member_sentences)
            .filter(|(&label, _)| label == class)
            .map(|(_, &i)| {
                let s = &job.sentences[i];
                SentenceRef {
                    sent_id: s.sent_id.clone(),
                    doc_id: s.doc_id.clone(),
                    timestamp: s.timestamp.clone(),
                }
            })
            .collect();
        let keywords: Vec<KeywordEntry> = ranked[row]
            .iter()
            .map(|(word, score)| KeywordEntry { word: word.clone(), score: *score })
            .collect();
        let words: Vec<String> = keywords.iter().map(|k| k.word.clone()).collect();
        let (npmi, skipped) = match topic_npmi(job.stats, &words, job.config.npmi_eps) {
            Ok(coherence) => (Some(coherence.score), coherence.words_skipped),
            Err(CoherenceError::TooFewWords { .. }) => (None, Vec::new()),
            Err(e) => return Err(e.into()),
        };
        subtopics.push(SubtopicReport {
            subtopic_id: class,
            size: members.len(),
            keywords,
            npmi,
            npmi_skipped_words: skipped,
            members,
        });
    }

    Ok(TopicReport {
        status: TopicStatus::Clustered,
        noise_sentences: clusters.n_noise(),
        subtopics,
        linkage,
        ..base
    })
}

/// Runs the full pipeline over already-loaded documents.
pub fn run_mshtm(
    documents: &[CleanDocument],
    load_stats: LoadStats,
    config: &PipelineConfig,
) -> Result<RunOutput, PipelineError> {
    if documents.is_empty() {
        return Err(PipelineError::EmptyCorpus);
    }
    let counters_before = instrument::build_counters();
    let run_start = std::time::Instant::now();
    let tracking = instrument::tracking_allocator_installed();
    let live_at_start = instrument::alloc_current_bytes();
    if tracking {
        instrument::alloc_reset_peak();
    }
    let mut recorder = StageRecorder::new();

    let nmf_cfg = NmfConfig { seed: config.seed, ..config.nmf };
    let reduce_cfg = ReduceConfig { seed: config.seed, ..config.reduce.clone() };

    let doc_texts = document_texts(documents);
    let total_turns: usize = documents.iter().map(|d| d.turns.len()).sum();

    let vocab = recorder.time("vocabulary", || build_vocabulary(&doc_texts, &config.vectorizer))?;
    let x_docs = recorder.time("doc_matrix", || tfidf(&doc_texts, &vocab));
    let model = recorder.time("broad_topics", || factorize(&x_docs, &nmf_cfg))?;

    let dictionary = if config.hnmf_first_layer {
        recorder.time("first_layer_split", || split_first_layer(&x_docs, &model, config, &nmf_cfg))?
    } else {
        Dictionary {
            w: model.w.clone(),
            doc_h: model.h.clone(),
            parents: vec![None; model.h.nrows()],
        }
    };
    let n_topics = dictionary.w.ncols();
    let encode_cfg = NmfConfig { rank: n_topics, ..nmf_cfg };

    let sentences: Vec<SentenceDocument> = recorder.time("segment", || {
        documents.iter().flat_map(|d| split_sentences(d, config.max_chunk)).collect()
    });
    let sentence_texts: Vec<String> = sentences.iter().map(|s| s.text.clone()).collect();

    let x_sent = recorder.time("sentence_matrix", || tfidf(&sentence_texts, &vocab));
    let h_sent = recorder.time("encode", || transform(&dictionary.w, &x_sent, &encode_cfg))?;

    let thresholds = compute_thresholds(&h_sent, config.threshold_k)?;
    let assignments = assign(&h_sent, &thresholds)?;

    let doc_thresholds = compute_thresholds(&dictionary.doc_h, config.threshold_k)?;
    let doc_assignments = assign(&dictionary.doc_h, &doc_thresholds)?;
    let mut document_counts = vec![0usize; n_topics];
    for a in &doc_assignments {
        for &t in &a.topics {
            document_counts[t] += 1;
        }
    }

    let stats = recorder.time("coherence_index", || cooccurrence_stats(&sentence_texts, &vocab));

    let embedder = Embedder::new(config.embedder.clone())?;
    let cluster_cfg = HdbscanConfig::new(config.min_cluster_size, config.min_samples, config.metric);

    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_topics];
    for (idx, a) in assignments.iter().enumerate() {
        for &t in &a.topics {
            members[t].push(idx);
        }
    }
    let broad_keywords = top_keywords(&dictionary.w, &vocab, config.top_words)?;

    let topics: Vec<TopicReport> = recorder.time("subtopics", || {
        let make_job = |t: usize| TopicJob {
            topic_id: t,
            parent: dictionary.parents[t],
            keywords: broad_keywords[t].clone(),
            document_count: document_counts[t],
            member_sentences: members[t].clone(),
            sentences: &sentences,
            vocab: &vocab,
            stats: &stats,
            embedder: &embedder,
            cluster_cfg: &cluster_cfg,
            reduce_cfg: &reduce_cfg,
            config,
        };
        if config.parallel_topics {
            (0..n_topics)
                .into_par_iter()
                .map(|t| run_topic(make_job(t)))
                .collect::<Result<Vec<_>, _>>()
        } else {
            (0..n_topics).map(|t| run_topic(make_job(t))).collect()
        }
    })?;

    let multi_label_sentences = assignments.iter().filter(|a| a.topics.len() >= 2).count();
    let unassigned_sentences = assignments.iter().filter(|a| a.topics.is_empty()).count();

    let report = RunReport {
        schema_version: SCHEMA_VERSION,
        corpus: CorpusSummary {
            documents: documents.len(),
            turns: total_turns,
            sentences: sentences.len(),
            vocabulary_size: vocab.len(),
            records_skipped: load_stats.records_skipped,
            utf8_replacements: load_stats.utf8_replacements,
        },
        settings: SettingsEcho {
            topics: config.nmf.rank,
            threshold_k: config.threshold_k,
            top_words: config.top_words,
            max_chunk: config.max_chunk,
            min_cluster_size: config.min_cluster_size,
            min_samples: config.min_samples.unwrap_or(config.min_cluster_size),
            metric: config.metric,
            reduce: reduce_cfg.clone(),
            embed_provider: embedder.provider_tag(),
            nmf_max_iter: config.nmf.max_iter,
            nmf_tol: config.nmf.tol,
            hnmf_first_layer: config.hnmf_first_layer,
            hnmf_sub_rank: config.hnmf_sub_rank,
            seed: config.seed,
        },
        nmf_iterations: model.objective_trace.len().saturating_sub(1),
        final_objective: *model.objective_trace.last().expect("trace never empty"),
        thresholds,
        topics,
        multi_label_sentences,
        unassigned_sentences,
        assignments_file: "assignments.csv".to_string(),
        counters: instrument::build_counters().delta_since(&counters_before),
    };
    let metrics = RunMetrics {
        total_wall_ms: run_start.elapsed().as_secs_f64() * 1000.0,
        peak_alloc_bytes: tracking.then(|| {
            instrument::alloc_peak_bytes().saturating_sub(live_at_start) as u64
        }),
        vm_hwm_kb: instrument::peak_rss_kb(),
        stages: recorder.stages,
    };
    Ok(RunOutput { report, metrics, sentences, assignments, model, vocabulary: vocab })
}

fn to_pretty_json<T: Serialize>(value: &T) -> Result<Vec<u8>, PipelineError> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn export_json(report: &RunReport, path: &Path) -> Result<(), PipelineError> {
    std::fs::write(path, to_pretty_json(report)?).map_err(io_err(path))
}

pub fn export_metrics(metrics: &RunMetrics, path: &Path) -> Result<(), PipelineError> {
    std::fs::write(path, to_pretty_json(metrics)?).map_err(io_err(path))
}

pub fn load_report(path: &Path) -> Result<RunReport, PipelineError> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    let probe: serde_json::Value = serde_json::from_slice(&bytes)?;
    let got = probe
        .get("schema_version")
        .and_then(|v| v.as_u64())
        .unwrap_or(0) as u32;
    if got != SCHEMA_VERSION {
        return Err(PipelineError::SchemaVersion { got, expected: SCHEMA_VERSION });
    }
    Ok(serde_json::from_slice(&bytes)?)
}

/// Writes report.json, metrics.json, report.html, and assignments.csv
/// into `out_dir`, creating it if needed. Returns the report path.
pub fn write_outputs(output: &RunOutput, out_dir: &Path) -> Result<PathBuf, PipelineError> {
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;

    let report_path = out_dir.join("report.json");
    export_json(&output.report, &report_path)?;
    export_metrics(&output.metrics, &out_dir.join("metrics.json"))?;
    export_html(&output.report, &out_dir.join("report.html"))?;

    let csv_path = out_dir.join(&output.report.assignments_file);
    let file = std::fs::File::create(&csv_path).map_err(io_err(&csv_path))?;
    let mut buf = std::io::BufWriter::new(file);
    crate::assigner::write_assignments_csv(&mut buf, &output.assignments, &output.sentences)
        .map_err(io_err(&csv_path))?;
    buf.flush().map_err(io_err(&csv_path))?;
    Ok(report_path)
}

fn escape_html(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            _ => out.push(c),
        }
    }
    out
}

/// Renders a dendrogram as an inline SVG: leaves along the bottom,
/// merge height proportional to linkage distance.
fn dendrogram_svg(linkage: &[LinkageMerge], leaf_names: &[String]) -> String {
    let m = leaf_names.len();
    if m == 0 {
        return String::new();
    }
    let width = 60.0 + 70.0 * m as f64;
    let height = 240.0;
    let base_y = height - 40.0;
    let top_y = 20.0;
    if m == 1 || linkage.is_empty() {
        return format!(
            "<svg viewBox=\"0 0 {width} {height}\" width=\"{width}\" height=\"{height}\" role=\"img\">\
             <text x=\"40\" y=\"{base_y}\" font-size=\"12\">{}</text></svg>",
            escape_html(&leaf_names[0])
        );
    }

    // Leaf order: walk the tree from the final merge.
    let mut children: Vec<Option<(usize, usize)>> = vec![None; m + linkage.len()];
    for (step, merge) in linkage.iter().enumerate() {
        children[m + step] = Some((merge.left, merge.right));
    }
    let mut order = Vec::with_capacity(m);
    let mut stack = vec![m + linkage.len() - 1];
    while let Some(node) = stack.pop() {
        match children[node] {
            None => order.push(node),
            Some((l, r)) => {
                stack.push(r);
                stack.push(l);
            }
        }
    }
    let mut slot = vec![0usize; m];
    for (pos, &leaf) in order.iter().enumerate() {
        slot[leaf] = pos;
    }

    let max_dist = linkage.iter().map(|l| l.distance).fold(0.0f64, f64::max).max(1e-9);
    let x_of_slot = |s: f64| 40.0 + 70.0 * s;
    let y_of_dist = |d: f64| base_y - (d / max_dist) * (base_y - top_y);

    // Every node's x (center over its leaves) and y (its merge distance).
    let mut node_x = vec![0.0f64; m + linkage.len()];
    let mut node_y = vec![base_y; m + linkage.len()];
    for leaf in 0..m {
        node_x[leaf] = x_of_slot(slot[leaf] as f64);
    }
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg viewBox=\"0 0 {width} {height}\" width=\"{width}\" height=\"{height}\" role=\"img\">\n"
    ));
    for (step, merge) in linkage.iter().enumerate() {
        let node = m + step;
        let (lx, ly) = (node_x[merge.left], node_y[merge.left]);
        let (rx, ry) = (node_x[merge.right], node_y[merge.right]);
        let y = y_of_dist(merge.distance);
        node_x[node] = (lx + rx) / 2.0;
        node_y[node] = y;
        svg.push_str(&format!(
            "<path d=\"M {lx:.2} {ly:.2} V {y:.2} H {rx:.2} V {ry:.2}\" \
             fill=\"none\" stroke=\"#456\" stroke-width=\"1.5\"/>\n"
        ));
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"9\" fill=\"#789\" text-anchor=\"middle\">{:.3}</text>\n",
            (lx + rx) / 2.0,
            y - 3.0,
            merge.distance
        ));
    }
    for leaf in 0..m {
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\" text-anchor=\"middle\">{}</text>\n",
            node_x[leaf],
            base_y + 16.0,
            escape_html(&leaf_names[leaf])
        ));
    }
    svg.push_str("</svg>");
    svg
}

fn format_option(value: Option<f64>) -> String {
    match value {
        Some(v) => format!("{v:.4}"),
        None => "n/a".to_string(),
    }
}

/// Writes a self-contained HTML summary of the report.
pub fn export_html(report: &RunReport, path: &Path) -> Result<(), PipelineError> {
    let mut page = String::new();
    page.push_str("<!doctype html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n");
    page.push_str("<title>Topic model report</title>\n<style>\n");
    page.push_str(
        "body{font-family:system-ui,sans-serif;margin:2rem auto;max-width:70rem;padding:0 1rem;color:#222}\n\
         table{border-collapse:collapse;margin:0.8rem 0}\n\
         th,td{border:1px solid #bbb;padding:0.3rem 0.6rem;text-align:left;font-size:0.9rem}\n\
         th{background:#eef}\n\
         h2{margin-top:2rem;border-bottom:2px solid #446;padding-bottom:0.2rem}\n\
         .keywords{color:#345;font-size:0.95rem}\n\
         .meta{color:#666;font-size:0.85rem}\n",
    );
    page.push_str("</style>\n</head>\n<body>\n<h1>Topic model report</h1>\n");

    page.push_str(&format!(
        "<p class=\"meta\">{} documents, {} turns, {} sentence chunks, vocabulary of {} terms. \
         {} broad topics, threshold k = {}, seed {}.</p>\n",
        report.corpus.documents,
        report.corpus.turns,
        report.corpus.sentences,
        report.corpus.vocabulary_size,
        report.settings.topics,
        report.settings.threshold_k,
        report.settings.seed,
    ));
    page.push_str(&format!(
        "<p class=\"meta\">{} sentences carry multiple topics, {} none. Final factorization \
         objective {:.6} after {} iterations.</p>\n",
        report.multi_label_sentences,
        report.unassigned_sentences,
        report.final_objective,
        report.nmf_iterations,
    ));

    for topic in &report.topics {
        let parent = match topic.parent_topic {
            Some(p) => format!(" (from broad topic {p})"),
            None => String::new(),
        };
        page.push_str(&format!("<h2>Topic {}{}</h2>\n", topic.topic_id, parent));
        page.push_str(&format!(
            "<p class=\"keywords\">{}</p>\n",
            escape_html(&topic.keywords.join(", "))
        ));
        let status = match topic.status {
            TopicStatus::Clustered => "clustered",
            TopicStatus::TooSmall => "too few sentences to cluster",
            TopicStatus::NoClusters => "no dense regions found",
        };
        page.push_str(&format!(
            "<p class=\"meta\">{} documents, {} sentences, status: {status}, {} noise sentences.</p>\n",
            topic.document_count, topic.sentence_count, topic.noise_sentences
        ));
        if !topic.subtopics.is_empty() {
            page.push_str(
                "<table>\n<tr><th>Subtopic</th><th>Size</th><th>NPMI</th><th>Keywords</th></tr>\n",
            );
            for sub in &topic.subtopics {
                let words: Vec<&str> =
                    sub.keywords.iter().map(|k| k.word.as_str()).collect();
                page.push_str(&format!(
                    "<tr><td>s{}</td><td>{}</td><td>{}</td><td>{}</td></tr>\n",
                    sub.subtopic_id,
                    sub.size,
                    format_option(sub.npmi),
                    escape_html(&words.join(", "))
                ));
            }
            page.push_str("</table>\n");
            let leaf_names: Vec<String> =
                topic.subtopics.iter().map(|s| format!("s{}", s.subtopic_id)).collect();
            page.push_str(&dendrogram_svg(&topic.linkage, &leaf_names));
            page.push('\n');
        }
    }
    page.push_str("</body>\n</html>\n");
    std::fs::write(path, page).map_err(io_err(path))
}
