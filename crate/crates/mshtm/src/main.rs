//! Command-line front end: load a transcript corpus, run the pipeline,
//! write the report bundle. A second subcommand prints coherence tables
//! from an existing report.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use mshtm::cluster::{Metric, ReduceConfig, ReduceMethod};
use mshtm::corpus::{
    filter_speakers, load_mediasum_json, load_transcript_csv, CleaningConfig, CsvSchema,
    SpeakerRole,
};
use mshtm::embedder::{EmbedProvider, EmbedderConfig};
use mshtm::instrument::TrackingAllocator;
use mshtm::nmf::{save_model, NmfConfig};
use mshtm::pipeline::{
    document_texts, load_report, run_mshtm, write_outputs, PipelineConfig, PipelineError,
    RunReport,
};
use mshtm::vectorizer::{load_stopwords, tfidf, MinDf, StopwordProfile, VectorizerConfig};

#[global_allocator]
static ALLOC: TrackingAllocator = TrackingAllocator;

#[derive(Parser)]
#[command(name = "mshtm", version, about = "Multi-scale topic modeling over transcript corpora")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline and write report.json, metrics.json,
    /// report.html, and assignments.csv.
    Run(Box<RunArgs>),
    /// Print per-subtopic NPMI coherence from an existing report.
    Npmi(NpmiArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum InputFormat {
    /// Header CSV with file id, timestamp, speaker, and text columns.
    Csv,
    /// JSON array or JSON-lines interview records.
    MediasumJson,
}

#[derive(Clone, Copy, ValueEnum)]
enum EmbedderArg {
    /// Deterministic hashed features; no network.
    Fallback,
    /// HTTP embedding service; requires --endpoint.
    Remote,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Euclidean,
    Cosine,
}

#[derive(Clone, Copy, ValueEnum)]
enum StopwordsArg {
    Shoah,
    Mediasum,
    Custom,
}

#[derive(Clone, Copy, ValueEnum)]
enum SpeakersArg {
    /// Interviewee turns only.
    Interviewee,
    /// Interviewer turns only.
    Interviewer,
    /// Keep every turn, including unrecognized speakers.
    All,
}

#[derive(Args)]
struct RunArgs {
    /// Corpus file to load.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = InputFormat::Csv)]
    format: InputFormat,
    /// Output directory; created if missing.
    #[arg(long)]
    out: PathBuf,

    /// Number of broad topics.
    #[arg(long, default_value_t = 8)]
    topics: usize,
    /// Std-dev multiplier for assignment thresholds.
    #[arg(long, default_value_t = 1.0)]
    threshold_k: f64,
    #[arg(long, default_value_t = 15)]
    top_words: usize,
    /// Maximum sentences per chunk when splitting long turns.
    #[arg(long, default_value_t = 12)]
    max_chunk: usize,
    /// Seed for the topic model and the projection.
    #[arg(long, default_value_t = 0)]
    seed: u64,

    #[arg(long, value_enum, default_value_t = EmbedderArg::Fallback)]
    embedder: EmbedderArg,
    /// Remote embedding endpoint URL.
    #[arg(long)]
    endpoint: Option<String>,
    /// Model name sent to the remote service.
    #[arg(long, default_value = "all-MiniLM-L6-v2")]
    model: String,
    /// Fallback embedding dimension.
    #[arg(long, default_value_t = 256)]
    embed_dim: usize,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    /// Environment variable holding the remote bearer token.
    #[arg(long)]
    auth_token_env: Option<String>,
    /// Directory for the on-disk embedding cache.
    #[arg(long)]
    cache_dir: Option<PathBuf>,

    /// Dimension embeddings are projected to before clustering.
    #[arg(long, default_value_t = 5)]
    reduce_dim: usize,
    /// Cluster raw embeddings without projecting first.
    #[arg(long)]
    no_reduce: bool,
    #[arg(long, default_value_t = 15)]
    min_cluster_size: usize,
    /// Neighbor count for core distances; defaults to min-cluster-size.
    #[arg(long)]
    min_samples: Option<usize>,
    #[arg(long, value_enum, default_value_t = MetricArg::Euclidean)]
    metric: MetricArg,

    #[arg(long, value_enum, default_value_t = StopwordsArg::Shoah)]
    stopwords: StopwordsArg,
    /// File of extra stopwords, one per line.
    #[arg(long)]
    extra_stopwords: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = SpeakersArg::Interviewee)]
    keep_speakers: SpeakersArg,
    /// Minimum document frequency: an integer count (2) or fraction (0.05).
    #[arg(long, default_value = "0.05", value_parser = parse_min_df)]
    min_df: MinDf,
    /// Maximum document frequency as a fraction of the corpus.
    #[arg(long, default_value_t = 0.8)]
    max_df: f64,
    /// Largest n-gram length; 1 keeps unigrams only.
    #[arg(long, default_value_t = 1)]
    ngram_max: usize,

    #[arg(long, default_value_t = 200)]
    nmf_max_iter: usize,
    #[arg(long, default_value_t = 1e-4)]
    nmf_tol: f64,
    #[arg(long, default_value_t = 0.0)]
    alpha_w: f64,
    #[arg(long, default_value_t = 0.0)]
    alpha_h: f64,

    /// Split each broad topic into finer dictionary atoms before encoding.
    #[arg(long)]
    hnmf_first_layer: bool,
    #[arg(long, default_value_t = 2)]
    hnmf_sub_rank: usize,
    /// Cluster topics on the thread pool.
    #[arg(long)]
    parallel_topics: bool,
    /// Also write the document-term matrix and the trained model.
    #[arg(long)]
    dump_matrices: bool,
}

#[derive(Args)]
struct NpmiArgs {
    /// Path to a report.json written by `mshtm run`.
    #[arg(long)]
    report: PathBuf,
}

fn parse_min_df(raw: &str) -> Result<MinDf, String> {
    if let Ok(count) = raw.parse::<usize>() {
        return Ok(MinDf::Count(count));
    }
    let f: f64 = raw.parse().map_err(|_| format!("`{raw}` is neither a count nor a fraction"))?;
    if !(0.0..=1.0).contains(&f) {
        return Err(format!("fraction {f} is outside [0, 1]"));
    }
    Ok(MinDf::Fraction(f))
}

fn read_word_list(path: &PathBuf) -> Result<BTreeSet<String>, PipelineError> {
    let content = std::fs::read_to_string(path)
        .map_err(|source| PipelineError::Io { path: path.clone(), source })?;
    Ok(content
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect())
}

fn build_config(args: &RunArgs) -> Result<PipelineConfig, PipelineError> {
    let extra = match &args.extra_stopwords {
        Some(path) => read_word_list(path)?,
        None => BTreeSet::new(),
    };
    let profile = match args.stopwords {
        StopwordsArg::Shoah => StopwordProfile::Shoah,
        StopwordsArg::Mediasum => StopwordProfile::Mediasum,
        StopwordsArg::Custom => StopwordProfile::Custom,
    };
    Ok(PipelineConfig {
        vectorizer: VectorizerConfig {
            max_df: args.max_df,
            min_df: args.min_df,
            ngram_range: (1, args.ngram_max.max(1)),
            stopwords: load_stopwords(profile, &extra),
            lowercase: true,
        },
        nmf: NmfConfig {
            rank: args.topics,
            max_iter: args.nmf_max_iter,
            tol: args.nmf_tol,
            alpha_w: args.alpha_w,
            alpha_h: args.alpha_h,
            ..NmfConfig::default()
        },
        threshold_k: args.threshold_k,
        top_words: args.top_words,
        max_chunk: args.max_chunk,
        embedder: EmbedderConfig {
            provider: match args.embedder {
                EmbedderArg::Fallback => EmbedProvider::HashedFallback,
                EmbedderArg::Remote => EmbedProvider::Remote,
            },
            endpoint: args.endpoint.clone(),
            model: args.model.clone(),
            batch_size: args.batch_size,
            dim: args.embed_dim,
            cache_dir: args.cache_dir.clone(),
            auth_token_env: args.auth_token_env.clone(),
            ..EmbedderConfig::default()
        },
        reduce: ReduceConfig {
            method: if args.no_reduce { ReduceMethod::None } else { ReduceMethod::Svd },
            dim: args.reduce_dim,
            seed: args.seed,
        },
        min_cluster_size: args.min_cluster_size,
        min_samples: args.min_samples,
        metric: match args.metric {
            MetricArg::Euclidean => Metric::Euclidean,
            MetricArg::Cosine => Metric::Cosine,
        },
        hnmf_first_layer: args.hnmf_first_layer,
        hnmf_sub_rank: args.hnmf_sub_rank,
        parallel_topics: args.parallel_topics,
        seed: args.seed,
        npmi_eps: mshtm::coherence::DEFAULT_EPS,
    })
}

fn cmd_run(args: &RunArgs) -> Result<(), PipelineError> {
    let cleaning = CleaningConfig {
        keep_roles: match args.keep_speakers {
            SpeakersArg::Interviewee => [SpeakerRole::Interviewee].into_iter().collect(),
            SpeakersArg::Interviewer => [SpeakerRole::Interviewer].into_iter().collect(),
            SpeakersArg::All => [
                SpeakerRole::Interviewee,
                SpeakerRole::Interviewer,
                SpeakerRole::Unknown,
            ]
            .into_iter()
            .collect(),
        },
        ..CleaningConfig::default()
    };
    let (turns, stats) = match args.format {
        InputFormat::Csv => load_transcript_csv(&args.input, &CsvSchema::default())?,
        InputFormat::MediasumJson => load_mediasum_json(&args.input)?,
    };
    let documents = filter_speakers(&turns, &cleaning);
    eprintln!(
        "loaded {} documents ({} turns kept, {} records skipped)",
        documents.len(),
        documents.iter().map(|d| d.turns.len()).sum::<usize>(),
        stats.records_skipped
    );

    let config = build_config(args)?;
    let output = run_mshtm(&documents, stats, &config)?;
    let report_path = write_outputs(&output, &args.out)?;

    if args.dump_matrices {
        let texts = document_texts(&documents);
        let x_docs = tfidf(&texts, &output.vocabulary);
        let triplets_path = args.out.join("doc_term.triplets");
        let file = std::fs::File::create(&triplets_path)
            .map_err(|source| PipelineError::Io { path: triplets_path.clone(), source })?;
        x_docs
            .write_triplets(std::io::BufWriter::new(file))
            .map_err(|source| PipelineError::Io { path: triplets_path.clone(), source })?;
        let model_path = args.out.join("model.json");
        save_model(&output.model, &output.vocabulary.content_hash(), &model_path)?;
    }

    let report = &output.report;
    eprintln!(
        "{} topics over {} sentences; {} multi-label, {} unassigned",
        report.topics.len(),
        report.corpus.sentences,
        report.multi_label_sentences,
        report.unassigned_sentences
    );
    for topic in &report.topics {
        eprintln!(
            "  topic {:>2}: {:>5} sentences, {:>2} subtopics  [{}]",
            topic.topic_id,
            topic.sentence_count,
            topic.subtopics.len(),
            topic.keywords.iter().take(6).cloned().collect::<Vec<_>>().join(", ")
        );
    }
    println!("{}", report_path.display());
    Ok(())
}

fn npmi_summary(report: &RunReport) -> String {
    let mut lines = Vec::new();
    lines.push(format!("{:<8} {:<10} {:>6} {:>9}  keywords", "topic", "subtopic", "size", "npmi"));
    let mut scored = Vec::new();
    for topic in &report.topics {
        for sub in &topic.subtopics {
            let npmi = match sub.npmi {
                Some(v) => {
                    scored.push(v);
                    format!("{v:>9.4}")
                }
                None => format!("{:>9}", "n/a"),
            };
            let words: Vec<&str> =
                sub.keywords.iter().take(5).map(|k| k.word.as_str()).collect();
            lines.push(format!(
                "{:<8} {:<10} {:>6} {}  {}",
                topic.topic_id,
                format!("s{}", sub.subtopic_id),
                sub.size,
                npmi,
                words.join(", ")
            ));
        }
    }
    if scored.is_empty() {
        lines.push("no scored subtopics".to_string());
    } else {
        let mean = scored.iter().sum::<f64>() / scored.len() as f64;
        lines.push(format!("mean over {} scored subtopics: {mean:.4}", scored.len()));
    }
    lines.join("\n")
}

fn cmd_npmi(args: &NpmiArgs) -> Result<(), PipelineError> {
    let report = load_report(&args.report)?;
    println!("{}", npmi_summary(&report));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Npmi(args) => cmd_npmi(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn min_df_parses_counts_and_fractions() {
        assert_eq!(parse_min_df("3").unwrap(), MinDf::Count(3));
        assert_eq!(parse_min_df("0.25").unwrap(), MinDf::Fraction(0.25));
        assert!(parse_min_df("1.5").is_err());
        assert!(parse_min_df("abc").is_err());
    }

    #[test]
    fn cli_definition_is_well_formed() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
