//! Sentence embeddings from either a remote HTTP service or a local
//! hashed-features fallback.
//!
//! The fallback needs no network or model weights: it feature-hashes
//! unigrams and bigrams into a fixed number of signed buckets and
//! L2-normalizes the result. It is deterministic for a given seed and
//! dimension, so runs are reproducible, at the cost of embedding quality.
//!
//! Remote embedding posts batches to an HTTP endpoint:
//!
//! ```text
//! POST <endpoint>
//! {"model": "<model>", "inputs": ["sentence", ...]}
//! -> {"embeddings": [[f64, ...], ...]}
//! ```
//!
//! Batches are sent sequentially in input order. Transient failures
//! (connection errors, 429, 5xx) are retried with exponential backoff;
//! other HTTP errors fail immediately. Rows are L2-normalized on receipt
//! so downstream distance math sees unit vectors regardless of provider.
//!
//! Either provider can sit behind a content-addressed disk cache keyed by
//! the provider identity and the exact sentence list.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::instrument;
use crate::vectorizer::tokenize;

#[derive(Debug, thiserror::Error)]
pub enum EmbedError {
    #[error("invalid embedder config: {0}")]
    InvalidConfig(String),
    #[error("remote provider selected but no endpoint configured")]
    MissingEndpoint,
    #[error("embedding request failed after {attempts} attempts: {last_error}")]
    RetryExhausted { attempts: u32, last_error: String },
    #[error("embedding service returned HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("embedding service violated the response contract: {0}")]
    ProviderContract(String),
    #[error("embedding dimension changed from {expected} to {got} in batch {batch}")]
    DimensionMismatch { expected: usize, got: usize, batch: usize },
    #[error("embedding cache at {path}: {source}")]
    Cache { path: PathBuf, source: std::io::Error },
    #[error("embedding cache at {path} is corrupt: {message}")]
    CacheCorrupt { path: PathBuf, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbedProvider {
    /// POST batches to an HTTP embedding service.
    Remote,
    /// Deterministic signed feature hashing of unigrams and bigrams.
    HashedFallback,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetryPolicy {
    /// Total attempts per batch, including the first.
    pub max_attempts: u32,
    /// Delay before the first retry; doubles each further retry.
    pub base_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { max_attempts: 3, base_delay_ms: 200 }
    }
}

/// Seed for the fallback hasher. Fixed so that embeddings are comparable
/// across runs and machines unless deliberately changed.
pub const DEFAULT_HASH_SEED: u64 = 0x517c_c1b7_2722_0a95;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedderConfig {
    pub provider: EmbedProvider,
    pub endpoint: Option<String>,
    pub model: String,
    pub batch_size: usize,
    /// Output dimension of the fallback hasher. The remote provider's
    /// dimension is discovered from its first response.
    pub dim: usize,
    pub timeout_ms: u64,
    pub retry: RetryPolicy,
    pub seed: u64,
    /// When set, embeddings are cached on disk keyed by provider identity
    /// and the exact sentence list.
    pub cache_dir: Option<PathBuf>,
    /// Environment variable holding a bearer token for the remote service.
    pub auth_token_env: Option<String>,
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        EmbedderConfig {
            provider: EmbedProvider::HashedFallback,
            endpoint: None,
            model: "hashed-features".to_string(),
            batch_size: 32,
            dim: 256,
            timeout_ms: 30_000,
            retry: RetryPolicy::default(),
            seed: DEFAULT_HASH_SEED,
            cache_dir: None,
            auth_token_env: None,
        }
    }
}

impl EmbedderConfig {
    fn validate(&self) -> Result<(), EmbedError> {
        if self.batch_size == 0 {
            return Err(EmbedError::InvalidConfig("batch_size must be at least 1".into()));
        }
        if self.provider == EmbedProvider::HashedFallback && self.dim == 0 {
            return Err(EmbedError::InvalidConfig("fallback dim must be at least 1".into()));
        }
        if self.provider == EmbedProvider::Remote && self.endpoint.is_none() {
            return Err(EmbedError::MissingEndpoint);
        }
        Ok(())
    }

    /// Stable identity string; part of the cache key, so any change that
    /// alters outputs must change this.
    pub fn provider_tag(&self) -> String {
        match self.provider {
            EmbedProvider::HashedFallback => {
                format!("hashed64:dim={}:seed={:016x}", self.dim, self.seed)
            }
            EmbedProvider::Remote => format!(
                "remote:{}:{}",
                self.endpoint.as_deref().unwrap_or(""),
                self.model
            ),
        }
    }
}

/// Dense sentence embeddings, one row per input sentence.
///
/// Non-zero rows have unit L2 norm; rows that could not be embedded
/// (no tokens, or an all-zero provider response) are zero and listed in
/// `zero_rows`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub rows: Array2<f64>,
    pub dim: usize,
    pub provider_tag: String,
    pub zero_rows: Vec<usize>,
}

pub struct Embedder {
    config: EmbedderConfig,
    client: Option<reqwest::blocking::Client>,
}

impl Embedder {
    pub fn new(config: EmbedderConfig) -> Result<Self, EmbedError> {
        config.validate()?;
        let client = match config.provider {
            EmbedProvider::Remote => Some(
                reqwest::blocking::Client::builder()
                    .timeout(Duration::from_millis(config.timeout_ms))
                    .no_proxy()
                    .build()
                    .map_err(|e| EmbedError::InvalidConfig(format!("http client: {e}")))?,
            ),
            EmbedProvider::HashedFallback => None,
        };
        instrument::record_embedder_build();
        Ok(Embedder { config, client })
    }

    pub fn config(&self) -> &EmbedderConfig {
        &self.config
    }

    pub fn provider_tag(&self) -> String {
        self.config.provider_tag()
    }

    /// Embeds `sentences` in order, one row each.
    pub fn embed(&self, sentences: &[String]) -> Result<EmbeddingMatrix, EmbedError> {
        if let Some(dir) = &self.config.cache_dir {
            let path = cache_path(dir, &self.provider_tag(), sentences);
            if path.exists() {
                return read_cache(&path, sentences.len());
            }
            let matrix = self.embed_uncached(sentences)?;
            write_cache(&path, &matrix)?;
            return Ok(matrix);
        }
        self.embed_uncached(sentences)
    }

    fn embed_uncached(&self, sentences: &[String]) -> Result<EmbeddingMatrix, EmbedError> {
        match self.config.provider {
            EmbedProvider::HashedFallback => Ok(self.embed_hashed(sentences)),
            EmbedProvider::Remote => self.embed_remote(sentences),
        }
    }

    fn embed_hashed(&self, sentences: &[String]) -> EmbeddingMatrix {
        let dim = self.config.dim;
        let mut rows = Array2::<f64>::zeros((sentences.len(), dim));
        for (i, sentence) in sentences.iter().enumerate() {
            let tokens = tokenize(sentence, true);
            let mut row = rows.row_mut(i);
            for token in &tokens {
                let h = seeded_fnv1a(self.config.seed, token.as_bytes());
                apply_bucket(&mut row, h, dim);
            }
            for pair in tokens.windows(2) {
                let mut hasher_input = Vec::with_capacity(pair[0].len() + pair[1].len() + 1);
                hasher_input.extend_from_slice(pair[0].as_bytes());
                hasher_input.push(b' ');
                hasher_input.extend_from_slice(pair[1].as_bytes());
                let h = seeded_fnv1a(self.config.seed, &hasher_input);
                apply_bucket(&mut row, h, dim);
            }
        }
        finalize(rows, dim, self.provider_tag())
    }

    fn embed_remote(&self, sentences: &[String]) -> Result<EmbeddingMatrix, EmbedError> {
        let endpoint = self.config.endpoint.as_deref().ok_or(EmbedError::MissingEndpoint)?;
        let client = self.client.as_ref().expect("remote embedder has a client");
        let token = self
            .config
            .auth_token_env
            .as_deref()
            .and_then(|var| std::env::var(var).ok())
            .filter(|t| !t.is_empty());

        let mut all_rows: Vec<Vec<f64>> = Vec::with_capacity(sentences.len());
        let mut expected_dim: Option<usize> = None;
        for (batch_idx, batch) in sentences.chunks(self.config.batch_size).enumerate() {
            let response = self.post_with_retry(client, endpoint, token.as_deref(), batch)?;
            if response.embeddings.len() != batch.len() {
                return Err(EmbedError::ProviderContract(format!(
                    "batch {} sent {} inputs but got {} embeddings",
                    batch_idx,
                    batch.len(),
                    response.embeddings.len()
                )));
            }
            for row in response.embeddings {
                match expected_dim {
                    None => {
                        if row.is_empty() {
                            return Err(EmbedError::ProviderContract(
                                "service returned an empty embedding".into(),
                            ));
                        }
                        expected_dim = Some(row.len());
                    }
                    Some(d) if row.len() != d => {
                        return Err(EmbedError::DimensionMismatch {
                            expected: d,
                            got: row.len(),
                            batch: batch_idx,
                        });
                    }
                    Some(_) => {}
                }
                if row.iter().any(|v| !v.is_finite()) {
                    return Err(EmbedError::ProviderContract(
                        "service returned a non-finite value".into(),
                    ));
                }
                all_rows.push(row);
            }
        }

        let dim = expected_dim.unwrap_or(self.config.dim.max(1));
        let mut rows = Array2::<f64>::zeros((sentences.len(), dim));
        for (i, row) in all_rows.into_iter().enumerate() {
            for (j, v) in row.into_iter().enumerate() {
                rows[[i, j]] = v;
            }
        }
        Ok(finalize(rows, dim, self.provider_tag()))
    }

    fn post_with_retry(
        &self,
        client: &reqwest::blocking::Client,
        endpoint: &str,
        token: Option<&str>,
        batch: &[String],
    ) -> Result<EmbedResponse, EmbedError> {
        let request_body = EmbedRequest { model: &self.config.model, inputs: batch };
        let max_attempts = self.config.retry.max_attempts.max(1);
        let mut last_error = String::new();
        for attempt in 0..max_attempts {
            if attempt > 0 {
                let delay = self.config.retry.base_delay_ms.saturating_mul(1 << (attempt - 1));
                std::thread::sleep(Duration::from_millis(delay.min(10_000)));
            }
            let mut request = client.post(endpoint).json(&request_body);
            if let Some(token) = token {
                request = request.bearer_auth(token);
            }
            match request.send() {
                Err(e) => last_error = format!("transport: {e}"),
                Ok(response) => {
                    let status = response.status();
                    if status.is_success() {
                        return response.json::<EmbedResponse>().map_err(|e| {
                            EmbedError::ProviderContract(format!("malformed response body: {e}"))
                        });
                    }
                    let body = response.text().unwrap_or_default();
                    let retryable = status.as_u16() == 429 || status.is_server_error();
                    if !retryable {
                        return Err(EmbedError::Http { status: status.as_u16(), body });
                    }
                    last_error = format!("HTTP {status}: {body}");
                }
            }
        }
        Err(EmbedError::RetryExhausted { attempts: max_attempts, last_error })
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    model: &'a str,
    inputs: &'a [String],
}

#[derive(Deserialize)]
struct EmbedResponse {
    embeddings: Vec<Vec<f64>>,
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn seeded_fnv1a(seed: u64, bytes: &[u8]) -> u64 {
    let mut state = FNV_OFFSET ^ seed;
    for &b in bytes {
        state ^= b as u64;
        state = state.wrapping_mul(FNV_PRIME);
    }
    state
}

fn apply_bucket(row: &mut ndarray::ArrayViewMut1<f64>, hash: u64, dim: usize) {
    let index = ((hash >> 1) % dim as u64) as usize;
    let sign = if hash & 1 == 0 { 1.0 } else { -1.0 };
    row[index] += sign;
}

/// Normalizes non-zero rows to unit length and records zero rows.
fn finalize(mut rows: Array2<f64>, dim: usize, provider_tag: String) -> EmbeddingMatrix {
    let mut zero_rows = Vec::new();
    for (i, mut row) in rows.rows_mut().into_iter().enumerate() {
        let norm = row.dot(&row).sqrt();
        if norm > 0.0 {
            row.mapv_inplace(|v| v / norm);
        } else {
            zero_rows.push(i);
        }
    }
    EmbeddingMatrix { rows, dim, provider_tag, zero_rows }
}

#[derive(Serialize, Deserialize)]
struct CacheFile {
    provider_tag: String,
    dim: usize,
    n_rows: usize,
    zero_rows: Vec<usize>,
    data: Vec<f64>,
}

fn cache_path(dir: &Path, provider_tag: &str, sentences: &[String]) -> PathBuf {
    let mut hasher = Sha256::new();
    hasher.update(provider_tag.as_bytes());
    hasher.update([0u8]);
    hasher.update((sentences.len() as u64).to_le_bytes());
    for sentence in sentences {
        hasher.update((sentence.len() as u64).to_le_bytes());
        hasher.update(sentence.as_bytes());
    }
    let digest = hasher.finalize();
    let mut name = String::with_capacity(64);
    for byte in digest {
        name.push_str(&format!("{byte:02x}"));
    }
    dir.join(format!("{name}.embcache.json"))
}

fn write_cache(path: &Path, matrix: &EmbeddingMatrix) -> Result<(), EmbedError> {
    let io_err = |source| EmbedError::Cache { path: path.to_path_buf(), source };
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(io_err)?;
    }
    let file = CacheFile {
        provider_tag: matrix.provider_tag.clone(),
        dim: matrix.dim,
        n_rows: matrix.rows.nrows(),
        zero_rows: matrix.zero_rows.clone(),
        data: matrix.rows.iter().copied().collect(),
    };
    let bytes = serde_json::to_vec(&file)
        .map_err(|e| EmbedError::CacheCorrupt { path: path.to_path_buf(), message: e.to_string() })?;
    let mut out = std::fs::File::create(path).map_err(io_err)?;
    out.write_all(&bytes).map_err(io_err)?;
    Ok(())
}

fn read_cache(path: &Path, expected_rows: usize) -> Result<EmbeddingMatrix, EmbedError> {
    let corrupt = |message: String| EmbedError::CacheCorrupt { path: path.to_path_buf(), message };
    let bytes = std::fs::read(path)
        .map_err(|source| EmbedError::Cache { path: path.to_path_buf(), source })?;
    let file: CacheFile =
        serde_json::from_slice(&bytes).map_err(|e| corrupt(e.to_string()))?;
    if file.n_rows != expected_rows {
        return Err(corrupt(format!(
            "cache holds {} rows but {} sentences were requested",
            file.n_rows, expected_rows
        )));
    }
    if file.data.len() != file.n_rows * file.dim {
        return Err(corrupt("data length does not match declared shape".into()));
    }
    let rows = Array2::from_shape_vec((file.n_rows, file.dim), file.data)
        .map_err(|e| corrupt(e.to_string()))?;
    Ok(EmbeddingMatrix {
        rows,
        dim: file.dim,
        provider_tag: file.provider_tag,
        zero_rows: file.zero_rows,
    })
}
