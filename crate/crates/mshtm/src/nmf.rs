//! Nonnegative matrix factorization by multiplicative updates.
//!
//! Minimizes `||X - WH||_F^2 + alpha_w * n * ||W||_F^2 + alpha_h * n *
//! ||H||_F^2` for a sparse nonnegative `X` (d terms x n documents), where
//! `n` scales the regularizers so usable alpha magnitudes stay tiny. Both
//! update denominators are floored at 1e-12; each full iteration never
//! increases the objective, and the per-iteration values are kept in
//! [`NmfModel::objective_trace`].

use std::path::Path;

use ndarray::{Array2, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::truncated_svd;
use crate::vectorizer::{TermDocMatrix, Vocabulary};

const DENOM_FLOOR: f64 = 1e-12;
const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum NmfError {
    #[error("rank {rank} exceeds min(rows, cols) = {max_rank}")]
    RankTooLarge { rank: usize, max_rank: usize },
    #[error("invalid NMF config: {0}")]
    InvalidConfig(String),
    #[error("input matrix is entirely zero")]
    DegenerateInput,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("model file io: {0}")]
    Io(#[from] std::io::Error),
    #[error("model file encoding: {0}")]
    Encoding(#[from] serde_json::Error),
    #[error("unsupported model format version {0}")]
    FormatVersion(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NmfInit {
    /// NNDSVD with zero entries replaced by the matrix mean. Deterministic.
    Nndsvd,
    /// Absolute seeded Gaussian entries scaled to the matrix magnitude.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NmfConfig {
    pub rank: usize,
    pub max_iter: usize,
    /// Relative objective-change stopping threshold.
    pub tol: f64,
    pub alpha_w: f64,
    pub alpha_h: f64,
    pub init: NmfInit,
    pub seed: u64,
}

impl Default for NmfConfig {
    fn default() -> Self {
        NmfConfig {
            rank: 10,
            max_iter: 400,
            tol: 1e-4,
            alpha_w: 0.0,
            alpha_h: 0.0,
            init: NmfInit::Nndsvd,
            seed: 0,
        }
    }
}

impl NmfConfig {
    fn validate(&self) -> Result<(), NmfError> {
        if self.rank == 0 {
            return Err(NmfError::InvalidConfig("rank must be at least 1".into()));
        }
        if self.max_iter == 0 {
            return Err(NmfError::InvalidConfig("max_iter must be at least 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(NmfError::InvalidConfig(format!(
                "tol {} must be positive",
                self.tol
            )));
        }
        if self.alpha_w < 0.0 || self.alpha_h < 0.0 {
            return Err(NmfError::InvalidConfig(
                "alpha_w and alpha_h must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct NmfModel {
    /// Dictionary, terms x topics.
    pub w: Array2<f64>,
    /// Coding, topics x documents.
    pub h: Array2<f64>,
    pub config: NmfConfig,
    /// Objective value before iterating, then after each iteration.
    pub objective_trace: Vec<f64>,
}

/// The minimized objective: squared Frobenius residual plus the
/// sample-scaled L2 penalties.
pub fn objective(
    x: &TermDocMatrix,
    w: &Array2<f64>,
    h: &Array2<f64>,
    alpha_w: f64,
    alpha_h: f64,
) -> f64 {
    let n_samples = x.n_cols() as f64;
    let rank = w.ncols();
    // ||X - WH||^2 = ||X||^2 - 2 <X, WH> + <W^T W, H H^T>.
    let mut cross = 0.0;
    for j in 0..x.n_cols() {
        let (rows, vals) = x.col(j);
        let h_col = h.column(j);
        for (&i, &v) in rows.iter().zip(vals) {
            let w_row = w.row(i);
            let mut dot = 0.0;
            for c in 0..rank {
                dot += w_row[c] * h_col[c];
            }
            cross += v * dot;
        }
    }
    let wtw = w.t().dot(w);
    let hht = h.dot(&h.t());
    let wh_sq = (&wtw * &hht).sum();
    let fit = x.fro_norm_sq() - 2.0 * cross + wh_sq;
    fit + alpha_w * n_samples * w.iter().map(|v| v * v).sum::<f64>()
        + alpha_h * n_samples * h.iter().map(|v| v * v).sum::<f64>()
}

fn nndsvd_init(x: &TermDocMatrix, rank: usize, seed: u64) -> (Array2<f64>, Array2<f64>) {
    let (d, n) = (x.n_rows(), x.n_cols());
    let svd = truncated_svd(x, rank, seed);
    let mut w = Array2::<f64>::zeros((d, rank));
    let mut h = Array2::<f64>::zeros((rank, n));

    // Leading component: the singular pair of a nonnegative matrix can be
    // taken entrywise nonnegative.
    let s0_root = svd.s[0].max(0.0).sqrt();
    for i in 0..d {
        w[(i, 0)] = s0_root * svd.u[(i, 0)].abs();
    }
    for j in 0..n {
        h[(0, j)] = s0_root * svd.vt[(0, j)].abs();
    }

    for comp in 1..rank {
        let mut up_norm_sq = 0.0;
        let mut un_norm_sq = 0.0;
        for i in 0..d {
            let v = svd.u[(i, comp)];
            if v > 0.0 {
                up_norm_sq += v * v;
            } else {
                un_norm_sq += v * v;
            }
        }
        let mut vp_norm_sq = 0.0;
        let mut vn_norm_sq = 0.0;
        for j in 0..n {
            let v = svd.vt[(comp, j)];
            if v > 0.0 {
                vp_norm_sq += v * v;
            } else {
                vn_norm_sq += v * v;
            }
        }
        let (up_norm, un_norm) = (up_norm_sq.sqrt(), un_norm_sq.sqrt());
        let (vp_norm, vn_norm) = (vp_norm_sq.sqrt(), vn_norm_sq.sqrt());
        let pos_mass = up_norm * vp_norm;
        let neg_mass = un_norm * vn_norm;
        if pos_mass == 0.0 && neg_mass == 0.0 {
            continue;
        }
        let sigma = svd.s[comp].max(0.0);
        if pos_mass >= neg_mass {
            if up_norm > 0.0 && vp_norm > 0.0 {
                let scale = (sigma * pos_mass).sqrt();
                for i in 0..d {
                    w[(i, comp)] = scale * svd.u[(i, comp)].max(0.0) / up_norm;
                }
                for j in 0..n {
                    h[(comp, j)] = scale * svd.vt[(comp, j)].max(0.0) / vp_norm;
                }
            }
        } else if un_norm > 0.0 && vn_norm > 0.0 {
            let scale = (sigma * neg_mass).sqrt();
            for i in 0..d {
                w[(i, comp)] = scale * (-svd.u[(i, comp)]).max(0.0) / un_norm;
            }
            for j in 0..n {
                h[(comp, j)] = scale * (-svd.vt[(comp, j)]).max(0.0) / vn_norm;
            }
        }
    }

    // The averaging variant: zeros are replaced by the matrix mean so no
    // entry starts frozen at zero.
    let mean = x.mean();
    w.mapv_inplace(|v| if v == 0.0 { mean } else { v });
    h.mapv_inplace(|v| if v == 0.0 { mean } else { v });
    (w, h)
}

fn random_init(x: &TermDocMatrix, rank: usize, seed: u64) -> (Array2<f64>, Array2<f64>) {
    let (d, n) = (x.n_rows(), x.n_cols());
    let scale = (x.mean() / rank as f64).sqrt().max(f64::MIN_POSITIVE);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gaussian = move || {
        let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
        let u2: f64 = rng.gen();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    };
    let mut w = Array2::<f64>::zeros((d, rank));
    let mut h = Array2::<f64>::zeros((rank, n));
    for v in w.iter_mut() {
        *v = scale * gaussian().abs();
    }
    for v in h.iter_mut() {
        *v = scale * gaussian().abs();
    }
    (w, h)
}

fn update_h(
    x: &TermDocMatrix,
    w: &Array2<f64>,
    h: &mut Array2<f64>,
    two_alpha_h_scaled: f64,
) {
    let numerator = x.t_mul_dense(w).reversed_axes(); // W^T X, rank x n
    let mut denominator = w.t().dot(w).dot(h);
    if two_alpha_h_scaled > 0.0 {
        Zip::from(&mut denominator)
            .and(&*h)
            .for_each(|den, &hv| *den += two_alpha_h_scaled * hv);
    }
    Zip::from(h)
        .and(&numerator)
        .and(&denominator)
        .for_each(|hv, &num, &den| *hv *= num / den.max(DENOM_FLOOR));
}

fn update_w(
    x: &TermDocMatrix,
    w: &mut Array2<f64>,
    h: &Array2<f64>,
    two_alpha_w_scaled: f64,
) {
    let h_t = h.t().to_owned(); // n x rank
    let numerator = x.mul_dense(&h_t); // X H^T, d x rank
    let hht = h.dot(&h_t);
    let mut denominator = w.dot(&hht);
    if two_alpha_w_scaled > 0.0 {
        Zip::from(&mut denominator)
            .and(&*w)
            .for_each(|den, &wv| *den += two_alpha_w_scaled * wv);
    }
    Zip::from(w)
        .and(&numerator)
        .and(&denominator)
        .for_each(|wv, &num, &den| *wv *= num / den.max(DENOM_FLOOR));
}

/// Factorizes `x` into nonnegative `w` (d x rank) and `h` (rank x n),
/// stopping at `max_iter` iterations or when the relative objective change
/// drops below `tol`.
pub fn factorize(x: &TermDocMatrix, cfg: &NmfConfig) -> Result<NmfModel, NmfError> {
    cfg.validate()?;
    let max_rank = x.n_rows().min(x.n_cols());
    if cfg.rank > max_rank {
        return Err(NmfError::RankTooLarge {
            rank: cfg.rank,
            max_rank,
        });
    }
    if x.fro_norm_sq() == 0.0 {
        return Err(NmfError::DegenerateInput);
    }

    let (mut w, mut h) = match cfg.init {
        NmfInit::Nndsvd => nndsvd_init(x, cfg.rank, cfg.seed),
        NmfInit::Random => random_init(x, cfg.rank, cfg.seed),
    };

    let n_samples = x.n_cols() as f64;
    let two_alpha_w = 2.0 * cfg.alpha_w * n_samples;
    let two_alpha_h = 2.0 * cfg.alpha_h * n_samples;

    let mut trace = Vec::with_capacity(cfg.max_iter + 1);
    trace.push(objective(x, &w, &h, cfg.alpha_w, cfg.alpha_h));
    for _ in 0..cfg.max_iter {
        update_h(x, &w, &mut h, two_alpha_h);
        update_w(x, &mut w, &h, two_alpha_w);
        let current = objective(x, &w, &h, cfg.alpha_w, cfg.alpha_h);
        let previous = *trace.last().unwrap();
        trace.push(current);
        if (previous - current).abs() <= cfg.tol * previous.max(f64::MIN_POSITIVE) {
            break;
        }
    }

    Ok(NmfModel {
        w,
        h,
        config: *cfg,
        objective_trace: trace,
    })
}

/// Re-encodes new documents against a fixed dictionary: runs the `h` update
/// alone until the fit objective stabilizes. All-zero input columns come
/// back as all-zero codings.
pub fn transform(
    w: &Array2<f64>,
    x_new: &TermDocMatrix,
    cfg: &NmfConfig,
) -> Result<Array2<f64>, NmfError> {
    cfg.validate()?;
    if w.nrows() != x_new.n_rows() {
        return Err(NmfError::DimensionMismatch(format!(
            "dictionary has {} rows but input has {} rows",
            w.nrows(),
            x_new.n_rows()
        )));
    }
    let rank = w.ncols();
    let n = x_new.n_cols();
    let n_samples = n as f64;
    let two_alpha_h = 2.0 * cfg.alpha_h * n_samples;

    // Flat positive start; the first update zeroes coordinates with zero
    // numerator, which handles all-zero columns.
    let start = (x_new.mean() / rank as f64).sqrt();
    let mut h = Array2::<f64>::from_elem((rank, n), start);
    if start == 0.0 {
        return Ok(h);
    }

    let mut previous = objective(x_new, w, &h, 0.0, cfg.alpha_h);
    for _ in 0..cfg.max_iter {
        update_h(x_new, w, &mut h, two_alpha_h);
        let current = objective(x_new, w, &h, 0.0, cfg.alpha_h);
        let done = (previous - current).abs() <= cfg.tol * previous.max(f64::MIN_POSITIVE);
        previous = current;
        if done {
            break;
        }
    }
    Ok(h)
}

/// One topic's slice of the corpus after a threshold split.
#[derive(Debug, Clone)]
pub struct SubMatrix {
    pub matrix: TermDocMatrix,
    /// Original column index of each kept column.
    pub column_map: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SplitRule {
    /// Keep columns whose coding meets a fixed value.
    AboveValue(f64),
    /// Keep columns whose coding meets the row mean plus `k` population
    /// standard deviations.
    MeanPlusKStd(f64),
}

fn row_threshold(row: ndarray::ArrayView1<f64>, rule: &SplitRule) -> f64 {
    match rule {
        SplitRule::AboveValue(v) => *v,
        SplitRule::MeanPlusKStd(k) => {
            let n = row.len() as f64;
            let mean = row.sum() / n;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            mean + k * var.sqrt()
        }
    }
}

/// Splits `x` by topic: for each row of `h`, keeps the columns whose coding
/// passes the rule's threshold (inclusive). Columns may appear in several
/// submatrices or in none.
pub fn hierarchical_split(
    x: &TermDocMatrix,
    h: &Array2<f64>,
    rule: &SplitRule,
) -> Result<Vec<SubMatrix>, NmfError> {
    if h.ncols() != x.n_cols() {
        return Err(NmfError::DimensionMismatch(format!(
            "coding has {} columns but matrix has {}",
            h.ncols(),
            x.n_cols()
        )));
    }
    Ok((0..h.nrows())
        .map(|topic| {
            let row = h.row(topic);
            let threshold = row_threshold(row, rule);
            let column_map: Vec<usize> = (0..x.n_cols())
                .filter(|&j| row[j] >= threshold)
                .collect();
            SubMatrix {
                matrix: x.select_columns(&column_map),
                column_map,
            }
        })
        .collect())
}

/// Top `n_words` vocabulary terms per topic by dictionary weight,
/// descending; ties break lexicographically.
pub fn top_keywords(
    w: &Array2<f64>,
    vocab: &Vocabulary,
    n_words: usize,
) -> Result<Vec<Vec<String>>, NmfError> {
    if w.nrows() != vocab.len() {
        return Err(NmfError::DimensionMismatch(format!(
            "dictionary has {} rows but vocabulary has {} terms",
            w.nrows(),
            vocab.len()
        )));
    }
    Ok((0..w.ncols())
        .map(|topic| {
            let mut ranked: Vec<usize> = (0..w.nrows()).collect();
            ranked.sort_by(|&a, &b| {
                w[(b, topic)]
                    .partial_cmp(&w[(a, topic)])
                    .unwrap()
                    .then_with(|| vocab.term(a).cmp(vocab.term(b)))
            });
            ranked
                .into_iter()
                .take(n_words)
                .map(|i| vocab.term(i).to_string())
                .collect()
        })
        .collect())
}

#[derive(Serialize, Deserialize)]
struct DenseMatrixFile {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrixFile {
    fn from_array(a: &Array2<f64>) -> Self {
        DenseMatrixFile {
            rows: a.nrows(),
            cols: a.ncols(),
            data: a.iter().copied().collect(),
        }
    }

    fn into_array(self) -> Result<Array2<f64>, NmfError> {
        Array2::from_shape_vec((self.rows, self.cols), self.data)
            .map_err(|e| NmfError::DimensionMismatch(e.to_string()))
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    config: NmfConfig,
    vocab_hash: String,
    objective_trace: Vec<f64>,
    w: DenseMatrixFile,
    h: DenseMatrixFile,
}

/// Persists the factorization plus the hash of the vocabulary it was
/// trained against.
pub fn save_model(model: &NmfModel, vocab_hash: &str, path: &Path) -> Result<(), NmfError> {
    let file = ModelFile {
        format_version: MODEL_FORMAT_VERSION,
        config: model.config,
        vocab_hash: vocab_hash.to_string(),
        objective_trace: model.objective_trace.clone(),
        w: DenseMatrixFile::from_array(&model.w),
        h: DenseMatrixFile::from_array(&model.h),
    };
    let out = std::fs::File::create(path)?;
    serde_json::to_writer(std::io::BufWriter::new(out), &file)?;
    Ok(())
}

/// Loads a model saved by [`save_model`]; returns the model and the stored
/// vocabulary hash.
pub fn load_model(path: &Path) -> Result<(NmfModel, String), NmfError> {
    let file: ModelFile =
        serde_json::from_reader(std::io::BufReader::new(std::fs::File::open(path)?))?;
    if file.format_version != MODEL_FORMAT_VERSION {
        return Err(NmfError::FormatVersion(file.format_version));
    }
    Ok((
        NmfModel {
            w: file.w.into_array()?,
            h: file.h.into_array()?,
            config: file.config,
            objective_trace: file.objective_trace,
        },
        file.vocab_hash,
    ))
}
