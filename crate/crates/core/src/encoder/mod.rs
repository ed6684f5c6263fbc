//! Tokenization, pooling, and the trainable sentence-encoder backend.

mod model_io;
mod transformer;

pub use model_io::{load_model, save_model};
pub use transformer::TinyTransformer;

use crate::error::{CoreError, Result};
use ndarray::{Array1, Array2, Array3, ArrayView1, ArrayView2, ArrayView3};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const PAD_ID: usize = 0;
pub const CLS_ID: usize = 1;
pub const UNK_ID: usize = 2;
pub const RESERVED_TOKENS: usize = 3;

/// Whitespace-token vocabulary with reserved PAD/CLS/UNK entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vocab {
    token_to_id: BTreeMap<String, usize>,
}

impl Vocab {
    /// Build from an iterator of tokens; first occurrence wins.
    pub fn build<'a>(tokens: impl IntoIterator<Item = &'a str>) -> Vocab {
        let mut token_to_id = BTreeMap::new();
        let mut next = RESERVED_TOKENS;
        for tok in tokens {
            if !token_to_id.contains_key(tok) {
                token_to_id.insert(tok.to_string(), next);
                next += 1;
            }
        }
        Vocab { token_to_id }
    }

    pub fn from_texts<'a>(texts: impl IntoIterator<Item = &'a str>) -> Vocab {
        let mut seen = Vec::new();
        for text in texts {
            for tok in text.split_whitespace() {
                seen.push(tok);
            }
        }
        Vocab::build(seen)
    }

    pub fn id(&self, token: &str) -> usize {
        self.token_to_id.get(token).copied().unwrap_or(UNK_ID)
    }

    /// Total id space including reserved entries.
    pub fn size(&self) -> usize {
        RESERVED_TOKENS + self.token_to_id.len()
    }

    pub fn tokens(&self) -> impl Iterator<Item = (&str, usize)> {
        self.token_to_id.iter().map(|(t, id)| (t.as_str(), *id))
    }
}

/// Padded id/mask matrices for a batch of texts.
#[derive(Debug, Clone)]
pub struct TokenBatch {
    /// n×L token ids.
    pub ids: Array2<usize>,
    /// n×L, 1.0 for real tokens (CLS included), 0.0 for padding.
    pub mask: Array2<f32>,
    pub lengths: Vec<usize>,
    /// Count of texts that were truncated to fit `max_len`.
    pub truncated: usize,
}

/// Whitespace tokenization with a prepended CLS token, truncation to
/// `max_len`, and right padding.
pub fn tokenize(texts: &[&str], vocab: &Vocab, max_len: usize) -> TokenBatch {
    assert!(max_len >= 2, "max_len must allow CLS plus one token");
    let mut rows: Vec<Vec<usize>> = Vec::with_capacity(texts.len());
    let mut truncated = 0;
    for text in texts {
        let mut ids = vec![CLS_ID];
        let mut overflow = false;
        for tok in text.split_whitespace() {
            if ids.len() == max_len {
                overflow = true;
                break;
            }
            ids.push(vocab.id(tok));
        }
        if overflow {
            truncated += 1;
        }
        rows.push(ids);
    }
    let width = rows.iter().map(Vec::len).max().unwrap_or(1);
    let n = rows.len();
    let mut ids = Array2::from_elem((n, width), PAD_ID);
    let mut mask = Array2::zeros((n, width));
    let mut lengths = Vec::with_capacity(n);
    for (i, row) in rows.iter().enumerate() {
        lengths.push(row.len());
        for (j, &id) in row.iter().enumerate() {
            ids[(i, j)] = id;
            mask[(i, j)] = 1.0;
        }
    }
    TokenBatch {
        ids,
        mask,
        lengths,
        truncated,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PoolingStrategy {
    Mean,
    Cls,
}

impl std::fmt::Display for PoolingStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PoolingStrategy::Mean => write!(f, "mean"),
            PoolingStrategy::Cls => write!(f, "cls"),
        }
    }
}

/// Reduce per-token vectors (L×d) to one sentence vector.
pub fn pool(
    token_vectors: ArrayView2<f32>,
    mask: ArrayView1<f32>,
    strategy: PoolingStrategy,
) -> Result<Array1<f32>> {
    let count: f32 = mask.sum();
    if count == 0.0 {
        return Err(CoreError::Degenerate("pool: all-zero mask".to_string()));
    }
    match strategy {
        PoolingStrategy::Cls => Ok(token_vectors.row(0).to_owned()),
        PoolingStrategy::Mean => {
            let mut acc = Array1::<f32>::zeros(token_vectors.ncols());
            for (t, row) in token_vectors.outer_iter().enumerate() {
                if mask[t] != 0.0 {
                    acc = acc + row;
                }
            }
            Ok(acc / count)
        }
    }
}

/// Pool a whole batch of token vectors (n×L×d) into n×d.
pub fn pool_batch(
    token_vectors: ArrayView3<f32>,
    mask: &Array2<f32>,
    strategy: PoolingStrategy,
) -> Result<Array2<f32>> {
    let (n, _, d) = token_vectors.dim();
    let mut out = Array2::<f32>::zeros((n, d));
    for i in 0..n {
        let v = pool(token_vectors.index_axis(ndarray::Axis(0), i), mask.row(i), strategy)?;
        out.row_mut(i).assign(&v);
    }
    Ok(out)
}

/// Distribute sentence-vector gradients back to token positions,
/// inverse of `pool_batch`.
pub fn pool_backward(
    grad_pooled: ArrayView2<f32>,
    mask: &Array2<f32>,
    strategy: PoolingStrategy,
    seq_len: usize,
) -> Array3<f32> {
    let (n, d) = grad_pooled.dim();
    let mut grad = Array3::<f32>::zeros((n, seq_len, d));
    for i in 0..n {
        match strategy {
            PoolingStrategy::Cls => {
                for k in 0..d {
                    grad[(i, 0, k)] = grad_pooled[(i, k)];
                }
            }
            PoolingStrategy::Mean => {
                let count: f32 = mask.row(i).sum();
                for t in 0..seq_len {
                    if mask[(i, t)] != 0.0 {
                        for k in 0..d {
                            grad[(i, t, k)] = grad_pooled[(i, k)] / count;
                        }
                    }
                }
            }
        }
    }
    grad
}

/// Batch of sentence vectors.
#[derive(Debug, Clone)]
pub struct EmbeddingBatch {
    /// n×d sentence vectors.
    pub vectors: Array2<f64>,
    pub normalized: bool,
}

/// Cosine similarity of two non-zero vectors.
pub fn cosine(u: ArrayView1<f64>, v: ArrayView1<f64>) -> Result<f64> {
    if u.len() != v.len() {
        return Err(CoreError::ShapeMismatch(format!(
            "cosine: {} vs {}",
            u.len(),
            v.len()
        )));
    }
    let nu = u.dot(&u).sqrt();
    let nv = v.dot(&v).sqrt();
    if nu == 0.0 {
        return Err(CoreError::ZeroNorm(0));
    }
    if nv == 0.0 {
        return Err(CoreError::ZeroNorm(1));
    }
    Ok(u.dot(&v) / (nu * nv))
}

/// Architecture of the reference backend.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderSpec {
    pub vocab_size: usize,
    pub dim: usize,
    pub layers: usize,
    pub heads: usize,
    pub ffn_dim: usize,
    pub max_len: usize,
}

impl EncoderSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dim % self.heads != 0 {
            return Err(CoreError::Config(format!(
                "dim {} not divisible by heads {}",
                self.dim, self.heads
            )));
        }
        if self.max_len < 2 {
            return Err(CoreError::Config("max_len must be >= 2".to_string()));
        }
        Ok(())
    }
}

impl Default for EncoderSpec {
    fn default() -> Self {
        EncoderSpec {
            vocab_size: 0,
            dim: 64,
            layers: 2,
            heads: 4,
            ffn_dim: 128,
            max_len: 32,
        }
    }
}

/// Gradient-trainable token-vector producer. The reference backend is
/// [`TinyTransformer`]; pretrained encoders can plug in behind the
/// same surface.
pub trait EncoderBackend {
    fn dim(&self) -> usize;
    fn max_len(&self) -> usize;
    /// Token vectors, n×L×d. With `training` the activations needed by
    /// `backward` are cached.
    fn forward(&mut self, batch: &TokenBatch, training: bool) -> Array3<f32>;
    /// Accumulate parameter gradients from token-vector gradients for
    /// the most recent training-mode forward.
    fn backward(&mut self, grad_output: ArrayView3<f32>, batch: &TokenBatch);
    fn zero_grad(&mut self);
    /// Visit (parameter, gradient) slices in a stable order.
    fn for_each_param(&mut self, f: &mut dyn FnMut(&mut [f32], &mut [f32]));
}

/// A backend plus the vocabulary and pooling default it was trained
/// with.
#[derive(Debug, Clone)]
pub struct SentenceModel {
    pub backend: TinyTransformer,
    pub vocab: Vocab,
    pub pooling: PoolingStrategy,
}

impl SentenceModel {
    pub fn new(spec: EncoderSpec, vocab: Vocab, pooling: PoolingStrategy, seed: u64) -> Result<SentenceModel> {
        Self::with_init(spec, vocab, pooling, seed, None)
    }

    /// Like [`SentenceModel::new`] with an explicit parameter
    /// initialization scale (`None` keeps the backend default).
    pub fn with_init(
        spec: EncoderSpec,
        vocab: Vocab,
        pooling: PoolingStrategy,
        seed: u64,
        init_std: Option<f32>,
    ) -> Result<SentenceModel> {
        let mut spec = spec;
        spec.vocab_size = vocab.size();
        spec.validate()?;
        let backend = match init_std {
            Some(std) => TinyTransformer::with_init(spec, seed, std),
            None => TinyTransformer::new(spec, seed),
        };
        Ok(SentenceModel { backend, vocab, pooling })
    }

    /// Encode texts into sentence vectors (inference mode).
    pub fn encode(
        &mut self,
        texts: &[&str],
        pooling: PoolingStrategy,
        normalize: bool,
    ) -> Result<EmbeddingBatch> {
        if texts.is_empty() {
            return Err(CoreError::EmptyInput("encode: no texts".to_string()));
        }
        let batch = tokenize(texts, &self.vocab, self.backend.max_len());
        let token_vectors = self.backend.forward(&batch, false);
        let pooled = pool_batch(token_vectors.view(), &batch.mask, pooling)?;
        let mut vectors = pooled.mapv(|x| x as f64);
        if normalize {
            for (i, mut row) in vectors.outer_iter_mut().enumerate() {
                let norm = row.dot(&row).sqrt();
                if norm == 0.0 {
                    return Err(CoreError::ZeroNorm(i));
                }
                row.mapv_inplace(|x| x / norm);
            }
        }
        Ok(EmbeddingBatch {
            vectors,
            normalized: normalize,
        })
    }

    pub fn encode_default(&mut self, texts: &[&str]) -> Result<EmbeddingBatch> {
        let pooling = self.pooling;
        self.encode(texts, pooling, false)
    }
}
