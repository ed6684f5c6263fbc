//! Evaluation protocols: embedding-similarity correlation, cross-
//! lingual pair matrices, and KNN classification.

use crate::corpus::{LabeledDoc, Split, StsPair};
use crate::encoder::{cosine, PoolingStrategy, SentenceModel};
use crate::error::{CoreError, Result};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub spearman: f64,
    pub pearson: f64,
    pub n: usize,
}

/// Cross-lingual Spearman grid. Row language supplies sentence1,
/// column language sentence2; the diagonal is the monolingual score.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CrossLingualMatrix {
    pub languages: Vec<String>,
    pub scores: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KnnConfig {
    /// Minkowski order.
    pub p: f64,
    pub k_grid: Vec<usize>,
}

impl Default for KnnConfig {
    fn default() -> Self {
        KnnConfig {
            p: 2.0,
            k_grid: (1..=25).step_by(2).collect(),
        }
    }
}

fn check_correlation_input(xs: &[f64], ys: &[f64]) -> Result<()> {
    if xs.len() != ys.len() {
        return Err(CoreError::ShapeMismatch(format!(
            "correlation: {} vs {}",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 2 {
        return Err(CoreError::Degenerate("correlation: n < 2".to_string()));
    }
    let const_x = xs.windows(2).all(|w| w[0] == w[1]);
    let const_y = ys.windows(2).all(|w| w[0] == w[1]);
    if const_x || const_y {
        return Err(CoreError::Degenerate(
            "correlation: constant input sequence".to_string(),
        ));
    }
    Ok(())
}

/// Product-moment correlation.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    check_correlation_input(xs, ys)?;
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    Ok(sxy / (sxx.sqrt() * syy.sqrt()))
}

/// Average ranks (ties get the mean of the positions they occupy).
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).unwrap());
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        // positions i..=j share the same value; 1-based mean rank
        let mean_rank = (i + j) as f64 / 2.0 + 1.0;
        for &orig in &idx[i..=j] {
            ranks[orig] = mean_rank;
        }
        i = j + 1;
    }
    ranks
}

/// Pearson correlation of average-rank-transformed sequences.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64> {
    check_correlation_input(xs, ys)?;
    pearson(&average_ranks(xs), &average_ranks(ys))
}

/// Correlate cosine similarities of encoded pairs against gold scores.
pub fn eval_sts(
    model: &mut SentenceModel,
    pairs: &[StsPair],
    pooling: PoolingStrategy,
) -> Result<CorrelationResult> {
    if pairs.is_empty() {
        return Err(CoreError::EmptyInput("eval_sts: no pairs".to_string()));
    }
    let s1: Vec<&str> = pairs.iter().map(|p| p.sentence1.as_str()).collect();
    let s2: Vec<&str> = pairs.iter().map(|p| p.sentence2.as_str()).collect();
    let e1 = model.encode(&s1, pooling, false)?;
    let e2 = model.encode(&s2, pooling, false)?;
    let mut predicted = Vec::with_capacity(pairs.len());
    for i in 0..pairs.len() {
        predicted.push(cosine(e1.vectors.row(i), e2.vectors.row(i))?);
    }
    let gold: Vec<f64> = pairs.iter().map(|p| p.gold).collect();
    Ok(CorrelationResult {
        spearman: spearman(&predicted, &gold)?,
        pearson: pearson(&predicted, &gold)?,
        n: pairs.len(),
    })
}

/// Pair sentence1 from language `a` with sentence2 from language `b`
/// at matching pair_ids; gold scores are shared via translation
/// alignment.
pub fn build_crosslingual_pairs(
    sts_by_lang: &BTreeMap<String, Vec<StsPair>>,
    a: &str,
    b: &str,
) -> Result<Vec<StsPair>> {
    let pa = sts_by_lang
        .get(a)
        .ok_or_else(|| CoreError::Misaligned(format!("language {a} missing")))?;
    let pb = sts_by_lang
        .get(b)
        .ok_or_else(|| CoreError::Misaligned(format!("language {b} missing")))?;
    if pa.len() != pb.len() {
        return Err(CoreError::Misaligned(format!(
            "pair count mismatch: {a} has {}, {b} has {}",
            pa.len(),
            pb.len()
        )));
    }
    let mut out = Vec::with_capacity(pa.len());
    for (x, y) in pa.iter().zip(pb) {
        if x.pair_id != y.pair_id {
            return Err(CoreError::Misaligned(format!(
                "pair_id mismatch: {} vs {}",
                x.pair_id, y.pair_id
            )));
        }
        out.push(StsPair {
            sentence1: x.sentence1.clone(),
            sentence2: y.sentence2.clone(),
            gold: x.gold,
            lang1: a.to_string(),
            lang2: b.to_string(),
            pair_id: x.pair_id,
        });
    }
    Ok(out)
}

/// Full L×L Spearman grid over cross-lingual pair sets. Row language
/// supplies sentence1, so the matrix may be asymmetric.
pub fn eval_crosslingual_matrix(
    model: &mut SentenceModel,
    sts_by_lang: &BTreeMap<String, Vec<StsPair>>,
    languages: &[String],
    pooling: PoolingStrategy,
) -> Result<CrossLingualMatrix> {
    let mut scores = Vec::with_capacity(languages.len());
    for a in languages {
        let mut row = Vec::with_capacity(languages.len());
        for b in languages {
            let pairs = build_crosslingual_pairs(sts_by_lang, a, b)?;
            let result = eval_sts(model, &pairs, pooling)?;
            row.push(result.spearman);
        }
        scores.push(row);
    }
    Ok(CrossLingualMatrix {
        languages: languages.to_vec(),
        scores,
    })
}

pub fn minkowski(u: &[f64], v: &[f64], p: f64) -> f64 {
    u.iter()
        .zip(v)
        .map(|(a, b)| (a - b).abs().powf(p))
        .sum::<f64>()
        .powf(1.0 / p)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct KnnResult {
    pub accuracy: f64,
    pub chosen_k: usize,
    pub validation_accuracy: f64,
}

/// Classify one embedded query against the training set.
///
/// Neighborhood: the k nearest by Minkowski-p distance, expanded to
/// include every point tied with the k-th distance. Majority vote;
/// vote ties are broken by the single nearest neighbor's label.
pub fn knn_classify<'a>(
    train: &'a [(Vec<f64>, &'a str)],
    query: &[f64],
    k: usize,
    p: f64,
) -> &'a str {
    let mut dists: Vec<(f64, usize)> = train
        .iter()
        .enumerate()
        .map(|(i, (v, _))| (minkowski(v, query, p), i))
        .collect();
    dists.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    let kth = dists[k.min(dists.len()) - 1].0;
    let neighborhood: Vec<&(f64, usize)> =
        dists.iter().take_while(|(d, _)| *d <= kth).collect();
    let mut votes: HashMap<&str, usize> = HashMap::new();
    for (_, i) in &neighborhood {
        *votes.entry(train[*i].1).or_insert(0) += 1;
    }
    let top = votes.values().max().copied().unwrap_or(0);
    let tied: Vec<&str> = votes
        .iter()
        .filter(|(_, &c)| c == top)
        .map(|(l, _)| *l)
        .collect();
    if tied.len() == 1 {
        tied[0]
    } else {
        // nearest neighbor among the tied labels decides
        let (_, nearest_idx) = dists
            .iter()
            .find(|(_, i)| tied.contains(&train[*i].1))
            .unwrap();
        train[*nearest_idx].1
    }
}

fn embed_docs(
    model: &mut SentenceModel,
    docs: &[&LabeledDoc],
    pooling: PoolingStrategy,
) -> Result<Vec<Vec<f64>>> {
    let texts: Vec<&str> = docs.iter().map(|d| d.text.as_str()).collect();
    let emb = model.encode(&texts, pooling, false)?;
    Ok(emb.vectors.outer_iter().map(|r| r.to_vec()).collect())
}

/// Embed all splits, sweep `k_grid` on the validation split, and
/// report test accuracy at the best k (validation ties pick the
/// smallest k).
pub fn eval_classification_knn(
    model: &mut SentenceModel,
    docs: &[LabeledDoc],
    cfg: &KnnConfig,
    pooling: PoolingStrategy,
) -> Result<KnnResult> {
    let train_docs: Vec<&LabeledDoc> = docs.iter().filter(|d| d.split == Split::Train).collect();
    let val_docs: Vec<&LabeledDoc> = docs.iter().filter(|d| d.split == Split::Val).collect();
    let test_docs: Vec<&LabeledDoc> = docs.iter().filter(|d| d.split == Split::Test).collect();
    for (name, split) in [("train", &train_docs), ("val", &val_docs), ("test", &test_docs)] {
        if split.is_empty() {
            return Err(CoreError::EmptyInput(format!(
                "eval_classification_knn: {name} split empty"
            )));
        }
    }
    let train_emb = embed_docs(model, &train_docs, pooling)?;
    let val_emb = embed_docs(model, &val_docs, pooling)?;
    let test_emb = embed_docs(model, &test_docs, pooling)?;

    let train: Vec<(Vec<f64>, &str)> = train_emb
        .into_iter()
        .zip(train_docs.iter().map(|d| d.label.as_str()))
        .collect();

    let accuracy_at = |k: usize, queries: &[Vec<f64>], docs: &[&LabeledDoc]| -> f64 {
        let correct = queries
            .iter()
            .zip(docs)
            .filter(|(q, d)| knn_classify(&train, q, k, cfg.p) == d.label)
            .count();
        correct as f64 / docs.len() as f64
    };

    let mut chosen_k = None;
    let mut best_val = -1.0;
    for &k in &cfg.k_grid {
        if k == 0 || k > train.len() {
            continue;
        }
        let acc = accuracy_at(k, &val_emb, &val_docs);
        if acc > best_val {
            best_val = acc;
            chosen_k = Some(k);
        }
    }
    let chosen_k = chosen_k.ok_or_else(|| {
        CoreError::Config("eval_classification_knn: no usable k in grid".to_string())
    })?;
    let accuracy = accuracy_at(chosen_k, &test_emb, &test_docs);
    Ok(KnnResult {
        accuracy,
        chosen_k,
        validation_accuracy: best_val,
    })
}
