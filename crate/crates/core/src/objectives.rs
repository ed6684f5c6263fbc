//! Training objectives: Multiple Negatives Ranking Loss over in-batch
//! candidates, and cosine-similarity regression against gold scores.
//! Both return exact gradients with respect to every input row.

use crate::corpus::STS_SCALE;
use crate::error::{CoreError, Result};
use ndarray::{Array1, Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MnrlConfig {
    /// Multiplier on cosine scores before the softmax.
    pub scale: f64,
}

impl Default for MnrlConfig {
    fn default() -> Self {
        MnrlConfig { scale: 20.0 }
    }
}

fn row_norms(m: &Array2<f64>, which: &str) -> Result<Array1<f64>> {
    let mut norms = Array1::zeros(m.nrows());
    for (i, row) in m.outer_iter().enumerate() {
        let n = row.dot(&row).sqrt();
        if n == 0.0 {
            return Err(CoreError::ZeroNorm(i));
        }
        let _ = which;
        norms[i] = n;
    }
    Ok(norms)
}

fn check_same_shape(a: &Array2<f64>, b: &Array2<f64>, what: &str) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(CoreError::ShapeMismatch(format!(
            "{what}: {:?} vs {:?}",
            a.dim(),
            b.dim()
        )));
    }
    Ok(())
}

/// d(cosine)/d(u) and d(cosine)/d(v) for unit-agnostic rows.
fn cosine_grads(
    u: ArrayView1<f64>,
    v: ArrayView1<f64>,
    nu: f64,
    nv: f64,
    cos: f64,
) -> (Array1<f64>, Array1<f64>) {
    let du = &v / (nu * nv) - &(&u * (cos / (nu * nu)));
    let dv = &u / (nu * nv) - &(&v * (cos / (nv * nv)));
    (du, dv)
}

#[derive(Debug, Clone)]
pub struct MnrlOutput {
    pub loss: f64,
    pub grad_anchors: Array2<f64>,
    pub grad_positives: Array2<f64>,
    pub grad_hard_negatives: Array2<f64>,
}

/// Multiple Negatives Ranking Loss. Candidates for every anchor row i
/// are all in-batch positives and all in-batch hard negatives; the
/// true class for row i is its own positive (column i of the n×2n
/// score matrix). Scores are scaled cosines; the loss is mean softmax
/// cross-entropy.
pub fn mnr_loss(
    anchors: &Array2<f64>,
    positives: &Array2<f64>,
    hard_negatives: &Array2<f64>,
    cfg: &MnrlConfig,
) -> Result<MnrlOutput> {
    check_same_shape(anchors, positives, "mnr_loss anchors/positives")?;
    check_same_shape(anchors, hard_negatives, "mnr_loss anchors/hard_negatives")?;
    let n = anchors.nrows();
    if n == 0 {
        return Err(CoreError::EmptyInput("mnr_loss: empty batch".to_string()));
    }

    let norm_a = row_norms(anchors, "anchors")?;
    let norm_p = row_norms(positives, "positives")?;
    let norm_n = row_norms(hard_negatives, "hard_negatives")?;

    // candidate j: positives for j < n, hard negatives for j >= n
    let cand_row = |j: usize| {
        if j < n {
            (positives.row(j), norm_p[j])
        } else {
            (hard_negatives.row(j - n), norm_n[j - n])
        }
    };

    let mut cosines = Array2::<f64>::zeros((n, 2 * n));
    for i in 0..n {
        let a = anchors.row(i);
        for j in 0..2 * n {
            let (c, nc) = cand_row(j);
            cosines[(i, j)] = a.dot(&c) / (norm_a[i] * nc);
        }
    }
    let scores = &cosines * cfg.scale;

    // softmax cross-entropy with true class i, averaged over rows
    let mut loss = 0.0;
    let mut dscore = Array2::<f64>::zeros((n, 2 * n));
    for i in 0..n {
        let row = scores.row(i);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Array1<f64> = row.mapv(|s| (s - max).exp());
        let denom = exps.sum();
        loss += denom.ln() + max - scores[(i, i)];
        for j in 0..2 * n {
            let softmax = exps[j] / denom;
            dscore[(i, j)] = (softmax - if j == i { 1.0 } else { 0.0 }) / n as f64;
        }
    }
    loss /= n as f64;

    let mut grad_anchors = Array2::<f64>::zeros(anchors.raw_dim());
    let mut grad_cands = Array2::<f64>::zeros((2 * n, anchors.ncols()));
    for i in 0..n {
        let a = anchors.row(i);
        for j in 0..2 * n {
            let w = dscore[(i, j)] * cfg.scale;
            if w == 0.0 {
                continue;
            }
            let (c, nc) = cand_row(j);
            let (da, dc) = cosine_grads(a, c, norm_a[i], nc, cosines[(i, j)]);
            grad_anchors.row_mut(i).scaled_add(w, &da);
            grad_cands.row_mut(j).scaled_add(w, &dc);
        }
    }
    let (gp, gn) = grad_cands.view().split_at(Axis(0), n);
    Ok(MnrlOutput {
        loss,
        grad_anchors,
        grad_positives: gp.to_owned(),
        grad_hard_negatives: gn.to_owned(),
    })
}

#[derive(Debug, Clone)]
pub struct CosineRegressionOutput {
    pub loss: f64,
    pub grad_u: Array2<f64>,
    pub grad_v: Array2<f64>,
}

/// Mean squared error between per-row cosine similarity and gold
/// scores mapped from [0,5] to [0,1].
pub fn cosine_regression_loss(
    u: &Array2<f64>,
    v: &Array2<f64>,
    gold: &[f64],
) -> Result<CosineRegressionOutput> {
    check_same_shape(u, v, "cosine_regression_loss")?;
    let n = u.nrows();
    if n == 0 {
        return Err(CoreError::EmptyInput(
            "cosine_regression_loss: empty batch".to_string(),
        ));
    }
    if gold.len() != n {
        return Err(CoreError::ShapeMismatch(format!(
            "gold length {} vs batch {n}",
            gold.len()
        )));
    }
    for (i, &g) in gold.iter().enumerate() {
        if !(0.0..=STS_SCALE).contains(&g) {
            return Err(CoreError::Degenerate(format!(
                "gold[{i}] = {g} outside [0, {STS_SCALE}]"
            )));
        }
    }
    let norm_u = row_norms(u, "u")?;
    let norm_v = row_norms(v, "v")?;

    let mut loss = 0.0;
    let mut grad_u = Array2::<f64>::zeros(u.raw_dim());
    let mut grad_v = Array2::<f64>::zeros(v.raw_dim());
    for i in 0..n {
        let ui = u.row(i);
        let vi = v.row(i);
        let cos = ui.dot(&vi) / (norm_u[i] * norm_v[i]);
        let target = gold[i] / STS_SCALE;
        let diff = cos - target;
        loss += diff * diff;
        let w = 2.0 * diff / n as f64;
        let (du, dv) = cosine_grads(ui, vi, norm_u[i], norm_v[i], cos);
        grad_u.row_mut(i).scaled_add(w, &du);
        grad_v.row_mut(i).scaled_add(w, &dv);
    }
    loss /= n as f64;
    Ok(CosineRegressionOutput { loss, grad_u, grad_v })
}
