//! Two-step fine-tuning: NLI triplets with Multiple Negatives Ranking
//! Loss, then STS regression with cosine similarity loss, both under
//! AdamW with seeded shuffling.

use crate::corpus::{StsPair, Triplet};
use crate::encoder::{
    pool_backward, pool_batch, save_model, tokenize, EncoderBackend, PoolingStrategy,
    SentenceModel,
};
use crate::error::{CoreError, Result};
use crate::objectives::{cosine_regression_loss, mnr_loss, MnrlConfig};
use crate::rng::rng_for;
use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainStep {
    Nli,
    Sts,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TrainConfig {
    pub step: TrainStep,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub seed: u64,
    pub pooling: PoolingStrategy,
    pub mnrl: MnrlConfig,
}

impl TrainConfig {
    /// Step-1 defaults: 1 epoch, batch size 4, lr 2e-5.
    pub fn nli_defaults(seed: u64) -> TrainConfig {
        TrainConfig {
            step: TrainStep::Nli,
            epochs: 1,
            batch_size: 4,
            learning_rate: 2e-5,
            weight_decay: 0.01,
            seed,
            pooling: PoolingStrategy::Mean,
            mnrl: MnrlConfig::default(),
        }
    }

    /// Step-2 defaults: 4 epochs, batch size 4, lr 2e-5.
    pub fn sts_defaults(seed: u64) -> TrainConfig {
        TrainConfig {
            step: TrainStep::Sts,
            epochs: 4,
            ..TrainConfig::nli_defaults(seed)
        }
    }

    fn validate(&self) -> Result<()> {
        if self.epochs < 1 || self.batch_size < 1 || self.learning_rate <= 0.0 {
            return Err(CoreError::Config(format!(
                "invalid train config: epochs {}, batch_size {}, lr {}",
                self.epochs, self.batch_size, self.learning_rate
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReport {
    pub step: TrainStep,
    pub epoch_mean_loss: Vec<f64>,
    pub steps: usize,
    #[serde(skip)]
    pub wall_time_secs: f64,
    pub config: TrainConfig,
    pub checkpoint: Option<PathBuf>,
}

impl TrainReport {
    /// Key-value lines plus machine-readable per-epoch rows.
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("step: {:?}\n", self.step));
        out.push_str(&format!("epochs: {}\n", self.config.epochs));
        out.push_str(&format!("batch_size: {}\n", self.config.batch_size));
        out.push_str(&format!("learning_rate: {}\n", self.config.learning_rate));
        out.push_str(&format!("weight_decay: {}\n", self.config.weight_decay));
        out.push_str(&format!("seed: {}\n", self.config.seed));
        out.push_str(&format!("pooling: {}\n", self.config.pooling));
        out.push_str(&format!("steps: {}\n", self.steps));
        for (e, loss) in self.epoch_mean_loss.iter().enumerate() {
            let step = match self.step {
                TrainStep::Nli => "nli",
                TrainStep::Sts => "sts",
            };
            out.push_str(&format!("{step}\t{e}\t{loss:.9}\n"));
        }
        out
    }
}

/// Decoupled-weight-decay adaptive optimizer (AdamW).
pub struct AdamW {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamW {
    pub fn new(lr: f64, weight_decay: f64) -> AdamW {
        AdamW {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn step(&mut self, backend: &mut dyn EncoderBackend) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        let mut slot = 0usize;
        let (beta1, beta2, eps, lr, wd) = (self.beta1, self.beta2, self.eps, self.lr, self.weight_decay);
        let (m, v) = (&mut self.m, &mut self.v);
        backend.for_each_param(&mut |p, g| {
            if m.len() == slot {
                m.push(vec![0.0; p.len()]);
                v.push(vec![0.0; p.len()]);
            }
            let ms = &mut m[slot];
            let vs = &mut v[slot];
            for i in 0..p.len() {
                let gi = g[i] as f64;
                ms[i] = beta1 * ms[i] + (1.0 - beta1) * gi;
                vs[i] = beta2 * vs[i] + (1.0 - beta2) * gi * gi;
                let mhat = ms[i] / bc1;
                let vhat = vs[i] / bc2;
                let pi = p[i] as f64;
                p[i] = (pi - lr * (mhat / (vhat.sqrt() + eps) + wd * pi)) as f32;
            }
            slot += 1;
        });
    }
}

/// Seeded epoch batching: shuffle all indices, then fixed-size chunks
/// with the ragged final batch kept.
fn epoch_batches(n: usize, batch_size: usize, seed: u64, label: &str) -> Vec<Vec<usize>> {
    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = rng_for(seed, label);
    indices.shuffle(&mut rng);
    indices.chunks(batch_size).map(|c| c.to_vec()).collect()
}

fn pooled_f64(pooled: &Array2<f32>) -> Array2<f64> {
    pooled.mapv(|x| x as f64)
}

fn grads_f32(grads: &Array2<f64>) -> Array2<f32> {
    grads.mapv(|x| x as f32)
}

/// Step 1: NLI triplets with Multiple Negatives Ranking Loss.
pub fn train_step1_nli(
    model: &mut SentenceModel,
    triplets: &[Triplet],
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    if cfg.step != TrainStep::Nli {
        return Err(CoreError::Config("train_step1_nli requires step = NLI".to_string()));
    }
    if triplets.is_empty() {
        return Err(CoreError::EmptyInput("train_step1_nli: no triplets".to_string()));
    }
    cfg.validate()?;
    let mut optimizer = AdamW::new(cfg.learning_rate, cfg.weight_decay);
    let started = Instant::now();
    let max_len = model.backend.max_len();
    let mut epoch_mean_loss = Vec::with_capacity(cfg.epochs);
    let mut steps = 0usize;
    for epoch in 0..cfg.epochs {
        let batches = epoch_batches(triplets.len(), cfg.batch_size, cfg.seed, &format!("nli-epoch-{epoch}"));
        let mut epoch_loss = 0.0;
        let mut batch_count = 0usize;
        for batch_idx in batches {
            let bn = batch_idx.len();
            let mut texts: Vec<&str> = Vec::with_capacity(3 * bn);
            for &i in &batch_idx {
                texts.push(&triplets[i].anchor);
            }
            for &i in &batch_idx {
                texts.push(&triplets[i].positive);
            }
            for &i in &batch_idx {
                texts.push(&triplets[i].hard_negative);
            }
            let batch = tokenize(&texts, &model.vocab, max_len);
            let token_vectors = model.backend.forward(&batch, true);
            let pooled = pool_batch(token_vectors.view(), &batch.mask, cfg.pooling)?;
            let pooled64 = pooled_f64(&pooled);

            let anchors = pooled64.slice(ndarray::s![0..bn, ..]).to_owned();
            let positives = pooled64.slice(ndarray::s![bn..2 * bn, ..]).to_owned();
            let negatives = pooled64.slice(ndarray::s![2 * bn..3 * bn, ..]).to_owned();
            let out = mnr_loss(&anchors, &positives, &negatives, &cfg.mnrl)?;
            if !out.loss.is_finite() {
                return Err(CoreError::NonFiniteLoss { step: steps, epoch, value: out.loss });
            }
            let grad_pooled = ndarray::concatenate(
                Axis(0),
                &[out.grad_anchors.view(), out.grad_positives.view(), out.grad_hard_negatives.view()],
            )
            .expect("gradient concat");

            let grad_tokens = pool_backward(
                grads_f32(&grad_pooled).view(),
                &batch.mask,
                cfg.pooling,
                token_vectors.dim().1,
            );
            model.backend.zero_grad();
            model.backend.backward(grad_tokens.view(), &batch);
            optimizer.step(&mut model.backend);

            epoch_loss += out.loss;
            batch_count += 1;
            steps += 1;
        }
        epoch_mean_loss.push(epoch_loss / batch_count as f64);
    }
    Ok(TrainReport {
        step: cfg.step,
        epoch_mean_loss,
        steps,
        wall_time_secs: started.elapsed().as_secs_f64(),
        config: *cfg,
        checkpoint: None,
    })
}

/// Step 2: STS pairs with cosine-similarity regression.
pub fn train_step2_sts(
    model: &mut SentenceModel,
    pairs: &[StsPair],
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    if cfg.step != TrainStep::Sts {
        return Err(CoreError::Config("train_step2_sts requires step = STS".to_string()));
    }
    if pairs.is_empty() {
        return Err(CoreError::EmptyInput("train_step2_sts: no pairs".to_string()));
    }
    cfg.validate()?;
    let mut optimizer = AdamW::new(cfg.learning_rate, cfg.weight_decay);
    let started = Instant::now();
    let max_len = model.backend.max_len();
    let mut epoch_mean_loss = Vec::with_capacity(cfg.epochs);
    let mut steps = 0usize;
    for epoch in 0..cfg.epochs {
        let batches = epoch_batches(pairs.len(), cfg.batch_size, cfg.seed, &format!("sts-epoch-{epoch}"));
        let mut epoch_loss = 0.0;
        let mut batch_count = 0usize;
        for batch_idx in batches {
            let bn = batch_idx.len();
            let mut texts: Vec<&str> = Vec::with_capacity(2 * bn);
            for &i in &batch_idx {
                texts.push(&pairs[i].sentence1);
            }
            for &i in &batch_idx {
                texts.push(&pairs[i].sentence2);
            }
            let gold: Vec<f64> = batch_idx.iter().map(|&i| pairs[i].gold).collect();
            let batch = tokenize(&texts, &model.vocab, max_len);
            let token_vectors = model.backend.forward(&batch, true);
            let pooled = pool_batch(token_vectors.view(), &batch.mask, cfg.pooling)?;
            let pooled64 = pooled_f64(&pooled);

            let u = pooled64.slice(ndarray::s![0..bn, ..]).to_owned();
            let v = pooled64.slice(ndarray::s![bn..2 * bn, ..]).to_owned();
            let out = cosine_regression_loss(&u, &v, &gold)?;
            if !out.loss.is_finite() {
                return Err(CoreError::NonFiniteLoss { step: steps, epoch, value: out.loss });
            }
            let grad_pooled =
                ndarray::concatenate(Axis(0), &[out.grad_u.view(), out.grad_v.view()])
                    .expect("gradient concat");

            let grad_tokens = pool_backward(
                grads_f32(&grad_pooled).view(),
                &batch.mask,
                cfg.pooling,
                token_vectors.dim().1,
            );
            model.backend.zero_grad();
            model.backend.backward(grad_tokens.view(), &batch);
            optimizer.step(&mut model.backend);

            epoch_loss += out.loss;
            batch_count += 1;
            steps += 1;
        }
        epoch_mean_loss.push(epoch_loss / batch_count as f64);
    }
    Ok(TrainReport {
        step: cfg.step,
        epoch_mean_loss,
        steps,
        wall_time_secs: started.elapsed().as_secs_f64(),
        config: *cfg,
        checkpoint: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Recipe {
    Vanilla,
    OneStep,
    TwoStep,
}

impl std::str::FromStr for Recipe {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Recipe, String> {
        match s {
            "vanilla" => Ok(Recipe::Vanilla),
            "one_step" => Ok(Recipe::OneStep),
            "two_step" => Ok(Recipe::TwoStep),
            other => Err(format!("unknown recipe {other:?}")),
        }
    }
}

/// Training corpora a recipe draws from.
#[derive(Debug, Clone, Default)]
pub struct RecipeData {
    pub triplets: Vec<Triplet>,
    pub sts_train: Vec<StsPair>,
}

/// Run a recipe end to end. Vanilla returns the base unchanged;
/// one_step runs the NLI stage; two_step runs NLI then STS. Each
/// trained stage is checkpointed under `checkpoint_dir` when given.
pub fn run_recipe(
    mut model: SentenceModel,
    data: &RecipeData,
    recipe: Recipe,
    nli_cfg: &TrainConfig,
    sts_cfg: &TrainConfig,
    checkpoint_dir: Option<&Path>,
) -> Result<(SentenceModel, Vec<TrainReport>)> {
    let mut reports = Vec::new();
    if recipe == Recipe::Vanilla {
        return Ok((model, reports));
    }
    if data.triplets.is_empty() {
        return Err(CoreError::EmptyInput(
            "run_recipe: NLI triplets required for one_step/two_step".to_string(),
        ));
    }
    let mut report = train_step1_nli(&mut model, &data.triplets, nli_cfg)?;
    if let Some(dir) = checkpoint_dir {
        let path = dir.join("step1-nli.model");
        save_model(&model, &path)?;
        report.checkpoint = Some(path);
    }
    reports.push(report);
    if recipe == Recipe::TwoStep {
        if data.sts_train.is_empty() {
            return Err(CoreError::EmptyInput(
                "run_recipe: STS training pairs required for two_step".to_string(),
            ));
        }
        let mut report = train_step2_sts(&mut model, &data.sts_train, sts_cfg)?;
        if let Some(dir) = checkpoint_dir {
            let path = dir.join("step2-sts.model");
            save_model(&model, &path)?;
            report.checkpoint = Some(path);
        }
        reports.push(report);
    }
    Ok((model, reports))
}
