//! Reference encoder: a small post-LN transformer with learned
//! positional embeddings and hand-coded backward passes.

use super::{EncoderBackend, EncoderSpec, TokenBatch};
use crate::rng::rng_for;
use ndarray::{s, Array1, Array2, Array3, ArrayView2, ArrayView3, Axis};
use rand::Rng;

fn randn(rng: &mut impl Rng, rows: usize, cols: usize, std: f32) -> Array2<f32> {
    // Box-Muller; avoids an extra distribution dependency.
    Array2::from_shape_fn((rows, cols), |_| {
        let u1: f32 = rng.gen_range(f32::EPSILON..1.0);
        let u2: f32 = rng.gen_range(0.0..1.0);
        (-2.0 * u1.ln()).sqrt() * (std::f32::consts::TAU * u2).cos() * std
    })
}

#[derive(Debug, Clone)]
struct Linear {
    w: Array2<f32>,
    b: Array1<f32>,
    gw: Array2<f32>,
    gb: Array1<f32>,
}

impl Linear {
    fn new(rng: &mut impl Rng, inp: usize, out: usize, std: f32) -> Linear {
        Linear {
            w: randn(rng, inp, out, std),
            b: Array1::zeros(out),
            gw: Array2::zeros((inp, out)),
            gb: Array1::zeros(out),
        }
    }

    fn forward(&self, x: &Array2<f32>) -> Array2<f32> {
        x.dot(&self.w) + &self.b
    }

    /// Accumulates weight gradients; returns the input gradient.
    fn backward(&mut self, x: &Array2<f32>, grad_out: &Array2<f32>) -> Array2<f32> {
        self.gw += &x.t().dot(grad_out);
        self.gb += &grad_out.sum_axis(Axis(0));
        grad_out.dot(&self.w.t())
    }
}

#[derive(Debug, Clone)]
struct LayerNorm {
    g: Array1<f32>,
    b: Array1<f32>,
    gg: Array1<f32>,
    gb: Array1<f32>,
}

const LN_EPS: f32 = 1e-5;

struct LnCache {
    xhat: Array2<f32>,
    inv_std: Array1<f32>,
}

impl LayerNorm {
    fn new(dim: usize) -> LayerNorm {
        LayerNorm {
            g: Array1::ones(dim),
            b: Array1::zeros(dim),
            gg: Array1::zeros(dim),
            gb: Array1::zeros(dim),
        }
    }

    fn forward(&self, x: &Array2<f32>) -> (Array2<f32>, LnCache) {
        let d = x.ncols() as f32;
        let mean = x.mean_axis(Axis(1)).unwrap();
        let mut xhat = x.clone();
        for (t, mut row) in xhat.outer_iter_mut().enumerate() {
            row.mapv_inplace(|v| v - mean[t]);
        }
        let var = xhat.mapv(|v| v * v).sum_axis(Axis(1)) / d;
        let inv_std = var.mapv(|v| 1.0 / (v + LN_EPS).sqrt());
        for (t, mut row) in xhat.outer_iter_mut().enumerate() {
            row.mapv_inplace(|v| v * inv_std[t]);
        }
        let mut y = xhat.clone();
        for mut row in y.outer_iter_mut() {
            row.assign(&(&row * &self.g + &self.b));
        }
        (y, LnCache { xhat, inv_std })
    }

    fn backward(&mut self, grad_out: &Array2<f32>, cache: &LnCache) -> Array2<f32> {
        let d = grad_out.ncols() as f32;
        self.gg += &(grad_out * &cache.xhat).sum_axis(Axis(0));
        self.gb += &grad_out.sum_axis(Axis(0));
        let mut dx = Array2::zeros(grad_out.raw_dim());
        for t in 0..grad_out.nrows() {
            let dy = grad_out.row(t);
            let xhat = cache.xhat.row(t);
            let dxhat = &dy * &self.g;
            let m1 = dxhat.sum() / d;
            let m2 = (&dxhat * &xhat).sum() / d;
            let row = (&dxhat - m1 - &(&xhat * m2)) * cache.inv_std[t];
            dx.row_mut(t).assign(&row);
        }
        dx
    }
}

#[derive(Debug, Clone)]
struct Block {
    q: Linear,
    k: Linear,
    v: Linear,
    o: Linear,
    ln1: LayerNorm,
    ff1: Linear,
    ff2: Linear,
    ln2: LayerNorm,
}

struct BlockCache {
    x_in: Array2<f32>,
    q: Array2<f32>,
    k: Array2<f32>,
    v: Array2<f32>,
    att: Vec<Array2<f32>>, // per head, L×L
    ctx: Array2<f32>,
    ln1: LnCache,
    x1: Array2<f32>,
    h_pre: Array2<f32>,
    h_act: Array2<f32>,
    ln2: LnCache,
}

impl Block {
    fn new(rng: &mut impl Rng, dim: usize, ffn: usize, std: f32) -> Block {
        Block {
            q: Linear::new(rng, dim, dim, std),
            k: Linear::new(rng, dim, dim, std),
            v: Linear::new(rng, dim, dim, std),
            o: Linear::new(rng, dim, dim, std),
            ln1: LayerNorm::new(dim),
            ff1: Linear::new(rng, dim, ffn, std),
            ff2: Linear::new(rng, ffn, dim, std),
            ln2: LayerNorm::new(dim),
        }
    }

    fn forward(&self, x: &Array2<f32>, mask: &[f32], heads: usize) -> (Array2<f32>, BlockCache) {
        let (len, dim) = x.dim();
        let dh = dim / heads;
        let scale = 1.0 / (dh as f32).sqrt();

        let q = self.q.forward(x);
        let k = self.k.forward(x);
        let v = self.v.forward(x);

        let mut ctx = Array2::<f32>::zeros((len, dim));
        let mut att = Vec::with_capacity(heads);
        for h in 0..heads {
            let cols = s![.., h * dh..(h + 1) * dh];
            let qh = q.slice(cols);
            let kh = k.slice(cols);
            let vh = v.slice(cols);
            let mut scores = qh.dot(&kh.t()) * scale;
            for j in 0..len {
                if mask[j] == 0.0 {
                    scores.column_mut(j).fill(f32::NEG_INFINITY);
                }
            }
            // row-wise softmax
            for mut row in scores.outer_iter_mut() {
                let max = row.iter().cloned().fold(f32::NEG_INFINITY, f32::max);
                row.mapv_inplace(|s| (s - max).exp());
                let sum = row.sum();
                row.mapv_inplace(|e| e / sum);
            }
            let a = scores;
            ctx.slice_mut(cols).assign(&a.dot(&vh));
            att.push(a);
        }
        let proj = self.o.forward(&ctx);
        let res1 = x + &proj;
        let (x1, ln1) = self.ln1.forward(&res1);

        let h_pre = self.ff1.forward(&x1);
        let h_act = h_pre.mapv(|v| v.max(0.0));
        let ffn_out = self.ff2.forward(&h_act);
        let res2 = &x1 + &ffn_out;
        let (x2, ln2) = self.ln2.forward(&res2);

        (
            x2,
            BlockCache {
                x_in: x.clone(),
                q,
                k,
                v,
                att,
                ctx,
                ln1,
                x1,
                h_pre,
                h_act,
                ln2,
            },
        )
    }

    fn backward(&mut self, grad_out: &Array2<f32>, cache: &BlockCache, heads: usize) -> Array2<f32> {
        let (len, dim) = cache.x_in.dim();
        let dh = dim / heads;
        let scale = 1.0 / (dh as f32).sqrt();

        let d_res2 = self.ln2.backward(grad_out, &cache.ln2);

        // FFN path
        let d_h_act = self.ff2.backward(&cache.h_act, &d_res2);
        let d_h_pre = &d_h_act * &cache.h_pre.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
        let mut d_x1 = self.ff1.backward(&cache.x1, &d_h_pre);
        d_x1 += &d_res2; // residual

        let d_res1 = self.ln1.backward(&d_x1, &cache.ln1);

        // attention path
        let d_ctx = self.o.backward(&cache.ctx, &d_res1);
        let mut dq = Array2::<f32>::zeros((len, dim));
        let mut dk = Array2::<f32>::zeros((len, dim));
        let mut dv = Array2::<f32>::zeros((len, dim));
        for h in 0..heads {
            let cols = s![.., h * dh..(h + 1) * dh];
            let a = &cache.att[h];
            let d_ctx_h = d_ctx.slice(cols);
            let vh = cache.v.slice(cols);
            let d_a = d_ctx_h.dot(&vh.t());
            dv.slice_mut(cols).assign(&a.t().dot(&d_ctx_h));
            // softmax backward per row
            let mut d_scores = Array2::<f32>::zeros((len, len));
            for t in 0..len {
                let a_row = a.row(t);
                let da_row = d_a.row(t);
                let dot = a_row.dot(&da_row);
                let row = &a_row * &(&da_row - dot);
                d_scores.row_mut(t).assign(&row);
            }
            let qh = cache.q.slice(cols);
            let kh = cache.k.slice(cols);
            dq.slice_mut(cols).assign(&(d_scores.dot(&kh) * scale));
            dk.slice_mut(cols).assign(&(d_scores.t().dot(&qh) * scale));
        }

        let mut d_x = self.q.backward(&cache.x_in, &dq);
        d_x += &self.k.backward(&cache.x_in, &dk);
        d_x += &self.v.backward(&cache.x_in, &dv);
        d_x += &d_res1; // residual
        d_x
    }

    fn visit(&mut self, f: &mut dyn FnMut(&mut [f32], &mut [f32])) {
        for lin in [&mut self.q, &mut self.k, &mut self.v, &mut self.o, &mut self.ff1, &mut self.ff2] {
            f(lin.w.as_slice_mut().unwrap(), lin.gw.as_slice_mut().unwrap());
            f(lin.b.as_slice_mut().unwrap(), lin.gb.as_slice_mut().unwrap());
        }
        for ln in [&mut self.ln1, &mut self.ln2] {
            f(ln.g.as_slice_mut().unwrap(), ln.gg.as_slice_mut().unwrap());
            f(ln.b.as_slice_mut().unwrap(), ln.gb.as_slice_mut().unwrap());
        }
    }

    fn zero_grad(&mut self) {
        self.visit(&mut |_, g| g.fill(0.0));
    }
}

struct ForwardCache {
    // per sentence, per layer
    blocks: Vec<Vec<BlockCache>>,
}

/// Trainable reference encoder.
pub struct TinyTransformer {
    spec: EncoderSpec,
    emb: Array2<f32>,
    pos: Array2<f32>,
    g_emb: Array2<f32>,
    g_pos: Array2<f32>,
    blocks: Vec<Block>,
    cache: Option<ForwardCache>,
}

impl std::fmt::Debug for TinyTransformer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TinyTransformer").field("spec", &self.spec).finish()
    }
}

impl Clone for TinyTransformer {
    fn clone(&self) -> Self {
        TinyTransformer {
            spec: self.spec.clone(),
            emb: self.emb.clone(),
            pos: self.pos.clone(),
            g_emb: self.g_emb.clone(),
            g_pos: self.g_pos.clone(),
            blocks: self.blocks.clone(),
            cache: None,
        }
    }
}

const INIT_STD: f32 = 0.02;

impl TinyTransformer {
    pub fn new(spec: EncoderSpec, seed: u64) -> TinyTransformer {
        Self::with_init(spec, seed, INIT_STD)
    }

    /// Like [`TinyTransformer::new`] but with an explicit initialization
    /// scale. Only affects fresh parameters; loading a saved model
    /// restores whatever was trained.
    pub fn with_init(spec: EncoderSpec, seed: u64, init_std: f32) -> TinyTransformer {
        spec.validate().expect("invalid encoder spec");
        let mut rng = rng_for(seed, "encoder-init");
        let emb = randn(&mut rng, spec.vocab_size, spec.dim, init_std);
        let pos = randn(&mut rng, spec.max_len, spec.dim, init_std);
        let blocks = (0..spec.layers)
            .map(|_| Block::new(&mut rng, spec.dim, spec.ffn_dim, init_std))
            .collect();
        TinyTransformer {
            g_emb: Array2::zeros(emb.raw_dim()),
            g_pos: Array2::zeros(pos.raw_dim()),
            emb,
            pos,
            spec,
            blocks,
            cache: None,
        }
    }

    pub fn spec(&self) -> &EncoderSpec {
        &self.spec
    }

    fn embed_sentence(&self, ids: &[usize]) -> Array2<f32> {
        let mut x = Array2::<f32>::zeros((ids.len(), self.spec.dim));
        for (t, &id) in ids.iter().enumerate() {
            let row = &self.emb.row(id) + &self.pos.row(t);
            x.row_mut(t).assign(&row);
        }
        x
    }

    /// Flat little-endian parameter image, in `for_each_param` order.
    pub fn parameter_blob(&mut self) -> Vec<f32> {
        let mut blob = Vec::new();
        self.for_each_param(&mut |p, _| blob.extend_from_slice(p));
        blob
    }

    pub fn load_parameter_blob(&mut self, blob: &[f32]) -> Result<(), String> {
        let mut offset = 0usize;
        let mut err = None;
        self.for_each_param(&mut |p, _| {
            if err.is_some() {
                return;
            }
            if offset + p.len() > blob.len() {
                err = Some("parameter blob too short".to_string());
                return;
            }
            p.copy_from_slice(&blob[offset..offset + p.len()]);
            offset += p.len();
        });
        if let Some(e) = err {
            return Err(e);
        }
        if offset != blob.len() {
            return Err(format!(
                "parameter blob length mismatch: expected {offset}, got {}",
                blob.len()
            ));
        }
        Ok(())
    }
}

impl EncoderBackend for TinyTransformer {
    fn dim(&self) -> usize {
        self.spec.dim
    }

    fn max_len(&self) -> usize {
        self.spec.max_len
    }

    fn forward(&mut self, batch: &TokenBatch, training: bool) -> Array3<f32> {
        let (n, len) = batch.ids.dim();
        let mut out = Array3::<f32>::zeros((n, len, self.spec.dim));
        let mut all_caches = Vec::with_capacity(if training { n } else { 0 });
        for i in 0..n {
            let ids: Vec<usize> = batch.ids.row(i).to_vec();
            let mask: Vec<f32> = batch.mask.row(i).to_vec();
            let mut x = self.embed_sentence(&ids);
            let mut caches = Vec::with_capacity(self.blocks.len());
            for block in &self.blocks {
                let (y, cache) = block.forward(&x, &mask, self.spec.heads);
                x = y;
                if training {
                    caches.push(cache);
                }
            }
            out.index_axis_mut(Axis(0), i).assign(&x);
            if training {
                all_caches.push(caches);
            }
        }
        self.cache = training.then_some(ForwardCache { blocks: all_caches });
        out
    }

    fn backward(&mut self, grad_output: ArrayView3<f32>, batch: &TokenBatch) {
        let cache = self.cache.take().expect("backward without training forward");
        let n = grad_output.dim().0;
        for i in 0..n {
            let mut grad: Array2<f32> = grad_output.index_axis(Axis(0), i).to_owned();
            for (block, bc) in self.blocks.iter_mut().zip(&cache.blocks[i]).rev() {
                grad = block.backward(&grad, bc, self.spec.heads);
            }
            for (t, &id) in batch.ids.row(i).iter().enumerate() {
                let g = grad.row(t);
                let acc = &self.g_emb.row(id) + &g;
                self.g_emb.row_mut(id).assign(&acc);
                let accp = &self.g_pos.row(t) + &g;
                self.g_pos.row_mut(t).assign(&accp);
            }
        }
    }

    fn zero_grad(&mut self) {
        self.g_emb.fill(0.0);
        self.g_pos.fill(0.0);
        for block in &mut self.blocks {
            block.zero_grad();
        }
    }

    fn for_each_param(&mut self, f: &mut dyn FnMut(&mut [f32], &mut [f32])) {
        f(
            self.emb.as_slice_mut().unwrap(),
            self.g_emb.as_slice_mut().unwrap(),
        );
        f(
            self.pos.as_slice_mut().unwrap(),
            self.g_pos.as_slice_mut().unwrap(),
        );
        for block in &mut self.blocks {
            block.visit(f);
        }
    }
}

/// View on the embedding matrix, used by diagnostics/tests.
impl TinyTransformer {
    pub fn token_embeddings(&self) -> ArrayView2<'_, f32> {
        self.emb.view()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::{pool_backward, pool_batch, tokenize, PoolingStrategy, Vocab};

    fn tiny_spec(vocab_size: usize) -> EncoderSpec {
        EncoderSpec {
            vocab_size,
            dim: 8,
            layers: 2,
            heads: 2,
            ffn_dim: 16,
            max_len: 6,
        }
    }

    fn probe_batch(vocab: &Vocab) -> TokenBatch {
        tokenize(&["a b c", "b c c a", "a"], vocab, 6)
    }

    #[test]
    fn forward_shape_and_determinism() {
        let vocab = Vocab::build(["a", "b", "c"]);
        let mut model = TinyTransformer::new(tiny_spec(vocab.size()), 1);
        let batch = probe_batch(&vocab);
        let out1 = model.forward(&batch, false);
        let out2 = model.forward(&batch, false);
        assert_eq!(out1.dim(), (3, 5, 8));
        assert_eq!(out1, out2);
    }

    #[test]
    fn padded_keys_do_not_influence_real_positions() {
        let vocab = Vocab::build(["a", "b", "c"]);
        let spec = tiny_spec(vocab.size());
        let mut model = TinyTransformer::new(spec, 1);
        // same sentence with and without a padded neighbor in the batch
        let alone = tokenize(&["a b"], &vocab, 6);
        let padded = tokenize(&["a b", "a b c c"], &vocab, 6);
        let out_alone = model.forward(&alone, false);
        let out_padded = model.forward(&padded, false);
        for t in 0..3 {
            for k in 0..8 {
                let a = out_alone[(0, t, k)];
                let b = out_padded[(0, t, k)];
                assert!((a - b).abs() < 1e-5, "pos {t} dim {k}: {a} vs {b}");
            }
        }
    }

    // Directional derivative check of the full backward pass: for a
    // scalar loss built from mean-pooled outputs, the analytic
    // gradient dotted with a random direction must match the central
    // difference along that direction.
    #[test]
    fn gradient_matches_directional_finite_difference() {
        let vocab = Vocab::build(["a", "b", "c"]);
        let spec = tiny_spec(vocab.size());
        let batch = probe_batch(&vocab);

        // loss(model) = sum of squares of mean-pooled sentence vectors
        let loss_of = |model: &mut TinyTransformer| -> f64 {
            let out = model.forward(&batch, false);
            let pooled = pool_batch(out.view(), &batch.mask, PoolingStrategy::Mean).unwrap();
            pooled.iter().map(|&x| (x as f64) * (x as f64)).sum()
        };

        let mut model = TinyTransformer::new(spec, 3);
        let out = model.forward(&batch, true);
        let pooled = pool_batch(out.view(), &batch.mask, PoolingStrategy::Mean).unwrap();
        let grad_pooled = pooled.mapv(|x| 2.0 * x);
        let grad_tokens =
            pool_backward(grad_pooled.view(), &batch.mask, PoolingStrategy::Mean, out.dim().1);
        model.zero_grad();
        model.backward(grad_tokens.view(), &batch);

        // accumulate g . u and apply the perturbation for +eps / -eps
        let mut rng = rng_for(99, "gradcheck-direction");
        let mut direction: Vec<f32> = Vec::new();
        let mut dot = 0.0f64;
        model.for_each_param(&mut |p, g| {
            for (pi, gi) in p.iter().zip(g.iter()) {
                let u: f32 = rng.gen_range(-1.0..1.0);
                direction.push(u);
                dot += (*gi as f64) * (u as f64);
                let _ = pi;
            }
        });

        let eps = 1e-3f32;
        let apply = |model: &mut TinyTransformer, sign: f32| {
            let mut idx = 0;
            model.for_each_param(&mut |p, _| {
                for v in p.iter_mut() {
                    *v += sign * eps * direction[idx];
                    idx += 1;
                }
            });
        };
        apply(&mut model, 1.0);
        let up = loss_of(&mut model);
        apply(&mut model, -2.0);
        let down = loss_of(&mut model);
        apply(&mut model, 1.0);

        let numeric = (up - down) / (2.0 * eps as f64);
        let rel = (numeric - dot).abs() / dot.abs().max(1e-8);
        assert!(
            rel < 1e-2,
            "directional gradient mismatch: analytic {dot}, numeric {numeric}, rel {rel}"
        );
    }

    #[test]
    fn parameter_blob_round_trip() {
        let vocab = Vocab::build(["a", "b", "c"]);
        let mut model = TinyTransformer::new(tiny_spec(vocab.size()), 5);
        let blob = model.parameter_blob();
        let mut other = TinyTransformer::new(tiny_spec(vocab.size()), 6);
        other.load_parameter_blob(&blob).unwrap();
        assert_eq!(other.parameter_blob(), blob);
        assert!(other.load_parameter_blob(&blob[..10]).is_err());
    }
}
