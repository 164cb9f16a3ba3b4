//! Factorized residual vector quantization.
//!
//! Each layer projects the d_model residual into a low-dimensional code
//! space (w_in), picks the nearest unit-norm entry on the sphere, and maps
//! the raw selected code back to model width (w_out). The residual recursion
//! z_{c+1} = z_c - q_c runs in d_model space.
//!
//! All quantization math is f64 end to end; parameters and the
//! LatentSequence boundary are f32. Decoding folds per-layer contributions
//! in ascending layer order with a single final rounding, which is what
//! makes depth-truncated decoding exactly consistent with full decoding.
//!
//! Gradient semantics: the argmin index is treated as constant, the
//! commitment term stops gradients at the quantizer output (so it touches
//! only z), and the codebook term stops gradients at the quantizer input
//! (so it touches only entries and w_out). w_in receives no gradient at all:
//! it only routes selection, which is piecewise constant.

use crate::codec::LatentSequence;
use crate::error::{Error, Result};
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RvqConfig {
    pub n_layers: usize,
    pub d_model: usize,
    pub code_dim: usize,
    pub n_entries: usize,
}

impl RvqConfig {
    /// Small stack for unit-level work.
    pub fn desk() -> Self {
        RvqConfig { n_layers: 8, d_model: 96, code_dim: 8, n_entries: 64 }
    }

    /// Desk-scale stack with full-size codebooks (10-bit codes), the default
    /// for end-to-end models.
    pub fn desk_model() -> Self {
        RvqConfig { n_layers: 8, d_model: 96, code_dim: 8, n_entries: 1024 }
    }

    /// Reference constants: 32 layers of 1024 x 8 codebooks at width 1280.
    pub fn full_reference() -> Self {
        RvqConfig { n_layers: 32, d_model: 1280, code_dim: 8, n_entries: 1024 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_layers == 0 || self.d_model == 0 || self.code_dim == 0 || self.n_entries < 2 {
            return Err(Error::Contract("degenerate quantizer configuration".into()));
        }
        if self.n_entries > u16::MAX as usize + 1 {
            return Err(Error::Contract(format!(
                "codebook size {} exceeds the 16-bit token range",
                self.n_entries
            )));
        }
        Ok(())
    }

    pub fn bits_per_code(&self) -> u8 {
        crate::bitstream::ceil_log2(self.n_entries as u64)
    }
}

/// One quantizer layer: selection happens on the unit sphere in code space,
/// reconstruction through a free linear map back to model width.
#[derive(Debug, Clone)]
pub struct FactorizedCodebook {
    /// n_entries x code_dim, row-major; every row unit L2 norm.
    pub entries: Vec<f32>,
    /// code_dim x d_model, row-major.
    pub w_in: Vec<f32>,
    /// d_model x code_dim, row-major.
    pub w_out: Vec<f32>,
    pub d_model: usize,
    pub code_dim: usize,
    pub n_entries: usize,
}

impl FactorizedCodebook {
    pub fn new_seeded(d_model: usize, code_dim: usize, n_entries: usize, rng: &mut ChaCha8Rng) -> Self {
        let din = Normal::new(0.0, 1.0 / (d_model as f64).sqrt()).expect("valid normal");
        let dcode = Normal::new(0.0, 1.0 / (code_dim as f64).sqrt()).expect("valid normal");
        let w_in = (0..code_dim * d_model).map(|_| din.sample(rng) as f32).collect();
        let mut entries: Vec<f32> = (0..n_entries * code_dim).map(|_| dcode.sample(rng) as f32).collect();
        normalize_rows(&mut entries, code_dim);
        let w_out = (0..d_model * code_dim).map(|_| dcode.sample(rng) as f32).collect();
        FactorizedCodebook { w_in, entries, w_out, d_model, code_dim, n_entries }
    }

    pub fn entry(&self, i: usize) -> &[f32] {
        &self.entries[i * self.code_dim..(i + 1) * self.code_dim]
    }

    pub fn param_count(&self) -> u64 {
        (self.w_in.len() + self.entries.len() + self.w_out.len()) as u64
    }

    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&'a [f32])) {
        f(&self.entries);
        f(&self.w_in);
        f(&self.w_out);
    }

    pub fn visit_mut(&mut self, f: &mut impl FnMut(&mut [f32])) {
        f(&mut self.entries);
        f(&mut self.w_in);
        f(&mut self.w_out);
    }
}

fn normalize_rows(rows: &mut [f32], width: usize) {
    for row in rows.chunks_mut(width) {
        let norm = row.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>().sqrt();
        if norm > 1e-12 {
            for v in row.iter_mut() {
                *v = (*v as f64 / norm) as f32;
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct RVQStack {
    pub layers: Vec<FactorizedCodebook>,
}

impl RVQStack {
    pub fn new_seeded(cfg: &RvqConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(RVQStack {
            layers: (0..cfg.n_layers)
                .map(|_| FactorizedCodebook::new_seeded(cfg.d_model, cfg.code_dim, cfg.n_entries, &mut rng))
                .collect(),
        })
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn d_model(&self) -> usize {
        self.layers.first().map_or(0, |l| l.d_model)
    }

    pub fn n_entries(&self) -> usize {
        self.layers.first().map_or(0, |l| l.n_entries)
    }

    pub fn param_count(&self) -> u64 {
        self.layers.iter().map(|l| l.param_count()).sum()
    }

    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&'a [f32])) {
        for l in &self.layers {
            l.visit(f);
        }
    }

    pub fn visit_mut(&mut self, f: &mut impl FnMut(&mut [f32])) {
        for l in &mut self.layers {
            l.visit_mut(f);
        }
    }
}

/// T x K code indices, frame-major (all layers of frame t contiguous).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenMatrix {
    pub codes: Vec<u16>,
    pub n_frames: usize,
    pub depth: usize,
}

impl TokenMatrix {
    pub fn new(codes: Vec<u16>, n_frames: usize, depth: usize) -> Result<Self> {
        if depth == 0 {
            return Err(Error::Contract("token depth must be at least 1".into()));
        }
        if codes.len() != n_frames * depth {
            return Err(Error::Contract(format!(
                "token buffer holds {} codes, expected {}x{}",
                codes.len(),
                n_frames,
                depth
            )));
        }
        Ok(TokenMatrix { codes, n_frames, depth })
    }

    pub fn get(&self, t: usize, k: usize) -> u16 {
        self.codes[t * self.depth + k]
    }

    /// Keep layers 1..=k, dropping the finer columns.
    pub fn truncated(&self, k: usize) -> Result<TokenMatrix> {
        if k == 0 || k > self.depth {
            return Err(Error::Contract(format!(
                "truncation depth {} outside 1..={}",
                k, self.depth
            )));
        }
        let codes = (0..self.n_frames)
            .flat_map(|t| (0..k).map(move |c| self.get(t, c)))
            .collect();
        TokenMatrix::new(codes, self.n_frames, k)
    }
}

// ============================ quantization ============================

/// Project, normalize (epsilon-guarded), select the nearest entry
/// (ties go to the lowest index), and reconstruct.
/// Returns (index, q, distance-in-code-space).
pub fn quantize_layer(cb: &FactorizedCodebook, z: &[f64]) -> Result<(usize, Vec<f64>, f64)> {
    if z.len() != cb.d_model {
        return Err(Error::Contract(format!(
            "latent dim {} != quantizer dim {}",
            z.len(),
            cb.d_model
        )));
    }
    let cd = cb.code_dim;
    let mut u = vec![0.0f64; cd];
    for r in 0..cd {
        let row = &cb.w_in[r * cb.d_model..(r + 1) * cb.d_model];
        u[r] = row.iter().zip(z).map(|(&w, &x)| w as f64 * x).sum();
    }
    let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-8);
    for v in u.iter_mut() {
        *v /= norm;
    }
    let mut best = 0usize;
    let mut best_d = f64::INFINITY;
    for i in 0..cb.n_entries {
        let e = cb.entry(i);
        let mut d = 0.0f64;
        for j in 0..cd {
            let diff = u[j] - e[j] as f64;
            d += diff * diff;
        }
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    let e = cb.entry(best);
    let q = (0..cb.d_model)
        .map(|r| {
            let row = &cb.w_out[r * cd..(r + 1) * cd];
            row.iter().zip(e).map(|(&w, &c)| w as f64 * c as f64).sum()
        })
        .collect();
    Ok((best, q, best_d.sqrt()))
}

/// Everything one residual pass produces: tokens, the rounded quantized
/// sequence, and the per-layer f64 tensors the losses and gradients need.
#[derive(Debug, Clone)]
pub struct RvqEncoded {
    pub tokens: TokenMatrix,
    pub quantized: LatentSequence,
    /// layer_z[c][t]: input to layer c (layer_z[0] is the raw latent).
    pub layer_z: Vec<Vec<Vec<f64>>>,
    /// layer_q[c][t]: reconstruction emitted by layer c.
    pub layer_q: Vec<Vec<Vec<f64>>>,
    /// layer_residual[c][t] = layer_z[c][t] - layer_q[c][t].
    pub layer_residual: Vec<Vec<Vec<f64>>>,
}

/// Run `k_depth` residual layers over the sequence.
pub fn rvq_encode(stack: &RVQStack, z_seq: &LatentSequence, k_depth: usize) -> Result<RvqEncoded> {
    if k_depth == 0 || k_depth > stack.n_layers() {
        return Err(Error::Contract(format!(
            "depth {} outside 1..={}",
            k_depth,
            stack.n_layers()
        )));
    }
    let t_len = z_seq.len();
    let d = stack.d_model();
    let mut codes = Vec::with_capacity(t_len * k_depth);
    let mut layer_z = vec![Vec::with_capacity(t_len); k_depth];
    let mut layer_q = vec![Vec::with_capacity(t_len); k_depth];
    let mut layer_residual = vec![Vec::with_capacity(t_len); k_depth];
    let mut quantized = Vec::with_capacity(t_len);
    for frame in &z_seq.frames {
        if frame.len() != d {
            return Err(Error::Contract(format!(
                "latent frame dim {} != quantizer dim {}",
                frame.len(),
                d
            )));
        }
        let mut z: Vec<f64> = frame.iter().map(|&v| v as f64).collect();
        let mut sum = vec![0.0f64; d];
        for (c, cb) in stack.layers[..k_depth].iter().enumerate() {
            let (idx, q, _) = quantize_layer(cb, &z)?;
            codes.push(idx as u16);
            let residual: Vec<f64> = z.iter().zip(&q).map(|(a, b)| a - b).collect();
            for (s, qi) in sum.iter_mut().zip(&q) {
                *s += qi;
            }
            layer_z[c].push(z);
            layer_q[c].push(q);
            layer_residual[c].push(residual.clone());
            z = residual;
        }
        quantized.push(sum.iter().map(|&v| v as f32).collect());
    }
    Ok(RvqEncoded {
        tokens: TokenMatrix::new(codes, t_len, k_depth)?,
        quantized: LatentSequence { frames: quantized, frame_rate: z_seq.frame_rate },
        layer_z,
        layer_q,
        layer_residual,
    })
}

/// Sum per-layer reconstructions for a token matrix, ascending layer order,
/// f64 accumulation, one final rounding per frame. Decoding a depth-K
/// truncation therefore reproduces the K-th partial sum of a full decode
/// exactly.
pub fn rvq_decode(stack: &RVQStack, tokens: &TokenMatrix, frame_rate: f64) -> Result<LatentSequence> {
    if tokens.depth > stack.n_layers() {
        return Err(Error::Contract(format!(
            "token depth {} exceeds stack depth {}",
            tokens.depth,
            stack.n_layers()
        )));
    }
    let d = stack.d_model();
    let mut frames = Vec::with_capacity(tokens.n_frames);
    for t in 0..tokens.n_frames {
        let mut acc = vec![0.0f64; d];
        for k in 0..tokens.depth {
            let cb = &stack.layers[k];
            let idx = tokens.get(t, k) as usize;
            if idx >= cb.n_entries {
                return Err(Error::Contract(format!(
                    "code {} out of range for layer {} ({} entries)",
                    idx, k, cb.n_entries
                )));
            }
            let e = cb.entry(idx);
            for r in 0..d {
                let row = &cb.w_out[r * cb.code_dim..(r + 1) * cb.code_dim];
                let contrib: f64 = row.iter().zip(e).map(|(&w, &c)| w as f64 * c as f64).sum();
                acc[r] += contrib;
            }
        }
        frames.push(acc.iter().map(|&v| v as f32).collect());
    }
    Ok(LatentSequence { frames, frame_rate })
}

// ============================== dropout ==============================

/// Training-time depth truncation law for the quantizer.
#[derive(Debug, Clone, Copy)]
pub struct DropoutPolicy {
    pub probability: f64,
}

impl DropoutPolicy {
    pub fn new(probability: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&probability) || !probability.is_finite() {
            return Err(Error::Contract(format!(
                "dropout probability {} outside [0, 1]",
                probability
            )));
        }
        Ok(DropoutPolicy { probability })
    }
}

/// With probability p, a uniform depth in 1..=n_q; otherwise the full n_q.
pub fn dropout_sample(policy: &DropoutPolicy, n_q: usize, rng: &mut ChaCha8Rng) -> usize {
    if rng.random_bool(policy.probability) {
        rng.random_range(1..=n_q)
    } else {
        n_q
    }
}

// =============================== losses ==============================

fn paired_sq_norm(z: &[Vec<Vec<f64>>], q: &[Vec<Vec<f64>>]) -> Result<f64> {
    if z.len() != q.len() || z.iter().zip(q).any(|(a, b)| a.len() != b.len()) {
        return Err(Error::Contract("mismatched per-layer sequence shapes".into()));
    }
    let mut acc = 0.0f64;
    for (lz, lq) in z.iter().zip(q) {
        for (fz, fq) in lz.iter().zip(lq) {
            if fz.len() != fq.len() {
                return Err(Error::Contract("mismatched frame dims".into()));
            }
            for (a, b) in fz.iter().zip(fq) {
                let d = a - b;
                acc += d * d;
            }
        }
    }
    Ok(acc)
}

/// Sum over layers and frames of ||z_c - sg(q_c)||^2. Gradient flows to the
/// quantizer input only; see [`quantizer_grads`].
pub fn commitment_loss(z_inputs: &[Vec<Vec<f64>>], q_outputs: &[Vec<Vec<f64>>]) -> Result<f64> {
    paired_sq_norm(z_inputs, q_outputs)
}

/// Sum over layers and frames of ||sg(z_c) - q_c||^2. Same value as
/// [`commitment_loss`] on identical tensors; gradient flows to codebook
/// parameters only.
pub fn codebook_loss(z_inputs: &[Vec<Vec<f64>>], q_outputs: &[Vec<Vec<f64>>]) -> Result<f64> {
    paired_sq_norm(z_inputs, q_outputs)
}

// ============================== gradients =============================

#[derive(Debug, Clone)]
pub struct LayerGrads {
    /// d(codebook term)/d entries, n_entries x code_dim.
    pub d_entries: Vec<f64>,
    /// Identically zero: selection is piecewise constant in w_in and both
    /// loss terms see it only through the frozen argmin.
    pub d_w_in: Vec<f64>,
    /// d(codebook term)/d w_out, d_model x code_dim.
    pub d_w_out: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct QuantizerGrads {
    /// d(commitment term)/d z per frame; the codebook term contributes
    /// exactly zero here.
    pub d_z: Vec<Vec<f64>>,
    pub layers: Vec<LayerGrads>,
    pub loss_cmt: f64,
    pub loss_code: f64,
}

/// Exact gradients of (commitment + codebook) losses at depth K under
/// stop-gradient routing with the argmin held constant.
///
/// Derivation notes: with the residual recursion treating q_c as a constant
/// (its only z-dependence is through the frozen index), dz_c/dz_1 = I, so
/// d(cmt)/dz_1 = 2 * sum_c r_c. The codebook term at layer c touches only
/// that layer's parameters: d/d w_out = -2 r_c (x) e_sel and
/// d/d entries[sel] = -2 w_out^T r_c.
pub fn quantizer_grads(stack: &RVQStack, z_seq: &LatentSequence, k_depth: usize) -> Result<QuantizerGrads> {
    let enc = rvq_encode(stack, z_seq, k_depth)?;
    let t_len = z_seq.len();
    let d = stack.d_model();
    let mut d_z = vec![vec![0.0f64; d]; t_len];
    let mut layers = Vec::with_capacity(k_depth);
    for (c, cb) in stack.layers[..k_depth].iter().enumerate() {
        let cd = cb.code_dim;
        let mut g = LayerGrads {
            d_entries: vec![0.0; cb.n_entries * cd],
            d_w_in: vec![0.0; cd * cb.d_model],
            d_w_out: vec![0.0; cb.d_model * cd],
        };
        for t in 0..t_len {
            let r = &enc.layer_residual[c][t];
            let sel = enc.tokens.get(t, c) as usize;
            let e = cb.entry(sel);
            for (i, &ri) in r.iter().enumerate() {
                d_z[t][i] += 2.0 * ri;
                for j in 0..cd {
                    g.d_w_out[i * cd + j] += -2.0 * ri * e[j] as f64;
                }
            }
            for j in 0..cd {
                let mut wr = 0.0f64;
                for (i, &ri) in r.iter().enumerate() {
                    wr += cb.w_out[i * cd + j] as f64 * ri;
                }
                g.d_entries[sel * cd + j] += -2.0 * wr;
            }
        }
        layers.push(g);
    }
    let loss = commitment_loss(&enc.layer_z, &enc.layer_q)?;
    Ok(QuantizerGrads {
        d_z,
        layers,
        loss_cmt: loss,
        loss_code: loss,
    })
}

// ============================== training ==============================

#[derive(Debug, Clone)]
pub struct TrainOptions {
    pub steps: usize,
    pub lr: f64,
    /// Weight on the commitment term in the reported objective. It does not
    /// steer the codebook update (that term's codebook gradient is zero).
    pub lambda_cmt: f64,
    pub dropout: DropoutPolicy,
    pub seed: u64,
}

impl TrainOptions {
    pub fn new(steps: usize, lr: f64, seed: u64) -> Self {
        TrainOptions {
            steps,
            lr,
            lambda_cmt: 0.25,
            dropout: DropoutPolicy { probability: 0.0 },
            seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainTrace {
    /// Objective (code + lambda_cmt * cmt) per step, evaluated pre-update,
    /// normalized by frame count.
    pub losses: Vec<f64>,
}

/// Plain projected gradient descent on the codebook parameters: step on the
/// codebook term's gradients (scaled to a per-frame mean), then re-normalize
/// entry rows to the unit sphere. Batches rotate through `features`; the
/// depth per step is drawn by the dropout policy. lr = 0 leaves the stack
/// bitwise untouched.
pub fn train_codebooks(
    stack: &mut RVQStack,
    features: &[LatentSequence],
    opts: &TrainOptions,
) -> Result<TrainTrace> {
    if opts.lr < 0.0 || !opts.lr.is_finite() {
        return Err(Error::Contract(format!("learning rate {} must be >= 0", opts.lr)));
    }
    if features.is_empty() || features.iter().any(|f| f.is_empty()) {
        return Err(Error::Contract("training needs at least one non-empty batch".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let n_q = stack.n_layers();
    let mut losses = Vec::with_capacity(opts.steps);
    for step in 0..opts.steps {
        let batch = &features[step % features.len()];
        let k = dropout_sample(&opts.dropout, n_q, &mut rng);
        let grads = quantizer_grads(stack, batch, k)?;
        let objective = (grads.loss_code + opts.lambda_cmt * grads.loss_cmt) / batch.len() as f64;
        if !objective.is_finite() {
            return Err(Error::NonFinite(format!(
                "training objective diverged at step {} (code {}, cmt {})",
                step, grads.loss_code, grads.loss_cmt
            )));
        }
        losses.push(objective);
        if opts.lr == 0.0 {
            continue;
        }
        let scale = opts.lr / batch.len() as f64;
        for (cb, g) in stack.layers[..k].iter_mut().zip(&grads.layers) {
            for (p, &gr) in cb.entries.iter_mut().zip(&g.d_entries) {
                *p = (*p as f64 - scale * gr) as f32;
            }
            for (p, &gr) in cb.w_out.iter_mut().zip(&g.d_w_out) {
                *p = (*p as f64 - scale * gr) as f32;
            }
            normalize_rows(&mut cb.entries, cb.code_dim);
        }
    }
    Ok(TrainTrace { losses })
}

/// Mean over frames of ||z - quantized||^2 at the given depth.
pub fn mean_quantization_error(stack: &RVQStack, features: &LatentSequence, k_depth: usize) -> Result<f64> {
    let enc = rvq_encode(stack, features, k_depth)?;
    let mut acc = 0.0f64;
    for (z, q) in features.frames.iter().zip(&enc.quantized.frames) {
        for (a, b) in z.iter().zip(q) {
            let d = *a as f64 - *b as f64;
            acc += d * d;
        }
    }
    Ok(acc / features.len().max(1) as f64)
}

/// Re-seed one layer's entries from the normalized projections of randomly
/// chosen distinct frames — a data-dependent initialization for training.
pub fn seed_entries_from_frames(
    stack: &mut RVQStack,
    layer: usize,
    features: &LatentSequence,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    let cb = stack
        .layers
        .get_mut(layer)
        .ok_or_else(|| Error::Contract(format!("layer {} out of range", layer)))?;
    if features.len() < cb.n_entries {
        return Err(Error::Contract(format!(
            "{} frames cannot seed {} entries",
            features.len(),
            cb.n_entries
        )));
    }
    let mut order: Vec<usize> = (0..features.len()).collect();
    order.shuffle(rng);
    for (i, &t) in order[..cb.n_entries].iter().enumerate() {
        let z: Vec<f64> = features.frames[t].iter().map(|&v| v as f64).collect();
        let mut u = vec![0.0f64; cb.code_dim];
        for r in 0..cb.code_dim {
            let row = &cb.w_in[r * cb.d_model..(r + 1) * cb.d_model];
            u[r] = row.iter().zip(&z).map(|(&w, &x)| w as f64 * x).sum();
        }
        let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-8);
        for (dst, &v) in cb.entries[i * cb.code_dim..(i + 1) * cb.code_dim]
            .iter_mut()
            .zip(&u)
        {
            *dst = (v / norm) as f32;
        }
    }
    Ok(())
}

// ============================ usage stats =============================

#[derive(Debug, Clone, Serialize)]
pub struct LayerUsage {
    pub histogram: Vec<u64>,
    /// Distinct codes used / codebook size.
    pub utilization: f64,
    /// exp(entropy) of the empirical code distribution.
    pub perplexity: f64,
}

pub fn usage_stats(tokens: &TokenMatrix, codebook_size: usize) -> Vec<LayerUsage> {
    (0..tokens.depth)
        .map(|k| {
            let mut histogram = vec![0u64; codebook_size];
            for t in 0..tokens.n_frames {
                histogram[tokens.get(t, k) as usize] += 1;
            }
            let total: u64 = histogram.iter().sum();
            let distinct = histogram.iter().filter(|&&c| c > 0).count();
            let perplexity = if total == 0 {
                1.0
            } else {
                let entropy: f64 = histogram
                    .iter()
                    .filter(|&&c| c > 0)
                    .map(|&c| {
                        let p = c as f64 / total as f64;
                        -p * p.ln()
                    })
                    .sum();
                entropy.exp()
            };
            LayerUsage {
                histogram,
                utilization: distinct as f64 / codebook_size as f64,
                perplexity,
            }
        })
        .collect()
}

// =============================== tests ===============================
