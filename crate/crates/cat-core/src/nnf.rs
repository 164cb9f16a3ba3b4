//! Forward-only neural kernels: linear maps, RMS normalization, rotary
//! positions, and a causal sliding-window Transformer block with a streaming
//! per-step API.
//!
//! Batch evaluation is defined as a fold of the streaming step over a fresh
//! state, so stepwise and batch outputs are identical down to the bit — the
//! property the token pipeline leans on. Parameters are stored in f32; every
//! dot product and reduction accumulates in f64 so results are deterministic
//! and platform-stable.

use crate::error::{Error, Result};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::collections::VecDeque;
use std::sync::atomic::{AtomicU64, Ordering};

static NEXT_NONCE: AtomicU64 = AtomicU64::new(1);

fn fresh_nonce() -> u64 {
    NEXT_NONCE.fetch_add(1, Ordering::Relaxed)
}

// ============================ linear layer ============================

#[derive(Debug, Clone)]
pub struct LinearLayer {
    /// Row-major out_dim x in_dim.
    pub weight: Vec<f32>,
    pub bias: Option<Vec<f32>>,
    pub out_dim: usize,
    pub in_dim: usize,
}

impl LinearLayer {
    /// Weights from N(0, 1/sqrt(in_dim)), biases (when present) zeroed.
    pub fn new_seeded(out_dim: usize, in_dim: usize, with_bias: bool, rng: &mut ChaCha8Rng) -> Self {
        let sd = 1.0 / (in_dim as f64).sqrt();
        let dist = Normal::new(0.0, sd).expect("valid normal");
        let weight = (0..out_dim * in_dim).map(|_| dist.sample(rng) as f32).collect();
        LinearLayer {
            weight,
            bias: with_bias.then(|| vec![0.0f32; out_dim]),
            out_dim,
            in_dim,
        }
    }

    pub fn forward(&self, x: &[f32]) -> Vec<f32> {
        debug_assert_eq!(x.len(), self.in_dim);
        let mut out = Vec::with_capacity(self.out_dim);
        for r in 0..self.out_dim {
            let row = &self.weight[r * self.in_dim..(r + 1) * self.in_dim];
            let mut acc = dot_f32(row, x);
            if let Some(b) = &self.bias {
                acc += b[r] as f64;
            }
            out.push(acc as f32);
        }
        out
    }

    pub fn param_count(&self) -> u64 {
        (self.weight.len() + self.bias.as_ref().map_or(0, |b| b.len())) as u64
    }

    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&'a [f32])) {
        f(&self.weight);
        if let Some(b) = &self.bias {
            f(b);
        }
    }

    pub fn visit_mut(&mut self, f: &mut impl FnMut(&mut [f32])) {
        f(&mut self.weight);
        if let Some(b) = &mut self.bias {
            f(b);
        }
    }
}

// ========================== small primitives ==========================

/// f64 dot product of f32 slices in four independent lanes. The summation
/// order is fixed — lane i accumulates elements i, i+4, i+8, ... and the
/// lanes combine as (0+1)+(2+3) — so results are deterministic across calls
/// and platforms. The AVX path below performs the identical IEEE operations
/// on the identical lanes and is therefore bit-identical; a unit test
/// asserts that.
pub fn dot_f32(a: &[f32], b: &[f32]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    #[cfg(target_arch = "x86_64")]
    {
        if std::arch::is_x86_feature_detected!("avx") {
            // SAFETY: AVX availability checked; loads stay within n4 <= len.
            return unsafe { dot_f32_avx(a, b) };
        }
    }
    dot_f32_lanes(a, b)
}

fn dot_f32_lanes(a: &[f32], b: &[f32]) -> f64 {
    let n4 = a.len() - a.len() % 4;
    let mut acc = [0.0f64; 4];
    for (ca, cb) in a[..n4].chunks_exact(4).zip(b[..n4].chunks_exact(4)) {
        acc[0] += ca[0] as f64 * cb[0] as f64;
        acc[1] += ca[1] as f64 * cb[1] as f64;
        acc[2] += ca[2] as f64 * cb[2] as f64;
        acc[3] += ca[3] as f64 * cb[3] as f64;
    }
    let mut tail = 0.0f64;
    for (x, y) in a[n4..].iter().zip(&b[n4..]) {
        tail += *x as f64 * *y as f64;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx")]
unsafe fn dot_f32_avx(a: &[f32], b: &[f32]) -> f64 {
    use std::arch::x86_64::*;
    let n4 = a.len() - a.len() % 4;
    let mut acc = _mm256_setzero_pd();
    let (pa, pb) = (a.as_ptr(), b.as_ptr());
    let mut i = 0usize;
    while i < n4 {
        let va = _mm256_cvtps_pd(_mm_loadu_ps(pa.add(i)));
        let vb = _mm256_cvtps_pd(_mm_loadu_ps(pb.add(i)));
        acc = _mm256_add_pd(acc, _mm256_mul_pd(va, vb));
        i += 4;
    }
    let mut lanes = [0.0f64; 4];
    _mm256_storeu_pd(lanes.as_mut_ptr(), acc);
    let mut tail = 0.0f64;
    for (x, y) in a[n4..].iter().zip(&b[n4..]) {
        tail += *x as f64 * *y as f64;
    }
    (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]) + tail
}

/// acc[i] += p * x[i], each slot independently (one multiply and one add
/// per slot, so every slot's result is order-independent of the others).
/// The AVX path performs the identical per-slot operations.
pub fn axpy_f32(acc: &mut [f64], p: f64, x: &[f32]) {
    debug_assert_eq!(acc.len(), x.len());
    #[cfg(target_arch = "x86_64")]
    {
        if std::arch::is_x86_feature_detected!("avx") {
            // SAFETY: AVX availability checked; loads/stores stay within n4 <= len.
            unsafe { axpy_f32_avx(acc, p, x) };
            return;
        }
    }
    axpy_f32_scalar(acc, p, x);
}

fn axpy_f32_scalar(acc: &mut [f64], p: f64, x: &[f32]) {
    for (o, &v) in acc.iter_mut().zip(x) {
        *o += p * v as f64;
    }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx")]
unsafe fn axpy_f32_avx(acc: &mut [f64], p: f64, x: &[f32]) {
    use std::arch::x86_64::*;
    let n4 = acc.len() - acc.len() % 4;
    let vp = _mm256_set1_pd(p);
    let pa = acc.as_mut_ptr();
    let px = x.as_ptr();
    let mut i = 0usize;
    while i < n4 {
        let vx = _mm256_cvtps_pd(_mm_loadu_ps(px.add(i)));
        let va = _mm256_loadu_pd(pa.add(i));
        _mm256_storeu_pd(pa.add(i), _mm256_add_pd(va, _mm256_mul_pd(vp, vx)));
        i += 4;
    }
    for (o, &v) in acc[n4..].iter_mut().zip(&x[n4..]) {
        *o += p * v as f64;
    }
}

/// RMS-normalize then scale: y_i = x_i / rms(x) * scale_i, computed in f64.
pub fn rms_norm(x: &[f32], scale: &[f32]) -> Vec<f32> {
    let n = x.len();
    let ms = x.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>() / n as f64;
    let inv = 1.0 / (ms + 1e-12).sqrt();
    x.iter()
        .zip(scale)
        .map(|(&v, &s)| ((v as f64) * inv * (s as f64)) as f32)
        .collect()
}

/// Tanh-form GELU.
pub fn gelu(x: f64) -> f64 {
    const C: f64 = 0.7978845608028654; // sqrt(2/pi)
    0.5 * x * (1.0 + (C * (x + 0.044715 * x * x * x)).tanh())
}

/// Numerically safe softmax over the whole slice, in place.
pub fn softmax_inplace(xs: &mut [f64]) {
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in xs.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in xs.iter_mut() {
        *v /= sum;
    }
}

/// Rotate even/odd pairs of a single head vector by angle
/// pos * base^(-2j/head_dim). Position 0 is the identity.
pub fn rope_apply(x: &mut [f64], pos: u64, base: f64) {
    let d = x.len();
    debug_assert!(d % 2 == 0, "rotary pairing needs an even head dim");
    for j in 0..d / 2 {
        let theta = base.powf(-2.0 * j as f64 / d as f64);
        let angle = pos as f64 * theta;
        let (sin, cos) = angle.sin_cos();
        let (a, b) = (x[2 * j], x[2 * j + 1]);
        x[2 * j] = a * cos - b * sin;
        x[2 * j + 1] = a * sin + b * cos;
    }
}

// =========================== attention block ==========================

#[derive(Debug, Clone, Copy)]
pub struct AttentionConfig {
    pub n_heads: usize,
    pub head_dim: usize,
    /// Attention span in frames; position t sees [t - window_frames + 1, t].
    pub window_frames: usize,
    pub rope_base: f64,
    /// When false the block runs position-free (used along the depth axis,
    /// where a learned additive embedding carries order instead).
    pub rope_enabled: bool,
}

impl AttentionConfig {
    pub fn new(n_heads: usize, head_dim: usize, window_frames: usize) -> Self {
        AttentionConfig {
            n_heads,
            head_dim,
            window_frames,
            rope_base: 10000.0,
            rope_enabled: true,
        }
    }

    pub fn d_model(&self) -> usize {
        self.n_heads * self.head_dim
    }

    fn validate(&self, d_model: usize) -> Result<()> {
        if self.n_heads * self.head_dim != d_model {
            return Err(Error::Contract(format!(
                "attention shape {}x{} does not tile d_model {}",
                self.n_heads, self.head_dim, d_model
            )));
        }
        if self.rope_enabled && self.head_dim % 2 != 0 {
            return Err(Error::Contract(format!(
                "head_dim {} must be even for rotary pairing",
                self.head_dim
            )));
        }
        if self.window_frames == 0 {
            return Err(Error::Contract("window_frames must be positive".into()));
        }
        Ok(())
    }
}

/// Pre-norm residual Transformer block: sliding-window causal attention
/// followed by a 4x GELU FFN.
#[derive(Debug, Clone)]
pub struct TransformerBlock {
    pub wq: LinearLayer,
    pub wk: LinearLayer,
    pub wv: LinearLayer,
    pub wo: LinearLayer,
    pub ffn_up: LinearLayer,
    pub ffn_down: LinearLayer,
    pub norm_attn: Vec<f32>,
    pub norm_ffn: Vec<f32>,
    nonce: u64,
}

/// Rolling per-block inference state: cached rotated keys/values for the
/// last `window_frames` positions plus the absolute position counter.
#[derive(Debug, Clone)]
pub struct BlockState {
    kv: VecDeque<(Vec<f32>, Vec<f32>)>,
    pub pos: u64,
    nonce: u64,
}

impl TransformerBlock {
    pub fn new_seeded(d_model: usize, rng: &mut ChaCha8Rng) -> Self {
        TransformerBlock {
            wq: LinearLayer::new_seeded(d_model, d_model, false, rng),
            wk: LinearLayer::new_seeded(d_model, d_model, false, rng),
            wv: LinearLayer::new_seeded(d_model, d_model, false, rng),
            wo: LinearLayer::new_seeded(d_model, d_model, false, rng),
            ffn_up: LinearLayer::new_seeded(4 * d_model, d_model, false, rng),
            ffn_down: LinearLayer::new_seeded(d_model, 4 * d_model, false, rng),
            norm_attn: vec![1.0; d_model],
            norm_ffn: vec![1.0; d_model],
            nonce: fresh_nonce(),
        }
    }

    pub fn d_model(&self) -> usize {
        self.wq.in_dim
    }

    pub fn fresh_state(&self) -> BlockState {
        BlockState {
            kv: VecDeque::new(),
            pos: 0,
            nonce: self.nonce,
        }
    }

    /// Consume one frame, emit one frame. Keys and values are cached after
    /// rotation, entries older than the window are evicted, and attention
    /// walks the cache in ascending position order with f64 accumulation.
    pub fn step(&self, cfg: &AttentionConfig, state: &mut BlockState, frame: &[f32]) -> Result<Vec<f32>> {
        let d = self.d_model();
        cfg.validate(d)?;
        if frame.len() != d {
            return Err(Error::Contract(format!(
                "frame dim {} does not match block dim {}",
                frame.len(),
                d
            )));
        }
        if state.nonce != self.nonce {
            return Err(Error::Contract(
                "block state was created by a different block instance".into(),
            ));
        }

        let hd = cfg.head_dim;
        let xn = rms_norm(frame, &self.norm_attn);
        let mut q = self.wq.forward(&xn);
        let mut k = self.wk.forward(&xn);
        let v = self.wv.forward(&xn);
        if cfg.rope_enabled {
            let rotate = |dst: &mut [f32]| {
                let mut tmp: Vec<f64> = dst.iter().map(|&x| x as f64).collect();
                rope_apply(&mut tmp, state.pos, cfg.rope_base);
                for (x, &t) in dst.iter_mut().zip(tmp.iter()) {
                    *x = t as f32;
                }
            };
            for h in 0..cfg.n_heads {
                rotate(&mut q[h * hd..(h + 1) * hd]);
                rotate(&mut k[h * hd..(h + 1) * hd]);
            }
        }
        state.kv.push_back((k, v));
        if state.kv.len() > cfg.window_frames {
            state.kv.pop_front();
        }

        let scale = 1.0 / (hd as f64).sqrt();
        let mut attn = vec![0.0f32; d];
        let mut scores = Vec::with_capacity(state.kv.len());
        let mut head_out = vec![0.0f64; hd];
        for h in 0..cfg.n_heads {
            let qh = &q[h * hd..(h + 1) * hd];
            scores.clear();
            for (kj, _) in state.kv.iter() {
                scores.push(dot_f32(qh, &kj[h * hd..(h + 1) * hd]) * scale);
            }
            softmax_inplace(&mut scores);
            head_out.iter_mut().for_each(|v| *v = 0.0);
            for ((_, vj), &p) in state.kv.iter().zip(scores.iter()) {
                axpy_f32(&mut head_out, p, &vj[h * hd..(h + 1) * hd]);
            }
            for i in 0..hd {
                attn[h * hd + i] = head_out[i] as f32;
            }
        }
        let attn_out = self.wo.forward(&attn);
        let x1: Vec<f32> = frame
            .iter()
            .zip(&attn_out)
            .map(|(&a, &b)| (a as f64 + b as f64) as f32)
            .collect();

        let x1n = rms_norm(&x1, &self.norm_ffn);
        let up = self.ffn_up.forward(&x1n);
        let act: Vec<f32> = up.iter().map(|&u| gelu(u as f64) as f32).collect();
        let down = self.ffn_down.forward(&act);
        let out = x1
            .iter()
            .zip(&down)
            .map(|(&a, &b)| (a as f64 + b as f64) as f32)
            .collect();

        state.pos += 1;
        Ok(out)
    }

    /// Batch evaluation: a fold of `step` over a fresh state, so the result
    /// is bit-identical to feeding the frames one at a time.
    pub fn forward(&self, cfg: &AttentionConfig, frames: &[Vec<f32>]) -> Result<Vec<Vec<f32>>> {
        let mut state = self.fresh_state();
        frames.iter().map(|f| self.step(cfg, &mut state, f)).collect()
    }

    pub fn param_count(&self) -> u64 {
        self.wq.param_count()
            + self.wk.param_count()
            + self.wv.param_count()
            + self.wo.param_count()
            + self.ffn_up.param_count()
            + self.ffn_down.param_count()
            + (self.norm_attn.len() + self.norm_ffn.len()) as u64
    }

    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&'a [f32])) {
        self.wq.visit(f);
        self.wk.visit(f);
        self.wv.visit(f);
        self.wo.visit(f);
        self.ffn_up.visit(f);
        self.ffn_down.visit(f);
        f(&self.norm_attn);
        f(&self.norm_ffn);
    }

    pub fn visit_mut(&mut self, f: &mut impl FnMut(&mut [f32])) {
        self.wq.visit_mut(f);
        self.wk.visit_mut(f);
        self.wv.visit_mut(f);
        self.wo.visit_mut(f);
        self.ffn_up.visit_mut(f);
        self.ffn_down.visit_mut(f);
        f(&mut self.norm_attn);
        f(&mut self.norm_ffn);
    }
}

// =============================== tests ===============================
