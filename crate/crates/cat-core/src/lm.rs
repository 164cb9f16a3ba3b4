//! Temporal + Depth autoregressive scheduler over quantizer tokens.
//!
//! One causal temporal transformer runs over the concatenation
//! [prompt text | synthesis text | prompt audio | target audio], where each
//! audio frame enters as the sum of its first K-hat layer embeddings. A
//! small position-free depth transformer then expands each temporal hidden
//! state into per-layer code logits, conditioning layer k on the frame's
//! layers < k. Progressive sequence dropout draws K-hat during training;
//! generation fixes it to an inference depth and decodes frame by frame.
//!
//! Layer 1 owns one reserved extra index (the codebook size itself) acting
//! as end-of-audio during generation. It never appears in token matrices
//! and is excluded from the training softmax.

use crate::codec::LatentSequence;
use crate::error::{Error, Result};
use crate::nnf::{AttentionConfig, BlockState, LinearLayer, TransformerBlock};
use crate::rvq::TokenMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::str::FromStr;

/// Effectively unbounded causal context for the temporal stream; the
/// sliding window is a codec-side concern.
const TEMPORAL_CONTEXT: usize = 1 << 20;

// ======================= progressive dropout ==========================

#[derive(Debug, Clone, Copy)]
pub struct PsdConfig {
    pub p: f64,
    pub n_q: usize,
}

impl PsdConfig {
    pub fn new(p: f64, n_q: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) || !p.is_finite() {
            return Err(Error::Contract(format!("dropout probability {} outside [0, 1]", p)));
        }
        if n_q == 0 {
            return Err(Error::Contract("n_q must be at least 1".into()));
        }
        Ok(PsdConfig { p, n_q })
    }
}

/// Draw the retained depth K-hat: with probability p a strict prefix
/// (uniform on 1..n_q), otherwise the full stack. A single layer leaves
/// no room to truncate, so n_q = 1 always yields 1.
pub fn psd_sample(cfg: &PsdConfig, rng: &mut ChaCha8Rng) -> usize {
    if rng.random_bool(cfg.p) {
        if cfg.n_q == 1 {
            1
        } else {
            rng.random_range(1..cfg.n_q)
        }
    } else {
        cfg.n_q
    }
}

// ============================ task tags ================================

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskTag {
    Asr,
    MultiSpeakerAsr,
    Caption,
}

impl TaskTag {
    fn index(self) -> usize {
        match self {
            TaskTag::Asr => 0,
            TaskTag::MultiSpeakerAsr => 1,
            TaskTag::Caption => 2,
        }
    }
}

impl FromStr for TaskTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "asr" => Ok(TaskTag::Asr),
            "multi-speaker-asr" => Ok(TaskTag::MultiSpeakerAsr),
            "caption" => Ok(TaskTag::Caption),
            other => Err(Error::Contract(format!(
                "unknown task tag {:?} (expected asr, multi-speaker-asr, or caption)",
                other
            ))),
        }
    }
}

// ============================== config ================================

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArConfig {
    pub vocab_size: usize,
    pub n_q: usize,
    pub codebook_size: usize,
    pub d_model: usize,
    pub n_heads: usize,
    pub n_temporal_blocks: usize,
    pub n_depth_blocks: usize,
    /// Width of the quantized latent frames the semantic head conditions on.
    pub latent_dim: usize,
    /// Recorded choice of which latent stream feeds the semantic head:
    /// true = post-quantization sum (the default), false = pre-quantization
    /// encoder output. Callers supply the stream; this documents intent.
    pub semantic_on_quantized: bool,
}

impl ArConfig {
    /// Byte-level text, 8 quantizer layers, width 128 — 4 depth blocks as
    /// in the reference description, 2 temporal blocks at desk scale.
    pub fn desk() -> Self {
        ArConfig {
            vocab_size: 256,
            n_q: 8,
            codebook_size: 1024,
            d_model: 128,
            n_heads: 4,
            n_temporal_blocks: 2,
            n_depth_blocks: 4,
            latent_dim: 96,
            semantic_on_quantized: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.vocab_size < 2 || self.codebook_size < 2 || self.n_q == 0 {
            return Err(Error::Contract("degenerate scheduler configuration".into()));
        }
        if self.codebook_size + 1 > u16::MAX as usize + 1 {
            return Err(Error::Contract("codebook too large for 16-bit tokens".into()));
        }
        if self.d_model == 0 || self.n_heads == 0 || self.d_model % self.n_heads != 0 {
            return Err(Error::Contract(format!(
                "{} heads do not tile width {}",
                self.n_heads, self.d_model
            )));
        }
        if (self.d_model / self.n_heads) % 2 != 0 {
            return Err(Error::Contract("temporal head_dim must be even for rotary pairing".into()));
        }
        if self.n_temporal_blocks == 0 || self.n_depth_blocks == 0 {
            return Err(Error::Contract("block counts must be positive".into()));
        }
        if self.latent_dim == 0 {
            return Err(Error::Contract("latent_dim must be positive".into()));
        }
        Ok(())
    }

    /// Reserved stop index in the layer-1 head and embedding.
    pub fn eoa_index(&self) -> u16 {
        self.codebook_size as u16
    }
}

// ============================== layout ================================

/// Ordered segments of one conditioning + target sequence. Segment
/// boundaries are structural; each segment gets its own learned additive
/// marker embedding.
#[derive(Debug, Clone)]
pub struct SequenceLayout {
    pub x_prompt: Vec<u8>,
    pub x_syn: Vec<u8>,
    pub s_prompt: TokenMatrix,
    /// Present during training/scoring, absent for pure inference prefixes.
    pub target: Option<TokenMatrix>,
}

impl SequenceLayout {
    pub fn validate(&self, cfg: &ArConfig) -> Result<()> {
        for &b in self.x_prompt.iter().chain(&self.x_syn) {
            if b as usize >= cfg.vocab_size {
                return Err(Error::Contract(format!(
                    "text byte {} outside vocabulary of {}",
                    b, cfg.vocab_size
                )));
            }
        }
        for (name, m) in [("prompt", Some(&self.s_prompt)), ("target", self.target.as_ref())] {
            if let Some(m) = m {
                if m.depth > cfg.n_q {
                    return Err(Error::Contract(format!(
                        "{} audio depth {} exceeds n_q {}",
                        name, m.depth, cfg.n_q
                    )));
                }
                if let Some(&c) = m.codes.iter().find(|&&c| c as usize >= cfg.codebook_size) {
                    return Err(Error::Contract(format!(
                        "{} audio code {} outside codebook of {}",
                        name, c, cfg.codebook_size
                    )));
                }
            }
        }
        Ok(())
    }

    /// Positions preceding the first target frame.
    pub fn conditioning_len(&self) -> usize {
        self.x_prompt.len() + self.x_syn.len() + self.s_prompt.n_frames
    }
}

// =============================== model ================================

/// Segment marker slots, in layout order.
const SEG_PROMPT_TEXT: usize = 0;
const SEG_SYN_TEXT: usize = 1;
const SEG_PROMPT_AUDIO: usize = 2;
const SEG_TARGET_AUDIO: usize = 3;
const N_SEGMENTS: usize = 4;
const N_TAGS: usize = 3;

#[derive(Debug, Clone)]
pub struct ArModel {
    pub cfg: ArConfig,
    /// vocab_size x d.
    pub text_emb: Vec<f32>,
    /// Per layer k: rows x d, where layer 1 has codebook_size + 1 rows
    /// (the extra row is the reserved stop slot).
    pub token_emb: Vec<Vec<f32>>,
    /// N_SEGMENTS x d additive segment markers.
    pub seg_emb: Vec<f32>,
    /// N_TAGS x d task tags for the semantic head.
    pub tag_emb: Vec<f32>,
    /// (n_q + 1) x d learned depth positions.
    pub depth_pos: Vec<f32>,
    pub temporal: Vec<TransformerBlock>,
    pub temporal_cfg: AttentionConfig,
    /// Injects the temporal hidden state at depth position 0.
    pub depth_proj: LinearLayer,
    pub depth_blocks: Vec<TransformerBlock>,
    pub depth_cfg: AttentionConfig,
    /// Per-layer output heads; heads[0] also scores the stop slot.
    pub heads: Vec<LinearLayer>,
    pub text_head: LinearLayer,
    /// latent_dim -> d adapter for quantized audio conditioning.
    pub latent_adapter: LinearLayer,
}

fn table_seeded(rows: usize, d: usize, rng: &mut ChaCha8Rng) -> Vec<f32> {
    let dist = Normal::new(0.0, 1.0 / (d as f64).sqrt()).expect("valid normal");
    (0..rows * d).map(|_| dist.sample(rng) as f32).collect()
}

fn row(table: &[f32], d: usize, i: usize) -> &[f32] {
    &table[i * d..(i + 1) * d]
}

impl ArModel {
    pub fn new_seeded(cfg: &ArConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = cfg.d_model;
        let head_dim = d / cfg.n_heads;
        let text_emb = table_seeded(cfg.vocab_size, d, &mut rng);
        let token_emb = (0..cfg.n_q)
            .map(|k| {
                let rows = cfg.codebook_size + usize::from(k == 0);
                table_seeded(rows, d, &mut rng)
            })
            .collect();
        let seg_emb = table_seeded(N_SEGMENTS, d, &mut rng);
        let tag_emb = table_seeded(N_TAGS, d, &mut rng);
        let depth_pos = table_seeded(cfg.n_q + 1, d, &mut rng);
        let temporal = (0..cfg.n_temporal_blocks)
            .map(|_| TransformerBlock::new_seeded(d, &mut rng))
            .collect();
        let temporal_cfg = AttentionConfig::new(cfg.n_heads, head_dim, TEMPORAL_CONTEXT);
        let depth_proj = LinearLayer::new_seeded(d, d, true, &mut rng);
        let depth_blocks = (0..cfg.n_depth_blocks)
            .map(|_| TransformerBlock::new_seeded(d, &mut rng))
            .collect();
        let depth_cfg = AttentionConfig {
            n_heads: cfg.n_heads,
            head_dim,
            window_frames: cfg.n_q + 1,
            rope_base: 10000.0,
            rope_enabled: false,
        };
        let heads = (0..cfg.n_q)
            .map(|k| {
                let out = cfg.codebook_size + usize::from(k == 0);
                LinearLayer::new_seeded(out, d, true, &mut rng)
            })
            .collect();
        let text_head = LinearLayer::new_seeded(cfg.vocab_size, d, true, &mut rng);
        let latent_adapter = LinearLayer::new_seeded(d, cfg.latent_dim, true, &mut rng);
        Ok(ArModel {
            cfg: *cfg,
            text_emb,
            token_emb,
            seg_emb,
            tag_emb,
            depth_pos,
            temporal,
            temporal_cfg,
            depth_proj,
            depth_blocks,
            depth_cfg,
            heads,
            text_head,
            latent_adapter,
        })
    }

    pub fn param_count(&self) -> u64 {
        let mut n = 0u64;
        self.visit(&mut |t| n += t.len() as u64);
        n
    }

    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&'a [f32])) {
        f(&self.text_emb);
        for t in &self.token_emb {
            f(t);
        }
        f(&self.seg_emb);
        f(&self.tag_emb);
        f(&self.depth_pos);
        for b in &self.temporal {
            b.visit(f);
        }
        self.depth_proj.visit(f);
        for b in &self.depth_blocks {
            b.visit(f);
        }
        for h in &self.heads {
            h.visit(f);
        }
        self.text_head.visit(f);
        self.latent_adapter.visit(f);
    }

    pub fn visit_mut(&mut self, f: &mut impl FnMut(&mut [f32])) {
        f(&mut self.text_emb);
        for t in &mut self.token_emb {
            f(t);
        }
        f(&mut self.seg_emb);
        f(&mut self.tag_emb);
        f(&mut self.depth_pos);
        for b in &mut self.temporal {
            b.visit_mut(f);
        }
        self.depth_proj.visit_mut(f);
        for b in &mut self.depth_blocks {
            b.visit_mut(f);
        }
        for h in &mut self.heads {
            h.visit_mut(f);
        }
        self.text_head.visit_mut(f);
        self.latent_adapter.visit_mut(f);
    }

    // --------------------------- embedding ---------------------------

    /// Sum of the first `frame_tokens.len()` layer embeddings for one
    /// frame — the depth-truncated frame representation. Values at deeper
    /// layers are simply never passed in.
    pub fn aggregate_embeddings(&self, frame_tokens: &[u16]) -> Result<Vec<f32>> {
        let k_hat = frame_tokens.len();
        if k_hat == 0 || k_hat > self.cfg.n_q {
            return Err(Error::Contract(format!(
                "aggregation depth {} outside 1..={}",
                k_hat, self.cfg.n_q
            )));
        }
        let d = self.cfg.d_model;
        let mut acc = vec![0.0f64; d];
        for (k, &tok) in frame_tokens.iter().enumerate() {
            if tok as usize >= self.cfg.codebook_size {
                return Err(Error::Contract(format!(
                    "token {} outside codebook of {} at layer {}",
                    tok,
                    self.cfg.codebook_size,
                    k + 1
                )));
            }
            let e = row(&self.token_emb[k], d, tok as usize);
            for (a, &v) in acc.iter_mut().zip(e) {
                *a += v as f64;
            }
        }
        Ok(acc.iter().map(|&v| v as f32).collect())
    }

    fn add_rows(a: &[f32], b: &[f32]) -> Vec<f32> {
        a.iter().zip(b).map(|(&x, &y)| ((x as f64) + (y as f64)) as f32).collect()
    }

    fn audio_input(&self, m: &TokenMatrix, t: usize, k_hat: usize, seg: usize) -> Result<Vec<f32>> {
        if m.depth < k_hat {
            return Err(Error::Contract(format!(
                "audio frames carry depth {}, cannot aggregate {} layers",
                m.depth, k_hat
            )));
        }
        let frame = &m.codes[t * m.depth..t * m.depth + k_hat];
        let e = self.aggregate_embeddings(frame)?;
        Ok(Self::add_rows(&e, row(&self.seg_emb, self.cfg.d_model, seg)))
    }

    /// Per-position input embeddings for the concatenated stream.
    fn temporal_inputs(&self, layout: &SequenceLayout, k_hat: usize) -> Result<Vec<Vec<f32>>> {
        layout.validate(&self.cfg)?;
        let d = self.cfg.d_model;
        let target_frames = layout.target.as_ref().map_or(0, |m| m.n_frames);
        let mut inputs = Vec::with_capacity(layout.conditioning_len() + target_frames);
        for (&b, seg) in layout
            .x_prompt
            .iter()
            .map(|b| (b, SEG_PROMPT_TEXT))
            .chain(layout.x_syn.iter().map(|b| (b, SEG_SYN_TEXT)))
        {
            inputs.push(Self::add_rows(
                row(&self.text_emb, d, b as usize),
                row(&self.seg_emb, d, seg),
            ));
        }
        for t in 0..layout.s_prompt.n_frames {
            inputs.push(self.audio_input(&layout.s_prompt, t, k_hat, SEG_PROMPT_AUDIO)?);
        }
        if let Some(target) = &layout.target {
            for t in 0..target.n_frames {
                inputs.push(self.audio_input(target, t, k_hat, SEG_TARGET_AUDIO)?);
            }
        }
        Ok(inputs)
    }

    // ---------------------------- forward -----------------------------

    /// Hidden states for every position of the concatenated stream under a
    /// single causal mask.
    pub fn temporal_forward(&self, layout: &SequenceLayout, k_hat: usize) -> Result<Vec<Vec<f32>>> {
        let mut seq = self.temporal_inputs(layout, k_hat)?;
        for block in &self.temporal {
            seq = block.forward(&self.temporal_cfg, &seq)?;
        }
        Ok(seq)
    }

    /// Logits for layer `k` of one frame given that frame's layers < k and
    /// the temporal hidden state. Layer 1 scores codebook_size + 1 slots
    /// (the extra one is the stop token); deeper layers score the codebook.
    pub fn depth_forward(&self, h: &[f32], prefix: &[u16], k: usize) -> Result<Vec<f32>> {
        if k == 0 || k > self.cfg.n_q {
            return Err(Error::Contract(format!("layer {} outside 1..={}", k, self.cfg.n_q)));
        }
        if prefix.len() != k - 1 {
            return Err(Error::Contract(format!(
                "layer {} needs a prefix of {} tokens, got {}",
                k,
                k - 1,
                prefix.len()
            )));
        }
        let d = self.cfg.d_model;
        if h.len() != d {
            return Err(Error::Contract(format!("hidden width {} != d_model {}", h.len(), d)));
        }
        let mut seq = Vec::with_capacity(k);
        seq.push(Self::add_rows(&self.depth_proj.forward(h), row(&self.depth_pos, d, 0)));
        for (j, &tok) in prefix.iter().enumerate() {
            if tok as usize >= self.cfg.codebook_size {
                return Err(Error::Contract(format!(
                    "prefix token {} outside codebook of {}",
                    tok, self.cfg.codebook_size
                )));
            }
            seq.push(Self::add_rows(
                row(&self.token_emb[j], d, tok as usize),
                row(&self.depth_pos, d, j + 1),
            ));
        }
        for block in &self.depth_blocks {
            seq = block.forward(&self.depth_cfg, &seq)?;
        }
        Ok(self.heads[k - 1].forward(seq.last().expect("depth sequence is non-empty")))
    }

    // ------------------------------ loss -------------------------------

    /// Mean negative log-likelihood of the target tokens over layers
    /// 1..=k_hat. The softmax for every layer runs over the codebook only —
    /// the stop slot is a generation device, not a training target — so a
    /// uniform-logit model scores exactly ln(codebook_size) per term.
    /// Tokens at layers > k_hat are never read.
    pub fn ar_loss(&self, layout: &SequenceLayout, k_hat: usize) -> Result<f64> {
        let target = layout
            .target
            .as_ref()
            .ok_or_else(|| Error::Contract("scoring needs a target audio segment".into()))?;
        if target.n_frames == 0 {
            return Err(Error::Contract("target audio segment is empty".into()));
        }
        let base = layout.conditioning_len();
        if base == 0 {
            return Err(Error::Contract(
                "no conditioning context before the first target frame".into(),
            ));
        }
        let h = self.temporal_forward(layout, k_hat)?;
        let mut total = 0.0f64;
        for t in 0..target.n_frames {
            let h_cond = &h[base + t - 1];
            let frame = &target.codes[t * target.depth..(t + 1) * target.depth];
            for k in 1..=k_hat {
                let logits = self.depth_forward(h_cond, &frame[..k - 1], k)?;
                total += nll(&logits[..self.cfg.codebook_size], frame[k - 1] as usize);
            }
        }
        Ok(total / (target.n_frames * k_hat) as f64)
    }

    // --------------------------- generation ---------------------------

    /// Autoregressive decoding at a fixed inference depth. The prompt audio
    /// is truncated to that depth; each emitted frame is fed back through
    /// the same depth-limited aggregation. Stops on the reserved stop index
    /// at layer 1 (the stopping frame is discarded) or at max_frames.
    pub fn generate(
        &self,
        x_prompt: &[u8],
        x_syn: &[u8],
        s_prompt: &TokenMatrix,
        k_infer: usize,
        max_frames: usize,
        sampling: Sampling,
    ) -> Result<TokenMatrix> {
        if k_infer == 0 || k_infer > self.cfg.n_q {
            return Err(Error::Contract(format!(
                "inference depth {} outside 1..={}",
                k_infer, self.cfg.n_q
            )));
        }
        if s_prompt.depth < k_infer {
            return Err(Error::Contract(format!(
                "prompt depth {} is shallower than inference depth {}",
                s_prompt.depth, k_infer
            )));
        }
        if let Sampling::Temperature { tau, .. } = sampling {
            if !(tau > 0.0) || !tau.is_finite() {
                return Err(Error::Contract(format!("temperature {} must be positive", tau)));
            }
        }
        let layout = SequenceLayout {
            x_prompt: x_prompt.to_vec(),
            x_syn: x_syn.to_vec(),
            s_prompt: s_prompt.truncated(k_infer)?,
            target: None,
        };
        if layout.conditioning_len() == 0 {
            return Err(Error::Contract(
                "generation needs at least one conditioning position".into(),
            ));
        }
        let inputs = self.temporal_inputs(&layout, k_infer)?;
        let mut states: Vec<BlockState> = self.temporal.iter().map(|b| b.fresh_state()).collect();
        let mut h_last = Vec::new();
        for input in inputs {
            h_last = self.temporal_step(&mut states, input)?;
        }
        let mut rng = match sampling {
            Sampling::Greedy => None,
            Sampling::Temperature { seed, .. } => Some(ChaCha8Rng::seed_from_u64(seed)),
        };
        let eoa = self.cfg.eoa_index();
        let mut codes: Vec<u16> = Vec::new();
        let mut n_frames = 0usize;
        while n_frames < max_frames {
            let mut frame: Vec<u16> = Vec::with_capacity(k_infer);
            let first = sample_token(&self.depth_forward(&h_last, &[], 1)?, sampling, rng.as_mut());
            if first == eoa {
                break;
            }
            frame.push(first);
            for k in 2..=k_infer {
                let logits = self.depth_forward(&h_last, &frame, k)?;
                frame.push(sample_token(&logits, sampling, rng.as_mut()));
            }
            let e = self.aggregate_embeddings(&frame)?;
            let input = Self::add_rows(&e, row(&self.seg_emb, self.cfg.d_model, SEG_TARGET_AUDIO));
            h_last = self.temporal_step(&mut states, input)?;
            codes.extend_from_slice(&frame);
            n_frames += 1;
        }
        TokenMatrix::new(codes, n_frames, k_infer)
    }

    fn temporal_step(&self, states: &mut [BlockState], input: Vec<f32>) -> Result<Vec<f32>> {
        let mut x = input;
        for (block, state) in self.temporal.iter().zip(states.iter_mut()) {
            x = block.step(&self.temporal_cfg, state, &x)?;
        }
        Ok(x)
    }

    // --------------------------- semantics -----------------------------

    /// Per-token negative log-likelihoods of the target text given
    /// [task tag | adapted audio latents | text so far].
    pub fn semantic_ce_terms(&self, batch: &SemanticBatch) -> Result<Vec<f64>> {
        if batch.target.is_empty() {
            return Err(Error::Contract("semantic target text is empty".into()));
        }
        let d = self.cfg.d_model;
        let mut seq = Vec::with_capacity(1 + batch.q.len() + batch.target.len());
        seq.push(row(&self.tag_emb, d, batch.tag.index()).to_vec());
        for frame in &batch.q.frames {
            if frame.len() != self.cfg.latent_dim {
                return Err(Error::Contract(format!(
                    "latent frame dim {} != adapter input {}",
                    frame.len(),
                    self.cfg.latent_dim
                )));
            }
            seq.push(self.latent_adapter.forward(frame));
        }
        for &b in &batch.target {
            if b as usize >= self.cfg.vocab_size {
                return Err(Error::Contract(format!(
                    "text byte {} outside vocabulary of {}",
                    b, self.cfg.vocab_size
                )));
            }
            seq.push(row(&self.text_emb, d, b as usize).to_vec());
        }
        for block in &self.temporal {
            seq = block.forward(&self.temporal_cfg, &seq)?;
        }
        let base = 1 + batch.q.len();
        Ok(batch
            .target
            .iter()
            .enumerate()
            .map(|(i, &b)| nll(&self.text_head.forward(&seq[base + i - 1]), b as usize))
            .collect())
    }

    /// Mean cross entropy per target text token.
    pub fn semantic_ce_loss(&self, batch: &SemanticBatch) -> Result<f64> {
        let terms = self.semantic_ce_terms(batch)?;
        Ok(terms.iter().sum::<f64>() / terms.len() as f64)
    }
}

#[derive(Debug, Clone)]
pub struct SemanticBatch {
    pub tag: TaskTag,
    /// Quantized audio representations at the adapter's input width.
    pub q: LatentSequence,
    /// Byte-level target text.
    pub target: Vec<u8>,
}

#[derive(Debug, Clone, Copy)]
pub enum Sampling {
    Greedy,
    Temperature { tau: f64, seed: u64 },
}

/// Negative log softmax probability of `target` under `logits`, f64.
fn nll(logits: &[f32], target: usize) -> f64 {
    let mut max = f64::NEG_INFINITY;
    for &l in logits {
        max = max.max(l as f64);
    }
    let lse = max + logits.iter().map(|&l| ((l as f64) - max).exp()).sum::<f64>().ln();
    lse - logits[target] as f64
}

fn sample_token(logits: &[f32], sampling: Sampling, rng: Option<&mut ChaCha8Rng>) -> u16 {
    match sampling {
        Sampling::Greedy => {
            let mut best = 0usize;
            let mut best_v = f64::NEG_INFINITY;
            for (i, &l) in logits.iter().enumerate() {
                if (l as f64) > best_v {
                    best_v = l as f64;
                    best = i;
                }
            }
            best as u16
        }
        Sampling::Temperature { tau, .. } => {
            let rng = rng.expect("temperature sampling carries an rng");
            let mut probs: Vec<f64> = logits.iter().map(|&l| l as f64 / tau).collect();
            crate::nnf::softmax_inplace(&mut probs);
            let draw: f64 = rng.random_range(0.0..1.0);
            let mut cum = 0.0;
            for (i, &p) in probs.iter().enumerate() {
                cum += p;
                if draw < cum {
                    return i as u16;
                }
            }
            (probs.len() - 1) as u16
        }
    }
}

// =============================== tests ===============================
