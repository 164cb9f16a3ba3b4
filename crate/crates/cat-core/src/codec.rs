//! Hierarchical patchify codec: a stack of [patchify -> linear -> causal
//! Transformer blocks] stages compressing 24 kHz audio to 12.5 Hz latent
//! frames, and the mirrored decoder expanding latents back to samples.
//!
//! Batch encode/decode folds the streaming step over a fresh state, so the
//! two evaluation modes agree bit for bit and causality holds by
//! construction: one output frame is a pure function of its own and earlier
//! 1920-sample chunks.

use crate::error::{Error, Result};
use crate::nnf::{AttentionConfig, BlockState, LinearLayer, TransformerBlock};
use crate::signal::Waveform;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::sync::atomic::{AtomicU64, Ordering};

static NEXT_NONCE: AtomicU64 = AtomicU64::new(1);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageConfig {
    /// Temporal reduction factor applied entering the stage.
    pub patch: usize,
    pub n_blocks: usize,
    pub d_model: usize,
    pub n_heads: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodecConfig {
    pub stages: Vec<StageConfig>,
    pub sample_rate: u32,
    /// Attention span, converted to frames per stage at that stage's rate.
    pub window_seconds: f64,
}

impl CodecConfig {
    /// Small configuration exercising every stage boundary: patch chain
    /// 240/2/2/2 kept intact, narrow widths.
    pub fn desk() -> Self {
        let dims = [64, 64, 64, 96];
        let heads = [4, 4, 4, 6];
        let patches = [240, 2, 2, 2];
        CodecConfig {
            stages: (0..4)
                .map(|i| StageConfig {
                    patch: patches[i],
                    n_blocks: 2,
                    d_model: dims[i],
                    n_heads: heads[i],
                })
                .collect(),
            sample_rate: 24000,
            window_seconds: 10.0,
        }
    }

    /// Full-size configuration; constructed for shape/parameter accounting,
    /// never instantiated with weights in the test suite.
    pub fn full_reference() -> Self {
        let dims = [768, 768, 768, 1280];
        let heads = [12, 12, 12, 20];
        let blocks = [12, 12, 12, 32];
        let patches = [240, 2, 2, 2];
        CodecConfig {
            stages: (0..4)
                .map(|i| StageConfig {
                    patch: patches[i],
                    n_blocks: blocks[i],
                    d_model: dims[i],
                    n_heads: heads[i],
                })
                .collect(),
            sample_rate: 24000,
            window_seconds: 10.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.stages.is_empty() {
            return Err(Error::Contract("codec needs at least one stage".into()));
        }
        for (i, s) in self.stages.iter().enumerate() {
            if s.patch == 0 || s.n_blocks == 0 || s.d_model == 0 || s.n_heads == 0 {
                return Err(Error::Contract(format!("stage {} has a zero field", i)));
            }
            if s.d_model % s.n_heads != 0 {
                return Err(Error::Contract(format!(
                    "stage {}: d_model {} not divisible by {} heads",
                    i, s.d_model, s.n_heads
                )));
            }
            if (s.d_model / s.n_heads) % 2 != 0 {
                return Err(Error::Contract(format!(
                    "stage {}: head_dim {} must be even for rotary pairing",
                    i,
                    s.d_model / s.n_heads
                )));
            }
        }
        if self.sample_rate == 0 || self.window_seconds <= 0.0 {
            return Err(Error::Contract("sample_rate and window_seconds must be positive".into()));
        }
        Ok(())
    }

    /// Samples per latent frame: the product of all patch factors.
    pub fn samples_per_frame(&self) -> usize {
        self.stages.iter().map(|s| s.patch).product()
    }

    pub fn latent_dim(&self) -> usize {
        self.stages.last().map_or(0, |s| s.d_model)
    }

    /// Latent frames per second.
    pub fn frame_rate(&self) -> f64 {
        self.sample_rate as f64 / self.samples_per_frame() as f64
    }

    /// Frame rate at the output of stage `i` (after its patchify).
    fn stage_rate(&self, i: usize) -> f64 {
        let reduction: usize = self.stages[..=i].iter().map(|s| s.patch).product();
        self.sample_rate as f64 / reduction as f64
    }

    fn stage_attention(&self, i: usize) -> AttentionConfig {
        let s = &self.stages[i];
        let frames = (self.window_seconds * self.stage_rate(i)).round().max(1.0) as usize;
        AttentionConfig::new(s.n_heads, s.d_model / s.n_heads, frames)
    }

    /// Parameter count of encoder plus decoder, by arithmetic only.
    pub fn param_count(&self) -> u64 {
        let mut total = 0u64;
        let mut d_prev = 1u64;
        for s in &self.stages {
            let d = s.d_model as u64;
            let patched = s.patch as u64 * d_prev;
            let block = 12 * d * d + 2 * d;
            total += patched * d + d + s.n_blocks as u64 * block; // encoder stage
            total += s.n_blocks as u64 * block + d * patched + patched; // mirrored decoder stage
            d_prev = d;
        }
        total
    }
}

/// Continuous 12.5 Hz representation between codec and quantizer.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentSequence {
    pub frames: Vec<Vec<f32>>,
    pub frame_rate: f64,
}

impl LatentSequence {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

// ========================= patchify primitives ========================

/// Group p consecutive rows into one concatenated row. Lossless; requires
/// the row count to divide evenly.
pub fn patchify(seq: &[Vec<f32>], p: usize) -> Result<Vec<Vec<f32>>> {
    if p == 0 {
        return Err(Error::Contract("patch factor must be positive".into()));
    }
    if seq.len() % p != 0 {
        return Err(Error::Contract(format!(
            "sequence length {} not divisible by patch {}",
            seq.len(),
            p
        )));
    }
    Ok(seq
        .chunks(p)
        .map(|group| group.iter().flat_map(|r| r.iter().copied()).collect())
        .collect())
}

/// Exact inverse of [`patchify`]: split every row into p rows.
pub fn unpatchify(seq: &[Vec<f32>], p: usize) -> Result<Vec<Vec<f32>>> {
    if p == 0 {
        return Err(Error::Contract("patch factor must be positive".into()));
    }
    let mut out = Vec::with_capacity(seq.len() * p);
    for row in seq {
        if row.len() % p != 0 {
            return Err(Error::Contract(format!(
                "row width {} not divisible by patch {}",
                row.len(),
                p
            )));
        }
        let d = row.len() / p;
        for j in 0..p {
            out.push(row[j * d..(j + 1) * d].to_vec());
        }
    }
    Ok(out)
}

/// Zero-pad on the right to a whole number of frames; the original length is
/// returned so a bitstream header can carry it.
pub fn pad_to_frame(w: &Waveform, samples_per_frame: usize) -> (Waveform, u64) {
    let original = w.samples.len() as u64;
    let rem = w.samples.len() % samples_per_frame;
    let mut samples = w.samples.clone();
    if rem != 0 {
        samples.resize(w.samples.len() + samples_per_frame - rem, 0.0);
    }
    (Waveform::new(samples, w.sample_rate), original)
}

// ============================== encoder ==============================

#[derive(Debug, Clone)]
pub struct EncoderStage {
    pub proj: LinearLayer,
    pub blocks: Vec<TransformerBlock>,
}

#[derive(Debug, Clone)]
pub struct Encoder {
    cfg: CodecConfig,
    attn: Vec<AttentionConfig>,
    pub stages: Vec<EncoderStage>,
    nonce: u64,
}

#[derive(Debug, Clone)]
pub struct EncoderState {
    stage_blocks: Vec<Vec<BlockState>>,
    nonce: u64,
}

impl Encoder {
    pub fn new_seeded(cfg: &CodecConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut stages = Vec::with_capacity(cfg.stages.len());
        let mut d_prev = 1usize;
        for s in &cfg.stages {
            let proj = LinearLayer::new_seeded(s.d_model, s.patch * d_prev, true, &mut rng);
            let blocks = (0..s.n_blocks)
                .map(|_| TransformerBlock::new_seeded(s.d_model, &mut rng))
                .collect();
            stages.push(EncoderStage { proj, blocks });
            d_prev = s.d_model;
        }
        Ok(Encoder {
            attn: (0..cfg.stages.len()).map(|i| cfg.stage_attention(i)).collect(),
            cfg: cfg.clone(),
            stages,
            nonce: NEXT_NONCE.fetch_add(1, Ordering::Relaxed),
        })
    }

    pub fn config(&self) -> &CodecConfig {
        &self.cfg
    }

    pub fn fresh_state(&self) -> EncoderState {
        EncoderState {
            stage_blocks: self
                .stages
                .iter()
                .map(|s| s.blocks.iter().map(|b| b.fresh_state()).collect())
                .collect(),
            nonce: self.nonce,
        }
    }

    /// Consume exactly one frame's worth of samples, emit one latent frame.
    pub fn encode_step(&self, state: &mut EncoderState, chunk: &[f64]) -> Result<Vec<f32>> {
        let spf = self.cfg.samples_per_frame();
        if chunk.len() != spf {
            return Err(Error::Contract(format!(
                "chunk length {} != samples_per_frame {}",
                chunk.len(),
                spf
            )));
        }
        if state.nonce != self.nonce {
            return Err(Error::Contract(
                "encoder state belongs to a different encoder instance".into(),
            ));
        }
        let mut vectors: Vec<Vec<f32>> = chunk.iter().map(|&s| vec![s as f32]).collect();
        for (i, stage) in self.stages.iter().enumerate() {
            vectors = patchify(&vectors, self.cfg.stages[i].patch)?;
            for v in vectors.iter_mut() {
                *v = stage.proj.forward(v);
            }
            for (bi, block) in stage.blocks.iter().enumerate() {
                let bs = &mut state.stage_blocks[i][bi];
                for v in vectors.iter_mut() {
                    *v = block.step(&self.attn[i], bs, v)?;
                }
            }
        }
        debug_assert_eq!(vectors.len(), 1);
        Ok(vectors.pop().expect("patch product yields one frame"))
    }

    /// Batch encode: a fold of [`Self::encode_step`] over a fresh state.
    pub fn encode(&self, w: &Waveform) -> Result<LatentSequence> {
        if w.sample_rate != self.cfg.sample_rate {
            return Err(Error::Contract(format!(
                "expected {} Hz input, got {}",
                self.cfg.sample_rate, w.sample_rate
            )));
        }
        let spf = self.cfg.samples_per_frame();
        if w.samples.len() % spf != 0 {
            return Err(Error::Contract(format!(
                "input length {} is not a multiple of {} (pad_to_frame first)",
                w.samples.len(),
                spf
            )));
        }
        let mut state = self.fresh_state();
        let frames = w
            .samples
            .chunks(spf)
            .map(|chunk| self.encode_step(&mut state, chunk))
            .collect::<Result<Vec<_>>>()?;
        Ok(LatentSequence {
            frames,
            frame_rate: self.cfg.frame_rate(),
        })
    }

    pub fn param_count(&self) -> u64 {
        self.stages
            .iter()
            .map(|s| {
                s.proj.param_count() + s.blocks.iter().map(|b| b.param_count()).sum::<u64>()
            })
            .sum()
    }

    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&'a [f32])) {
        for s in &self.stages {
            s.proj.visit(f);
            for b in &s.blocks {
                b.visit(f);
            }
        }
    }

    pub fn visit_mut(&mut self, f: &mut impl FnMut(&mut [f32])) {
        for s in &mut self.stages {
            s.proj.visit_mut(f);
            for b in &mut s.blocks {
                b.visit_mut(f);
            }
        }
    }
}

// ============================== decoder ==============================

#[derive(Debug, Clone)]
pub struct DecoderStage {
    pub blocks: Vec<TransformerBlock>,
    pub expand: LinearLayer,
}

/// Mirror of the encoder: stages run deepest-first, each one
/// blocks -> linear expand -> unpatchify.
#[derive(Debug, Clone)]
pub struct Decoder {
    cfg: CodecConfig,
    attn: Vec<AttentionConfig>, // indexed by encoder stage, as in Encoder
    /// stages[j] mirrors encoder stage n-1-j.
    pub stages: Vec<DecoderStage>,
    nonce: u64,
}

#[derive(Debug, Clone)]
pub struct DecoderState {
    stage_blocks: Vec<Vec<BlockState>>,
    nonce: u64,
}

impl Decoder {
    pub fn new_seeded(cfg: &CodecConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = cfg.stages.len();
        let mut stages = Vec::with_capacity(n);
        for j in (0..n).rev() {
            let s = &cfg.stages[j];
            let d_prev = if j == 0 { 1 } else { cfg.stages[j - 1].d_model };
            let blocks = (0..s.n_blocks)
                .map(|_| TransformerBlock::new_seeded(s.d_model, &mut rng))
                .collect();
            let expand = LinearLayer::new_seeded(s.patch * d_prev, s.d_model, true, &mut rng);
            stages.push(DecoderStage { blocks, expand });
        }
        Ok(Decoder {
            attn: (0..n).map(|i| cfg.stage_attention(i)).collect(),
            cfg: cfg.clone(),
            stages,
            nonce: NEXT_NONCE.fetch_add(1, Ordering::Relaxed),
        })
    }

    pub fn config(&self) -> &CodecConfig {
        &self.cfg
    }

    pub fn fresh_state(&self) -> DecoderState {
        DecoderState {
            stage_blocks: self
                .stages
                .iter()
                .map(|s| s.blocks.iter().map(|b| b.fresh_state()).collect())
                .collect(),
            nonce: self.nonce,
        }
    }

    /// Consume one latent frame, emit one frame's worth of samples.
    pub fn decode_step(&self, state: &mut DecoderState, frame: &[f32]) -> Result<Vec<f64>> {
        if frame.len() != self.cfg.latent_dim() {
            return Err(Error::Contract(format!(
                "latent dim {} != {}",
                frame.len(),
                self.cfg.latent_dim()
            )));
        }
        if state.nonce != self.nonce {
            return Err(Error::Contract(
                "decoder state belongs to a different decoder instance".into(),
            ));
        }
        let n = self.cfg.stages.len();
        let mut vectors = vec![frame.to_vec()];
        for (j, stage) in self.stages.iter().enumerate() {
            let enc_i = n - 1 - j;
            for (bi, block) in stage.blocks.iter().enumerate() {
                let bs = &mut state.stage_blocks[j][bi];
                for v in vectors.iter_mut() {
                    *v = block.step(&self.attn[enc_i], bs, v)?;
                }
            }
            for v in vectors.iter_mut() {
                *v = stage.expand.forward(v);
            }
            vectors = unpatchify(&vectors, self.cfg.stages[enc_i].patch)?;
        }
        Ok(vectors.iter().map(|v| v[0] as f64).collect())
    }

    /// Batch decode: a fold of [`Self::decode_step`] over a fresh state.
    pub fn decode(&self, z: &LatentSequence) -> Result<Waveform> {
        let mut state = self.fresh_state();
        let mut samples = Vec::with_capacity(z.len() * self.cfg.samples_per_frame());
        for frame in &z.frames {
            samples.extend(self.decode_step(&mut state, frame)?);
        }
        Ok(Waveform::new(samples, self.cfg.sample_rate))
    }

    pub fn param_count(&self) -> u64 {
        self.stages
            .iter()
            .map(|s| {
                s.expand.param_count() + s.blocks.iter().map(|b| b.param_count()).sum::<u64>()
            })
            .sum()
    }

    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&'a [f32])) {
        for s in &self.stages {
            for b in &s.blocks {
                b.visit(f);
            }
            s.expand.visit(f);
        }
    }

    pub fn visit_mut(&mut self, f: &mut impl FnMut(&mut [f32])) {
        for s in &mut self.stages {
            for b in &mut s.blocks {
                b.visit_mut(f);
            }
            s.expand.visit_mut(f);
        }
    }
}

// =============================== tests ===============================

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn seeded_waveform(frames: usize, seed: u64) -> Waveform {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = frames * 1920;
        Waveform::new((0..n).map(|_| rng.random_range(-0.8..0.8)).collect(), 24000)
    }

    #[test]
    fn patchify_groups_rows() {
        let seq: Vec<Vec<f32>> = vec![vec![1.0], vec![2.0], vec![3.0], vec![4.0]];
        let got = patchify(&seq, 2).unwrap();
        assert_eq!(got, vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert_eq!(patchify(&seq, 1).unwrap(), seq);
        assert!(matches!(patchify(&seq, 3), Err(Error::Contract(_))));
    }

    #[test]
    fn unpatchify_splits_rows() {
        let seq: Vec<Vec<f32>> = vec![vec![1.0, 2.0], vec![3.0, 4.0]];
        let got = unpatchify(&seq, 2).unwrap();
        assert_eq!(got, vec![vec![1.0], vec![2.0], vec![3.0], vec![4.0]]);
        assert_eq!(unpatchify(&seq, 1).unwrap(), seq);
        assert!(matches!(unpatchify(&seq, 3), Err(Error::Contract(_))));
    }

    #[test]
    fn desk_config_shape_arithmetic() {
        let cfg = CodecConfig::desk();
        cfg.validate().unwrap();
        assert_eq!(cfg.samples_per_frame(), 1920);
        assert_eq!(cfg.latent_dim(), 96);
        assert_eq!(cfg.frame_rate(), 12.5);
        let attn: Vec<usize> = (0..4).map(|i| cfg.stage_attention(i).window_frames).collect();
        assert_eq!(attn, vec![1000, 500, 250, 125]);
    }

    #[test]
    fn full_reference_constructs_and_reports_params() {
        let cfg = CodecConfig::full_reference();
        cfg.validate().unwrap();
        assert_eq!(cfg.samples_per_frame(), 1920);
        assert_eq!(cfg.latent_dim(), 1280);
        let params = cfg.param_count();
        assert!(
            (1_500_000_000..2_500_000_000).contains(&params),
            "unexpected parameter count {}",
            params
        );
        // the desk build really is desk-sized
        assert!(CodecConfig::desk().param_count() < 10_000_000);
    }

    #[test]
    fn encode_yields_one_frame_per_1920_samples() {
        let enc = Encoder::new_seeded(&CodecConfig::desk(), 7).unwrap();
        let w = seeded_waveform(5, 100);
        let z = enc.encode(&w).unwrap();
        assert_eq!(z.len(), 5);
        assert_eq!(z.frames[0].len(), 96);
        assert_eq!(z.frame_rate, 12.5);
        assert!(z.frames.iter().all(|f| f.iter().all(|v| v.is_finite())));
    }

    #[test]
    fn encoder_param_count_matches_arithmetic() {
        let cfg = CodecConfig::desk();
        let enc = Encoder::new_seeded(&cfg, 7).unwrap();
        let dec = Decoder::new_seeded(&cfg, 8).unwrap();
        assert_eq!(enc.param_count() + dec.param_count(), cfg.param_count());
    }

    #[test]
    fn encode_contract_errors() {
        let enc = Encoder::new_seeded(&CodecConfig::desk(), 7).unwrap();
        let wrong_rate = Waveform::new(vec![0.0; 1920], 16000);
        assert!(matches!(enc.encode(&wrong_rate), Err(Error::Contract(_))));
        let wrong_len = Waveform::new(vec![0.0; 1000], 24000);
        assert!(matches!(enc.encode(&wrong_len), Err(Error::Contract(_))));
        let mut state = enc.fresh_state();
        assert!(matches!(
            enc.encode_step(&mut state, &vec![0.0; 100]),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn state_reuse_across_encoders_rejected() {
        let cfg = CodecConfig::desk();
        let a = Encoder::new_seeded(&cfg, 7).unwrap();
        let b = Encoder::new_seeded(&cfg, 7).unwrap();
        let mut state = b.fresh_state();
        let chunk = vec![0.0f64; 1920];
        assert!(matches!(
            a.encode_step(&mut state, &chunk),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn encode_stream_equals_batch() {
        let enc = Encoder::new_seeded(&CodecConfig::desk(), 7).unwrap();
        let w = seeded_waveform(5, 7);
        let batch = enc.encode(&w).unwrap();
        let mut state = enc.fresh_state();
        for (t, chunk) in w.samples.chunks(1920).enumerate() {
            let frame = enc.encode_step(&mut state, chunk).unwrap();
            assert_eq!(frame, batch.frames[t], "frame {}", t);
        }
    }

    #[test]
    fn encode_is_causal_per_frame() {
        let enc = Encoder::new_seeded(&CodecConfig::desk(), 7).unwrap();
        let w = seeded_waveform(4, 8);
        let base = enc.encode(&w).unwrap();
        for cut in 0..3usize {
            let mut samples = w.samples.clone();
            for s in samples.iter_mut().skip((cut + 1) * 1920) {
                *s = -*s + 0.1;
            }
            let got = enc.encode(&Waveform::new(samples, 24000)).unwrap();
            for t in 0..=cut {
                assert_eq!(base.frames[t], got.frames[t], "cut {} frame {}", cut, t);
            }
            assert_ne!(base.frames[cut + 1], got.frames[cut + 1]);
        }
    }

    fn seeded_latents(frames: usize, dim: usize, seed: u64) -> LatentSequence {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        LatentSequence {
            frames: (0..frames)
                .map(|_| (0..dim).map(|_| rng.random_range(-1.0f32..1.0)).collect())
                .collect(),
            frame_rate: 12.5,
        }
    }

    #[test]
    fn decode_shape_and_stream_equivalence() {
        let dec = Decoder::new_seeded(&CodecConfig::desk(), 7).unwrap();
        let z = seeded_latents(3, 96, 9);
        let w = dec.decode(&z).unwrap();
        assert_eq!(w.samples.len(), 5760);
        assert_eq!(w.sample_rate, 24000);
        let mut state = dec.fresh_state();
        for (t, frame) in z.frames.iter().enumerate() {
            let chunk = dec.decode_step(&mut state, frame).unwrap();
            assert_eq!(chunk, w.samples[t * 1920..(t + 1) * 1920], "frame {}", t);
        }
    }

    #[test]
    fn decode_is_causal_per_frame() {
        let dec = Decoder::new_seeded(&CodecConfig::desk(), 7).unwrap();
        let z = seeded_latents(4, 96, 10);
        let base = dec.decode(&z).unwrap();
        let mut z2 = z.clone();
        for f in z2.frames.iter_mut().skip(2) {
            for v in f.iter_mut() {
                *v += 0.5;
            }
        }
        let got = dec.decode(&z2).unwrap();
        assert_eq!(base.samples[..2 * 1920], got.samples[..2 * 1920]);
        assert_ne!(base.samples[2 * 1920..], got.samples[2 * 1920..]);
    }

    #[test]
    fn decode_contract_errors() {
        let dec = Decoder::new_seeded(&CodecConfig::desk(), 7).unwrap();
        let z = seeded_latents(1, 95, 11);
        assert!(matches!(dec.decode(&z), Err(Error::Contract(_))));
        let other = Decoder::new_seeded(&CodecConfig::desk(), 7).unwrap();
        let mut state = other.fresh_state();
        assert!(matches!(
            dec.decode_step(&mut state, &vec![0.0f32; 96]),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn pad_to_frame_rounds_up() {
        let w = Waveform::new(vec![0.5; 2000], 24000);
        let (padded, original) = pad_to_frame(&w, 1920);
        assert_eq!(original, 2000);
        assert_eq!(padded.samples.len(), 3840);
        assert!(padded.samples[2000..].iter().all(|&s| s == 0.0));
        let exact = Waveform::new(vec![0.1; 1920], 24000);
        let (padded, original) = pad_to_frame(&exact, 1920);
        assert_eq!((padded.samples.len(), original), (1920, 1920));
    }

    #[test]
    fn seeded_construction_is_deterministic() {
        let cfg = CodecConfig::desk();
        let a = Encoder::new_seeded(&cfg, 42).unwrap();
        let b = Encoder::new_seeded(&cfg, 42).unwrap();
        let w = seeded_waveform(2, 12);
        assert_eq!(a.encode(&w).unwrap(), b.encode(&w).unwrap());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn patchify_roundtrip_is_bitwise(t in 1usize..12, d in 1usize..6, p in 1usize..5, seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rows = t * p;
            let seq: Vec<Vec<f32>> = (0..rows)
                .map(|_| (0..d).map(|_| rng.random_range(-1.0f32..1.0)).collect())
                .collect();
            let packed = patchify(&seq, p).unwrap();
            prop_assert_eq!(packed.len(), t);
            let back = unpatchify(&packed, p).unwrap();
            prop_assert_eq!(back, seq);
        }
    }
}
