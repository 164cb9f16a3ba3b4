//! Built-in verification suite.
//!
//! Twelve numbered checks cover the load-bearing guarantees of the whole
//! pipeline: rate arithmetic, frame bookkeeping, stream/batch equivalence,
//! causality, prefix decodability, gradient exactness, trainability against
//! a k-means oracle, the dropout law, loss masking, the aggregate
//! objective, bitstream losslessness, and end-to-end closure. Each check
//! carries its own independent oracle rather than re-calling the code path
//! it verifies. The CLI `selfcheck` command and the acceptance test target
//! both run these.

use crate::bitstream::{self, BitstreamHeader};
use crate::codec::{CodecConfig, Decoder, Encoder, LatentSequence};
use crate::lm::{psd_sample, ArConfig, ArModel, PsdConfig, Sampling, SequenceLayout};
use crate::losses::{total_loss, LossTerms, LossWeights};
use crate::model::ModelBundle;
use crate::rvq::{
    dropout_sample, quantizer_grads, rvq_decode, rvq_encode, train_codebooks, DropoutPolicy,
    RVQStack, RvqConfig, RvqEncoded, TokenMatrix, TrainOptions,
};
use crate::signal::Waveform;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub millis: u128,
}

fn run_check(
    id: u8,
    name: &'static str,
    body: impl FnOnce() -> std::result::Result<String, String>,
) -> CheckResult {
    let start = Instant::now();
    let (passed, detail) = match body() {
        Ok(d) => (true, d),
        Err(d) => (false, d),
    };
    CheckResult { id, name, passed, detail, millis: start.elapsed().as_millis() }
}

fn noise_wave(n: usize, seed: u64) -> Waveform {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Waveform::new((0..n).map(|_| rng.random_range(-0.5..0.5)).collect(), 24_000)
}

fn noise_latents(frames: usize, d: usize, seed: u64) -> LatentSequence {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    LatentSequence {
        frames: (0..frames)
            .map(|_| (0..d).map(|_| rng.random_range(-1.0f32..1.0)).collect())
            .collect(),
        frame_rate: 12.5,
    }
}

// ============================ 1: bitrates =============================

pub fn check_bitrate_table() -> CheckResult {
    run_check(1, "bitrate table", || {
        let rows = [(6, 750.0), (8, 1000.0), (12, 1500.0), (16, 2000.0), (24, 3000.0), (32, 4000.0)];
        for (n, want) in rows {
            let got = bitstream::bitrate_bps(n, 1024, 12.5);
            if got != want {
                return Err(format!("{} layers -> {} bps, want {}", n, got, want));
            }
        }
        Ok("6 table rows exact".into())
    })
}

// ======================== 2: frame arithmetic =========================

pub fn check_frame_arithmetic() -> CheckResult {
    run_check(2, "frame-rate arithmetic", || {
        let cfg = CodecConfig::desk();
        let enc = Encoder::new_seeded(&cfg, 11).map_err(|e| e.to_string())?;
        let spf = cfg.samples_per_frame();
        // one long input; each prefix of T frames is its own encode call
        let wave = noise_wave(spf * 64, 21);
        for t in 1..=64usize {
            let prefix = Waveform::new(wave.samples[..spf * t].to_vec(), 24_000);
            let z = enc.encode(&prefix).map_err(|e| e.to_string())?;
            if z.len() != t {
                return Err(format!("{} frames in -> {} latents out", t, z.len()));
            }
        }
        Ok("T = 1..=64 all exact".into())
    })
}

// ====================== 3: streaming equivalence ======================

pub fn check_streaming_equivalence() -> CheckResult {
    run_check(3, "streaming equivalence", || {
        let cfg = CodecConfig::desk();
        let enc = Encoder::new_seeded(&cfg, 31).map_err(|e| e.to_string())?;
        let dec = Decoder::new_seeded(&cfg, 32).map_err(|e| e.to_string())?;
        let stack = RVQStack::new_seeded(&RvqConfig::desk_model(), 33).map_err(|e| e.to_string())?;
        let spf = cfg.samples_per_frame();
        let depth = stack.n_layers();
        let rel = |a: f32, b: f32| {
            let d = (a as f64 - b as f64).abs();
            d <= 1e-5 * (b as f64).abs().max(1.0)
        };
        let mut max_t = 0;
        for case in 0..100u64 {
            // mostly short inputs, a few long ones
            let t = match case % 10 {
                7 => 16,
                8 => 24,
                9 => 32,
                m => m as usize + 1,
            };
            max_t = max_t.max(t);
            let wave = noise_wave(spf * t, 1000 + case);

            let z_batch = enc.encode(&wave).map_err(|e| e.to_string())?;
            let mut state = enc.fresh_state();
            let mut stream_codes: Vec<u16> = Vec::new();
            for (i, chunk) in wave.samples.chunks(spf).enumerate() {
                let frame = enc.encode_step(&mut state, chunk).map_err(|e| e.to_string())?;
                if !frame.iter().zip(&z_batch.frames[i]).all(|(&a, &b)| rel(a, b)) {
                    return Err(format!("case {}: encoder frame {} diverged", case, i));
                }
                // frame-by-frame quantization is the streaming token path
                let single = LatentSequence { frames: vec![frame], frame_rate: z_batch.frame_rate };
                let enc1 = rvq_encode(&stack, &single, depth).map_err(|e| e.to_string())?;
                stream_codes.extend_from_slice(&enc1.tokens.codes);
            }
            let batch_q = rvq_encode(&stack, &z_batch, depth).map_err(|e| e.to_string())?;
            if stream_codes != batch_q.tokens.codes {
                return Err(format!("case {}: streamed tokens differ from batch", case));
            }

            let x_batch = dec.decode(&batch_q.quantized).map_err(|e| e.to_string())?;
            let mut dstate = dec.fresh_state();
            let mut at = 0usize;
            for (i, frame) in batch_q.quantized.frames.iter().enumerate() {
                let samples = dec.decode_step(&mut dstate, frame).map_err(|e| e.to_string())?;
                for (j, &s) in samples.iter().enumerate() {
                    let b = x_batch.samples[at + j];
                    if (s - b).abs() > 1e-5 * b.abs().max(1.0) {
                        return Err(format!("case {}: decoder frame {} sample {} diverged", case, i, j));
                    }
                }
                at += samples.len();
            }
        }
        Ok(format!("100 inputs up to T = {}, tokens bitwise", max_t))
    })
}

// ============================ 4: causality ============================

pub fn check_causality() -> CheckResult {
    run_check(4, "causality", || {
        let cfg = CodecConfig::desk();
        let enc = Encoder::new_seeded(&cfg, 41).map_err(|e| e.to_string())?;
        let dec = Decoder::new_seeded(&cfg, 42).map_err(|e| e.to_string())?;
        let stack = RVQStack::new_seeded(&RvqConfig::desk(), 43).map_err(|e| e.to_string())?;
        let spf = cfg.samples_per_frame();
        let mut cases = 0usize;

        // encoder latents + tokens: 15 cases, every cut point
        for case in 0..15u64 {
            let t = 3 + (case % 3) as usize; // 3..5 frames
            let wave = noise_wave(spf * t, 4000 + case);
            let base = enc.encode(&wave).map_err(|e| e.to_string())?;
            let base_tok = rvq_encode(&stack, &base, 8).map_err(|e| e.to_string())?.tokens;
            for cut in 1..t {
                let mut bumped = wave.clone();
                for s in &mut bumped.samples[cut * spf..] {
                    *s += 0.25;
                }
                let z = enc.encode(&bumped).map_err(|e| e.to_string())?;
                for i in 0..cut {
                    if z.frames[i] != base.frames[i] {
                        return Err(format!("encoder case {} cut {}: latent {} leaked", case, cut, i));
                    }
                }
                let tok = rvq_encode(&stack, &z, 8).map_err(|e| e.to_string())?.tokens;
                if tok.codes[..cut * 8] != base_tok.codes[..cut * 8] {
                    return Err(format!("encoder case {} cut {}: tokens leaked", case, cut));
                }
            }
            cases += 1;
        }

        // decoder samples: 15 cases
        for case in 0..15u64 {
            let t = 3 + (case % 3) as usize;
            let z = noise_latents(t, cfg.latent_dim(), 5000 + case);
            let base = dec.decode(&z).map_err(|e| e.to_string())?;
            for cut in 1..t {
                let mut bumped = z.clone();
                for f in &mut bumped.frames[cut..] {
                    for v in f.iter_mut() {
                        *v += 0.5;
                    }
                }
                let x = dec.decode(&bumped).map_err(|e| e.to_string())?;
                if x.samples[..cut * spf]
                    .iter()
                    .zip(&base.samples[..cut * spf])
                    .any(|(a, b)| a.to_bits() != b.to_bits())
                {
                    return Err(format!("decoder case {} cut {}: samples leaked", case, cut));
                }
            }
            cases += 1;
        }

        // temporal hidden states: 10 cases, every stream position
        let ar_cfg = toy_ar_config();
        let model = ArModel::new_seeded(&ar_cfg, 44).map_err(|e| e.to_string())?;
        for case in 0..10u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(6000 + case);
            let layout = random_layout(&ar_cfg, &mut rng, true);
            let k_hat = rng.random_range(1..=2);
            let base = model.temporal_forward(&layout, k_hat).map_err(|e| e.to_string())?;
            let len = base.len();
            for cut in 0..len - 1 {
                let bumped = perturb_position(&layout, cut + 1, &ar_cfg);
                let h = model.temporal_forward(&bumped, k_hat).map_err(|e| e.to_string())?;
                for i in 0..=cut {
                    if h[i] != base[i] {
                        return Err(format!("temporal case {} cut {}: h[{}] leaked", case, cut, i));
                    }
                }
            }
            cases += 1;
        }

        // depth logits: 10 cases, cut over target frames
        for case in 0..10u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(7000 + case);
            let layout = random_layout(&ar_cfg, &mut rng, true);
            let target = layout.target.clone().expect("training layout");
            let k_hat = target.depth;
            let base_h = model.temporal_forward(&layout, k_hat).map_err(|e| e.to_string())?;
            let cond = layout.conditioning_len();
            let logits_at = |h: &[Vec<f32>], t: usize, frame: &[u16]| -> std::result::Result<Vec<Vec<f32>>, String> {
                (1..=k_hat)
                    .map(|k| {
                        model
                            .depth_forward(&h[cond + t - 1], &frame[..k - 1], k)
                            .map_err(|e| e.to_string())
                    })
                    .collect()
            };
            for cut in 0..target.n_frames - 1 {
                let mut bumped = layout.clone();
                if let Some(m) = &mut bumped.target {
                    let at = (cut + 1) * m.depth;
                    for c in &mut m.codes[at..] {
                        *c = (*c + 1) % ar_cfg.codebook_size as u16;
                    }
                }
                let h = model.temporal_forward(&bumped, k_hat).map_err(|e| e.to_string())?;
                for t in 0..=cut {
                    let frame = &target.codes[t * k_hat..(t + 1) * k_hat];
                    let a = logits_at(&base_h, t, frame)?;
                    let b = logits_at(&h, t, frame)?;
                    if a != b {
                        return Err(format!("depth case {} cut {}: frame {} logits leaked", case, cut, t));
                    }
                }
            }
            cases += 1;
        }

        Ok(format!("{} cases, every cut point, all bitwise", cases))
    })
}

fn toy_ar_config() -> ArConfig {
    ArConfig {
        vocab_size: 32,
        n_q: 4,
        codebook_size: 16,
        d_model: 32,
        n_heads: 2,
        n_temporal_blocks: 2,
        n_depth_blocks: 2,
        latent_dim: 8,
        semantic_on_quantized: true,
    }
}

fn random_layout(cfg: &ArConfig, rng: &mut ChaCha8Rng, with_target: bool) -> SequenceLayout {
    let text = |rng: &mut ChaCha8Rng, n: usize| -> Vec<u8> {
        (0..n).map(|_| rng.random_range(0..cfg.vocab_size as u8 as u32) as u8).collect()
    };
    let audio = |rng: &mut ChaCha8Rng, frames: usize, depth: usize| {
        let codes = (0..frames * depth)
            .map(|_| rng.random_range(0..cfg.codebook_size as u32) as u16)
            .collect();
        TokenMatrix::new(codes, frames, depth).expect("valid matrix")
    };
    let depth = cfg.n_q;
    let (np, ns, na, nt) = (
        rng.random_range(1..3),
        rng.random_range(0..2),
        rng.random_range(0..2),
        rng.random_range(2..4),
    );
    SequenceLayout {
        x_prompt: text(rng, np),
        x_syn: text(rng, ns),
        s_prompt: audio(rng, na, depth),
        target: with_target.then(|| audio(rng, nt, depth)),
    }
}

/// Minimal single-position perturbation of the flattened stream.
fn perturb_position(layout: &SequenceLayout, pos: usize, cfg: &ArConfig) -> SequenceLayout {
    let mut out = layout.clone();
    let np = layout.x_prompt.len();
    let ns = layout.x_syn.len();
    let na = layout.s_prompt.n_frames;
    if pos < np {
        out.x_prompt[pos] = (layout.x_prompt[pos] + 1) % cfg.vocab_size as u8;
    } else if pos < np + ns {
        out.x_syn[pos - np] = (layout.x_syn[pos - np] + 1) % cfg.vocab_size as u8;
    } else if pos < np + ns + na {
        let f = pos - np - ns;
        let at = f * out.s_prompt.depth;
        out.s_prompt.codes[at] = (out.s_prompt.codes[at] + 1) % cfg.codebook_size as u16;
    } else {
        let f = pos - np - ns - na;
        let m = out.target.as_mut().expect("position inside target");
        let at = f * m.depth;
        m.codes[at] = (m.codes[at] + 1) % cfg.codebook_size as u16;
    }
    out
}

// ======================= 5: prefix consistency ========================

pub fn check_prefix_consistency() -> CheckResult {
    run_check(5, "prefix consistency", || {
        for seed in 0..10u64 {
            let stack = RVQStack::new_seeded(&RvqConfig::desk(), 500 + seed).map_err(|e| e.to_string())?;
            let z = noise_latents(4, 96, 600 + seed);
            let enc = rvq_encode(&stack, &z, 8).map_err(|e| e.to_string())?;
            // bitstream view of the same tokens
            let header = BitstreamHeader {
                sample_rate: 24_000,
                samples_per_frame: 1920,
                n_layers: 8,
                bits_per_code: 6,
                n_frames: 4,
                original_len_samples: 4 * 1920,
            };
            let bytes = bitstream::pack(&header, &enc.tokens).map_err(|e| e.to_string())?;
            for k in 1..=8usize {
                let truncated = enc.tokens.truncated(k).map_err(|e| e.to_string())?;
                let dec = rvq_decode(&stack, &truncated, 12.5).map_err(|e| e.to_string())?;
                // oracle: ascending per-layer contribution sums, one rounding
                for t in 0..4 {
                    let mut acc = vec![0.0f64; 96];
                    for c in 0..k {
                        let cb = &stack.layers[c];
                        let e = cb.entry(enc.tokens.get(t, c) as usize);
                        for (r, a) in acc.iter_mut().enumerate() {
                            let row = &cb.w_out[r * cb.code_dim..(r + 1) * cb.code_dim];
                            *a += row.iter().zip(e).map(|(&w, &c)| w as f64 * c as f64).sum::<f64>();
                        }
                    }
                    let want: Vec<f32> = acc.iter().map(|&v| v as f32).collect();
                    if dec.frames[t] != want {
                        return Err(format!("seed {} depth {} frame {}: partial sum mismatch", seed, k, t));
                    }
                }
                // container truncation commutes with column dropping
                let via_bytes = bitstream::truncate_to_depth(&bytes, k as u8).map_err(|e| e.to_string())?;
                let direct = bitstream::pack(
                    &BitstreamHeader { n_layers: k as u8, ..header },
                    &truncated,
                )
                .map_err(|e| e.to_string())?;
                if via_bytes != direct {
                    return Err(format!("seed {} depth {}: byte truncation mismatch", seed, k));
                }
            }
        }
        Ok("10 stacks x 8 depths exact".into())
    })
}

// ======================= 6: gradient exactness ========================

/// Loss with the stop-gradient structure frozen at the base point: the
/// commitment side chains live z against captured q, the codebook side
/// scores live parameters at captured indices against captured inputs.
/// Central differences of this object are what the analytic gradients
/// describe; stacks too close to a selection boundary are filtered out.
fn frozen_sg_loss(stack: &RVQStack, z_seq: &LatentSequence, k: usize, base: &RvqEncoded) -> f64 {
    let d = stack.d_model();
    let mut total = 0.0f64;
    for t in 0..z_seq.len() {
        let mut z: Vec<f64> = z_seq.frames[t].iter().map(|&v| v as f64).collect();
        for c in 0..k {
            let q0 = &base.layer_q[c][t];
            total += z.iter().zip(q0).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
            z = z.iter().zip(q0).map(|(a, b)| a - b).collect();
        }
        for c in 0..k {
            let cb = &stack.layers[c];
            let e = cb.entry(base.tokens.get(t, c) as usize);
            for i in 0..d {
                let row = &cb.w_out[i * cb.code_dim..(i + 1) * cb.code_dim];
                let qi: f64 = row.iter().zip(e).map(|(&w, &c)| w as f64 * c as f64).sum();
                let diff = base.layer_z[c][t][i] - qi;
                total += diff * diff;
            }
        }
    }
    total
}

/// Smallest best-vs-runner-up squared-distance margin across the stack.
fn selection_margin(stack: &RVQStack, z_seq: &LatentSequence, k: usize) -> f64 {
    let enc = rvq_encode(stack, z_seq, k).expect("encodable");
    let mut margin = f64::INFINITY;
    for c in 0..k {
        let cb = &stack.layers[c];
        for zt in &enc.layer_z[c] {
            let mut u = vec![0.0f64; cb.code_dim];
            for (r, ur) in u.iter_mut().enumerate() {
                let row = &cb.w_in[r * cb.d_model..(r + 1) * cb.d_model];
                *ur = row.iter().zip(zt).map(|(&w, &x)| w as f64 * x).sum();
            }
            let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-8);
            let mut dists: Vec<f64> = (0..cb.n_entries)
                .map(|i| {
                    cb.entry(i)
                        .iter()
                        .zip(&u)
                        .map(|(&e, &v)| (v / norm - e as f64) * (v / norm - e as f64))
                        .sum()
                })
                .collect();
            dists.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
            margin = margin.min(dists[1] - dists[0]);
        }
    }
    margin
}

pub fn check_gradients() -> CheckResult {
    run_check(6, "gradient exactness", || {
        let cfg = RvqConfig { n_layers: 2, d_model: 4, code_dim: 3, n_entries: 4 };
        let h = 1e-5f64;
        let mut valid = 0usize;
        let mut seed = 0u64;
        let mut skipped = 0usize;
        while valid < 20 {
            seed += 1;
            if seed > 500 {
                return Err(format!("only {} margin-safe stacks among 500 seeds", valid));
            }
            let stack = RVQStack::new_seeded(&cfg, seed).map_err(|e| e.to_string())?;
            let z = noise_latents(2, 4, seed ^ 0xfeed);
            if selection_margin(&stack, &z, 2) < 1e-3 {
                skipped += 1;
                continue;
            }
            let base = rvq_encode(&stack, &z, 2).map_err(|e| e.to_string())?;
            let grads = quantizer_grads(&stack, &z, 2).map_err(|e| e.to_string())?;
            let agree = |got: f64, fd: f64| {
                (got - fd).abs() <= 1e-4 * got.abs().max(fd.abs()).max(1e-6)
            };
            for t in 0..2 {
                for i in 0..4 {
                    let mut zp = z.clone();
                    zp.frames[t][i] = (zp.frames[t][i] as f64 + h) as f32;
                    let mut zm = z.clone();
                    zm.frames[t][i] = (zm.frames[t][i] as f64 - h) as f32;
                    let step = zp.frames[t][i] as f64 - zm.frames[t][i] as f64;
                    let fd = (frozen_sg_loss(&stack, &zp, 2, &base) - frozen_sg_loss(&stack, &zm, 2, &base)) / step;
                    if !agree(grads.d_z[t][i], fd) {
                        return Err(format!("seed {}: d_z[{}][{}] {} vs fd {}", seed, t, i, grads.d_z[t][i], fd));
                    }
                }
            }
            for c in 0..2 {
                for p in 0..stack.layers[c].entries.len() {
                    let mut sp = stack.clone();
                    sp.layers[c].entries[p] = (sp.layers[c].entries[p] as f64 + h) as f32;
                    let mut sm = stack.clone();
                    sm.layers[c].entries[p] = (sm.layers[c].entries[p] as f64 - h) as f32;
                    let step = sp.layers[c].entries[p] as f64 - sm.layers[c].entries[p] as f64;
                    let fd = (frozen_sg_loss(&sp, &z, 2, &base) - frozen_sg_loss(&sm, &z, 2, &base)) / step;
                    if !agree(grads.layers[c].d_entries[p], fd) {
                        return Err(format!("seed {}: entries[{}][{}] mismatch", seed, c, p));
                    }
                }
                for p in 0..stack.layers[c].w_out.len() {
                    let mut sp = stack.clone();
                    sp.layers[c].w_out[p] = (sp.layers[c].w_out[p] as f64 + h) as f32;
                    let mut sm = stack.clone();
                    sm.layers[c].w_out[p] = (sm.layers[c].w_out[p] as f64 - h) as f32;
                    let step = sp.layers[c].w_out[p] as f64 - sm.layers[c].w_out[p] as f64;
                    let fd = (frozen_sg_loss(&sp, &z, 2, &base) - frozen_sg_loss(&sm, &z, 2, &base)) / step;
                    if !agree(grads.layers[c].d_w_out[p], fd) {
                        return Err(format!("seed {}: w_out[{}][{}] mismatch", seed, c, p));
                    }
                }
                if grads.layers[c].d_w_in.iter().any(|&g| g.to_bits() != 0.0f64.to_bits()) {
                    return Err(format!("seed {}: selection-path gradient not exactly zero", seed));
                }
            }
            valid += 1;
        }
        Ok(format!("20 stacks verified, {} skipped near boundaries", skipped))
    })
}

// ======================= 7: codebook training =========================

/// Plain Lloyd iterations from `restarts` random initializations; returns
/// the best mean squared distance to the assigned centroid.
fn kmeans_error(points: &[Vec<f64>], k: usize, restarts: usize, seed: u64) -> f64 {
    let n = points.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = f64::INFINITY;
    for _ in 0..restarts {
        // distinct random points as initial centroids
        let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
        let mut chosen: Vec<usize> = Vec::new();
        while chosen.len() < k {
            let i = rng.random_range(0..n);
            if !chosen.contains(&i) {
                chosen.push(i);
                centroids.push(points[i].clone());
            }
        }
        let mut assign = vec![0usize; n];
        for _ in 0..100 {
            let mut moved = false;
            for (i, p) in points.iter().enumerate() {
                let mut bi = 0;
                let mut bd = f64::INFINITY;
                for (j, c) in centroids.iter().enumerate() {
                    let dist: f64 = p.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum();
                    if dist < bd {
                        bd = dist;
                        bi = j;
                    }
                }
                if assign[i] != bi {
                    assign[i] = bi;
                    moved = true;
                }
            }
            for (j, c) in centroids.iter_mut().enumerate() {
                let members: Vec<&Vec<f64>> = points
                    .iter()
                    .zip(&assign)
                    .filter(|(_, &a)| a == j)
                    .map(|(p, _)| p)
                    .collect();
                if members.is_empty() {
                    continue;
                }
                for (x, cx) in c.iter_mut().enumerate() {
                    *cx = members.iter().map(|m| m[x]).sum::<f64>() / members.len() as f64;
                }
            }
            if !moved {
                break;
            }
        }
        let inertia: f64 = points
            .iter()
            .zip(&assign)
            .map(|(p, &a)| p.iter().zip(&centroids[a]).map(|(x, c)| (x - c) * (x - c)).sum::<f64>())
            .sum::<f64>()
            / n as f64;
        best = best.min(inertia);
    }
    best
}

/// Four well-separated clusters in an 8-dim latent space.
fn cluster_features(seed: u64) -> LatentSequence {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers: [[f64; 8]; 4] = [
        [3.0, 0.0, 0.0, 0.0, 1.5, 0.0, 0.0, 0.0],
        [0.0, 3.0, 0.0, 0.0, 0.0, -1.5, 0.0, 0.0],
        [0.0, 0.0, 3.0, 0.0, 0.0, 0.0, 1.5, 0.0],
        [0.0, 0.0, 0.0, -3.0, 0.0, 0.0, 0.0, 1.5],
    ];
    let frames = (0..128)
        .map(|i| {
            let c = &centers[i % 4];
            c.iter()
                .map(|&v| (v + rng.random_range(-0.1..0.1)) as f32)
                .collect()
        })
        .collect();
    LatentSequence { frames, frame_rate: 12.5 }
}

pub fn check_codebook_training() -> CheckResult {
    run_check(7, "codebook training", || {
        let features = cluster_features(70);
        let points: Vec<Vec<f64>> = features
            .frames
            .iter()
            .map(|f| f.iter().map(|&v| v as f64).collect())
            .collect();
        let oracle = kmeans_error(&points, 4, 10, 71);

        let cfg = RvqConfig { n_layers: 1, d_model: 8, code_dim: 8, n_entries: 4 };
        let mut stack = RVQStack::new_seeded(&cfg, 72).map_err(|e| e.to_string())?;
        let mut seed_rng = ChaCha8Rng::seed_from_u64(0);
        crate::rvq::seed_entries_from_frames(&mut stack, 0, &features, &mut seed_rng)
            .map_err(|e| e.to_string())?;
        let opts = TrainOptions {
            steps: 500,
            lr: 0.2,
            lambda_cmt: 0.25,
            dropout: DropoutPolicy { probability: 0.0 },
            seed: 74,
        };
        let batches = vec![features.clone()];
        let trace_a = train_codebooks(&mut stack, &batches, &opts).map_err(|e| e.to_string())?;
        let err = crate::rvq::mean_quantization_error(&stack, &features, 1).map_err(|e| e.to_string())?;

        // determinism: an identical run lands on the identical trace
        let mut stack_b = RVQStack::new_seeded(&cfg, 72).map_err(|e| e.to_string())?;
        let mut seed_rng_b = ChaCha8Rng::seed_from_u64(0);
        crate::rvq::seed_entries_from_frames(&mut stack_b, 0, &features, &mut seed_rng_b)
            .map_err(|e| e.to_string())?;
        let trace_b = train_codebooks(&mut stack_b, &batches, &opts).map_err(|e| e.to_string())?;
        if trace_a.losses != trace_b.losses {
            return Err("training is not deterministic per seed".into());
        }

        if err > 1.5 * oracle {
            return Err(format!("trained error {:.6} > 1.5 x k-means {:.6}", err, oracle));
        }
        Ok(format!("trained {:.6} vs k-means {:.6}", err, oracle))
    })
}

// ============================ 8: PSD law ==============================

pub fn check_psd_law() -> CheckResult {
    run_check(8, "progressive dropout law", || {
        let n = 100_000usize;
        let mut rng = ChaCha8Rng::seed_from_u64(80);
        let off = PsdConfig::new(0.0, 32).map_err(|e| e.to_string())?;
        for _ in 0..n {
            if psd_sample(&off, &mut rng) != 32 {
                return Err("p = 0 produced a truncated depth".into());
            }
        }
        let on = PsdConfig::new(1.0, 32).map_err(|e| e.to_string())?;
        let mut counts = vec![0u32; 33];
        for _ in 0..n {
            counts[psd_sample(&on, &mut rng)] += 1;
        }
        if counts[32] != 0 {
            return Err("p = 1 produced an untruncated depth".into());
        }
        let expected = n as f64 / 31.0;
        for (k, &c) in counts.iter().enumerate().take(32).skip(1) {
            if (c as f64 - expected).abs() > 0.15 * expected {
                return Err(format!("depth {} drawn {} times (expected {:.0} +- 15%)", k, c, expected));
            }
        }
        for p in [0.25, 0.5, 1.0] {
            let cfg = PsdConfig::new(p, 32).map_err(|e| e.to_string())?;
            let mean = (0..n).map(|_| psd_sample(&cfg, &mut rng) as f64).sum::<f64>() / n as f64;
            let want = (1.0 - p) * 32.0 + p * 16.0;
            if (mean - want).abs() / want > 0.02 {
                return Err(format!("p = {}: mean {} vs {}", p, mean, want));
            }
        }
        // the codec-side dropout variant shares the sampler contract
        let mut counts = vec![0u32; 33];
        let policy = DropoutPolicy::new(1.0).map_err(|e| e.to_string())?;
        for _ in 0..32_000 {
            counts[dropout_sample(&policy, 32, &mut rng)] += 1;
        }
        for (k, &c) in counts.iter().enumerate().skip(1) {
            if (c as f64 - 1000.0).abs() > 150.0 {
                return Err(format!("quantizer dropout depth {} drawn {} times", k, c));
            }
        }
        Ok("exact p = 0 law, uniformity and expectation within bounds".into())
    })
}

// ========================== 9: loss masking ===========================

pub fn check_loss_masking() -> CheckResult {
    run_check(9, "loss masking", || {
        let cfg = ArConfig::desk();
        let model = ArModel::new_seeded(&cfg, 90).map_err(|e| e.to_string())?;
        let mut rng = ChaCha8Rng::seed_from_u64(91);
        for case in 0..100 {
            let t = rng.random_range(1..4usize);
            let codes = (0..t * 8).map(|_| rng.random_range(0..1024) as u16).collect();
            let target = TokenMatrix::new(codes, t, 8).map_err(|e| e.to_string())?;
            let layout = SequenceLayout {
                x_prompt: vec![rng.random_range(0..256u32) as u8],
                x_syn: vec![],
                s_prompt: TokenMatrix::new(vec![], 0, 8).map_err(|e| e.to_string())?,
                target: Some(target),
            };
            let k_hat = rng.random_range(1..8usize);
            let base = model.ar_loss(&layout, k_hat).map_err(|e| e.to_string())?;
            let mut bumped = layout.clone();
            if let Some(m) = &mut bumped.target {
                for f in 0..t {
                    for k in k_hat..8 {
                        m.codes[f * 8 + k] = rng.random_range(0..1024) as u16;
                    }
                }
            }
            let moved = model.ar_loss(&bumped, k_hat).map_err(|e| e.to_string())?;
            if moved.to_bits() != base.to_bits() {
                return Err(format!("case {}: layers > {} moved the loss", case, k_hat));
            }
        }
        // uniform-logit identity at the reference codebook size
        let mut zeroed = ArModel::new_seeded(&cfg, 92).map_err(|e| e.to_string())?;
        zeroed.visit_mut(&mut |t| t.fill(0.0));
        let layout = SequenceLayout {
            x_prompt: vec![3],
            x_syn: vec![],
            s_prompt: TokenMatrix::new(vec![], 0, 8).map_err(|e| e.to_string())?,
            target: Some(TokenMatrix::new((0..16).collect(), 2, 8).map_err(|e| e.to_string())?),
        };
        for k_hat in [1usize, 4, 8] {
            let loss = zeroed.ar_loss(&layout, k_hat).map_err(|e| e.to_string())?;
            if (loss - 1024f64.ln()).abs() > 1e-9 {
                return Err(format!("uniform-logit loss {} != ln(1024)", loss));
            }
        }
        Ok("100 masking cases bitwise; uniform logits at ln(1024)".into())
    })
}

// ======================= 10: aggregate objective ======================

pub fn check_aggregate_objective() -> CheckResult {
    run_check(10, "aggregate objective", || {
        let unit = LossTerms { sem: 1.0, rec: 1.0, cmt: 1.0, code: 1.0, adv: 1.0, feat: 1.0 };
        let w = LossWeights::default();
        let total = total_loss(&unit, &w).map_err(|e| e.to_string())?.total;
        if total != 39.25 {
            return Err(format!("unit terms gave {}", total));
        }
        let base = LossTerms { sem: 0.7, rec: 0.4, cmt: 2.0, code: 0.9, adv: 0.3, feat: 1.1 };
        let t0 = total_loss(&base, &w).map_err(|e| e.to_string())?.total;
        let lambdas = [w.lambda_sem, w.lambda_rec, w.lambda_cmt, w.lambda_code, w.lambda_adv, w.lambda_feat];
        for i in 0..6 {
            let mut bumped = base;
            let f = match i {
                0 => &mut bumped.sem,
                1 => &mut bumped.rec,
                2 => &mut bumped.cmt,
                3 => &mut bumped.code,
                4 => &mut bumped.adv,
                _ => &mut bumped.feat,
            };
            let delta = 0.5;
            *f += delta;
            let t1 = total_loss(&bumped, &w).map_err(|e| e.to_string())?.total;
            if ((t1 - t0) - lambdas[i] * delta).abs() > 1e-12 {
                return Err(format!("term {} broke linearity", i));
            }
        }
        Ok("39.25 exact; per-term linearity".into())
    })
}

// ======================= 11: bitstream round-trip =====================

pub fn check_bitstream_roundtrip() -> CheckResult {
    run_check(11, "bitstream round-trip", || {
        // hand-computed MSB-first vectors
        let one = TokenMatrix::new(vec![0b1010101010], 1, 1).map_err(|e| e.to_string())?;
        let h = BitstreamHeader {
            sample_rate: 24_000,
            samples_per_frame: 1920,
            n_layers: 1,
            bits_per_code: 10,
            n_frames: 1,
            original_len_samples: 1920,
        };
        let bytes = bitstream::pack(&h, &one).map_err(|e| e.to_string())?;
        if bytes[bitstream::HEADER_LEN..] != [0xAA, 0x80] {
            return Err(format!("10-bit vector packed as {:02X?}", &bytes[bitstream::HEADER_LEN..]));
        }
        let two = TokenMatrix::new(vec![0b101, 0b011], 1, 2).map_err(|e| e.to_string())?;
        let h2 = BitstreamHeader { n_layers: 2, bits_per_code: 3, ..h };
        let bytes = bitstream::pack(&h2, &two).map_err(|e| e.to_string())?;
        if bytes[bitstream::HEADER_LEN..] != [0b1010_1100] {
            return Err(format!("3-bit vector packed as {:02X?}", &bytes[bitstream::HEADER_LEN..]));
        }

        let mut rng = ChaCha8Rng::seed_from_u64(110);
        for case in 0..1000u32 {
            let depth = rng.random_range(1..=32usize);
            let bits = rng.random_range(1..=12u8);
            let frames = rng.random_range(0..16usize);
            let codes: Vec<u16> = (0..frames * depth)
                .map(|_| rng.random_range(0..(1u32 << bits)) as u16)
                .collect();
            let tokens = TokenMatrix::new(codes, frames, depth).map_err(|e| e.to_string())?;
            let header = BitstreamHeader {
                sample_rate: 24_000,
                samples_per_frame: 1920,
                n_layers: depth as u8,
                bits_per_code: bits,
                n_frames: frames as u32,
                original_len_samples: frames as u64 * 1920,
            };
            let bytes = bitstream::pack(&header, &tokens).map_err(|e| e.to_string())?;
            let (h_back, t_back) = bitstream::unpack(&bytes).map_err(|e| e.to_string())?;
            if h_back != header || t_back != tokens {
                return Err(format!("case {}: round trip not lossless", case));
            }
        }
        Ok("1000 matrices lossless; hand vectors match".into())
    })
}

// ======================== 12: pipeline closure ========================

pub fn check_pipeline_closure() -> CheckResult {
    run_check(12, "pipeline closure", || {
        let bundle = ModelBundle::desk(7).map_err(|e| e.to_string())?;
        let spf = bundle.config.codec.samples_per_frame();

        // a short prompt waveform through the analysis side
        let prompt_wave = noise_wave(spf * 2, 120);
        let z = bundle.encoder.encode(&prompt_wave).map_err(|e| e.to_string())?;
        let prompt = rvq_encode(&bundle.rvq, &z, 8).map_err(|e| e.to_string())?.tokens;

        let k_infer = 4usize;
        let tokens = bundle
            .ar
            .generate(b"hi", b"ok", &prompt, k_infer, 6, Sampling::Greedy)
            .map_err(|e| e.to_string())?;
        if tokens.depth != k_infer {
            return Err(format!("generated depth {} != {}", tokens.depth, k_infer));
        }
        if tokens.n_frames == 0 {
            return Err("generation stopped immediately on seeded weights".into());
        }

        // container round trip and a further transcode
        let header = BitstreamHeader {
            sample_rate: 24_000,
            samples_per_frame: spf as u16,
            n_layers: k_infer as u8,
            bits_per_code: bundle.config.rvq.bits_per_code(),
            n_frames: tokens.n_frames as u32,
            original_len_samples: (tokens.n_frames * spf) as u64,
        };
        let bytes = bitstream::pack(&header, &tokens).map_err(|e| e.to_string())?;
        let (_, unpacked) = bitstream::unpack(&bytes).map_err(|e| e.to_string())?;
        if unpacked != tokens {
            return Err("token container round trip failed".into());
        }
        let shallow = bitstream::truncate_to_depth(&bytes, 2).map_err(|e| e.to_string())?;
        let (h2, t2) = bitstream::unpack(&shallow).map_err(|e| e.to_string())?;
        if h2.n_layers != 2 || t2.n_frames != tokens.n_frames {
            return Err("transcode changed the frame count".into());
        }

        // synthesis side and closure through the encoder
        let latents = rvq_decode(&bundle.rvq, &unpacked, bundle.config.codec.frame_rate())
            .map_err(|e| e.to_string())?;
        let wave = bundle.decoder.decode(&latents).map_err(|e| e.to_string())?;
        if wave.len() != tokens.n_frames * spf {
            return Err(format!(
                "decoded {} samples, want {} x {}",
                wave.len(),
                tokens.n_frames,
                spf
            ));
        }
        let re = bundle.encoder.encode(&wave).map_err(|e| e.to_string())?;
        if re.len() != tokens.n_frames {
            return Err(format!("re-encode gave {} frames, want {}", re.len(), tokens.n_frames));
        }
        let requant = rvq_encode(&bundle.rvq, &re, 8).map_err(|e| e.to_string())?;
        if requant.tokens.n_frames != tokens.n_frames {
            return Err("re-quantization changed the frame count".into());
        }
        Ok(format!("{} frames generated, decoded, and re-encoded", tokens.n_frames))
    })
}

// ============================== driver ================================

pub fn run_all() -> Vec<CheckResult> {
    vec![
        check_bitrate_table(),
        check_frame_arithmetic(),
        check_streaming_equivalence(),
        check_causality(),
        check_prefix_consistency(),
        check_gradients(),
        check_codebook_training(),
        check_psd_law(),
        check_loss_masking(),
        check_aggregate_objective(),
        check_bitstream_roundtrip(),
        check_pipeline_closure(),
    ]
}
