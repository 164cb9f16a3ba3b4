//! Whole-pipeline model bundle and its on-disk format.
//!
//! A bundle ties together the codec encoder/decoder, the quantizer stack,
//! and the token scheduler, constructed deterministically from one seed
//! (components take seed, seed+1, seed+2, seed+3 in that order).
//!
//! File format "CATW": magic, version byte, little-endian u32 config JSON
//! length, the config JSON, then every f32 tensor little-endian in
//! declaration order (encoder, decoder, quantizer layers as entries/w_in/
//! w_out, scheduler).

use crate::codec::{CodecConfig, Decoder, Encoder};
use crate::error::{Error, Result};
use crate::lm::{ArConfig, ArModel};
use crate::rvq::{RVQStack, RvqConfig};
use serde::{Deserialize, Serialize};

pub const MODEL_MAGIC: &[u8; 4] = b"CATW";
pub const MODEL_VERSION: u8 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleConfig {
    pub codec: CodecConfig,
    pub rvq: RvqConfig,
    pub ar: ArConfig,
    pub seed: u64,
}

impl BundleConfig {
    pub fn desk(seed: u64) -> Self {
        BundleConfig {
            codec: CodecConfig::desk(),
            rvq: RvqConfig::desk_model(),
            ar: ArConfig::desk(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.codec.validate()?;
        self.rvq.validate()?;
        self.ar.validate()?;
        let latent = self.codec.latent_dim();
        if self.rvq.d_model != latent {
            return Err(Error::Contract(format!(
                "quantizer width {} != codec latent width {}",
                self.rvq.d_model, latent
            )));
        }
        if self.ar.latent_dim != latent {
            return Err(Error::Contract(format!(
                "scheduler adapter width {} != codec latent width {}",
                self.ar.latent_dim, latent
            )));
        }
        if self.ar.n_q != self.rvq.n_layers {
            return Err(Error::Contract(format!(
                "scheduler n_q {} != quantizer depth {}",
                self.ar.n_q, self.rvq.n_layers
            )));
        }
        if self.ar.codebook_size != self.rvq.n_entries {
            return Err(Error::Contract(format!(
                "scheduler codebook {} != quantizer codebook {}",
                self.ar.codebook_size, self.rvq.n_entries
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ModelBundle {
    pub config: BundleConfig,
    pub encoder: Encoder,
    pub decoder: Decoder,
    pub rvq: RVQStack,
    pub ar: ArModel,
}

impl ModelBundle {
    pub fn new_seeded(config: BundleConfig) -> Result<Self> {
        config.validate()?;
        let seed = config.seed;
        Ok(ModelBundle {
            encoder: Encoder::new_seeded(&config.codec, seed)?,
            decoder: Decoder::new_seeded(&config.codec, seed.wrapping_add(1))?,
            rvq: RVQStack::new_seeded(&config.rvq, seed.wrapping_add(2))?,
            ar: ArModel::new_seeded(&config.ar, seed.wrapping_add(3))?,
            config,
        })
    }

    pub fn desk(seed: u64) -> Result<Self> {
        Self::new_seeded(BundleConfig::desk(seed))
    }

    pub fn param_count(&self) -> u64 {
        let mut n = 0u64;
        self.visit(&mut |t| n += t.len() as u64);
        n
    }

    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&'a [f32])) {
        self.encoder.visit(f);
        self.decoder.visit(f);
        self.rvq.visit(f);
        self.ar.visit(f);
    }

    pub fn visit_mut(&mut self, f: &mut impl FnMut(&mut [f32])) {
        self.encoder.visit_mut(f);
        self.decoder.visit_mut(f);
        self.rvq.visit_mut(f);
        self.ar.visit_mut(f);
    }

    pub fn save(&self) -> Result<Vec<u8>> {
        let config = serde_json::to_vec(&self.config)
            .map_err(|e| Error::Format(format!("config serialization failed: {}", e)))?;
        let mut out = Vec::with_capacity(16 + config.len() + self.param_count() as usize * 4);
        out.extend_from_slice(MODEL_MAGIC);
        out.push(MODEL_VERSION);
        out.extend_from_slice(&(config.len() as u32).to_le_bytes());
        out.extend_from_slice(&config);
        self.visit(&mut |t| {
            for &v in t {
                out.extend_from_slice(&v.to_le_bytes());
            }
        });
        Ok(out)
    }

    pub fn load(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 9 {
            return Err(Error::Format("model file shorter than its header".into()));
        }
        if &bytes[0..4] != MODEL_MAGIC {
            return Err(Error::Format("bad model magic".into()));
        }
        if bytes[4] != MODEL_VERSION {
            return Err(Error::Format(format!("unsupported model version {}", bytes[4])));
        }
        let config_len = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
        let tensors_at = 9 + config_len;
        if bytes.len() < tensors_at {
            return Err(Error::Format("model file truncated inside its config".into()));
        }
        let config: BundleConfig = serde_json::from_slice(&bytes[9..tensors_at])
            .map_err(|e| Error::Format(format!("bad model config: {}", e)))?;
        let mut bundle = ModelBundle::new_seeded(config)?;
        let want = tensors_at + bundle.param_count() as usize * 4;
        if bytes.len() != want {
            return Err(Error::Format(format!(
                "model file holds {} bytes, config implies {}",
                bytes.len(),
                want
            )));
        }
        let mut at = tensors_at;
        bundle.visit_mut(&mut |t| {
            for v in t.iter_mut() {
                *v = f32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
                at += 4;
            }
        });
        Ok(bundle)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::StageConfig;

    fn tiny_config(seed: u64) -> BundleConfig {
        // one-stage codec so bundle tests stay fast
        let codec = CodecConfig {
            stages: vec![StageConfig { patch: 96, n_blocks: 1, d_model: 16, n_heads: 2 }],
            sample_rate: 2400,
            window_seconds: 1.0,
        };
        BundleConfig {
            codec,
            rvq: RvqConfig { n_layers: 2, d_model: 16, code_dim: 4, n_entries: 8 },
            ar: ArConfig {
                vocab_size: 32,
                n_q: 2,
                codebook_size: 8,
                d_model: 32,
                n_heads: 2,
                n_temporal_blocks: 1,
                n_depth_blocks: 1,
                latent_dim: 16,
                semantic_on_quantized: true,
            },
            seed,
        }
    }

    #[test]
    fn construction_is_deterministic() {
        let a = ModelBundle::new_seeded(tiny_config(5)).unwrap();
        let b = ModelBundle::new_seeded(tiny_config(5)).unwrap();
        let c = ModelBundle::new_seeded(tiny_config(6)).unwrap();
        let flat = |m: &ModelBundle| {
            let mut v = Vec::new();
            m.visit(&mut |t| v.extend_from_slice(t));
            v
        };
        assert_eq!(flat(&a), flat(&b));
        assert_ne!(flat(&a), flat(&c));
    }

    #[test]
    fn save_load_round_trip_is_bitwise() {
        let mut bundle = ModelBundle::new_seeded(tiny_config(7)).unwrap();
        // mutate a few tensors so the round trip proves more than re-seeding
        bundle.rvq.layers[0].entries[3] = 0.71;
        bundle.ar.text_emb[10] = -2.5;
        bundle.encoder.stages[0].proj.weight[0] = 1.25;
        let bytes = bundle.save().unwrap();
        let loaded = ModelBundle::load(&bytes).unwrap();
        assert_eq!(loaded.config, bundle.config);
        let mut a = Vec::new();
        let mut b = Vec::new();
        bundle.visit(&mut |t| a.extend_from_slice(t));
        loaded.visit(&mut |t| b.extend_from_slice(t));
        assert_eq!(a.len(), b.len());
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn file_layout_is_as_documented() {
        let bundle = ModelBundle::new_seeded(tiny_config(8)).unwrap();
        let bytes = bundle.save().unwrap();
        assert_eq!(&bytes[0..4], b"CATW");
        assert_eq!(bytes[4], 1);
        let config_len = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
        let config: BundleConfig = serde_json::from_slice(&bytes[9..9 + config_len]).unwrap();
        assert_eq!(config, bundle.config);
        assert_eq!(bytes.len(), 9 + config_len + bundle.param_count() as usize * 4);
        // first serialized tensor is the encoder's first stage projection
        let first = f32::from_le_bytes(bytes[9 + config_len..13 + config_len].try_into().unwrap());
        let mut seen = None;
        bundle.visit(&mut |t| {
            if seen.is_none() {
                seen = Some(t[0]);
            }
        });
        assert_eq!(first.to_bits(), seen.unwrap().to_bits());
    }

    #[test]
    fn load_rejects_malformed_files() {
        let bundle = ModelBundle::new_seeded(tiny_config(9)).unwrap();
        let good = bundle.save().unwrap();

        let mut bad_magic = good.clone();
        bad_magic[1] = b'X';
        assert!(matches!(ModelBundle::load(&bad_magic), Err(Error::Format(_))));

        let mut bad_version = good.clone();
        bad_version[4] = 3;
        assert!(matches!(ModelBundle::load(&bad_version), Err(Error::Format(_))));

        assert!(matches!(ModelBundle::load(&good[..good.len() - 4]), Err(Error::Format(_))));
        let mut long = good.clone();
        long.extend_from_slice(&[0; 4]);
        assert!(matches!(ModelBundle::load(&long), Err(Error::Format(_))));
        assert!(matches!(ModelBundle::load(&good[..6]), Err(Error::Format(_))));

        let mut bad_json = good.clone();
        bad_json[10] = b'}';
        assert!(matches!(ModelBundle::load(&bad_json), Err(Error::Format(_))));
    }

    #[test]
    fn cross_component_mismatches_are_rejected() {
        let mut cfg = tiny_config(10);
        cfg.rvq.d_model = 24;
        assert!(matches!(ModelBundle::new_seeded(cfg), Err(Error::Contract(_))));

        let mut cfg = tiny_config(10);
        cfg.ar.n_q = 3;
        assert!(matches!(ModelBundle::new_seeded(cfg), Err(Error::Contract(_))));

        let mut cfg = tiny_config(10);
        cfg.ar.codebook_size = 16;
        assert!(matches!(ModelBundle::new_seeded(cfg), Err(Error::Contract(_))));

        let mut cfg = tiny_config(10);
        cfg.ar.latent_dim = 8;
        assert!(matches!(ModelBundle::new_seeded(cfg), Err(Error::Contract(_))));
    }

    #[test]
    fn desk_bundle_is_internally_consistent() {
        let cfg = BundleConfig::desk(7);
        cfg.validate().unwrap();
        assert_eq!(cfg.rvq.n_entries, 1024);
        assert_eq!(cfg.rvq.bits_per_code(), 10);
        assert_eq!(cfg.codec.latent_dim(), 96);
        assert_eq!(cfg.ar.n_q, 8);
    }
}
