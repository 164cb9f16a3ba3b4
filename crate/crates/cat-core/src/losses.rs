//! Aggregate training objective: a weighted sum of the six loss terms the
//! pipeline produces. The adversarial and feature-matching terms are
//! pass-through scalars supplied by the caller (default 0); everything else
//! comes from the codec, quantizer, and scheduler metrics.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda_sem: f64,
    pub lambda_rec: f64,
    pub lambda_cmt: f64,
    pub lambda_code: f64,
    pub lambda_adv: f64,
    pub lambda_feat: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda_sem: 20.0,
            lambda_rec: 15.0,
            lambda_cmt: 0.25,
            lambda_code: 1.0,
            lambda_adv: 1.0,
            lambda_feat: 2.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let named = [
            ("lambda_sem", self.lambda_sem),
            ("lambda_rec", self.lambda_rec),
            ("lambda_cmt", self.lambda_cmt),
            ("lambda_code", self.lambda_code),
            ("lambda_adv", self.lambda_adv),
            ("lambda_feat", self.lambda_feat),
        ];
        for (name, v) in named {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Contract(format!("weight {} = {} must be finite and >= 0", name, v)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossTerms {
    pub sem: f64,
    pub rec: f64,
    pub cmt: f64,
    pub code: f64,
    pub adv: f64,
    pub feat: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossReport {
    pub terms: LossTerms,
    pub weights: LossWeights,
    pub total: f64,
}

/// Weighted total in a fixed term order (sem, rec, cmt, code, adv, feat),
/// all arithmetic in f64.
pub fn total_loss(terms: &LossTerms, weights: &LossWeights) -> Result<LossReport> {
    weights.validate()?;
    let named = [
        ("sem", terms.sem),
        ("rec", terms.rec),
        ("cmt", terms.cmt),
        ("code", terms.code),
        ("adv", terms.adv),
        ("feat", terms.feat),
    ];
    for (name, v) in named {
        if !v.is_finite() {
            return Err(Error::Contract(format!("loss term {} is non-finite ({})", name, v)));
        }
    }
    let total = weights.lambda_sem * terms.sem
        + weights.lambda_rec * terms.rec
        + weights.lambda_cmt * terms.cmt
        + weights.lambda_code * terms.code
        + weights.lambda_adv * terms.adv
        + weights.lambda_feat * terms.feat;
    Ok(LossReport { terms: *terms, weights: *weights, total })
}
