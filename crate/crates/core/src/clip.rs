//! Per-sample gradient clipping.
//!
//! The default mode is automatic clipping (per-sample normalization),
//! `v -> G / (||v|| + gamma) * v`, which rescales every gradient and has no
//! region where small gradients are left untouched. Threshold clipping
//! `min(1, G/||v||) * v` is kept for comparison runs.

use crate::error::{config, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ClipMode {
    #[default]
    Automatic,
    Threshold,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClipConfig {
    /// Stability constant added to the norm.
    pub gamma: f64,
    /// Output scale.
    pub scale: f64,
    pub mode: ClipMode,
}

impl Default for ClipConfig {
    fn default() -> Self {
        Self { gamma: 0.01, scale: 1.0, mode: ClipMode::Automatic }
    }
}

impl ClipConfig {
    pub fn new(gamma: f64, scale: f64) -> Result<Self> {
        let cfg = Self { gamma, scale, mode: ClipMode::Automatic };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_mode(mut self, mode: ClipMode) -> Self {
        self.mode = mode;
        self
    }

    /// `gamma = 0` is accepted (pure normalization); the zero vector then maps to zero.
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return config(format!("clip gamma must be finite and nonnegative, got {}", self.gamma));
        }
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return config(format!("clip scale G must be positive, got {}", self.scale));
        }
        Ok(())
    }
}

pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Multiplier applied to a vector of norm `norm`.
fn factor(norm: f64, cfg: &ClipConfig) -> f64 {
    match cfg.mode {
        ClipMode::Automatic => {
            let denom = norm + cfg.gamma;
            if denom == 0.0 {
                0.0
            } else {
                cfg.scale / denom
            }
        }
        ClipMode::Threshold => {
            if norm <= cfg.scale {
                1.0
            } else {
                cfg.scale / norm
            }
        }
    }
}

/// Clips one gradient.
pub fn auto_clip(v: &[f64], cfg: &ClipConfig) -> Result<Vec<f64>> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric("clip input has non-finite entries".into()));
    }
    let s = factor(l2_norm(v), cfg);
    Ok(v.iter().map(|x| s * x).collect())
}

/// Mean of the individually clipped gradients.
pub fn clip_batch<V: AsRef<[f64]>>(grads: &[V], cfg: &ClipConfig) -> Result<Vec<f64>> {
    let first = grads.first().ok_or_else(|| Error::Config("cannot clip an empty batch".into()))?;
    let d = first.as_ref().len();
    let mut acc = vec![0.0; d];
    for g in grads {
        let g = g.as_ref();
        if g.len() != d {
            return config("per-sample gradients have differing dimensions");
        }
        let clipped = auto_clip(g, cfg)?;
        acc.iter_mut().zip(clipped).for_each(|(a, c)| *a += c);
    }
    let inv = 1.0 / grads.len() as f64;
    acc.iter_mut().for_each(|a| *a *= inv);
    Ok(acc)
}
