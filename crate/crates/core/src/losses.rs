//! Training-loss formulas as pure functions over precomputed inputs.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::heatmap::HeatmapStack;

pub const PROB_CLAMP: f64 = 1e-7;
pub const DEFAULT_BETA: f64 = 1.0;
pub const NUM_ACTION_CLASSES: usize = 38;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LossError {
    #[error("input shapes differ")]
    ShapeMismatch,
    #[error("label {label} outside 0..{classes}")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("probabilities must be non-negative with a positive sum")]
    InvalidProbabilities,
}

fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

/// Mean elementwise Smooth-L1 with transition point `beta`.
pub fn smooth_l1(pred: &[f64], gt: &[f64], beta: f64) -> Result<f64, LossError> {
    if pred.len() != gt.len() || pred.is_empty() {
        return Err(LossError::ShapeMismatch);
    }
    let total: f64 = pred
        .iter()
        .zip(gt)
        .map(|(p, g)| {
            let d = (p - g).abs();
            if d < beta {
                0.5 * d * d / beta
            } else {
                d - 0.5 * beta
            }
        })
        .sum();
    Ok(total / pred.len() as f64)
}

pub fn heatmap_mse(pred: &HeatmapStack, target: &HeatmapStack) -> Result<f64, LossError> {
    if !pred.same_shape(target) || pred.values.is_empty() {
        return Err(LossError::ShapeMismatch);
    }
    let total: f64 = pred
        .values
        .iter()
        .zip(&target.values)
        .map(|(p, t)| {
            let d = f64::from(*p) - f64::from(*t);
            d * d
        })
        .sum();
    Ok(total / pred.values.len() as f64)
}

/// Mean binary cross-entropy between predicted foreground probabilities and a
/// target mask in `[0, 1]`.
pub fn bce_seg(pred_prob: &[f64], target: &[f64]) -> Result<f64, LossError> {
    if pred_prob.len() != target.len() || pred_prob.is_empty() {
        return Err(LossError::ShapeMismatch);
    }
    let total: f64 = pred_prob
        .iter()
        .zip(target)
        .map(|(p, y)| {
            let p = clamp_prob(*p);
            -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        })
        .sum();
    Ok(total / pred_prob.len() as f64)
}

/// `-ln p[label]` after renormalising `probs` to sum to one.
pub fn cross_entropy(probs: &[f64], label: usize) -> Result<f64, LossError> {
    if label >= probs.len() {
        return Err(LossError::LabelOutOfRange {
            label,
            classes: probs.len(),
        });
    }
    let sum: f64 = probs.iter().sum();
    if probs.iter().any(|p| !(*p >= 0.0)) || !(sum > 0.0) || !sum.is_finite() {
        return Err(LossError::InvalidProbabilities);
    }
    let p = if (sum - 1.0).abs() > 1e-6 {
        probs[label] / sum
    } else {
        probs[label]
    };
    Ok(-clamp_prob(p).ln())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossWeights {
    pub lambda_hms: f64,
    pub lambda_seg: f64,
    pub lambda_act: f64,
    pub lambda_3d: f64,
    pub w2d: Vec<f64>,
    pub w3d: Vec<f64>,
}

impl LossWeights {
    /// `w_k = k / n` for both per-iteration schedules.
    pub fn progressive(n_iters: usize) -> Self {
        let w: Vec<f64> = (1..=n_iters).map(|k| k as f64 / n_iters as f64).collect();
        Self {
            lambda_hms: 0.05,
            lambda_seg: 1.0,
            lambda_act: 10.0,
            lambda_3d: 0.5,
            w2d: w.clone(),
            w3d: w,
        }
    }

    pub fn is_monotone(&self) -> bool {
        self.w2d.windows(2).all(|w| w[0] <= w[1]) && self.w3d.windows(2).all(|w| w[0] <= w[1])
    }
}

impl Default for LossWeights {
    fn default() -> Self {
        Self::progressive(3)
    }
}

fn iteration_sum(iter_2d: &[f64], iter_3d: &[f64], w: &LossWeights) -> Result<f64, LossError> {
    if iter_2d.len() != w.w2d.len() || iter_3d.len() != w.w3d.len() {
        return Err(LossError::ShapeMismatch);
    }
    let a: f64 = iter_2d.iter().zip(&w.w2d).map(|(l, w)| l * w).sum();
    let b: f64 = iter_3d.iter().zip(&w.w3d).map(|(l, w)| l * w).sum();
    Ok(a + b)
}

pub fn loss_2d(hms: f64, seg: f64, w: &LossWeights) -> f64 {
    w.lambda_hms * hms + w.lambda_seg * seg
}

pub fn loss_bev(final_3d: f64, iter_2d: &[f64], iter_3d: &[f64], w: &LossWeights) -> Result<f64, LossError> {
    Ok(w.lambda_3d * final_3d + iteration_sum(iter_2d, iter_3d, w)?)
}

/// Overall objective. The final-3D term is not part of this sum.
pub fn loss_total(hms: f64, seg: f64, act: f64, iter_2d: &[f64], iter_3d: &[f64], w: &LossWeights) -> Result<f64, LossError> {
    Ok(loss_2d(hms, seg, w) + w.lambda_act * act + iteration_sum(iter_2d, iter_3d, w)?)
}
