//! Training objectives. Each returns its value together with the gradient
//! with respect to its first (differentiable) argument; sums are averaged
//! over the batch.

use serde::{Deserialize, Serialize};

use crate::error::{HaloError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    #[serde(default = "default_lambda")]
    pub lambda_empty: f64,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_consist")]
    pub lambda_consist: f64,
}

/// Picked from {0.01, 0.1, 1.0} by held-out PSNR on the procedural scene.
fn default_lambda() -> f64 {
    1.0
}
fn default_tau() -> f64 {
    0.01
}
fn default_consist() -> f64 {
    1.0
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda_empty: default_lambda(),
            tau: default_tau(),
            lambda_consist: default_consist(),
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(HaloError::InvalidConfig(format!("tau {} outside (0, 1)", self.tau)));
        }
        for (name, v) in [("lambda_empty", self.lambda_empty), ("lambda_consist", self.lambda_consist)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(HaloError::InvalidConfig(format!("{name} = {v} must be finite and nonnegative")));
            }
        }
        Ok(())
    }
}

/// A loss value and its gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct Loss<G> {
    pub value: f64,
    pub grad: G,
}

/// Rays kept by an occupancy gate.
#[derive(Clone, Debug, PartialEq)]
pub struct GatedLoss {
    pub value: f64,
    pub grad: Vec<f64>,
    pub kept: usize,
}

fn same_len(a: usize, b: usize, what: &str) -> Result<()> {
    if a != b {
        return Err(HaloError::shape(format!("{a} {what}"), b.to_string()));
    }
    Ok(())
}

/// Mean over rays of the squared color error.
pub fn loss_reconstruction(pred: &[[f64; 3]], gt: &[[f64; 3]]) -> Result<Loss<Vec<[f64; 3]>>> {
    same_len(pred.len(), gt.len(), "target colors")?;
    if pred.is_empty() {
        return Err(HaloError::InvalidInput("empty batch".into()));
    }
    let n = pred.len() as f64;
    let mut value = 0.0;
    let grad = pred
        .iter()
        .zip(gt)
        .map(|(p, g)| {
            let mut out = [0.0; 3];
            for ch in 0..3 {
                let d = p[ch] - g[ch];
                value += d * d;
                out[ch] = 2.0 * d / n;
            }
            out
        })
        .collect();
    Ok(Loss { value: value / n, grad })
}

/// Mean squared error between ray-field depths and the frozen low-frequency
/// field's depths over rays with `lo_acc >= tau`. The batch size in the
/// denominator counts kept rays only; an all-empty batch yields zero.
pub fn loss_ray_distill(pred: &[f64], lo_depth: &[f64], lo_acc: &[f64], tau: f64) -> Result<GatedLoss> {
    same_len(pred.len(), lo_depth.len(), "target depths")?;
    same_len(pred.len(), lo_acc.len(), "occupancies")?;
    let kept = lo_acc.iter().filter(|&&a| a >= tau).count();
    let mut grad = vec![0.0; pred.len()];
    if kept == 0 {
        log::warn!("ray distillation batch has no occupied rays");
        return Ok(GatedLoss { value: 0.0, grad, kept });
    }
    let n = kept as f64;
    let mut value = 0.0;
    for i in 0..pred.len() {
        if lo_acc[i] >= tau {
            let d = pred[i] - lo_depth[i];
            value += d * d;
            grad[i] = 2.0 * d / n;
        }
    }
    Ok(GatedLoss { value: value / n, grad, kept })
}

/// Sum of high-field occupancy over rays with `lo_acc < tau`, divided by
/// the batch size.
pub fn loss_empty(hi_acc: &[f64], lo_acc: &[f64], tau: f64) -> Result<GatedLoss> {
    same_len(hi_acc.len(), lo_acc.len(), "occupancies")?;
    if hi_acc.is_empty() {
        return Err(HaloError::InvalidInput("empty batch".into()));
    }
    let n = hi_acc.len() as f64;
    let mut value = 0.0;
    let mut kept = 0;
    let grad = hi_acc
        .iter()
        .zip(lo_acc)
        .map(|(&h, &l)| {
            if l < tau {
                kept += 1;
                value += h;
                1.0 / n
            } else {
                0.0
            }
        })
        .collect();
    Ok(GatedLoss { value: value / n, grad, kept })
}

/// Mean squared slope-angle difference; the radiance-field target is
/// treated as a constant.
pub fn loss_consist(theta_ray: &[f64], theta_target: &[f64]) -> Result<Loss<Vec<f64>>> {
    same_len(theta_ray.len(), theta_target.len(), "target angles")?;
    if theta_ray.is_empty() {
        return Err(HaloError::InvalidInput("empty batch".into()));
    }
    let n = theta_ray.len() as f64;
    let mut value = 0.0;
    let grad = theta_ray
        .iter()
        .zip(theta_target)
        .map(|(a, b)| {
            let d = a - b;
            value += d * d;
            2.0 * d / n
        })
        .collect();
    Ok(Loss { value: value / n, grad })
}

pub fn loss_total(rec: f64, empty: f64, weights: &LossWeights) -> f64 {
    rec + weights.lambda_empty * empty
}
