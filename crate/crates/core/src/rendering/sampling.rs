use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{HaloError, Result};

/// One uniform draw per bin of `[t_n, t_f]` split into `k` equal bins.
pub fn stratified_sample<G: Rng + ?Sized>(t_n: f64, t_f: f64, k: usize, rng: &mut G) -> Vec<f64> {
    let width = (t_f - t_n) / k as f64;
    (0..k)
        .map(|i| {
            let u: f64 = rng.random();
            t_n + (i as f64 + u) * width
        })
        .collect()
}

/// Bin midpoints; the deterministic counterpart of [`stratified_sample`].
pub fn midpoint_sample(t_n: f64, t_f: f64, k: usize) -> Vec<f64> {
    stratified_sample(t_n, t_f, k, &mut FixedJitter)
}

/// Random source whose uniform `f64` draws are exactly `0.5`, turning
/// every stratified sampler into its bin-midpoint variant.
#[derive(Clone, Copy, Debug, Default)]
pub struct FixedJitter;

impl RngCore for FixedJitter {
    fn next_u32(&mut self) -> u32 {
        1 << 31
    }

    fn next_u64(&mut self) -> u64 {
        1 << 63
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        dst.fill(0x80);
    }
}

/// Samples near a depth estimate, as used with a ray depth oracle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepthGuidedConfig {
    /// Window width as a fraction of `t_f - t_n`.
    pub window_fraction: f64,
    /// Share of samples spread over the full range.
    pub uniform_fraction: f64,
}

impl Default for DepthGuidedConfig {
    fn default() -> Self {
        Self {
            window_fraction: 0.2,
            uniform_fraction: 0.25,
        }
    }
}

/// `ceil((1 - uniform_fraction) k)` stratified samples inside the window
/// `[d_hat - w/2, d_hat + w/2]` clipped to the bounds, the rest stratified
/// over `[t_n, t_f]`, merged in sorted order.
pub fn depth_guided_sample<G: Rng + ?Sized>(
    d_hat: f64,
    window_w: f64,
    k: usize,
    t_n: f64,
    t_f: f64,
    uniform_fraction: f64,
    rng: &mut G,
) -> Result<Vec<f64>> {
    if !(window_w > 0.0) {
        return Err(HaloError::InvalidInput(format!("depth-guided window must be positive, got {window_w}")));
    }
    if !(0.0..=1.0).contains(&uniform_fraction) {
        return Err(HaloError::InvalidInput(format!("uniform_fraction {uniform_fraction} outside [0, 1]")));
    }
    let d = d_hat.clamp(t_n, t_f);
    let focused = (((1.0 - uniform_fraction) * k as f64).ceil() as usize).min(k);
    let lo = (d - 0.5 * window_w).max(t_n);
    let hi = (d + 0.5 * window_w).min(t_f);
    let mut ts = stratified_sample(lo, hi, focused, rng);
    ts.extend(stratified_sample(t_n, t_f, k - focused, rng));
    ts.sort_by(f64::total_cmp);
    Ok(ts)
}

/// Stratified angles in `[theta_ray - a, theta_ray + a] ∩ [theta_n, theta_f]`
/// with `a = alpha (theta_f - theta_n)`.
pub fn epi_theta_sample<G: Rng + ?Sized>(
    theta_ray: f64,
    alpha: f64,
    theta_n: f64,
    theta_f: f64,
    k: usize,
    rng: &mut G,
) -> Vec<f64> {
    let center = theta_ray.clamp(theta_n, theta_f);
    let half = alpha.max(0.0) * (theta_f - theta_n);
    let lo = (center - half).max(theta_n);
    let hi = (center + half).min(theta_f);
    stratified_sample(lo, hi, k, rng)
}

/// Depth-agnostic sampling policy along `[t_near, t_far]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Sampler {
    Stratified { samples: usize },
    Midpoint { samples: usize },
}

impl Sampler {
    pub fn samples(&self) -> usize {
        match *self {
            Sampler::Stratified { samples } | Sampler::Midpoint { samples } => samples,
        }
    }

    pub fn sample<G: Rng + ?Sized>(&self, t_n: f64, t_f: f64, rng: &mut G) -> Vec<f64> {
        match *self {
            Sampler::Stratified { samples } => stratified_sample(t_n, t_f, samples, rng),
            Sampler::Midpoint { samples } => midpoint_sample(t_n, t_f, samples),
        }
    }
}
