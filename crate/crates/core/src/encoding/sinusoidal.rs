use serde::{Deserialize, Serialize};

use crate::error::{HaloError, Result};
use crate::real::Real;

fn default_true() -> bool {
    true
}

/// Octave sinusoidal encoding: `L` bands on inputs pre-divided by `s`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SinusoidalEncodingConfig {
    pub bands: usize,
    pub scale: f64,
    #[serde(default = "default_true")]
    pub include_identity: bool,
}

impl SinusoidalEncodingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.bands == 0 {
            return Err(HaloError::InvalidConfig("sinusoidal bands must be >= 1".into()));
        }
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(HaloError::InvalidConfig(format!(
                "sinusoidal scale must be positive, got {}",
                self.scale
            )));
        }
        Ok(())
    }

    pub fn output_dim(&self, input_dim: usize) -> usize {
        input_dim * 2 * self.bands + if self.include_identity { input_dim } else { 0 }
    }
}

/// Layout: `[x/s (if identity)] ++ for each dim p: sin(p/s), cos(p/s), ..., sin(2^{L-1} p/s), cos(2^{L-1} p/s)`.
pub fn encode_sinusoidal(x: &[f64], cfg: &SinusoidalEncodingConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    if let Some(bad) = x.iter().find(|v| !v.is_finite()) {
        return Err(HaloError::InvalidInput(format!("non-finite encoder input {bad}")));
    }
    let mut out = vec![0.0; cfg.output_dim(x.len())];
    encode_into(cfg, x, &mut out);
    Ok(out)
}

pub(super) fn encode_into<R: Real>(cfg: &SinusoidalEncodingConfig, x: &[f64], out: &mut [R]) {
    let inv_s = 1.0 / cfg.scale;
    let mut k = 0;
    if cfg.include_identity {
        for &p in x {
            out[k] = R::of(p * inv_s);
            k += 1;
        }
    }
    for &p in x {
        let mut freq = inv_s;
        for _ in 0..cfg.bands {
            let (s, c) = (p * freq).sin_cos();
            out[k] = R::of(s);
            out[k + 1] = R::of(c);
            k += 2;
            freq *= 2.0;
        }
    }
}

pub(super) fn backward(cfg: &SinusoidalEncodingConfig, x: &[f64], grad_out: &[f64]) -> Vec<f64> {
    let inv_s = 1.0 / cfg.scale;
    let mut grad = vec![0.0; x.len()];
    let mut k = 0;
    if cfg.include_identity {
        for g in grad.iter_mut() {
            *g += grad_out[k] * inv_s;
            k += 1;
        }
    }
    for (g, &p) in grad.iter_mut().zip(x) {
        let mut freq = inv_s;
        for _ in 0..cfg.bands {
            let (s, c) = (p * freq).sin_cos();
            *g += freq * (c * grad_out[k] - s * grad_out[k + 1]);
            k += 2;
            freq *= 2.0;
        }
    }
    grad
}

#[cfg(test)]
mod tests {
    use std::f64::consts::FRAC_PI_2;

    use proptest::prelude::*;

    use super::*;

    fn cfg(bands: usize, scale: f64, include_identity: bool) -> SinusoidalEncodingConfig {
        SinusoidalEncodingConfig { bands, scale, include_identity }
    }

    #[test]
    fn zero_input_two_bands() {
        assert_eq!(encode_sinusoidal(&[0.0], &cfg(2, 1.0, false)).unwrap(), vec![0.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn quarter_turn_single_band() {
        let out = encode_sinusoidal(&[FRAC_PI_2], &cfg(1, 1.0, false)).unwrap();
        assert!((out[0] - 1.0).abs() < 1e-15);
        assert!(out[1].abs() < 1e-15);
    }

    #[test]
    fn scale_divides_input() {
        let out = encode_sinusoidal(&[32.0], &cfg(1, 32.0, false)).unwrap();
        assert!((out[0] - 0.84147).abs() < 1e-5);
        assert!((out[1] - 0.54030).abs() < 1e-5);
    }

    #[test]
    fn identity_is_prepended_and_scaled() {
        let out = encode_sinusoidal(&[2.0, -4.0], &cfg(3, 2.0, true)).unwrap();
        assert_eq!(out.len(), 2 * 2 * 3 + 2);
        assert_eq!(&out[..2], &[1.0, -2.0]);
    }

    #[test]
    fn rejects_bad_config_and_input() {
        assert!(encode_sinusoidal(&[0.0], &cfg(0, 1.0, true)).is_err());
        assert!(encode_sinusoidal(&[0.0], &cfg(1, 0.0, true)).is_err());
        assert!(encode_sinusoidal(&[f64::INFINITY], &cfg(1, 1.0, true)).is_err());
    }

    proptest! {
        #[test]
        fn band_pairs_have_unit_norm(x in prop::collection::vec(-100.0f64..100.0, 1..4), bands in 1usize..8, scale in 0.1f64..50.0) {
            let out = encode_sinusoidal(&x, &cfg(bands, scale, false)).unwrap();
            for pair in out.chunks_exact(2) {
                prop_assert!((pair[0] * pair[0] + pair[1] * pair[1] - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn doubling_scale_equals_halving_input(x in prop::collection::vec(-50.0f64..50.0, 1..4), bands in 1usize..8, s0 in 0.1f64..10.0) {
            let a = encode_sinusoidal(&x, &cfg(bands, 2.0 * s0, true)).unwrap();
            let half: Vec<f64> = x.iter().map(|v| v / 2.0).collect();
            let b = encode_sinusoidal(&half, &cfg(bands, s0, true)).unwrap();
            for (u, v) in a.iter().zip(&b) {
                prop_assert!((u - v).abs() < 1e-12, "{} vs {}", u, v);
            }
        }

        #[test]
        fn deterministic(x in prop::collection::vec(-50.0f64..50.0, 1..4)) {
            let c = cfg(6, 3.0, true);
            prop_assert_eq!(encode_sinusoidal(&x, &c).unwrap(), encode_sinusoidal(&x, &c).unwrap());
        }
    }
}
