//! Coordinate encodings with controllable frequency content, plus the
//! EPI point parameterization used by the light-field variant.

mod epi;
mod gaussian;
mod sinusoidal;

pub use epi::{epi_align, EpiPoint, TwoPlaneGeometry, MIN_SLOPE};
pub use gaussian::{encode_gaussian, GaussianEncoding, GaussianEncodingConfig, GaussianGroup};
pub use sinusoidal::{encode_sinusoidal, SinusoidalEncodingConfig};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{HaloError, Result};
use crate::real::Real;

/// Serialized description of an encoding.
///
/// The `type` key selects the variant, so a config file reads e.g.
/// `{ type = "sinusoidal", bands = 5, scale = 32.0 }`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EncodingConfig {
    Sinusoidal(SinusoidalEncodingConfig),
    Gaussian(GaussianEncodingConfig),
    /// Independent Gaussian feature groups over subsets of the input
    /// dimensions, concatenated in order.
    GaussianGroups { groups: Vec<GaussianGroup> },
}

impl EncodingConfig {
    pub fn sinusoidal(bands: usize, scale: f64) -> Self {
        EncodingConfig::Sinusoidal(SinusoidalEncodingConfig {
            bands,
            scale,
            include_identity: true,
        })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            EncodingConfig::Sinusoidal(c) => c.validate(),
            EncodingConfig::Gaussian(c) => c.validate(),
            EncodingConfig::GaussianGroups { groups } => {
                if groups.is_empty() {
                    return Err(HaloError::InvalidConfig("no gaussian groups".into()));
                }
                groups.iter().try_for_each(|g| g.config.validate())
            }
        }
    }

    /// Short label for reports, e.g. `L=5,s=32`.
    pub fn label(&self) -> String {
        match self {
            EncodingConfig::Sinusoidal(c) => format!("L={},s={}", c.bands, c.scale),
            EncodingConfig::Gaussian(c) => format!("gauss(std={},n={})", c.std, c.num_features),
            EncodingConfig::GaussianGroups { groups } => {
                let parts: Vec<_> = groups
                    .iter()
                    .map(|g| format!("{:?}:std={}", g.dims, g.config.std))
                    .collect();
                format!("gauss[{}]", parts.join(";"))
            }
        }
    }
}

/// A materialized encoder for a fixed input dimensionality.
#[derive(Clone, Debug)]
pub enum Encoder {
    Sinusoidal {
        config: SinusoidalEncodingConfig,
        input_dim: usize,
    },
    Gaussian(Vec<(Vec<usize>, GaussianEncoding)>),
}

impl Encoder {
    pub fn new(config: &EncodingConfig, input_dim: usize) -> Result<Self> {
        config.validate()?;
        if input_dim == 0 {
            return Err(HaloError::InvalidConfig("encoder input_dim must be positive".into()));
        }
        Ok(match config {
            EncodingConfig::Sinusoidal(c) => Encoder::Sinusoidal {
                config: c.clone(),
                input_dim,
            },
            EncodingConfig::Gaussian(c) => Encoder::Gaussian(vec![(
                (0..input_dim).collect(),
                GaussianEncoding::new(c, input_dim)?,
            )]),
            EncodingConfig::GaussianGroups { groups } => {
                let mut out = Vec::with_capacity(groups.len());
                for g in groups {
                    if g.dims.is_empty() || g.dims.iter().any(|&d| d >= input_dim) {
                        return Err(HaloError::InvalidConfig(format!(
                            "gaussian group dims {:?} out of range for input_dim {input_dim}",
                            g.dims
                        )));
                    }
                    out.push((g.dims.clone(), GaussianEncoding::new(&g.config, g.dims.len())?));
                }
                Encoder::Gaussian(out)
            }
        })
    }

    pub fn input_dim(&self) -> usize {
        match self {
            Encoder::Sinusoidal { input_dim, .. } => *input_dim,
            Encoder::Gaussian(groups) => groups
                .iter()
                .flat_map(|(dims, _)| dims.iter().copied())
                .max()
                .map_or(0, |m| m + 1),
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            Encoder::Sinusoidal { config, input_dim } => config.output_dim(*input_dim),
            Encoder::Gaussian(groups) => groups.iter().map(|(_, g)| g.output_dim()).sum(),
        }
    }

    /// Encodes one point into `out` without validation (hot path).
    pub fn encode_into<R: Real>(&self, x: &[f64], out: &mut [R]) {
        match self {
            Encoder::Sinusoidal { config, .. } => sinusoidal::encode_into(config, x, out),
            Encoder::Gaussian(groups) => {
                let mut offset = 0;
                let mut sub = Vec::new();
                for (dims, g) in groups {
                    sub.clear();
                    sub.extend(dims.iter().map(|&d| x[d]));
                    let n = g.output_dim();
                    g.encode_into(&sub, &mut out[offset..offset + n]);
                    offset += n;
                }
            }
        }
    }

    pub fn encode(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut out = vec![0.0; self.output_dim()];
        self.encode_into(x, &mut out);
        Ok(out)
    }

    /// Encodes `n` points stored row-major in `points` (`n * input_dim`).
    pub fn encode_rows<R: Real>(&self, points: &[f64]) -> Array2<R> {
        let d = self.input_dim();
        let n = points.len() / d;
        let mut out = Array2::<R>::zeros((n, self.output_dim()));
        for (row, p) in out.outer_iter_mut().zip(points.chunks_exact(d)) {
            let row = row.into_slice().expect("row-major");
            self.encode_into(p, row);
        }
        out
    }

    /// Vector-Jacobian product: gradient with respect to `x` given the
    /// gradient with respect to the encoding.
    pub fn backward(&self, x: &[f64], grad_out: &[f64]) -> Vec<f64> {
        match self {
            Encoder::Sinusoidal { config, .. } => sinusoidal::backward(config, x, grad_out),
            Encoder::Gaussian(groups) => {
                let mut grad = vec![0.0; x.len()];
                let mut offset = 0;
                for (dims, g) in groups {
                    let sub: Vec<f64> = dims.iter().map(|&d| x[d]).collect();
                    let n = g.output_dim();
                    let gs = g.backward(&sub, &grad_out[offset..offset + n]);
                    for (&d, v) in dims.iter().zip(gs) {
                        grad[d] += v;
                    }
                    offset += n;
                }
                grad
            }
        }
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(HaloError::shape(self.input_dim(), x.len()));
        }
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(HaloError::InvalidInput(format!(
                "non-finite encoder input at index {i}: {}",
                x[i]
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_keys_round_trip_through_json() {
        let cfg = EncodingConfig::sinusoidal(5, 32.0);
        let json = serde_json::to_string(&cfg).unwrap();
        assert_eq!(
            json,
            r#"{"type":"sinusoidal","bands":5,"scale":32.0,"include_identity":true}"#
        );
        let back: EncodingConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cfg);

        let g: EncodingConfig =
            serde_json::from_str(r#"{"type":"gaussian","std":8.0,"num_features":5,"seed":3}"#).unwrap();
        assert!(matches!(g, EncodingConfig::Gaussian(ref c) if c.num_features == 5));
    }

    #[test]
    fn include_identity_defaults_to_true() {
        let cfg: EncodingConfig =
            serde_json::from_str(r#"{"type":"sinusoidal","bands":2,"scale":1.0}"#).unwrap();
        assert_eq!(Encoder::new(&cfg, 3).unwrap().output_dim(), 3 * 2 * 2 + 3);
    }

    #[test]
    fn grouped_gaussian_concatenates_groups() {
        let cfg = EncodingConfig::GaussianGroups {
            groups: vec![
                GaussianGroup {
                    dims: vec![0, 1],
                    config: GaussianEncodingConfig { std: 4.0, num_features: 6, seed: 1 },
                },
                GaussianGroup {
                    dims: vec![2],
                    config: GaussianEncodingConfig { std: 1.0, num_features: 3, seed: 2 },
                },
            ],
        };
        let enc = Encoder::new(&cfg, 3).unwrap();
        assert_eq!(enc.output_dim(), 18);
        let out = enc.encode(&[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(&out[..6], &[1.0; 6]);
        assert_eq!(&out[6..12], &[0.0; 6]);
        assert_eq!(&out[12..15], &[1.0; 3]);
    }

    #[test]
    fn encoder_rejects_non_finite_and_wrong_length() {
        let enc = Encoder::new(&EncodingConfig::sinusoidal(2, 1.0), 2).unwrap();
        assert!(matches!(enc.encode(&[f64::NAN, 0.0]), Err(HaloError::InvalidInput(_))));
        assert!(matches!(enc.encode(&[0.0]), Err(HaloError::ShapeMismatch { .. })));
    }

    #[test]
    fn encoder_backward_matches_finite_differences() {
        let configs = [
            EncodingConfig::sinusoidal(4, 2.0),
            EncodingConfig::Gaussian(GaussianEncodingConfig { std: 0.7, num_features: 7, seed: 9 }),
        ];
        let x = [0.3, -1.1, 0.8];
        for cfg in &configs {
            let enc = Encoder::new(cfg, 3).unwrap();
            let weights: Vec<f64> = (0..enc.output_dim()).map(|i| ((i * 7 % 5) as f64) - 2.0).collect();
            let f = |x: &[f64]| -> f64 {
                enc.encode(x).unwrap().iter().zip(&weights).map(|(a, b)| a * b).sum()
            };
            let grad = enc.backward(&x, &weights);
            for d in 0..3 {
                let h = 1e-6;
                let mut xp = x;
                let mut xm = x;
                xp[d] += h;
                xm[d] -= h;
                let fd = (f(&xp) - f(&xm)) / (2.0 * h);
                assert!((fd - grad[d]).abs() <= 1e-6 * (1.0 + fd.abs()), "{cfg:?} d={d}: {fd} vs {}", grad[d]);
            }
        }
    }
}
