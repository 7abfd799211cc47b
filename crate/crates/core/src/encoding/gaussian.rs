use std::f64::consts::TAU;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{HaloError, Result};
use crate::real::Real;

/// Random Fourier features with a frequency matrix drawn from `N(0, std^2)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianEncodingConfig {
    pub std: f64,
    pub num_features: usize,
    pub seed: u64,
}

impl GaussianEncodingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.std.is_finite() && self.std >= 0.0) {
            return Err(HaloError::InvalidConfig(format!("gaussian std must be >= 0, got {}", self.std)));
        }
        if self.num_features == 0 {
            return Err(HaloError::InvalidConfig("gaussian num_features must be >= 1".into()));
        }
        Ok(())
    }
}

/// One Gaussian feature group applied to a subset of input dimensions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianGroup {
    pub dims: Vec<usize>,
    #[serde(flatten)]
    pub config: GaussianEncodingConfig,
}

/// Materialized Gaussian encoding. The frequency matrix is fixed at
/// construction and fully determined by the seed.
#[derive(Clone, Debug)]
pub struct GaussianEncoding {
    freqs: Array2<f64>,
}

impl GaussianEncoding {
    pub fn new(cfg: &GaussianEncodingConfig, input_dim: usize) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let normal = Normal::new(0.0, 1.0).expect("unit normal");
        let freqs = Array2::from_shape_simple_fn((cfg.num_features, input_dim), || {
            cfg.std * normal.sample(&mut rng)
        });
        Ok(Self { freqs })
    }

    pub fn frequencies(&self) -> &Array2<f64> {
        &self.freqs
    }

    pub fn output_dim(&self) -> usize {
        2 * self.freqs.nrows()
    }

    pub(super) fn encode_into<R: Real>(&self, x: &[f64], out: &mut [R]) {
        let n = self.freqs.nrows();
        for (j, row) in self.freqs.outer_iter().enumerate() {
            let phase: f64 = TAU * row.iter().zip(x).map(|(b, v)| b * v).sum::<f64>();
            let (s, c) = phase.sin_cos();
            out[j] = R::of(c);
            out[n + j] = R::of(s);
        }
    }

    pub(super) fn backward(&self, x: &[f64], grad_out: &[f64]) -> Vec<f64> {
        let n = self.freqs.nrows();
        let mut grad = vec![0.0; x.len()];
        for (j, row) in self.freqs.outer_iter().enumerate() {
            let phase: f64 = TAU * row.iter().zip(x).map(|(b, v)| b * v).sum::<f64>();
            let (s, c) = phase.sin_cos();
            let dphase = -s * grad_out[j] + c * grad_out[n + j];
            for (g, b) in grad.iter_mut().zip(row) {
                *g += dphase * TAU * b;
            }
        }
        grad
    }
}

/// Emits `(cos(2 pi B x), sin(2 pi B x))`.
pub fn encode_gaussian(x: &[f64], enc: &GaussianEncoding) -> Result<Vec<f64>> {
    if x.len() != enc.freqs.ncols() {
        return Err(HaloError::shape(enc.freqs.ncols(), x.len()));
    }
    if let Some(bad) = x.iter().find(|v| !v.is_finite()) {
        return Err(HaloError::InvalidInput(format!("non-finite encoder input {bad}")));
    }
    let mut out = vec![0.0; enc.output_dim()];
    enc.encode_into(x, &mut out);
    Ok(out)
}
