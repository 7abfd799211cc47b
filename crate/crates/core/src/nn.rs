//! Dense layers with hand-written backward passes and an Adam optimizer.
//!
//! Batches are row-major: one sample per row. Parameters of a network are
//! kept as an ordered list of [`Linear`] layers so that gradients,
//! optimizer moments and checkpoints share one layout.

use ndarray::{concatenate, s, Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::real::Real;

/// Affine layer `y = x W + b` with `W` stored as `in x out`.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear<R: Real> {
    pub weight: Array2<R>,
    pub bias: Array1<R>,
}

impl<R: Real> Linear<R> {
    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            weight: Array2::zeros((fan_in, fan_out)),
            bias: Array1::zeros(fan_out),
        }
    }

    /// Uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` for weights and bias.
    pub fn init_uniform<G: Rng + ?Sized>(fan_in: usize, fan_out: usize, rng: &mut G) -> Self {
        let bound = 1.0 / (fan_in as f64).sqrt();
        let mut draw = || R::of(rng.random_range(-bound..bound));
        let weight = Array2::from_shape_simple_fn((fan_in, fan_out), &mut draw);
        let bias = Array1::from_shape_simple_fn(fan_out, &mut draw);
        Self { weight, bias }
    }

    pub fn fan_in(&self) -> usize {
        self.weight.nrows()
    }

    pub fn fan_out(&self) -> usize {
        self.weight.ncols()
    }

    pub fn num_params(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    pub fn forward(&self, x: ArrayView2<R>) -> Array2<R> {
        let mut y = x.dot(&self.weight);
        y += &self.bias;
        y
    }

    /// Accumulates parameter gradients into `grad`; returns `dL/dx` if asked.
    pub fn backward(&self, x: ArrayView2<R>, gy: ArrayView2<R>, grad: &mut Linear<R>, want_dx: bool) -> Option<Array2<R>> {
        ndarray::linalg::general_mat_mul(R::one(), &x.t(), &gy, R::one(), &mut grad.weight);
        grad.bias += &gy.sum_axis(Axis(0));
        want_dx.then(|| gy.dot(&self.weight.t()))
    }
}

/// Ordered collection of layers; doubles as a gradient buffer.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamSet<R: Real> {
    pub layers: Vec<Linear<R>>,
}

impl<R: Real> ParamSet<R> {
    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self
                .layers
                .iter()
                .map(|l| Linear::zeros(l.fan_in(), l.fan_out()))
                .collect(),
        }
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(Linear::num_params).sum()
    }

    pub fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weight += &b.weight;
            a.bias += &b.bias;
        }
    }

    pub fn scale(&mut self, k: R) {
        for l in &mut self.layers {
            l.weight.mapv_inplace(|v| v * k);
            l.bias.mapv_inplace(|v| v * k);
        }
    }

    pub fn values(&self) -> impl Iterator<Item = R> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.weight.iter().chain(l.bias.iter()).copied())
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut R> + '_ {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weight.iter_mut().chain(l.bias.iter_mut()))
    }

    pub fn all_finite(&self) -> bool {
        self.values().all(|v| v.is_finite())
    }

    pub fn l2_norm(&self) -> f64 {
        self.values().map(|v| v.f64() * v.f64()).sum::<f64>().sqrt()
    }

    pub fn shapes(&self) -> Vec<(usize, usize)> {
        self.layers.iter().map(|l| (l.fan_in(), l.fan_out())).collect()
    }

    pub fn to_le_bytes(&self, out: &mut Vec<u8>) {
        for v in self.values() {
            v.write_le(out);
        }
    }

    /// Fills values from a little-endian buffer of `R`s. Returns bytes read.
    pub fn fill_from_le_bytes(&mut self, bytes: &[u8]) -> Option<usize> {
        let needed = self.num_params() * R::BYTES;
        if bytes.len() < needed {
            return None;
        }
        for (v, chunk) in self.values_mut().zip(bytes.chunks_exact(R::BYTES)) {
            *v = R::read_le(chunk);
        }
        Some(needed)
    }

    pub fn zeros_with_shapes(shapes: &[(usize, usize)]) -> Self {
        Self {
            layers: shapes.iter().map(|&(i, o)| Linear::zeros(i, o)).collect(),
        }
    }
}

/// Shape of a ReLU trunk: `depth` hidden layers of `width`, with the raw
/// input concatenated back in at layer `skip`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrunkSpec {
    pub input_dim: usize,
    pub width: usize,
    pub depth: usize,
    pub skip: Option<usize>,
}

impl TrunkSpec {
    pub fn layer_input_dim(&self, layer: usize) -> usize {
        match (layer, self.skip) {
            (0, _) => self.input_dim,
            (i, Some(k)) if i == k => self.width + self.input_dim,
            _ => self.width,
        }
    }

    pub fn init<R: Real, G: Rng + ?Sized>(&self, rng: &mut G) -> Vec<Linear<R>> {
        (0..self.depth)
            .map(|i| Linear::init_uniform(self.layer_input_dim(i), self.width, rng))
            .collect()
    }
}

/// Activations kept for the backward pass.
#[derive(Debug)]
pub struct TrunkCache<R: Real> {
    inputs: Vec<Array2<R>>,
    outputs: Vec<Array2<R>>,
}

fn relu_inplace<R: Real>(a: &mut Array2<R>) {
    a.mapv_inplace(|v| if v > R::zero() { v } else { R::zero() });
}

/// Runs the trunk over a batch. `layers` must be the trunk's layers in order.
pub fn trunk_forward<R: Real>(spec: &TrunkSpec, layers: &[Linear<R>], x: &Array2<R>) -> (Array2<R>, TrunkCache<R>) {
    let mut inputs = Vec::with_capacity(spec.depth);
    let mut outputs = Vec::with_capacity(spec.depth);
    let mut h = x.clone();
    for (i, layer) in layers.iter().enumerate().take(spec.depth) {
        let input = if i > 0 && spec.skip == Some(i) {
            concatenate![Axis(1), h, x.view()]
        } else {
            h
        };
        let mut out = layer.forward(input.view());
        relu_inplace(&mut out);
        inputs.push(input);
        h = out.clone();
        outputs.push(out);
    }
    (h, TrunkCache { inputs, outputs })
}

/// Backpropagates `grad_out` (gradient w.r.t. the trunk output) and
/// accumulates layer gradients into `grads`. Returns the input gradient
/// when `want_dx` is set.
pub fn trunk_backward<R: Real>(
    spec: &TrunkSpec,
    layers: &[Linear<R>],
    cache: &TrunkCache<R>,
    grad_out: Array2<R>,
    grads: &mut [Linear<R>],
    want_dx: bool,
) -> Option<Array2<R>> {
    let mut g = grad_out;
    let mut dx: Option<Array2<R>> = None;
    for i in (0..spec.depth).rev() {
        Zip::from(&mut g).and(&cache.outputs[i]).for_each(|gv, &o| {
            if o <= R::zero() {
                *gv = R::zero();
            }
        });
        let need_input_grad = i > 0 || want_dx;
        let g_in = layers[i].backward(cache.inputs[i].view(), g.view(), &mut grads[i], need_input_grad);
        let Some(g_in) = g_in else { break };
        if i > 0 && spec.skip == Some(i) {
            let w = spec.width;
            if want_dx {
                let part = g_in.slice(s![.., w..]).to_owned();
                dx = Some(match dx {
                    Some(acc) => acc + part,
                    None => part,
                });
            }
            g = g_in.slice(s![.., ..w]).to_owned();
        } else {
            g = g_in;
        }
    }
    if !want_dx {
        return None;
    }
    Some(match dx {
        Some(acc) => acc + g,
        None => g,
    })
}

/// Adam with bias correction.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam<R: Real> {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    pub m: ParamSet<R>,
    pub v: ParamSet<R>,
}

impl<R: Real> Adam<R> {
    pub fn new(params: &ParamSet<R>) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: params.zeros_like(),
            v: params.zeros_like(),
        }
    }

    pub fn update(&mut self, params: &mut ParamSet<R>, grads: &ParamSet<R>, lr: f64) {
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let (b1, b2) = (R::of(self.beta1), R::of(self.beta2));
        let (one_b1, one_b2) = (R::of(1.0 - self.beta1), R::of(1.0 - self.beta2));
        let step_size = R::of(lr / bc1);
        let inv_bc2 = R::of(1.0 / bc2);
        let eps = R::of(self.eps);
        let update = |p: &mut R, g: R, m: &mut R, v: &mut R| {
            *m = b1 * *m + one_b1 * g;
            *v = b2 * *v + one_b2 * g * g;
            *p -= step_size * *m / ((*v * inv_bc2).sqrt() + eps);
        };
        for (((p, g), m), v) in params
            .layers
            .iter_mut()
            .zip(&grads.layers)
            .zip(&mut self.m.layers)
            .zip(&mut self.v.layers)
        {
            Zip::from(&mut p.weight)
                .and(&g.weight)
                .and(&mut m.weight)
                .and(&mut v.weight)
                .for_each(|p, &g, m, v| update(p, g, m, v));
            Zip::from(&mut p.bias)
                .and(&g.bias)
                .and(&mut m.bias)
                .and(&mut v.bias)
                .for_each(|p, &g, m, v| update(p, g, m, v));
        }
    }
}

/// Exponential learning-rate decay from `start` to `end` over `span` steps.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub start: f64,
    pub end: f64,
}

impl LrSchedule {
    pub fn at(&self, step: usize, span: usize) -> f64 {
        if span == 0 {
            return self.start;
        }
        let frac = (step as f64 / span as f64).min(1.0);
        self.start * (self.end / self.start).powf(frac)
    }
}

impl Default for LrSchedule {
    fn default() -> Self {
        Self { start: 5e-4, end: 5e-5 }
    }
}
