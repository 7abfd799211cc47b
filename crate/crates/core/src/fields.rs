//! Point-based radiance field and ray-based depth field.

use ndarray::{concatenate, s, Array1, Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encoding::{Encoder, EncodingConfig};
use crate::error::{HaloError, Result};
use crate::nn::{trunk_backward, trunk_forward, Linear, ParamSet, TrunkCache, TrunkSpec};
use crate::real::Real;
use crate::rendering::Ray;

/// Near/far bounds, the canonicalization sphere, and (for EPI scenes) the
/// slope-angle range.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneBounds {
    pub near: f64,
    pub far: f64,
    pub radius: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<(f64, f64)>,
}

impl SceneBounds {
    /// Sphere radius is 1.1x the farthest camera distance from the origin.
    pub fn from_camera_distances(near: f64, far: f64, distances: impl IntoIterator<Item = f64>) -> Result<Self> {
        let max = distances.into_iter().fold(0.0f64, f64::max);
        let bounds = Self {
            near,
            far,
            radius: 1.1 * max.max(far - near),
            theta: None,
        };
        bounds.validate()?;
        Ok(bounds)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.near < self.far) {
            return Err(HaloError::InvalidConfig(format!("near {} must be below far {}", self.near, self.far)));
        }
        if !(self.radius > 0.0) {
            return Err(HaloError::InvalidConfig(format!("radius {} must be positive", self.radius)));
        }
        if let Some((lo, hi)) = self.theta {
            if !(lo < hi) {
                return Err(HaloError::InvalidConfig(format!("theta_near {lo} must be below theta_far {hi}")));
            }
        }
        Ok(())
    }

    pub fn theta_range(&self) -> Result<(f64, f64)> {
        self.theta
            .ok_or_else(|| HaloError::InvalidConfig("scene bounds carry no theta range".into()))
    }
}

#[inline]
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Point field architecture descriptor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointFieldArch {
    pub depth: usize,
    pub width: usize,
    pub skip: Option<usize>,
    pub color_width: usize,
    /// Raw point coordinate count (3 for xyz, 3 for aligned EPI points).
    pub point_dim: usize,
    /// Raw view coordinate count (3 for directions, 2 for `uv`).
    pub view_dim: usize,
    pub point_encoding: EncodingConfig,
    pub view_encoding: EncodingConfig,
}

impl PointFieldArch {
    /// Depth 8, width 256, skip at 4.
    pub fn full(point_encoding: EncodingConfig) -> Self {
        Self {
            depth: 8,
            width: 256,
            skip: Some(4),
            color_width: 128,
            point_dim: 3,
            view_dim: 3,
            point_encoding,
            view_encoding: EncodingConfig::sinusoidal(4, 1.0),
        }
    }

    /// Depth 4, width 64: sized for single-core runs.
    pub fn desk(point_encoding: EncodingConfig) -> Self {
        Self {
            depth: 4,
            width: 64,
            skip: Some(2),
            color_width: 32,
            ..Self::full(point_encoding)
        }
    }

    fn validate(&self) -> Result<()> {
        if self.depth == 0 || self.width == 0 || self.color_width == 0 {
            return Err(HaloError::InvalidConfig("point field depth and widths must be positive".into()));
        }
        if matches!(self.skip, Some(k) if k == 0 || k >= self.depth) {
            return Err(HaloError::InvalidConfig(format!("skip {:?} out of range for depth {}", self.skip, self.depth)));
        }
        Ok(())
    }
}

/// Point field outputs for a batch of samples.
#[derive(Clone, Debug)]
pub struct PointOutput<R: Real> {
    pub sigma: Array1<R>,
    pub rgb: Array2<R>,
}

/// Saved activations for [`PointField::backward`].
#[derive(Debug)]
pub struct PointTape<R: Real> {
    trunk: TrunkCache<R>,
    hidden: Array2<R>,
    raw_sigma: Array1<R>,
    color_in: Array2<R>,
    color_hidden: Array2<R>,
    rgb: Array2<R>,
}

/// Radiance field `(enc(p), enc(d)) -> (rgb, sigma)`.
///
/// Layer order in `params`: trunk layers, density head, feature layer,
/// color hidden layer, color output layer.
#[derive(Clone, Debug)]
pub struct PointField<R: Real> {
    pub arch: PointFieldArch,
    pub params: ParamSet<R>,
    point_enc: Encoder,
    view_enc: Encoder,
}

impl<R: Real> PointField<R> {
    fn encoders(arch: &PointFieldArch) -> Result<(Encoder, Encoder)> {
        arch.validate()?;
        Ok((
            Encoder::new(&arch.point_encoding, arch.point_dim)?,
            Encoder::new(&arch.view_encoding, arch.view_dim)?,
        ))
    }

    fn trunk_spec(&self) -> TrunkSpec {
        TrunkSpec {
            input_dim: self.point_enc.output_dim(),
            width: self.arch.width,
            depth: self.arch.depth,
            skip: self.arch.skip,
        }
    }

    pub fn expected_shapes(arch: &PointFieldArch) -> Result<Vec<(usize, usize)>> {
        let (pe, ve) = Self::encoders(arch)?;
        let spec = TrunkSpec {
            input_dim: pe.output_dim(),
            width: arch.width,
            depth: arch.depth,
            skip: arch.skip,
        };
        let mut shapes: Vec<_> = (0..arch.depth).map(|i| (spec.layer_input_dim(i), arch.width)).collect();
        shapes.push((arch.width, 1));
        shapes.push((arch.width, arch.width));
        shapes.push((arch.width + ve.output_dim(), arch.color_width));
        shapes.push((arch.color_width, 3));
        Ok(shapes)
    }

    /// Seeded fan-in uniform initialization.
    pub fn init(arch: PointFieldArch, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = Self::expected_shapes(&arch)?
            .into_iter()
            .map(|(i, o)| Linear::init_uniform(i, o, &mut rng))
            .collect();
        Self::from_params(arch, ParamSet { layers })
    }

    pub fn from_params(arch: PointFieldArch, params: ParamSet<R>) -> Result<Self> {
        let expected = Self::expected_shapes(&arch)?;
        if params.shapes() != expected {
            return Err(HaloError::shape(format!("{expected:?}"), format!("{:?}", params.shapes())));
        }
        if !params.all_finite() {
            return Err(HaloError::InvalidInput("point field parameters contain non-finite values".into()));
        }
        let (point_enc, view_enc) = Self::encoders(&arch)?;
        Ok(Self {
            arch,
            params,
            point_enc,
            view_enc,
        })
    }

    pub fn point_encoder(&self) -> &Encoder {
        &self.point_enc
    }

    pub fn view_encoder(&self) -> &Encoder {
        &self.view_enc
    }

    pub fn encode_points(&self, points: &[f64]) -> Array2<R> {
        self.point_enc.encode_rows(points)
    }

    pub fn encode_views(&self, views: &[f64]) -> Array2<R> {
        self.view_enc.encode_rows(views)
    }

    fn density_head(&self) -> &Linear<R> {
        &self.params.layers[self.arch.depth]
    }

    /// Zeroes the density head; handy for closed-form checks.
    pub fn zero_density_head(&mut self) {
        let d = self.arch.depth;
        let l = &mut self.params.layers[d];
        l.weight.fill(R::zero());
        l.bias.fill(R::zero());
    }

    fn check_inputs(&self, enc_p: &Array2<R>, enc_d: &Array2<R>) -> Result<()> {
        let (pw, vw) = (self.point_enc.output_dim(), self.view_enc.output_dim());
        if enc_p.ncols() != pw || enc_d.ncols() != vw || enc_p.nrows() != enc_d.nrows() {
            return Err(HaloError::shape(
                format!("[n, {pw}] points and [n, {vw}] views"),
                format!("{:?} and {:?}", enc_p.dim(), enc_d.dim()),
            ));
        }
        Ok(())
    }

    /// Evaluates `(rgb, sigma)` for encoded inputs.
    pub fn eval(&self, enc_p: &Array2<R>, enc_d: &Array2<R>) -> Result<PointOutput<R>> {
        self.check_inputs(enc_p, enc_d)?;
        Ok(self.forward(enc_p, enc_d).0)
    }

    /// Forward pass keeping activations. Inputs are assumed well-shaped.
    pub fn forward(&self, enc_p: &Array2<R>, enc_d: &Array2<R>) -> (PointOutput<R>, PointTape<R>) {
        let d = self.arch.depth;
        let layers = &self.params.layers;
        let (hidden, trunk) = trunk_forward(&self.trunk_spec(), &layers[..d], enc_p);
        let raw_sigma = layers[d].forward(hidden.view()).column(0).to_owned();
        let sigma = raw_sigma.mapv(|v| R::of(softplus(v.f64())));
        let feature = layers[d + 1].forward(hidden.view());
        let color_in = concatenate![Axis(1), feature, enc_d.view()];
        let mut color_hidden = layers[d + 2].forward(color_in.view());
        color_hidden.mapv_inplace(|v| if v > R::zero() { v } else { R::zero() });
        let rgb = layers[d + 3]
            .forward(color_hidden.view())
            .mapv(|v| R::of(sigmoid(v.f64())));
        let out = PointOutput {
            sigma,
            rgb: rgb.clone(),
        };
        let tape = PointTape {
            trunk,
            hidden,
            raw_sigma,
            color_in,
            color_hidden,
            rgb,
        };
        (out, tape)
    }

    /// Parameter gradients (and optionally input gradients) given the
    /// upstream gradients on `sigma` and `rgb`.
    pub fn backward(
        &self,
        tape: &PointTape<R>,
        d_sigma: &Array1<R>,
        d_rgb: &Array2<R>,
        want_inputs: bool,
    ) -> (ParamSet<R>, Option<(Array2<R>, Array2<R>)>) {
        let d = self.arch.depth;
        let w = self.arch.width;
        let layers = &self.params.layers;
        let mut grads = self.params.zeros_like();

        let d_raw_rgb = ndarray::Zip::from(d_rgb)
            .and(&tape.rgb)
            .map_collect(|&g, &c| g * c * (R::one() - c));
        let mut d_ch = layers[d + 3]
            .backward(tape.color_hidden.view(), d_raw_rgb.view(), &mut grads.layers[d + 3], true)
            .expect("dx");
        ndarray::Zip::from(&mut d_ch).and(&tape.color_hidden).for_each(|g, &h| {
            if h <= R::zero() {
                *g = R::zero();
            }
        });
        let d_color_in = layers[d + 2]
            .backward(tape.color_in.view(), d_ch.view(), &mut grads.layers[d + 2], true)
            .expect("dx");
        let d_feature = d_color_in.slice(s![.., ..w]).to_owned();
        let mut d_hidden = layers[d + 1]
            .backward(tape.hidden.view(), d_feature.view(), &mut grads.layers[d + 1], true)
            .expect("dx");

        let d_raw_sigma = ndarray::Zip::from(d_sigma)
            .and(&tape.raw_sigma)
            .map_collect(|&g, &r| g * R::of(sigmoid(r.f64())))
            .insert_axis(Axis(1));
        d_hidden += &layers[d]
            .backward(tape.hidden.view(), d_raw_sigma.view(), &mut grads.layers[d], true)
            .expect("dx");

        let (trunk_grads, _) = grads.layers.split_at_mut(d);
        let d_enc_p = trunk_backward(&self.trunk_spec(), &layers[..d], &tape.trunk, d_hidden, trunk_grads, want_inputs);
        let inputs = d_enc_p.map(|p| (p, d_color_in.slice(s![.., w..]).to_owned()));
        (grads, inputs)
    }

    /// Density only, for cheap occupancy queries.
    pub fn density(&self, enc_p: &Array2<R>) -> Array1<R> {
        let d = self.arch.depth;
        let (hidden, _) = trunk_forward(&self.trunk_spec(), &self.params.layers[..d], enc_p);
        self.density_head()
            .forward(hidden.view())
            .column(0)
            .mapv(|v| R::of(softplus(v.f64())))
    }
}

/// Inputs consumed by the ray field.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RayParameterization {
    /// Canonicalized origin on the bounding sphere plus unit direction.
    OriginDirection,
    /// Two-plane `(u, v, s, t)`.
    TwoPlane,
}

impl RayParameterization {
    pub fn input_dim(self) -> usize {
        match self {
            RayParameterization::OriginDirection => 6,
            RayParameterization::TwoPlane => 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RayFieldArch {
    pub depth: usize,
    pub width: usize,
    pub encoding: EncodingConfig,
    pub parameterization: RayParameterization,
}

impl RayFieldArch {
    /// Depth 6, width 128.
    pub fn default_with(encoding: EncodingConfig, parameterization: RayParameterization) -> Self {
        Self {
            depth: 6,
            width: 128,
            encoding,
            parameterization,
        }
    }
}

#[derive(Debug)]
pub struct RayTape<R: Real> {
    trunk: TrunkCache<R>,
    hidden: Array2<R>,
    squash: Vec<f64>,
}

/// Ray-to-scalar field. Outputs are squashed by an affine sigmoid into
/// `[near, far]` for origin/direction rays, where the value is a distance
/// from the ray's entry point on the bounding sphere, and into the theta
/// range for two-plane rays.
#[derive(Clone, Debug)]
pub struct RayField<R: Real> {
    pub arch: RayFieldArch,
    pub bounds: SceneBounds,
    pub params: ParamSet<R>,
    encoder: Encoder,
}

impl<R: Real> RayField<R> {
    fn spec(arch: &RayFieldArch, encoder: &Encoder) -> TrunkSpec {
        TrunkSpec {
            input_dim: encoder.output_dim(),
            width: arch.width,
            depth: arch.depth,
            skip: None,
        }
    }

    pub fn expected_shapes(arch: &RayFieldArch) -> Result<Vec<(usize, usize)>> {
        if arch.depth == 0 || arch.width == 0 {
            return Err(HaloError::InvalidConfig("ray field depth and width must be positive".into()));
        }
        let enc = Encoder::new(&arch.encoding, arch.parameterization.input_dim())?;
        let spec = Self::spec(arch, &enc);
        let mut shapes: Vec<_> = (0..arch.depth).map(|i| (spec.layer_input_dim(i), arch.width)).collect();
        shapes.push((arch.width, 1));
        Ok(shapes)
    }

    pub fn init(arch: RayFieldArch, bounds: SceneBounds, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = Self::expected_shapes(&arch)?
            .into_iter()
            .map(|(i, o)| Linear::init_uniform(i, o, &mut rng))
            .collect();
        Self::from_params(arch, bounds, ParamSet { layers })
    }

    pub fn from_params(arch: RayFieldArch, bounds: SceneBounds, params: ParamSet<R>) -> Result<Self> {
        bounds.validate()?;
        if arch.parameterization == RayParameterization::TwoPlane {
            bounds.theta_range()?;
        }
        let expected = Self::expected_shapes(&arch)?;
        if params.shapes() != expected {
            return Err(HaloError::shape(format!("{expected:?}"), format!("{:?}", params.shapes())));
        }
        if !params.all_finite() {
            return Err(HaloError::InvalidInput("ray field parameters contain non-finite values".into()));
        }
        let encoder = Encoder::new(&arch.encoding, arch.parameterization.input_dim())?;
        Ok(Self {
            arch,
            bounds,
            params,
            encoder,
        })
    }

    pub fn output_range(&self) -> (f64, f64) {
        match self.arch.parameterization {
            RayParameterization::OriginDirection => (self.bounds.near, self.bounds.far),
            RayParameterization::TwoPlane => self.bounds.theta.expect("validated"),
        }
    }

    pub fn zero_output_head(&mut self) {
        let l = self.params.layers.last_mut().expect("head");
        l.weight.fill(R::zero());
        l.bias.fill(R::zero());
    }

    /// Canonical `(o, d)` coordinates of a ray and the shift from its
    /// original parameterization.
    pub fn ray_coords(&self, ray: &Ray) -> Result<([f64; 6], f64)> {
        let (c, shift) = ray.canonicalize(self.bounds.radius)?;
        let o = c.origin;
        let d = c.direction;
        Ok(([o.x, o.y, o.z, d.x, d.y, d.z], shift))
    }

    /// Forward pass over raw coordinates stored row-major.
    pub fn forward(&self, coords: &[f64]) -> (Vec<f64>, RayTape<R>) {
        let x = self.encoder.encode_rows::<R>(coords);
        let spec = Self::spec(&self.arch, &self.encoder);
        let d = self.arch.depth;
        let (hidden, trunk) = trunk_forward(&spec, &self.params.layers[..d], &x);
        let raw = self.params.layers[d].forward(hidden.view());
        let (lo, hi) = self.output_range();
        let squash: Vec<f64> = raw.column(0).iter().map(|v| sigmoid(v.f64())).collect();
        let out = squash.iter().map(|s| lo + (hi - lo) * s).collect();
        (out, RayTape { trunk, hidden, squash })
    }

    pub fn predict(&self, coords: &[f64]) -> Vec<f64> {
        self.forward(coords).0
    }

    pub fn backward(&self, tape: &RayTape<R>, d_out: &[f64]) -> ParamSet<R> {
        let (lo, hi) = self.output_range();
        let d = self.arch.depth;
        let mut grads = self.params.zeros_like();
        let d_raw = Array2::from_shape_fn((d_out.len(), 1), |(i, _)| {
            let s = tape.squash[i];
            R::of(d_out[i] * (hi - lo) * s * (1.0 - s))
        });
        let d_hidden = self.params.layers[d]
            .backward(tape.hidden.view(), d_raw.view(), &mut grads.layers[d], true)
            .expect("dx");
        let spec = Self::spec(&self.arch, &self.encoder);
        let (trunk_grads, _) = grads.layers.split_at_mut(d);
        trunk_backward(&spec, &self.params.layers[..d], &tape.trunk, d_hidden, trunk_grads, false);
        grads
    }

    /// Depth predicted for `ray`, measured from its sphere entry point.
    pub fn eval_ray(&self, ray: &Ray) -> Result<f64> {
        if self.arch.parameterization != RayParameterization::OriginDirection {
            return Err(HaloError::InvalidInput("eval_ray needs an origin/direction ray field".into()));
        }
        let (coords, _) = self.ray_coords(ray)?;
        Ok(self.predict(&coords)[0])
    }

    /// Depth predicted for `ray` in its own parameterization, clamped to the
    /// ray's bounds.
    pub fn eval_ray_local(&self, ray: &Ray) -> Result<f64> {
        let (coords, shift) = self.ray_coords(ray)?;
        Ok((self.predict(&coords)[0] + shift).clamp(ray.t_near, ray.t_far))
    }
}
