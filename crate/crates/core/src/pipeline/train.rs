use std::collections::BTreeMap;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{RayStageConfig, StageConfig};
use crate::data::PosedImageSet;
use crate::error::{HaloError, Result};
use crate::fields::{PointField, RayField, SceneBounds};
use crate::losses::{loss_empty, loss_ray_distill, loss_reconstruction};
use crate::nn::{Adam, ParamSet};
use crate::rendering::{
    depth_guided_sample, midpoint_sample, stratified_sample, DepthGuidedConfig, Ray, RenderGradOut, SampleBatch,
    VolumeRenderer,
};

/// Rays rendered per batch outside of training.
pub(crate) const EVAL_CHUNK: usize = 2048;

/// One line of the training log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub stage: String,
    pub iteration: usize,
    pub lr: f64,
    pub losses: BTreeMap<String, f64>,
}

/// Receives log records as training progresses.
pub type Logger<'a> = &'a mut dyn FnMut(&LogRecord);

/// Per-iteration random stream, so a resumed run draws the same batches as
/// an uninterrupted one.
pub fn step_rng(seed: u64, iteration: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(iteration as u64);
    rng
}

/// Every pixel ray of a posed image set with its color.
#[derive(Clone, Debug)]
pub struct PixelRays {
    pub rays: Vec<Ray>,
    pub colors: Vec<[f64; 3]>,
}

impl PixelRays {
    pub fn from_set(set: &PosedImageSet) -> Result<Self> {
        let mut rays = Vec::new();
        let mut colors = Vec::new();
        for (i, img) in set.images.iter().enumerate() {
            rays.extend(set.rays(i)?);
            for y in 0..img.height {
                for x in 0..img.width {
                    colors.push(img.pixel_rgb(x, y));
                }
            }
        }
        if rays.is_empty() {
            return Err(HaloError::InvalidInput("no training pixels".into()));
        }
        Ok(Self { rays, colors })
    }

    pub fn len(&self) -> usize {
        self.rays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rays.is_empty()
    }
}

/// Model and optimizer state of a training stage.
#[derive(Clone, Debug)]
pub struct TrainState<F> {
    pub field: F,
    pub adam: Adam<f32>,
    pub iteration: usize,
}

pub type PointState = TrainState<PointField<f32>>;
pub type RayState = TrainState<RayField<f32>>;

impl PointState {
    pub fn fresh(cfg: &StageConfig) -> Result<Self> {
        let field = PointField::init(cfg.point_arch(), cfg.seed)?;
        let adam = Adam::new(&field.params);
        Ok(Self { field, adam, iteration: 0 })
    }
}

impl RayState {
    pub fn fresh(cfg: &RayStageConfig, bounds: SceneBounds) -> Result<Self> {
        let field = RayField::init(cfg.arch(), bounds, cfg.seed)?;
        let adam = Adam::new(&field.params);
        Ok(Self { field, adam, iteration: 0 })
    }
}

/// Depth of each ray predicted by an origin/direction ray field, in the
/// ray's own parameterization and clamped to its bounds.
pub fn guided_depths(field: &RayField<f32>, rays: &[Ray]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(rays.len());
    for chunk in rays.chunks(EVAL_CHUNK) {
        let mut coords = Vec::with_capacity(chunk.len() * 6);
        let mut shifts = Vec::with_capacity(chunk.len());
        for ray in chunk {
            let (c, s) = field.ray_coords(ray)?;
            coords.extend_from_slice(&c);
            shifts.push(s);
        }
        let pred = field.predict(&coords);
        for ((p, s), ray) in pred.iter().zip(&shifts).zip(chunk) {
            out.push((p + s).clamp(ray.t_near, ray.t_far));
        }
    }
    Ok(out)
}

/// Sample positions for each ray: depth-guided around `depths` when given,
/// stratified over the full range otherwise.
pub fn sample_positions<G: Rng + ?Sized>(
    rays: &[Ray],
    samples: usize,
    depths: Option<&[f64]>,
    guide: &DepthGuidedConfig,
    rng: &mut G,
) -> Result<Vec<Vec<f64>>> {
    rays.iter()
        .enumerate()
        .map(|(i, r)| match depths {
            Some(d) => depth_guided_sample(
                d[i],
                guide.window_fraction * (r.t_far - r.t_near),
                samples,
                r.t_near,
                r.t_far,
                guide.uniform_fraction,
                rng,
            ),
            None => Ok(stratified_sample(r.t_near, r.t_far, samples, rng)),
        })
        .collect()
}

fn ray_batch(rays: &[Ray], ts: &[Vec<f64>]) -> Result<SampleBatch> {
    let mut batch = SampleBatch::new(3, 3);
    for (r, t) in rays.iter().zip(ts) {
        batch.push_ray(r, t)?;
    }
    Ok(batch)
}

fn check_finite(iteration: usize, what: &str, v: f64) -> Result<()> {
    if !v.is_finite() {
        return Err(HaloError::Diverged { iteration, what: what.into() });
    }
    Ok(())
}

fn check_grads(iteration: usize, grads: &ParamSet<f32>) -> Result<()> {
    if !grads.all_finite() {
        return Err(HaloError::Diverged { iteration, what: "gradient".into() });
    }
    Ok(())
}

/// Random rays with low-frequency depth and occupancy. Depths are stored
/// relative to each ray's sphere entry point.
#[derive(Clone, Debug)]
pub struct RayPool {
    pub rays: Vec<Ray>,
    /// Canonical `(o, d)` coordinates, six per ray.
    pub coords: Vec<f64>,
    pub depth: Vec<f64>,
    pub acc: Vec<f64>,
}

impl RayPool {
    pub fn len(&self) -> usize {
        self.rays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rays.is_empty()
    }

    /// Rays whose low-frequency occupancy is below `tau`.
    pub fn empty_indices(&self, tau: f64) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.acc[i] < tau).collect()
    }
}

/// Draws `size` rays: half are training pixel rays, half start on the
/// bounding sphere and aim at a uniform point of the box `[-h, h]^3` with
/// `h = (far - near) / 2`.
pub fn sample_pool_rays(pixels: &PixelRays, bounds: &SceneBounds, size: usize, seed: u64) -> Result<Vec<Ray>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 0.5 * (bounds.far - bounds.near);
    let mut rays = Vec::with_capacity(size);
    for i in 0..size {
        if i % 2 == 0 {
            rays.push(pixels.rays[rng.random_range(0..pixels.len())]);
        } else {
            let origin = loop {
                let v = Vector3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                );
                let n = v.norm();
                if n > 1e-3 && n <= 1.0 {
                    break v / n * bounds.radius;
                }
            };
            let target = Vector3::new(rng.random_range(-h..h), rng.random_range(-h..h), rng.random_range(-h..h));
            rays.push(Ray::new(origin, target - origin, bounds.near, bounds.far)?);
        }
    }
    Ok(rays)
}

/// Depth and occupancy of each ray under `field`, with midpoint samples.
pub fn render_depths(field: &PointField<f32>, rays: &[Ray], samples: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let renderer = VolumeRenderer {
        background: None,
        ..Default::default()
    };
    let mut depth = Vec::with_capacity(rays.len());
    let mut acc = Vec::with_capacity(rays.len());
    for chunk in rays.chunks(EVAL_CHUNK) {
        let ts: Vec<Vec<f64>> = chunk.iter().map(|r| midpoint_sample(r.t_near, r.t_far, samples)).collect();
        for r in renderer.render(field, &ray_batch(chunk, &ts)?)? {
            depth.push(r.depth);
            acc.push(r.acc);
        }
    }
    Ok((depth, acc))
}

pub fn build_ray_pool(lo: &PointField<f32>, rays: Vec<Ray>, bounds: &SceneBounds, samples: usize) -> Result<RayPool> {
    let (depth, acc) = render_depths(lo, &rays, samples)?;
    let mut coords = Vec::with_capacity(rays.len() * 6);
    let mut canon = Vec::with_capacity(rays.len());
    for (r, d) in rays.iter().zip(&depth) {
        let (c, shift) = r.canonicalize(bounds.radius)?;
        let o = c.origin;
        let dir = c.direction;
        coords.extend_from_slice(&[o.x, o.y, o.z, dir.x, dir.y, dir.z]);
        canon.push(d - shift);
    }
    Ok(RayPool { rays, coords, depth: canon, acc })
}

/// Mean absolute depth error of `field` over pool rays with occupancy at
/// least `tau`, and the number of such rays.
pub fn heldout_depth_mae(field: &RayField<f32>, pool: &RayPool, tau: f64) -> (f64, usize) {
    let pred = field.predict(&pool.coords);
    let (sum, n) = pred
        .iter()
        .zip(&pool.depth)
        .zip(&pool.acc)
        .filter(|(_, &a)| a >= tau)
        .fold((0.0, 0usize), |(s, n), ((p, d), _)| (s + (p - d).abs(), n + 1));
    (if n == 0 { f64::NAN } else { sum / n as f64 }, n)
}

/// Mean occupancy of `field` on the pool rays that are empty under the
/// pool's own occupancy, with midpoint samples.
pub fn empty_ray_occupancy(field: &PointField<f32>, pool: &RayPool, tau: f64, samples: usize) -> Result<(f64, usize)> {
    let idx = pool.empty_indices(tau);
    if idx.is_empty() {
        return Ok((0.0, 0));
    }
    let rays: Vec<Ray> = idx.iter().map(|&i| pool.rays[i]).collect();
    let (_, acc) = render_depths(field, &rays, samples)?;
    Ok((acc.iter().sum::<f64>() / acc.len() as f64, acc.len()))
}

/// Extra inputs for the high-frequency stage.
pub struct HiGuidance<'a> {
    pub ray_field: Option<&'a RayField<f32>>,
    /// Rays with low-frequency occupancy for the empty-space term.
    pub empty_pool: Option<&'a RayPool>,
}

/// Trains a point field on pixel rays until `state.iteration == until`.
///
/// Low-frequency training passes `guidance = None`. With guidance, samples
/// follow the ray field's depth and the empty-space term is added.
pub fn train_point_field(
    stage: &str,
    pixels: &PixelRays,
    cfg: &StageConfig,
    guidance: Option<&HiGuidance>,
    state: &mut PointState,
    until: usize,
    log: Logger,
) -> Result<()> {
    cfg.validate()?;
    let renderer = VolumeRenderer::default();
    let ray_field = guidance.and_then(|g| g.ray_field).filter(|_| cfg.guide.uniform_fraction < 1.0);
    if guidance.is_some() && ray_field.is_none() && cfg.guide.uniform_fraction < 1.0 {
        return Err(HaloError::InvalidInput("depth-guided sampling needs a ray field".into()));
    }
    let empty_pool = guidance.and_then(|g| g.empty_pool).filter(|_| cfg.weights.lambda_empty > 0.0);
    let until = until.min(cfg.iterations);
    let mut window = (0.0, 0.0, 0usize);
    while state.iteration < until {
        let it = state.iteration;
        let mut rng = step_rng(cfg.seed, it);
        let idx: Vec<usize> = (0..cfg.batch_size).map(|_| rng.random_range(0..pixels.len())).collect();
        let rays: Vec<Ray> = idx.iter().map(|&i| pixels.rays[i]).collect();
        let gt: Vec<[f64; 3]> = idx.iter().map(|&i| pixels.colors[i]).collect();
        let depths = ray_field.map(|f| guided_depths(f, &rays)).transpose()?;
        let ts = sample_positions(&rays, cfg.samples_per_ray, depths.as_deref(), &cfg.guide, &mut rng)?;
        let batch = ray_batch(&rays, &ts)?;
        let (results, tape) = renderer.forward(&state.field, &batch)?;
        let pred: Vec<[f64; 3]> = results.iter().map(|r| r.rgb).collect();
        let rec = loss_reconstruction(&pred, &gt)?;
        check_finite(it, "reconstruction loss", rec.value)?;
        let outs: Vec<RenderGradOut> = rec
            .grad
            .iter()
            .map(|&rgb| RenderGradOut { rgb, ..Default::default() })
            .collect();
        let mut grads = renderer.backward(&state.field, &batch, &tape, &results, &outs)?;
        drop(tape);

        let mut empty_value = 0.0;
        if let Some(pool) = empty_pool {
            let picks: Vec<usize> = (0..cfg.empty_batch_size).map(|_| rng.random_range(0..pool.len())).collect();
            let lo_acc: Vec<f64> = picks.iter().map(|&i| pool.acc[i]).collect();
            let gated: Vec<usize> = (0..picks.len()).filter(|&j| lo_acc[j] < cfg.weights.tau).collect();
            if !gated.is_empty() {
                let erays: Vec<Ray> = gated.iter().map(|&j| pool.rays[picks[j]]).collect();
                let ets = sample_positions(&erays, cfg.samples_per_ray, None, &cfg.guide, &mut rng)?;
                let ebatch = ray_batch(&erays, &ets)?;
                let (eres, etape) = renderer.forward(&state.field, &ebatch)?;
                let mut hi_acc = vec![0.0; picks.len()];
                for (k, &j) in gated.iter().enumerate() {
                    hi_acc[j] = eres[k].acc;
                }
                let loss = loss_empty(&hi_acc, &lo_acc, cfg.weights.tau)?;
                check_finite(it, "empty-space loss", loss.value)?;
                empty_value = loss.value;
                let eouts: Vec<RenderGradOut> = gated
                    .iter()
                    .map(|&j| RenderGradOut {
                        acc: cfg.weights.lambda_empty * loss.grad[j],
                        ..Default::default()
                    })
                    .collect();
                grads.add_assign(&renderer.backward(&state.field, &ebatch, &etape, &eres, &eouts)?);
            }
        }
        check_grads(it, &grads)?;
        let lr = cfg.lr.at(it, cfg.iterations);
        state.adam.update(&mut state.field.params, &grads, lr);
        state.iteration += 1;

        window.0 += rec.value;
        window.1 += empty_value;
        window.2 += 1;
        if state.iteration % cfg.log_every.max(1) == 0 || state.iteration == until {
            let n = window.2 as f64;
            let mut losses = BTreeMap::from([("reconstruction".to_string(), window.0 / n)]);
            if empty_pool.is_some() {
                losses.insert("empty".into(), window.1 / n);
                losses.insert("total".into(), (window.0 + cfg.weights.lambda_empty * window.1) / n);
            }
            log(&LogRecord {
                stage: stage.into(),
                iteration: state.iteration,
                lr,
                losses,
            });
            window = (0.0, 0.0, 0);
        }
    }
    Ok(())
}

/// Distills pool depths into a ray field until `state.iteration == until`.
pub fn train_ray_field(pool: &RayPool, cfg: &RayStageConfig, state: &mut RayState, until: usize, log: Logger) -> Result<()> {
    if pool.is_empty() {
        return Err(HaloError::InvalidInput("empty ray pool".into()));
    }
    let until = until.min(cfg.iterations);
    let mut window = (0.0, 0usize, 0usize);
    while state.iteration < until {
        let it = state.iteration;
        let mut rng = step_rng(cfg.seed, it);
        let idx: Vec<usize> = (0..cfg.batch_size).map(|_| rng.random_range(0..pool.len())).collect();
        let mut coords = Vec::with_capacity(idx.len() * 6);
        for &i in &idx {
            coords.extend_from_slice(&pool.coords[6 * i..6 * i + 6]);
        }
        let depth: Vec<f64> = idx.iter().map(|&i| pool.depth[i]).collect();
        let acc: Vec<f64> = idx.iter().map(|&i| pool.acc[i]).collect();
        let (pred, tape) = state.field.forward(&coords);
        let loss = loss_ray_distill(&pred, &depth, &acc, cfg.tau)?;
        check_finite(it, "distillation loss", loss.value)?;
        let grads = state.field.backward(&tape, &loss.grad);
        check_grads(it, &grads)?;
        let lr = cfg.lr.at(it, cfg.iterations);
        state.adam.update(&mut state.field.params, &grads, lr);
        state.iteration += 1;

        window.0 += loss.value * loss.kept as f64;
        window.1 += loss.kept;
        window.2 += 1;
        if state.iteration % cfg.log_every.max(1) == 0 || state.iteration == until {
            let mean = if window.1 == 0 { 0.0 } else { window.0 / window.1 as f64 };
            log(&LogRecord {
                stage: "ray".into(),
                iteration: state.iteration,
                lr,
                losses: BTreeMap::from([
                    ("distill".to_string(), mean),
                    ("kept_fraction".to_string(), window.1 as f64 / (window.2 * cfg.batch_size) as f64),
                ]),
            });
            window = (0.0, 0, 0);
        }
    }
    Ok(())
}
