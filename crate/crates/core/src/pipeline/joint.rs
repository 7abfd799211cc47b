use std::collections::BTreeMap;

use rand::Rng;

use super::config::JointConfig;
use super::train::{step_rng, LogRecord, Logger, TrainState};
use crate::data::{pixel_coordinate, LightFieldView};
use crate::error::{HaloError, Result};
use crate::fields::{PointField, RayField, SceneBounds};
use crate::losses::{loss_consist, loss_reconstruction};
use crate::nn::Adam;
use crate::raster::Image;
use crate::rendering::{epi_theta_sample, FixedJitter, RenderGradOut, SampleBatch, VolumeRenderer};

/// Reference camera the point coordinates are aligned to.
pub const REFERENCE_CAMERA: (f64, f64) = (0.0, 0.0);

/// Two-plane training rays `(u, v, s, t)` with their colors.
#[derive(Clone, Debug)]
pub struct LightFieldRays {
    pub uvst: Vec<[f64; 4]>,
    pub colors: Vec<[f64; 3]>,
}

impl LightFieldRays {
    pub fn from_views(views: &[&LightFieldView]) -> Result<Self> {
        let mut uvst = Vec::new();
        let mut colors = Vec::new();
        for v in views {
            let img = &v.image;
            for y in 0..img.height {
                for x in 0..img.width {
                    uvst.push([v.u, v.v, pixel_coordinate(x, img.width), pixel_coordinate(y, img.height)]);
                    colors.push(img.pixel_rgb(x, y));
                }
            }
        }
        if uvst.is_empty() {
            return Err(HaloError::InvalidInput("no light-field training views".into()));
        }
        Ok(Self { uvst, colors })
    }

    pub fn len(&self) -> usize {
        self.uvst.len()
    }

    pub fn is_empty(&self) -> bool {
        self.uvst.is_empty()
    }
}

/// Jointly trained point field over aligned EPI points and ray field over
/// two-plane rays.
#[derive(Clone, Debug)]
pub struct JointState {
    pub point: TrainState<PointField<f32>>,
    pub ray: TrainState<RayField<f32>>,
}

impl JointState {
    pub fn fresh(cfg: &JointConfig, theta_range: (f64, f64)) -> Result<Self> {
        let point = PointField::init(cfg.point_arch(), cfg.seed)?;
        let ray = RayField::init(cfg.ray_arch(), lightfield_bounds(theta_range)?, cfg.seed + 1)?;
        Ok(Self {
            point: TrainState {
                adam: Adam::new(&point.params),
                field: point,
                iteration: 0,
            },
            ray: TrainState {
                adam: Adam::new(&ray.params),
                field: ray,
                iteration: 0,
            },
        })
    }
}

/// Bounds carrying only a slope-angle range; the Euclidean entries are
/// placeholders that keep the bounds valid.
pub fn lightfield_bounds(theta_range: (f64, f64)) -> Result<SceneBounds> {
    let bounds = SceneBounds {
        near: theta_range.0,
        far: theta_range.1,
        radius: 1.0,
        theta: Some(theta_range),
    };
    bounds.validate()?;
    Ok(bounds)
}

/// Upper end of the clipped sampling window, used as the last interval end.
fn window_end(theta_ray: f64, alpha: f64, (lo, hi): (f64, f64)) -> f64 {
    (theta_ray.clamp(lo, hi) + alpha.max(0.0) * (hi - lo)).min(hi)
}

fn epi_batch<G: Rng + ?Sized>(
    uvst: &[[f64; 4]],
    theta_ray: &[f64],
    alpha: f64,
    range: (f64, f64),
    samples: usize,
    rng: &mut G,
) -> Result<SampleBatch> {
    let mut batch = SampleBatch::new(3, 2);
    for (r, &th) in uvst.iter().zip(theta_ray) {
        let thetas = epi_theta_sample(th, alpha, range.0, range.1, samples, rng);
        batch.push_epi(*r, &thetas, window_end(th, alpha, range), REFERENCE_CAMERA)?;
    }
    Ok(batch)
}

fn renderer() -> VolumeRenderer {
    VolumeRenderer {
        background: None,
        ..Default::default()
    }
}

/// Runs joint training until `state.point.iteration == until`.
pub fn train_joint(rays: &LightFieldRays, cfg: &JointConfig, state: &mut JointState, until: usize, log: Logger) -> Result<()> {
    cfg.validate()?;
    let range = state.ray.field.bounds.theta_range()?;
    let renderer = renderer();
    let until = until.min(cfg.iterations);
    let mut window = (0.0, 0.0, 0usize);
    while state.point.iteration < until {
        let it = state.point.iteration;
        let mut rng = step_rng(cfg.seed, it);
        let idx: Vec<usize> = (0..cfg.batch_size).map(|_| rng.random_range(0..rays.len())).collect();
        let uvst: Vec<[f64; 4]> = idx.iter().map(|&i| rays.uvst[i]).collect();
        let gt: Vec<[f64; 3]> = idx.iter().map(|&i| rays.colors[i]).collect();
        let coords: Vec<f64> = uvst.iter().flatten().copied().collect();
        let (theta_ray, ray_tape) = state.ray.field.forward(&coords);
        let alpha = cfg.alpha(it);
        let batch = epi_batch(&uvst, &theta_ray, alpha, range, cfg.samples_per_ray, &mut rng)?;
        let (results, tape) = renderer.forward(&state.point.field, &batch)?;
        let pred: Vec<[f64; 3]> = results.iter().map(|r| r.rgb).collect();
        let rec = loss_reconstruction(&pred, &gt)?;
        if !rec.value.is_finite() {
            return Err(HaloError::Diverged { iteration: it, what: "reconstruction loss".into() });
        }
        let outs: Vec<RenderGradOut> = rec.grad.iter().map(|&rgb| RenderGradOut { rgb, ..Default::default() }).collect();
        let grads = renderer.backward(&state.point.field, &batch, &tape, &results, &outs)?;
        if !grads.all_finite() {
            return Err(HaloError::Diverged { iteration: it, what: "point-field gradient".into() });
        }
        let lr = cfg.lr.at(it, cfg.iterations);
        state.point.adam.update(&mut state.point.field.params, &grads, lr);
        state.point.iteration += 1;

        let mut consist_value = 0.0;
        if cfg.lambda_consist > 0.0 {
            let target: Vec<f64> = results.iter().map(|r| r.depth).collect();
            let consist = loss_consist(&theta_ray, &target)?;
            consist_value = consist.value;
            let d_out: Vec<f64> = consist.grad.iter().map(|g| cfg.lambda_consist * g).collect();
            let rgrads = state.ray.field.backward(&ray_tape, &d_out);
            if !rgrads.all_finite() {
                return Err(HaloError::Diverged { iteration: it, what: "ray-field gradient".into() });
            }
            state.ray.adam.update(&mut state.ray.field.params, &rgrads, lr);
        }
        state.ray.iteration = state.point.iteration;

        window.0 += rec.value;
        window.1 += consist_value;
        window.2 += 1;
        if state.point.iteration % cfg.log_every.max(1) == 0 || state.point.iteration == until {
            let n = window.2 as f64;
            log(&LogRecord {
                stage: "joint".into(),
                iteration: state.point.iteration,
                lr,
                losses: BTreeMap::from([
                    ("reconstruction".to_string(), window.0 / n),
                    ("consistency".to_string(), window.1 / n),
                    ("alpha".to_string(), alpha),
                ]),
            });
            window = (0.0, 0.0, 0);
        }
    }
    Ok(())
}

/// Renders camera `(u, v)` with midpoint samples inside the window the
/// schedule reached by `iteration`.
pub fn render_lightfield_view(
    state: &JointState,
    cfg: &JointConfig,
    u: f64,
    v: f64,
    width: usize,
    height: usize,
) -> Result<Image> {
    let range = state.ray.field.bounds.theta_range()?;
    let alpha = cfg.alpha(state.point.iteration);
    let renderer = renderer();
    let mut data = Vec::with_capacity(width * height * 3);
    for y in 0..height {
        let uvst: Vec<[f64; 4]> = (0..width)
            .map(|x| [u, v, pixel_coordinate(x, width), pixel_coordinate(y, height)])
            .collect();
        let coords: Vec<f64> = uvst.iter().flatten().copied().collect();
        let theta_ray = state.ray.field.predict(&coords);
        let batch = epi_batch(&uvst, &theta_ray, alpha, range, cfg.samples_per_ray, &mut FixedJitter)?;
        for r in renderer.render(&state.point.field, &batch)? {
            data.extend(r.rgb.iter().map(|c| c.clamp(0.0, 1.0)));
        }
    }
    Image::new(width, height, 3, data)
}
