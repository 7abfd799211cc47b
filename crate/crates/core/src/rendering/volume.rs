use std::ops::Range;

use ndarray::{Array1, Array2};
use rand::Rng;
use rayon::prelude::*;

use super::camera::Ray;
use super::composite::{composite_backward, composite_unchecked, RenderGradOut, RenderResult};
use super::sampling::Sampler;
use crate::encoding::epi_align;
use crate::error::{HaloError, Result};
use crate::fields::{PointField, PointTape};
use crate::nn::ParamSet;
use crate::real::Real;

/// Sample positions and field inputs for a batch of rays, stored flat.
#[derive(Clone, Debug, Default)]
pub struct SampleBatch {
    pub point_dim: usize,
    pub view_dim: usize,
    offsets: Vec<usize>,
    pub ts: Vec<f64>,
    pub t_far: Vec<f64>,
    pub points: Vec<f64>,
    pub views: Vec<f64>,
}

impl SampleBatch {
    pub fn new(point_dim: usize, view_dim: usize) -> Self {
        Self {
            point_dim,
            view_dim,
            offsets: vec![0],
            ..Default::default()
        }
    }

    fn check_ts(ts: &[f64], t_far: f64) -> Result<()> {
        if ts.is_empty() {
            return Err(HaloError::InvalidInput("ray needs at least one sample".into()));
        }
        if ts.windows(2).any(|w| !(w[1] >= w[0])) || !(t_far >= ts[ts.len() - 1]) {
            return Err(HaloError::InvalidInput("sample positions must be sorted and end before t_far".into()));
        }
        Ok(())
    }

    /// Adds a Euclidean ray; points are `o + t d`, views the direction.
    pub fn push_ray(&mut self, ray: &Ray, ts: &[f64]) -> Result<()> {
        if self.point_dim != 3 || self.view_dim != 3 {
            return Err(HaloError::shape("3D points and views", format!("{}D/{}D", self.point_dim, self.view_dim)));
        }
        Self::check_ts(ts, ray.t_far)?;
        let d = ray.direction;
        for &t in ts {
            let p = ray.at(t);
            self.points.extend_from_slice(&[p.x, p.y, p.z]);
            self.views.extend_from_slice(&[d.x, d.y, d.z]);
        }
        self.finish(ts, ray.t_far);
        Ok(())
    }

    /// Adds a two-plane ray `(u, v, s, t)` sampled at slope angles `thetas`;
    /// points are aligned to the reference camera `(u*, v*)` and views are
    /// `(u, v)`.
    pub fn push_epi(&mut self, uvst: [f64; 4], thetas: &[f64], theta_far: f64, reference: (f64, f64)) -> Result<()> {
        if self.point_dim != 3 || self.view_dim != 2 {
            return Err(HaloError::shape("3D points and 2D views", format!("{}D/{}D", self.point_dim, self.view_dim)));
        }
        Self::check_ts(thetas, theta_far)?;
        let [u, v, s, t] = uvst;
        for &theta in thetas {
            let p = epi_align(u, v, s, t, theta, reference.0, reference.1)?;
            self.points.extend_from_slice(&[p.s_prime, p.t_prime, p.theta]);
            self.views.extend_from_slice(&[u, v]);
        }
        self.finish(thetas, theta_far);
        Ok(())
    }

    fn finish(&mut self, ts: &[f64], t_far: f64) {
        self.ts.extend_from_slice(ts);
        self.t_far.push(t_far);
        self.offsets.push(self.ts.len());
    }

    pub fn num_rays(&self) -> usize {
        self.t_far.len()
    }

    pub fn num_samples(&self) -> usize {
        self.ts.len()
    }

    pub fn samples_of(&self, ray: usize) -> Range<usize> {
        self.offsets[ray]..self.offsets[ray + 1]
    }

    fn sample_span(&self, rays: &Range<usize>) -> Range<usize> {
        self.offsets[rays.start]..self.offsets[rays.end]
    }
}

struct ChunkTape<R: Real> {
    rays: Range<usize>,
    field: PointTape<R>,
    sigma: Vec<f64>,
    rgb: Vec<[f64; 3]>,
}

/// Activations kept between [`VolumeRenderer::forward`] and
/// [`VolumeRenderer::backward`].
pub struct Tape<R: Real> {
    chunks: Vec<ChunkTape<R>>,
}

/// Batched field evaluation plus compositing.
#[derive(Clone, Copy, Debug)]
pub struct VolumeRenderer {
    pub background: Option<[f64; 3]>,
    /// Rays per parallel work unit. Fixed so reductions are reproducible.
    pub chunk_rays: usize,
}

impl Default for VolumeRenderer {
    fn default() -> Self {
        Self {
            background: Some([1.0; 3]),
            chunk_rays: 64,
        }
    }
}

fn chunks(n: usize, size: usize) -> Vec<Range<usize>> {
    let size = size.max(1);
    (0..n.div_ceil(size)).map(|i| i * size..((i + 1) * size).min(n)).collect()
}

impl VolumeRenderer {
    fn eval_chunk<R: Real>(
        &self,
        field: &PointField<R>,
        batch: &SampleBatch,
        rays: Range<usize>,
    ) -> (Vec<RenderResult>, ChunkTape<R>) {
        let span = batch.sample_span(&rays);
        let ep = field.encode_points(&batch.points[span.start * batch.point_dim..span.end * batch.point_dim]);
        let ed = field.encode_views(&batch.views[span.start * batch.view_dim..span.end * batch.view_dim]);
        let (out, tape) = field.forward(&ep, &ed);
        let sigma: Vec<f64> = out.sigma.iter().map(|v| v.f64()).collect();
        let rgb: Vec<[f64; 3]> = out
            .rgb
            .rows()
            .into_iter()
            .map(|r| [r[0].f64(), r[1].f64(), r[2].f64()])
            .collect();
        let results = rays
            .clone()
            .map(|i| {
                let r = batch.samples_of(i);
                let local = r.start - span.start..r.end - span.start;
                composite_unchecked(&sigma[local.clone()], &rgb[local], &batch.ts[r], batch.t_far[i], self.background)
            })
            .collect();
        (
            results,
            ChunkTape {
                rays,
                field: tape,
                sigma,
                rgb,
            },
        )
    }

    fn check<R: Real>(&self, field: &PointField<R>, batch: &SampleBatch) -> Result<()> {
        if batch.point_dim != field.arch.point_dim || batch.view_dim != field.arch.view_dim {
            return Err(HaloError::shape(
                format!("{}D points, {}D views", field.arch.point_dim, field.arch.view_dim),
                format!("{}D points, {}D views", batch.point_dim, batch.view_dim),
            ));
        }
        Ok(())
    }

    /// Forward pass keeping activations for a later backward pass.
    pub fn forward<R: Real>(&self, field: &PointField<R>, batch: &SampleBatch) -> Result<(Vec<RenderResult>, Tape<R>)> {
        self.check(field, batch)?;
        let parts: Vec<_> = chunks(batch.num_rays(), self.chunk_rays)
            .into_par_iter()
            .map(|r| self.eval_chunk(field, batch, r))
            .collect();
        let mut results = Vec::with_capacity(batch.num_rays());
        let mut tapes = Vec::with_capacity(parts.len());
        for (r, t) in parts {
            results.extend(r);
            tapes.push(t);
        }
        Ok((results, Tape { chunks: tapes }))
    }

    /// Forward pass without keeping activations.
    pub fn render<R: Real>(&self, field: &PointField<R>, batch: &SampleBatch) -> Result<Vec<RenderResult>> {
        self.check(field, batch)?;
        let parts: Vec<Vec<RenderResult>> = chunks(batch.num_rays(), self.chunk_rays)
            .into_par_iter()
            .map(|r| self.eval_chunk(field, batch, r).0)
            .collect();
        Ok(parts.into_iter().flatten().collect())
    }

    /// Parameter gradients given per-ray upstream gradients. Chunk
    /// gradients are summed in chunk order.
    pub fn backward<R: Real>(
        &self,
        field: &PointField<R>,
        batch: &SampleBatch,
        tape: &Tape<R>,
        results: &[RenderResult],
        grads: &[RenderGradOut],
    ) -> Result<ParamSet<R>> {
        if results.len() != batch.num_rays() || grads.len() != batch.num_rays() {
            return Err(HaloError::shape(
                format!("{} results and gradients", batch.num_rays()),
                format!("{} and {}", results.len(), grads.len()),
            ));
        }
        let parts: Vec<ParamSet<R>> = tape
            .chunks
            .par_iter()
            .map(|chunk| {
                let span = batch.sample_span(&chunk.rays);
                let n = span.len();
                let mut d_sigma = Array1::<R>::zeros(n);
                let mut d_rgb = Array2::<R>::zeros((n, 3));
                for i in chunk.rays.clone() {
                    let g = &grads[i];
                    if g.rgb == [0.0; 3] && g.acc == 0.0 && g.depth == 0.0 {
                        continue;
                    }
                    let r = batch.samples_of(i);
                    let local = r.start - span.start..r.end - span.start;
                    let cg = composite_backward(
                        &chunk.sigma[local.clone()],
                        &chunk.rgb[local.clone()],
                        &batch.ts[r],
                        batch.t_far[i],
                        self.background,
                        &results[i],
                        g,
                    );
                    for (k, j) in local.enumerate() {
                        d_sigma[j] = R::of(cg.sigma[k]);
                        for ch in 0..3 {
                            d_rgb[(j, ch)] = R::of(cg.color[k][ch]);
                        }
                    }
                }
                field.backward(&chunk.field, &d_sigma, &d_rgb, false).0
            })
            .collect();
        let mut total = field.params.zeros_like();
        for p in &parts {
            total.add_assign(p);
        }
        Ok(total)
    }
}

/// Expected depth and accumulated occupancy of a single ray.
pub fn render_depth<R: Real, G: Rng + ?Sized>(
    field: &PointField<R>,
    ray: &Ray,
    sampler: &Sampler,
    rng: &mut G,
) -> Result<(f64, f64)> {
    let ts = sampler.sample(ray.t_near, ray.t_far, rng);
    let mut batch = SampleBatch::new(3, 3);
    batch.push_ray(ray, &ts)?;
    let r = VolumeRenderer {
        background: None,
        chunk_rays: 1,
    }
    .render(field, &batch)?;
    Ok((r[0].depth, r[0].acc))
}
