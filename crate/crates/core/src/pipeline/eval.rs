use nalgebra::Matrix4;
use serde::{Deserialize, Serialize};

use super::train::{guided_depths, sample_positions, EVAL_CHUNK};
use crate::data::{DepthChannel, DepthMap, PosedImageSet};
use crate::error::Result;
use crate::fields::{PointField, RayField, SceneBounds};
use crate::metrics::{psnr, ssim};
use crate::raster::Image;
use crate::rendering::{generate_rays, DepthGuidedConfig, FixedJitter, Intrinsics, SampleBatch, VolumeRenderer};

/// How samples are placed when rendering full images.
#[derive(Clone, Copy)]
pub struct RenderSettings<'a> {
    pub samples: usize,
    pub guide: Option<(&'a RayField<f32>, DepthGuidedConfig)>,
}

/// Renders one view with bin-midpoint samples. Returns the image and a
/// depth map with depth and occupancy channels.
pub fn render_view(
    field: &PointField<f32>,
    pose: &Matrix4<f64>,
    intr: &Intrinsics,
    bounds: &SceneBounds,
    settings: RenderSettings,
) -> Result<(Image, DepthMap)> {
    let rays = generate_rays(pose, intr, bounds.near, bounds.far)?;
    let renderer = VolumeRenderer::default();
    let mut rgb = Vec::with_capacity(rays.len() * 3);
    let mut depth = Vec::with_capacity(rays.len() * 2);
    let default_guide = DepthGuidedConfig {
        uniform_fraction: 1.0,
        ..Default::default()
    };
    for chunk in rays.chunks(EVAL_CHUNK) {
        let (depths, guide) = match settings.guide {
            Some((rf, g)) => (Some(guided_depths(rf, chunk)?), g),
            None => (None, default_guide),
        };
        let ts = sample_positions(chunk, settings.samples, depths.as_deref(), &guide, &mut FixedJitter)?;
        let mut batch = SampleBatch::new(3, 3);
        for (r, t) in chunk.iter().zip(&ts) {
            batch.push_ray(r, t)?;
        }
        for r in renderer.render(field, &batch)? {
            rgb.extend(r.rgb.iter().map(|v| v.clamp(0.0, 1.0)));
            depth.extend_from_slice(&[r.depth as f32, r.acc as f32]);
        }
    }
    Ok((
        Image::new(intr.width, intr.height, 3, rgb)?,
        DepthMap {
            width: intr.width,
            height: intr.height,
            channels: vec![DepthChannel::Depth, DepthChannel::Acc],
            data: depth,
        },
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViewScore {
    pub name: String,
    pub psnr: f64,
    pub ssim: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SetScore {
    pub mean_psnr: f64,
    pub mean_ssim: f64,
    pub views: Vec<ViewScore>,
}

impl SetScore {
    pub fn from_views(views: Vec<ViewScore>) -> Self {
        let n = views.len().max(1) as f64;
        Self {
            mean_psnr: views.iter().map(|v| v.psnr).sum::<f64>() / n,
            mean_ssim: views.iter().map(|v| v.ssim).sum::<f64>() / n,
            views,
        }
    }
}

pub fn score_pair(name: &str, pred: &Image, gt: &Image) -> Result<ViewScore> {
    Ok(ViewScore {
        name: name.into(),
        psnr: psnr(pred, gt, 1.0)?,
        ssim: ssim(pred, gt)?,
    })
}

/// Renders every view of `set` and scores it against the ground truth.
/// The renders are returned alongside the scores.
pub fn evaluate_set(
    field: &PointField<f32>,
    set: &PosedImageSet,
    settings: RenderSettings,
) -> Result<(SetScore, Vec<(Image, DepthMap)>)> {
    let intr = set.intrinsics();
    let mut views = Vec::with_capacity(set.len());
    let mut renders = Vec::with_capacity(set.len());
    for i in 0..set.len() {
        let (img, depth) = render_view(field, &set.poses[i], &intr, &set.bounds, settings)?;
        views.push(score_pair(&set.names[i], &img, &set.images[i])?);
        renders.push((img, depth));
    }
    Ok((SetScore::from_views(views), renders))
}
