//! Rays, samplers, and the volume-rendering quadrature.

mod camera;
mod composite;
mod sampling;
mod volume;

pub use camera::{check_rigid, generate_rays, pixel_ray, Intrinsics, Ray};
pub use composite::{composite, composite_backward, CompositeGrad, RenderGradOut, RenderResult, DEPTH_EPS};
pub use sampling::{
    depth_guided_sample, epi_theta_sample, midpoint_sample, stratified_sample, DepthGuidedConfig, FixedJitter,
    Sampler,
};
pub use volume::{render_depth, SampleBatch, Tape, VolumeRenderer};
