//! Few-shot view synthesis with frequency-tuned radiance fields, ray-field
//! depth distillation, and depth-guided sampling.

pub mod data;
pub mod encoding;
pub mod error;
pub mod fields;
pub mod nn;
pub mod pipeline;
pub mod real;
pub mod freq_tuning;
pub mod losses;
pub mod metrics;
pub mod raster;
pub mod rendering;
pub mod toy2d;

pub use error::{HaloError, Result};
pub use fields::{PointField, PointFieldArch, RayField, RayFieldArch, RayParameterization, SceneBounds};
pub use real::Real;

pub use nalgebra;
