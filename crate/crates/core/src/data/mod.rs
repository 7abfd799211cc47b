//! Datasets: Blender-style posed images, two-plane light-field grids,
//! procedural oracle scenes, and image I/O.

mod blender;
mod io;
mod lightfield;
mod procedural;

pub use blender::{load_blender, write_blender};
pub use io::{read_depth, read_png, write_depth, write_png, DepthChannel, DepthMap};
pub use lightfield::{
    grid_coordinate, load_lightfield_grid, make_lightfield_scene, pixel_coordinate, write_lightfield_grid,
    LightFieldGrid, LightFieldSpec, LightFieldView,
};
pub use procedural::{look_at, make_procedural_scene, orbit_pose, Primitive, ProceduralScene, ProceduralSpec};

use nalgebra::Matrix4;

use crate::fields::SceneBounds;
use crate::raster::Image;
use crate::rendering::{generate_rays, Intrinsics, Ray};
use crate::error::Result;

/// Images with camera-to-world poses sharing one set of intrinsics.
#[derive(Clone, Debug, PartialEq)]
pub struct PosedImageSet {
    pub names: Vec<String>,
    pub images: Vec<Image>,
    pub poses: Vec<Matrix4<f64>>,
    pub camera_angle_x: f64,
    pub bounds: SceneBounds,
    pub split: String,
}

impl PosedImageSet {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// Image size as `(width, height)`; `(0, 0)` when empty.
    pub fn resolution(&self) -> (usize, usize) {
        self.images.first().map_or((0, 0), |i| (i.width, i.height))
    }

    pub fn intrinsics(&self) -> Intrinsics {
        let (w, h) = self.resolution();
        Intrinsics::from_camera_angle_x(w, h, self.camera_angle_x)
    }

    /// All rays of view `i`, row-major.
    pub fn rays(&self, i: usize) -> Result<Vec<Ray>> {
        generate_rays(&self.poses[i], &self.intrinsics(), self.bounds.near, self.bounds.far)
    }

    /// Distances of every camera centre from the origin.
    pub fn camera_distances(&self) -> impl Iterator<Item = f64> + '_ {
        self.poses.iter().map(|p| p.fixed_view::<3, 1>(0, 3).norm())
    }
}
