use nalgebra::{Matrix4, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::io::{DepthChannel, DepthMap};
use super::PosedImageSet;
use crate::error::{HaloError, Result};
use crate::fields::SceneBounds;
use crate::raster::Image;
use crate::rendering::{generate_rays, Intrinsics, Ray};

/// Analytic scene content.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Primitive {
    /// Checkerboard-textured sphere.
    Sphere { center: [f64; 3], radius: f64 },
    /// Checkerboard-textured square in the plane `z = height`.
    Plane { height: f64, half_size: f64 },
}

impl Default for Primitive {
    fn default() -> Self {
        Primitive::Sphere {
            center: [0.0; 3],
            radius: 1.0,
        }
    }
}

const COLOR_A: [f64; 3] = [0.85, 0.25, 0.15];
const COLOR_B: [f64; 3] = [0.15, 0.35, 0.8];

impl Primitive {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "sphere" => Ok(Self::default()),
            "plane" => Ok(Primitive::Plane {
                height: 0.0,
                half_size: 1.0,
            }),
            other => Err(HaloError::InvalidConfig(format!("unknown primitive '{other}'"))),
        }
    }

    /// Nearest hit along `ray` inside its bounds: distance, unit normal and
    /// checker parity.
    pub fn intersect(&self, ray: &Ray, cells: usize) -> Option<(f64, Vector3<f64>, bool)> {
        let cells = cells.max(1) as f64;
        match *self {
            Primitive::Sphere { center, radius } => {
                let c = Vector3::from(center);
                let oc = ray.origin - c;
                let b = oc.dot(&ray.direction);
                let disc = b * b - (oc.norm_squared() - radius * radius);
                if disc < 0.0 {
                    return None;
                }
                let sq = disc.sqrt();
                let t = [-b - sq, -b + sq]
                    .into_iter()
                    .find(|&t| t >= ray.t_near && t <= ray.t_far)?;
                let n = (ray.at(t) - c) / radius;
                let u = n.y.atan2(n.x) / std::f64::consts::TAU + 0.5;
                let v = n.z.clamp(-1.0, 1.0).acos() / std::f64::consts::PI;
                let parity = ((u * 2.0 * cells).floor() as i64 + (v * cells).floor() as i64) % 2 == 0;
                Some((t, n, parity))
            }
            Primitive::Plane { height, half_size } => {
                if ray.direction.z.abs() < 1e-12 {
                    return None;
                }
                let t = (height - ray.origin.z) / ray.direction.z;
                if !(t >= ray.t_near && t <= ray.t_far) {
                    return None;
                }
                let p = ray.at(t);
                if p.x.abs() > half_size || p.y.abs() > half_size {
                    return None;
                }
                let cell = |x: f64| ((x + half_size) / (2.0 * half_size) * cells).floor() as i64;
                let n = Vector3::new(0.0, 0.0, -ray.direction.z.signum());
                Some((t, n, (cell(p.x) + cell(p.y)) % 2 == 0))
            }
        }
    }

    /// Lambertian color under a fixed directional light.
    pub fn shade(normal: &Vector3<f64>, parity: bool) -> [f64; 3] {
        let light = Vector3::new(0.4, 0.3, 0.866).normalize();
        let lum = 0.35 + 0.65 * normal.dot(&light).max(0.0);
        let albedo = if parity { COLOR_A } else { COLOR_B };
        albedo.map(|a| a * lum)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProceduralSpec {
    pub primitive: Primitive,
    pub train_views: usize,
    pub test_views: usize,
    pub width: usize,
    pub height: usize,
    pub camera_angle_x: f64,
    pub camera_distance: f64,
    pub checker_cells: usize,
    pub near: f64,
    pub far: f64,
}

impl Default for ProceduralSpec {
    fn default() -> Self {
        Self {
            primitive: Primitive::default(),
            train_views: 4,
            test_views: 4,
            width: 100,
            height: 100,
            camera_angle_x: 0.6911,
            camera_distance: 4.0,
            checker_cells: 3,
            near: 2.0,
            far: 6.0,
        }
    }
}

/// Rendered training/test views with ground-truth depth.
#[derive(Clone, Debug)]
pub struct ProceduralScene {
    pub train: PosedImageSet,
    pub test: PosedImageSet,
    pub train_depth: Vec<DepthMap>,
    pub test_depth: Vec<DepthMap>,
}

/// Camera-to-world pose at `eye` looking at `target` with world `+z` up.
pub fn look_at(eye: Vector3<f64>, target: Vector3<f64>) -> Matrix4<f64> {
    let back = (eye - target).normalize();
    let up_hint = if back.cross(&Vector3::z()).norm() < 1e-9 {
        Vector3::y()
    } else {
        Vector3::z()
    };
    let right = up_hint.cross(&back).normalize();
    let up = back.cross(&right);
    let mut m = Matrix4::identity();
    for r in 0..3 {
        m[(r, 0)] = right[r];
        m[(r, 1)] = up[r];
        m[(r, 2)] = back[r];
        m[(r, 3)] = eye[r];
    }
    m
}

/// Pose on a sphere of `distance` around the origin, looking at it.
pub fn orbit_pose(azimuth: f64, elevation: f64, distance: f64) -> Matrix4<f64> {
    let eye = distance
        * Vector3::new(
            elevation.cos() * azimuth.cos(),
            elevation.cos() * azimuth.sin(),
            elevation.sin(),
        );
    look_at(eye, Vector3::zeros())
}

fn render_view(spec: &ProceduralSpec, pose: &Matrix4<f64>) -> Result<(Image, DepthMap)> {
    let intr = Intrinsics::from_camera_angle_x(spec.width, spec.height, spec.camera_angle_x);
    let rays = generate_rays(pose, &intr, spec.near, spec.far)?;
    let mut rgb = Vec::with_capacity(rays.len() * 3);
    let mut depth = Vec::with_capacity(rays.len() * 2);
    for ray in &rays {
        match spec.primitive.intersect(ray, spec.checker_cells) {
            Some((t, n, parity)) => {
                rgb.extend_from_slice(&Primitive::shade(&n, parity));
                depth.extend_from_slice(&[t as f32, 1.0]);
            }
            None => {
                rgb.extend_from_slice(&[1.0; 3]);
                depth.extend_from_slice(&[0.0, 0.0]);
            }
        }
    }
    Ok((
        Image::new(spec.width, spec.height, 3, rgb)?,
        DepthMap {
            width: spec.width,
            height: spec.height,
            channels: vec![DepthChannel::Depth, DepthChannel::Hit],
            data: depth,
        },
    ))
}

/// Renders the scene from an orbit of cameras. Training views are evenly
/// spread in azimuth from a seeded offset with alternating elevation; test
/// views sit halfway between them.
pub fn make_procedural_scene(spec: &ProceduralSpec, seed: u64) -> Result<ProceduralScene> {
    if spec.width == 0 || spec.height == 0 || spec.train_views == 0 {
        return Err(HaloError::InvalidConfig("procedural scene needs views and a nonzero resolution".into()));
    }
    if !(spec.near < spec.far && spec.camera_distance > 0.0) {
        return Err(HaloError::InvalidConfig("procedural scene bounds are inconsistent".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let offset = rng.random::<f64>() * std::f64::consts::TAU;
    let deg = std::f64::consts::PI / 180.0;
    let bounds = SceneBounds::from_camera_distances(spec.near, spec.far, [spec.camera_distance])?;
    let build = |split: &str, count: usize, shift: f64, elevation: &dyn Fn(usize) -> f64| -> Result<(PosedImageSet, Vec<DepthMap>)> {
        let mut set = PosedImageSet {
            names: Vec::new(),
            images: Vec::new(),
            poses: Vec::new(),
            camera_angle_x: spec.camera_angle_x,
            bounds,
            split: split.into(),
        };
        let mut depths = Vec::new();
        for i in 0..count {
            let az = offset + std::f64::consts::TAU * (i as f64 + shift) / count as f64;
            let pose = orbit_pose(az, elevation(i), spec.camera_distance);
            let (img, depth) = render_view(spec, &pose)?;
            set.names.push(format!("{split}_{i:03}.png"));
            set.images.push(img);
            set.poses.push(pose);
            depths.push(depth);
        }
        Ok((set, depths))
    };
    let (train, train_depth) = build("train", spec.train_views, 0.0, &|i| if i % 2 == 0 { 15.0 * deg } else { 35.0 * deg })?;
    let (test, test_depth) = build("test", spec.test_views, 0.5, &|_| 25.0 * deg)?;
    Ok(ProceduralScene {
        train,
        test,
        train_depth,
        test_depth,
    })
}
