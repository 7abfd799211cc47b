use nalgebra::{Matrix3, Matrix4, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{HaloError, Result};

/// A ray `o + t d` restricted to `[t_near, t_far]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ray {
    pub origin: Vector3<f64>,
    pub direction: Vector3<f64>,
    pub t_near: f64,
    pub t_far: f64,
}

impl Ray {
    /// Normalizes `direction`; rejects degenerate directions and empty intervals.
    pub fn new(origin: Vector3<f64>, direction: Vector3<f64>, t_near: f64, t_far: f64) -> Result<Self> {
        let norm = direction.norm();
        if !(norm.is_finite() && norm > 0.0) || !origin.iter().all(|v| v.is_finite()) {
            return Err(HaloError::InvalidInput(format!(
                "degenerate ray: origin {origin:?}, direction {direction:?}"
            )));
        }
        if !(t_near < t_far) {
            return Err(HaloError::InvalidInput(format!("ray bounds t_near={t_near} >= t_far={t_far}")));
        }
        Ok(Self {
            origin,
            direction: direction / norm,
            t_near,
            t_far,
        })
    }

    pub fn at(&self, t: f64) -> Vector3<f64> {
        self.origin + t * self.direction
    }

    /// Parameter of the first intersection with the origin-centered sphere
    /// of `radius`, looking both forwards and backwards along the line.
    pub fn sphere_entry(&self, radius: f64) -> Result<f64> {
        let b = self.origin.dot(&self.direction);
        let c = self.origin.norm_squared() - radius * radius;
        let disc = b * b - c;
        if !(disc >= 0.0) {
            return Err(HaloError::RayMissesSphere { radius });
        }
        Ok(-b - disc.sqrt())
    }

    /// Re-anchors the origin at the sphere entry point. Returns the new ray
    /// and the shift `s` such that `old_t = new_t + s`.
    pub fn canonicalize(&self, radius: f64) -> Result<(Ray, f64)> {
        let shift = self.sphere_entry(radius)?;
        let ray = Ray {
            origin: self.at(shift),
            direction: self.direction,
            t_near: self.t_near - shift,
            t_far: self.t_far - shift,
        };
        Ok((ray, shift))
    }
}

/// Pinhole intrinsics with a centered principal point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub width: usize,
    pub height: usize,
    pub focal: f64,
}

impl Intrinsics {
    pub fn from_camera_angle_x(width: usize, height: usize, camera_angle_x: f64) -> Self {
        Self {
            width,
            height,
            focal: 0.5 * width as f64 / (0.5 * camera_angle_x).tan(),
        }
    }
}

/// Checks that `pose` is a rigid transform: orthonormal rotation with
/// determinant 1 and a homogeneous last row.
pub fn check_rigid(pose: &Matrix4<f64>, tol: f64) -> Result<()> {
    let rot: Matrix3<f64> = pose.fixed_view::<3, 3>(0, 0).into_owned();
    let err = (rot.transpose() * rot - Matrix3::identity()).abs().max();
    let det = rot.determinant();
    let last = pose.row(3);
    if !pose.iter().all(|v| v.is_finite()) {
        return Err(HaloError::NonRigidPose("non-finite entries".into()));
    }
    if err > tol || (det - 1.0).abs() > tol.max(1e-9) * 3.0 {
        return Err(HaloError::NonRigidPose(format!("R^T R deviates by {err:e}, det {det}")));
    }
    if (last[0].abs() + last[1].abs() + last[2].abs() + (last[3] - 1.0).abs()) > tol {
        return Err(HaloError::NonRigidPose(format!("bad homogeneous row {last:?}")));
    }
    Ok(())
}

/// Camera-to-world ray through the center of pixel `(px, py)`.
///
/// Cameras look along their local `-z` with `+y` up (Blender convention).
pub fn pixel_ray(pose: &Matrix4<f64>, intr: &Intrinsics, px: f64, py: f64, near: f64, far: f64) -> Result<Ray> {
    let x = (px + 0.5 - 0.5 * intr.width as f64) / intr.focal;
    let y = -(py + 0.5 - 0.5 * intr.height as f64) / intr.focal;
    let rot = pose.fixed_view::<3, 3>(0, 0);
    let dir = rot * Vector3::new(x, y, -1.0);
    let origin = Vector3::new(pose[(0, 3)], pose[(1, 3)], pose[(2, 3)]);
    Ray::new(origin, dir, near, far)
}

/// One ray per pixel, row-major.
pub fn generate_rays(pose: &Matrix4<f64>, intr: &Intrinsics, near: f64, far: f64) -> Result<Vec<Ray>> {
    check_rigid(pose, 1e-6)?;
    let mut rays = Vec::with_capacity(intr.width * intr.height);
    for py in 0..intr.height {
        for px in 0..intr.width {
            rays.push(pixel_ray(pose, intr, px as f64, py as f64, near, far)?);
        }
    }
    Ok(rays)
}

#[cfg(test)]
mod tests {
    use nalgebra::Rotation3;

    use super::*;

    #[test]
    fn identity_center_pixel_looks_down_minus_z() {
        let intr = Intrinsics::from_camera_angle_x(101, 101, 0.69);
        let rays = generate_rays(&Matrix4::identity(), &intr, 2.0, 6.0).unwrap();
        let center = rays[50 * 101 + 50];
        assert!((center.direction - Vector3::new(0.0, 0.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn all_rays_unit_and_corners_mirror() {
        let rot = Rotation3::from_euler_angles(0.3, -0.2, 1.1);
        let mut pose = rot.to_homogeneous();
        pose[(0, 3)] = 1.0;
        pose[(2, 3)] = 4.0;
        let intr = Intrinsics::from_camera_angle_x(40, 30, 0.8);
        let rays = generate_rays(&pose, &intr, 2.0, 6.0).unwrap();
        assert!(rays.iter().all(|r| (r.direction.norm() - 1.0).abs() < 1e-9));

        let ident = generate_rays(&Matrix4::identity(), &intr, 2.0, 6.0).unwrap();
        let a = ident[0].direction;
        let b = ident[intr.width * intr.height - 1].direction;
        assert!((a.x + b.x).abs() < 1e-12 && (a.y + b.y).abs() < 1e-12 && (a.z - b.z).abs() < 1e-12);
    }

    #[test]
    fn singular_pose_rejected() {
        let mut pose = Matrix4::identity();
        pose[(0, 0)] = 0.0;
        let intr = Intrinsics::from_camera_angle_x(4, 4, 0.8);
        assert!(matches!(generate_rays(&pose, &intr, 2.0, 6.0), Err(HaloError::NonRigidPose(_))));
    }

    #[test]
    fn canonicalization_is_idempotent_and_origin_invariant() {
        let r = Ray::new(Vector3::new(0.3, 4.0, 0.2), Vector3::new(0.1, -1.0, 0.05), 2.0, 6.0).unwrap();
        let (c1, s1) = r.canonicalize(4.4).unwrap();
        let (c2, s2) = c1.canonicalize(4.4).unwrap();
        assert!(s2.abs() < 1e-12);
        assert!((c1.origin - c2.origin).norm() < 1e-12);
        assert!((c1.origin.norm() - 4.4).abs() < 1e-12);
        assert!((r.at(3.0) - c1.at(3.0 - s1)).norm() < 1e-12);

        let shifted = Ray::new(r.at(1.7), r.direction, 0.3, 4.3).unwrap();
        let (c3, _) = shifted.canonicalize(4.4).unwrap();
        assert!((c3.origin - c1.origin).norm() < 1e-12);
    }

    #[test]
    fn ray_missing_sphere_is_an_error() {
        let r = Ray::new(Vector3::new(10.0, 10.0, 0.0), Vector3::new(1.0, 0.0, 0.0), 0.0, 1.0).unwrap();
        assert!(matches!(r.canonicalize(1.0), Err(HaloError::RayMissesSphere { .. })));
    }
}
