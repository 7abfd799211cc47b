use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{HaloError, Result};

/// Smallest admissible `|tan(theta)|` before a line is treated as parallel
/// to the planes.
pub const MIN_SLOPE: f64 = 1e-9;

/// A 3D point expressed relative to a reference camera `(u*, v*)` on the
/// camera plane: aligned image coordinates plus the EPI slope angle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpiPoint {
    pub s_prime: f64,
    pub t_prime: f64,
    pub theta: f64,
}

/// Aligns the point `(u, v, s, t, theta)` to the reference camera `(u*, v*)`.
///
/// `s' = s + (u - u*) / tan(theta)`, `t' = t + (v - v*) / tan(theta)`.
pub fn epi_align(u: f64, v: f64, s: f64, t: f64, theta: f64, u_star: f64, v_star: f64) -> Result<EpiPoint> {
    let slope = theta.tan();
    if !(slope.abs() >= MIN_SLOPE) {
        return Err(HaloError::DegenerateSlope(slope.abs()));
    }
    Ok(EpiPoint {
        s_prime: s + (u - u_star) / slope,
        t_prime: t + (v - v_star) / slope,
        theta,
    })
}

/// Two-plane light-field geometry with image coordinates measured relative
/// to each camera.
///
/// Camera `(u, v)` sits at world `(u * baseline, v * baseline, 0)` and looks
/// along `+z`; image coordinate `s` maps to the direction
/// `(s * tan_half_fov, t * tan_half_fov, 1)`. Under this model a point at
/// depth `z` traces EPI lines with `tan(theta) = z * tan_half_fov / baseline`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoPlaneGeometry {
    pub baseline: f64,
    pub tan_half_fov: f64,
}

impl TwoPlaneGeometry {
    pub fn camera_origin(&self, u: f64, v: f64) -> Vector3<f64> {
        Vector3::new(u * self.baseline, v * self.baseline, 0.0)
    }

    /// Unit direction of the ray `(u, v, s, t)`.
    pub fn ray_direction(&self, s: f64, t: f64) -> Vector3<f64> {
        Vector3::new(s * self.tan_half_fov, t * self.tan_half_fov, 1.0).normalize()
    }

    /// Image coordinates at which camera `(u, v)` observes `point`.
    pub fn project(&self, point: &Vector3<f64>, u: f64, v: f64) -> (f64, f64) {
        let o = self.camera_origin(u, v);
        let z = point.z * self.tan_half_fov;
        ((point.x - o.x) / z, (point.y - o.y) / z)
    }

    pub fn theta_of_depth(&self, z: f64) -> f64 {
        (z * self.tan_half_fov / self.baseline).atan()
    }

    pub fn depth_of_theta(&self, theta: f64) -> f64 {
        theta.tan() * self.baseline / self.tan_half_fov
    }

    /// World point for an aligned EPI point (reference camera at `u* = v* = 0`).
    pub fn point_of(&self, p: &EpiPoint) -> Vector3<f64> {
        let z = self.depth_of_theta(p.theta);
        Vector3::new(p.s_prime * z * self.tan_half_fov, p.t_prime * z * self.tan_half_fov, z)
    }
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn reference_camera_is_unchanged() {
        let p = epi_align(0.3, -0.2, 0.7, 0.1, 0.9, 0.3, -0.2).unwrap();
        assert_eq!(p, EpiPoint { s_prime: 0.7, t_prime: 0.1, theta: 0.9 });
    }

    #[test]
    fn direct_substitution() {
        let theta = 2.0f64.atan();
        let p = epi_align(1.0, 0.0, 0.0, 0.0, theta, 0.0, 0.0).unwrap();
        assert!((p.s_prime - 0.5).abs() < 1e-15);
    }

    #[test]
    fn flat_slope_is_degenerate() {
        assert!(matches!(
            epi_align(1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0),
            Err(HaloError::DegenerateSlope(_))
        ));
    }

    #[test]
    fn synthetic_point_seen_from_two_grid_cameras() {
        let geo = TwoPlaneGeometry { baseline: 0.05, tan_half_fov: 0.4 };
        let point = Vector3::new(0.12, -0.07, 1.8);
        let theta = geo.theta_of_depth(point.z);
        let cams = [(-1.0, -1.0), (1.0, 0.5)];
        let aligned: Vec<EpiPoint> = cams
            .iter()
            .map(|&(u, v)| {
                let (s, t) = geo.project(&point, u, v);
                epi_align(u, v, s, t, theta, 0.0, 0.0).unwrap()
            })
            .collect();
        assert!((aligned[0].s_prime - aligned[1].s_prime).abs() < 1e-9);
        assert!((aligned[0].t_prime - aligned[1].t_prime).abs() < 1e-9);
        let back = geo.point_of(&aligned[0]);
        assert!((back - point).norm() < 1e-9);
    }

    #[test]
    fn projected_ray_passes_through_point() {
        let geo = TwoPlaneGeometry { baseline: 0.1, tan_half_fov: 0.5 };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let p = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(0.5..4.0));
            let (u, v) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let (s, t) = geo.project(&p, u, v);
            let o = geo.camera_origin(u, v);
            let d = geo.ray_direction(s, t);
            let along = (p - o).dot(&d);
            assert!(((o + along * d) - p).norm() < 1e-9);
        }
    }
}
