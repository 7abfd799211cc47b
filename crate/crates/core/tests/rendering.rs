use halo_core::encoding::EncodingConfig;
use halo_core::losses::loss_empty;
use halo_core::nalgebra::{Matrix4, Vector3};
use halo_core::rendering::{composite, generate_rays, midpoint_sample, render_depth, Intrinsics, Sampler};
use halo_core::{PointField, PointFieldArch};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn small_field() -> PointField<f64> {
    let arch = PointFieldArch {
        depth: 2,
        width: 16,
        skip: None,
        color_width: 8,
        point_dim: 3,
        view_dim: 3,
        point_encoding: EncodingConfig::sinusoidal(2, 1.0),
        view_encoding: EncodingConfig::sinusoidal(1, 1.0),
    };
    PointField::init(arch, 0).unwrap()
}

#[test]
fn empty_field_has_no_occupancy() {
    let mut field = small_field();
    field.zero_density_head();
    let d = field.arch.depth;
    field.params.layers[d].bias.fill(-1e4);
    let pose = Matrix4::new_translation(&Vector3::new(0.0, 0.0, 4.0));
    let rays = generate_rays(&pose, &Intrinsics::from_camera_angle_x(4, 4, 0.7), 2.0, 6.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for ray in &rays {
        let (_, acc) = render_depth(&field, ray, &Sampler::Stratified { samples: 32 }, &mut rng).unwrap();
        assert_eq!(acc, 0.0);
    }
}

/// Distance along the ray to the unit sphere at the origin.
fn sphere_hit(o: &Vector3<f64>, d: &Vector3<f64>) -> Option<f64> {
    let b = o.dot(d);
    let disc = b * b - (o.norm_squared() - 1.0);
    (disc >= 0.0).then(|| -b - disc.sqrt())
}

#[test]
fn opaque_sphere_depth_within_one_bin() {
    let pose = Matrix4::new_translation(&Vector3::new(0.0, 0.0, 4.0));
    let rays = generate_rays(&pose, &Intrinsics::from_camera_angle_x(32, 32, 0.6911), 2.0, 6.0).unwrap();
    let k = 64;
    let bin = 4.0 / k as f64;
    let ts = midpoint_sample(2.0, 6.0, k);
    let mut hits = 0;
    for ray in &rays {
        let Some(t_hit) = sphere_hit(&ray.origin, &ray.direction) else { continue };
        let sigmas: Vec<f64> = ts
            .iter()
            .map(|&t| if (ray.origin + t * ray.direction).norm() < 1.0 { 1e4 } else { 0.0 })
            .collect();
        let r = composite(&sigmas, &vec![[0.5; 3]; k], &ts, 6.0, None).unwrap();
        if r.acc < 0.5 {
            // grazing ray whose chord falls between samples
            continue;
        }
        hits += 1;
        assert!((r.depth - t_hit).abs() <= bin, "depth {} vs {t_hit}", r.depth);
    }
    assert!(hits > 300, "{hits}");
}

proptest! {
    #[test]
    fn empty_loss_grows_with_hi_occupancy(
        acc in prop::collection::vec(0.0f64..1.0, 1..16),
        lo in prop::collection::vec(0.0f64..0.02, 16),
        bump in 0.0f64..0.5,
        pick in 0usize..16,
    ) {
        let n = acc.len();
        let lo = &lo[..n];
        let i = pick % n;
        let base = loss_empty(&acc, lo, 0.01).unwrap().value;
        let mut more = acc.clone();
        more[i] = (more[i] + bump).min(1.0);
        let after = loss_empty(&more, lo, 0.01).unwrap().value;
        prop_assert!(after >= base);
        if lo[i] >= 0.01 {
            prop_assert_eq!(after, base);
        }
    }
}
