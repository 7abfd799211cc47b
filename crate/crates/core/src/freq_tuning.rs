//! Cross-view spectral consistency and the encoding-frequency reduction loop.

use nalgebra::{Matrix4, Rotation3, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::orbit_pose;
use crate::encoding::EncodingConfig;
use crate::error::{HaloError, Result};
use crate::metrics::fft2;
use crate::raster::Image;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectralCriterionConfig {
    pub num_pairs: usize,
    /// Rotation between the two views of a pair, in degrees.
    pub baseline_angle: f64,
    pub mask_percentile: f64,
    pub threshold: f64,
    pub render_resolution: usize,
}

impl Default for SpectralCriterionConfig {
    fn default() -> Self {
        Self {
            num_pairs: 10,
            baseline_angle: 3.0,
            mask_percentile: 99.0,
            threshold: 25.0,
            render_resolution: 64,
        }
    }
}

impl SpectralCriterionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_pairs == 0 || self.render_resolution == 0 {
            return Err(HaloError::InvalidConfig("num_pairs and render_resolution must be positive".into()));
        }
        if !(self.threshold > 0.0) {
            return Err(HaloError::InvalidConfig(format!("threshold {} must be positive", self.threshold)));
        }
        if !(self.mask_percentile > 0.0 && self.mask_percentile < 100.0) {
            return Err(HaloError::InvalidConfig(format!("mask_percentile {} outside (0, 100)", self.mask_percentile)));
        }
        Ok(())
    }
}

/// Cameras on a sphere around the origin, looking at it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitDistribution {
    pub distance: f64,
    /// Elevation range in degrees.
    pub elevation: (f64, f64),
}

/// `num_pairs` pose pairs; the second pose is the first rotated by
/// `baseline_angle` about the vertical axis through the scene centre.
pub fn sample_view_pairs<G: Rng + ?Sized>(
    dist: &OrbitDistribution,
    cfg: &SpectralCriterionConfig,
    rng: &mut G,
) -> Vec<(Matrix4<f64>, Matrix4<f64>)> {
    let rot = Rotation3::from_axis_angle(&Vector3::z_axis(), cfg.baseline_angle.to_radians()).to_homogeneous();
    (0..cfg.num_pairs)
        .map(|_| {
            let az = rng.random::<f64>() * std::f64::consts::TAU;
            let (lo, hi) = dist.elevation;
            let el = (lo + (hi - lo) * rng.random::<f64>()).to_radians();
            let a = orbit_pose(az, el, dist.distance);
            (a, rot * a)
        })
        .collect()
}

fn percentile(values: &[f64], p: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = p / 100.0 * (sorted.len() - 1) as f64;
    let (i, frac) = (pos.floor() as usize, pos.fract());
    if i + 1 < sorted.len() {
        sorted[i] * (1.0 - frac) + sorted[i + 1] * frac
    } else {
        sorted[i]
    }
}

/// Fourier magnitudes averaged with their conjugate bins so that the
/// percentile mask treats both members of a pair alike.
fn magnitudes(img: &Image) -> Vec<f64> {
    let (w, h) = (img.width, img.height);
    let raw: Vec<f64> = fft2(img).iter().map(|c| c.norm()).collect();
    (0..w * h)
        .map(|i| {
            let (x, y) = (i % w, i / w);
            let j = ((h - y) % h) * w + (w - x) % w;
            0.5 * (raw[i] + raw[j])
        })
        .collect()
}

/// Masked Fourier-magnitude distance between the luminances of two images.
///
/// Bins that are DC or exceed the `mask_percentile` of either spectrum are
/// dropped; the result is `1e4 * ||(|A| - |B|)||_2 / n_kept`.
pub fn spectral_gap(a: &Image, b: &Image, mask_percentile: f64) -> Result<f64> {
    a.same_shape(b)?;
    if a.data.is_empty() {
        return Err(HaloError::InvalidInput("empty image".into()));
    }
    let ma = magnitudes(&a.luminance());
    let mb = magnitudes(&b.luminance());
    let (ta, tb) = (percentile(&ma, mask_percentile), percentile(&mb, mask_percentile));
    let mut sum = 0.0;
    let mut kept = 0usize;
    for i in 1..ma.len() {
        if ma[i] > ta || mb[i] > tb {
            continue;
        }
        let d = ma[i] - mb[i];
        sum += d * d;
        kept += 1;
    }
    if kept == 0 {
        return Ok(0.0);
    }
    Ok(1e4 * sum.sqrt() / kept as f64)
}

/// Mean spectral gap over rendered pose pairs.
pub fn criterion_sigma(
    pairs: &[(Matrix4<f64>, Matrix4<f64>)],
    mask_percentile: f64,
    mut render: impl FnMut(&Matrix4<f64>) -> Result<Image>,
) -> Result<f64> {
    if pairs.is_empty() {
        return Err(HaloError::InvalidInput("no view pairs".into()));
    }
    let mut total = 0.0;
    for (a, b) in pairs {
        let ia = render(a)?;
        let ib = if a == b { ia.clone() } else { render(b)? };
        total += spectral_gap(&ia, &ib, mask_percentile)?;
    }
    Ok(total / pairs.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuneRow {
    pub encoding: EncodingConfig,
    pub label: String,
    pub sigma: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuneReport {
    pub chosen: EncodingConfig,
    pub threshold: f64,
    /// One row per evaluated candidate, in evaluation order.
    pub rows: Vec<TuneRow>,
    /// True when no candidate passed and the last one was taken.
    pub fallback: bool,
}

/// Walks `candidates` (highest frequency first), scoring each with
/// `evaluate`, and returns the first whose sigma is below `threshold`.
/// If none passes, the lowest-frequency candidate is chosen.
pub fn tune_frequency(
    candidates: &[EncodingConfig],
    threshold: f64,
    mut evaluate: impl FnMut(&EncodingConfig) -> Result<f64>,
) -> Result<TuneReport> {
    let last = candidates
        .last()
        .ok_or_else(|| HaloError::InvalidInput("no candidate encodings".into()))?;
    let mut rows = Vec::new();
    for cand in candidates {
        cand.validate()?;
        let sigma = evaluate(cand)?;
        let pass = sigma < threshold;
        log::info!("candidate {}: sigma {sigma:.4} ({})", cand.label(), if pass { "pass" } else { "fail" });
        rows.push(TuneRow {
            encoding: cand.clone(),
            label: cand.label(),
            sigma,
            pass,
        });
        if pass {
            return Ok(TuneReport {
                chosen: cand.clone(),
                threshold,
                rows,
                fallback: false,
            });
        }
    }
    log::warn!("no candidate reached sigma < {threshold}; using {}", last.label());
    Ok(TuneReport {
        chosen: last.clone(),
        threshold,
        rows,
        fallback: true,
    })
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::rendering::check_rigid;

    fn gradient(n: usize) -> Image {
        Image::from_fn(n, n, 3, |x, y, _| 0.2 + 0.6 * (x + y) as f64 / (2 * n - 2) as f64)
    }

    fn with_checker(img: &Image, amp: f64, cell: usize) -> Image {
        Image::from_fn(img.width, img.height, 3, |x, y, c| {
            img.get(x, y, c) + if (x / cell + y / cell) % 2 == 0 { amp } else { -amp }
        })
    }

    #[test]
    fn gap_examples() {
        let a = gradient(32);
        assert_eq!(spectral_gap(&a, &a, 99.0).unwrap(), 0.0);
        let shifted = a.map(|v| v + 0.1);
        assert!(spectral_gap(&a, &shifted, 99.0).unwrap() < 1e-9);
        let b = with_checker(&a, 0.1, 3);
        let g = spectral_gap(&a, &b, 99.0).unwrap();
        assert!((g - 782.2246).abs() < 1e-3, "{g}");
        // a one-pixel checkerboard lives in a single dominant bin, which the mask removes
        assert!(spectral_gap(&a, &with_checker(&a, 0.1, 1), 99.0).unwrap() < 1e-9);
        assert!(spectral_gap(&a, &gradient(16), 99.0).is_err());
    }

    #[test]
    fn gap_matches_direct_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = Image::from_fn(6, 5, 1, |_, _, _| rng.random::<f64>());
        let b = Image::from_fn(6, 5, 1, |_, _, _| rng.random::<f64>());
        let mag = |img: &Image| -> Vec<f64> {
            let mut out = Vec::new();
            for ky in 0..5 {
                for kx in 0..6 {
                    let (mut re, mut im) = (0.0, 0.0);
                    for y in 0..5 {
                        for x in 0..6 {
                            let ph = -std::f64::consts::TAU * (kx as f64 * x as f64 / 6.0 + ky as f64 * y as f64 / 5.0);
                            re += img.get(x, y, 0) * ph.cos();
                            im += img.get(x, y, 0) * ph.sin();
                        }
                    }
                    out.push((re * re + im * im).sqrt());
                }
            }
            out
        };
        let sym = |m: Vec<f64>| -> Vec<f64> {
            (0..30).map(|i| 0.5 * (m[i] + m[((5 - i / 6) % 5) * 6 + (6 - i % 6) % 6])).collect()
        };
        let (ma, mb) = (sym(mag(&a)), sym(mag(&b)));
        let (ta, tb) = (percentile(&ma, 80.0), percentile(&mb, 80.0));
        let kept: Vec<usize> = (1..30).filter(|&i| ma[i] <= ta && mb[i] <= tb).collect();
        let norm = kept.iter().map(|&i| (ma[i] - mb[i]).powi(2)).sum::<f64>().sqrt();
        let expected = 1e4 * norm / kept.len() as f64;
        let got = spectral_gap(&a, &b, 80.0).unwrap();
        assert!((got - expected).abs() < 1e-8 * expected, "{got} vs {expected} kept {}", kept.len());
    }

    #[test]
    fn gap_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = Image::from_fn(16, 16, 3, |_, _, _| rng.random::<f64>());
        let b = Image::from_fn(16, 16, 3, |_, _, _| rng.random::<f64>());
        assert_eq!(spectral_gap(&a, &b, 99.0).unwrap(), spectral_gap(&b, &a, 99.0).unwrap());
    }

    #[test]
    fn view_pairs() {
        let dist = OrbitDistribution {
            distance: 4.0,
            elevation: (10.0, 40.0),
        };
        let cfg = SpectralCriterionConfig {
            baseline_angle: 0.0,
            ..Default::default()
        };
        let pairs = sample_view_pairs(&dist, &cfg, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(pairs.len(), 10);
        assert!(pairs.iter().all(|(a, b)| a == b));
        let cfg = SpectralCriterionConfig {
            baseline_angle: 5.0,
            ..cfg
        };
        let pairs = sample_view_pairs(&dist, &cfg, &mut ChaCha8Rng::seed_from_u64(1));
        for (a, b) in &pairs {
            check_rigid(a, 1e-9).unwrap();
            check_rigid(b, 1e-9).unwrap();
            let (pa, pb) = (a.fixed_view::<3, 1>(0, 3), b.fixed_view::<3, 1>(0, 3));
            let angle = (pa.dot(&pb) / (pa.norm() * pb.norm())).acos().to_degrees();
            assert!(angle <= 5.0 + 1e-9 && angle > 0.0);
        }
        let again = sample_view_pairs(&dist, &cfg, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(pairs, again);
    }

    #[test]
    fn sigma_zero_for_identical_pairs() {
        let pose = orbit_pose(0.3, 0.2, 4.0);
        let mut count = 0;
        let s = criterion_sigma(&[(pose, pose)], 99.0, |_| {
            count += 1;
            Ok(with_checker(&gradient(8), 0.2, 1))
        })
        .unwrap();
        assert_eq!((s, count), (0.0, 1));
    }

    #[test]
    fn tuning_loop() {
        let cands: Vec<EncodingConfig> = [10, 8, 6, 5, 4].iter().map(|&l| EncodingConfig::sinusoidal(l, 1.0)).collect();
        let sigma_of = |c: &EncodingConfig| match c {
            EncodingConfig::Sinusoidal(s) => Ok(s.bands as f64 * 5.0),
            _ => unreachable!(),
        };
        let r = tune_frequency(&cands[3..4], 100.0, sigma_of).unwrap();
        assert_eq!((r.chosen.clone(), r.rows.len()), (cands[3].clone(), 1));
        let r = tune_frequency(&cands, f64::INFINITY, sigma_of).unwrap();
        assert_eq!(r.chosen, cands[0]);
        let r = tune_frequency(&cands, 35.0, sigma_of).unwrap();
        assert_eq!((r.chosen.clone(), r.rows.len(), r.fallback), (cands[2].clone(), 3, false));
        let r = tune_frequency(&cands, 1.0, sigma_of).unwrap();
        assert_eq!((r.chosen.clone(), r.fallback), (cands[4].clone(), true));
        assert!(tune_frequency(&[], 1.0, sigma_of).is_err());
    }
}
