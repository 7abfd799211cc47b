//! Image-quality and spectral metrics.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{HaloError, Result};
use crate::raster::Image;

/// Peak signal-to-noise ratio in dB. Identical inputs give `+inf`.
pub fn psnr(a: &Image, b: &Image, peak: f64) -> Result<f64> {
    a.same_shape(b)?;
    if a.data.is_empty() {
        return Err(HaloError::InvalidInput("empty image".into()));
    }
    let mse = a.data.iter().zip(&b.data).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.data.len() as f64;
    Ok(psnr_from_mse(mse, peak))
}

pub fn psnr_from_mse(mse: f64, peak: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (peak * peak / mse).log10()
    }
}

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;

fn gaussian_kernel() -> [f64; SSIM_WINDOW] {
    let mut k = [0.0; SSIM_WINDOW];
    let c = (SSIM_WINDOW / 2) as f64;
    for (i, v) in k.iter_mut().enumerate() {
        let d = i as f64 - c;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = k.iter().sum();
    k.map(|v| v / s)
}

/// Separable Gaussian filter over valid positions only.
fn filter_valid(img: &[f64], w: usize, h: usize, k: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let (ow, oh) = (w - SSIM_WINDOW + 1, h - SSIM_WINDOW + 1);
    let mut rows = vec![0.0; ow * h];
    for y in 0..h {
        for x in 0..ow {
            rows[y * ow + x] = (0..SSIM_WINDOW).map(|i| k[i] * img[y * w + x + i]).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..SSIM_WINDOW).map(|i| k[i] * rows[(y + i) * ow + x]).sum();
        }
    }
    out
}

fn ssim_channel(a: &[f64], b: &[f64], w: usize, h: usize) -> f64 {
    const C1: f64 = 0.01 * 0.01;
    const C2: f64 = 0.03 * 0.03;
    let k = gaussian_kernel();
    let prod = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).collect::<Vec<_>>();
    let mu_a = filter_valid(a, w, h, &k);
    let mu_b = filter_valid(b, w, h, &k);
    let aa = filter_valid(&prod(a, a), w, h, &k);
    let bb = filter_valid(&prod(b, b), w, h, &k);
    let ab = filter_valid(&prod(a, b), w, h, &k);
    let n = mu_a.len();
    (0..n)
        .map(|i| {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let va = aa[i] - ma * ma;
            let vb = bb[i] - mb * mb;
            let cov = ab[i] - ma * mb;
            ((2.0 * ma * mb + C1) * (2.0 * cov + C2)) / ((ma * ma + mb * mb + C1) * (va + vb + C2))
        })
        .sum::<f64>()
        / n as f64
}

/// Single-scale SSIM at unit peak (11x11 Gaussian window, sigma 1.5),
/// averaged over valid windows and then over channels.
pub fn ssim(a: &Image, b: &Image) -> Result<f64> {
    a.same_shape(b)?;
    if a.width < SSIM_WINDOW || a.height < SSIM_WINDOW {
        return Err(HaloError::InvalidInput(format!(
            "ssim needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels, got {}x{}",
            a.width, a.height
        )));
    }
    let total: f64 = (0..a.channels)
        .map(|c| ssim_channel(&a.channel(c).data, &b.channel(c).data, a.width, a.height))
        .sum();
    Ok(total / a.channels as f64)
}

/// 2D DFT of a real single-channel image, row-major.
pub fn fft2(img: &Image) -> Vec<Complex<f64>> {
    let (w, h) = (img.width, img.height);
    let mut buf: Vec<Complex<f64>> = (0..w * h).map(|i| Complex::new(img.data[i * img.channels], 0.0)).collect();
    let mut planner = FftPlanner::new();
    let row = planner.plan_fft_forward(w);
    for r in buf.chunks_exact_mut(w) {
        row.process(r);
    }
    let col = planner.plan_fft_forward(h);
    let mut column = vec![Complex::new(0.0, 0.0); h];
    for x in 0..w {
        for y in 0..h {
            column[y] = buf[y * w + x];
        }
        col.process(&mut column);
        for y in 0..h {
            buf[y * w + x] = column[y];
        }
    }
    buf
}

/// Radial frequency of bin `(kx, ky)`, with each axis normalized so that its
/// Nyquist frequency is 1.
pub fn radial_frequency(kx: usize, ky: usize, w: usize, h: usize) -> f64 {
    let fx = kx.min(w - kx) as f64 / (w as f64 / 2.0);
    let fy = ky.min(h - ky) as f64 / (h as f64 / 2.0);
    (fx * fx + fy * fy).sqrt()
}

/// Fraction of non-DC spectral energy above `cutoff` (relative to Nyquist).
/// Returns 0 for images with no non-DC energy.
pub fn hf_energy_ratio(img: &Image, cutoff: f64) -> Result<f64> {
    if img.channels != 1 {
        return Err(HaloError::InvalidInput("hf_energy_ratio expects a single-channel image".into()));
    }
    if img.data.is_empty() {
        return Err(HaloError::InvalidInput("empty image".into()));
    }
    let (w, h) = (img.width, img.height);
    let spec = fft2(img);
    let (mut total, mut high) = (0.0, 0.0);
    for ky in 0..h {
        for kx in 0..w {
            if kx == 0 && ky == 0 {
                continue;
            }
            let e = spec[ky * w + kx].norm_sqr();
            total += e;
            if radial_frequency(kx, ky, w, h) > cutoff {
                high += e;
            }
        }
    }
    // round-off leaves tiny energy on constant images
    let scale: f64 = img.data.iter().map(|v| v * v).sum::<f64>() * (w * h) as f64;
    if total <= 1e-20 * scale.max(1e-300) {
        return Ok(0.0);
    }
    Ok(high / total)
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn noise(w: usize, h: usize, seed: u64) -> Image {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Image::from_fn(w, h, 1, |_, _, _| rng.random::<f64>())
    }

    #[test]
    fn psnr_closed_forms() {
        let a = Image::filled(8, 8, 3, 0.5);
        assert_eq!(psnr(&a, &a, 1.0).unwrap(), f64::INFINITY);
        let b = Image::filled(8, 8, 3, 0.6);
        assert!((psnr(&a, &b, 1.0).unwrap() - 20.0).abs() < 1e-9);
        let z = Image::filled(4, 4, 1, 0.0);
        let o = Image::filled(4, 4, 1, 1.0);
        assert!(psnr(&z, &o, 1.0).unwrap().abs() < 1e-12);
        assert!(psnr(&a, &z, 1.0).is_err());
    }

    #[test]
    fn psnr_symmetric_and_decreasing_in_noise() {
        let base = noise(16, 16, 1);
        let mut prev = f64::INFINITY;
        for amp in [0.01, 0.05, 0.1, 0.2] {
            let mut total = 0.0;
            for seed in 0..8 {
                let n = noise(16, 16, 100 + seed);
                let noisy = Image {
                    data: base.data.iter().zip(&n.data).map(|(b, e)| b + amp * (e - 0.5)).collect(),
                    ..base.clone()
                };
                let p = psnr(&base, &noisy, 1.0).unwrap();
                assert_eq!(p, psnr(&noisy, &base, 1.0).unwrap());
                total += p;
            }
            assert!(total / 8.0 < prev);
            prev = total / 8.0;
        }
    }

    #[test]
    fn ssim_cases() {
        let a = noise(32, 24, 3);
        assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        let inv = a.map(|v| 1.0 - v);
        assert!(ssim(&a, &inv).unwrap() < 1.0);
        let c = Image::filled(16, 16, 1, 0.5);
        assert!((ssim(&c, &c).unwrap() - 1.0).abs() < 1e-12);
        let b = noise(32, 24, 4);
        assert!((ssim(&a, &b).unwrap() - ssim(&b, &a).unwrap()).abs() < 1e-12);
        assert!(ssim(&Image::filled(5, 5, 1, 0.0), &Image::filled(5, 5, 1, 0.0)).is_err());
    }

    #[test]
    fn fft_matches_direct_dft() {
        let img = noise(6, 5, 9);
        let spec = fft2(&img);
        for ky in 0..5 {
            for kx in 0..6 {
                let mut acc = Complex::new(0.0, 0.0);
                for y in 0..5 {
                    for x in 0..6 {
                        let ph = -2.0 * std::f64::consts::PI * (kx as f64 * x as f64 / 6.0 + ky as f64 * y as f64 / 5.0);
                        acc += img.get(x, y, 0) * Complex::new(ph.cos(), ph.sin());
                    }
                }
                assert!((acc - spec[ky * 6 + kx]).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn hf_ratio_cases() {
        assert_eq!(hf_energy_ratio(&Image::filled(16, 16, 1, 0.7), 0.5).unwrap(), 0.0);
        let checker = Image::from_fn(16, 16, 1, |x, y, _| ((x + y) % 2) as f64);
        assert!((hf_energy_ratio(&checker, 0.5).unwrap() - 1.0).abs() < 1e-12);
        let ramp = Image::from_fn(64, 64, 1, |x, y, _| (x + y) as f64 / 126.0);
        let r = hf_energy_ratio(&ramp, 0.5).unwrap();
        assert!(r < 0.05, "{r}");
        let r = hf_energy_ratio(&noise(32, 32, 2), 0.5).unwrap();
        assert!((0.0..=1.0).contains(&r));
    }
}
