//! 2D image fitting with encoded coordinates: training fit, dense
//! interpolation, and masked-region extrapolation.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::pixel_coordinate;
use crate::encoding::{Encoder, EncodingConfig};
use crate::error::{HaloError, Result};
use crate::metrics::{hf_energy_ratio, psnr};
use crate::nn::{trunk_backward, trunk_forward, Adam, Linear, LrSchedule, ParamSet, TrunkSpec};
use crate::raster::Image;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToyConfig {
    pub iterations: usize,
    pub batch_size: usize,
    pub depth: usize,
    pub width: usize,
    pub lr: LrSchedule,
    pub seed: u64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self {
            iterations: 10_000,
            batch_size: 1024,
            depth: 4,
            width: 128,
            lr: LrSchedule { start: 2e-3, end: 2e-5 },
            seed: 0,
        }
    }
}

/// Low-frequency toy encoding, `L = 5, s = 5`.
pub fn toy_low() -> EncodingConfig {
    EncodingConfig::sinusoidal(5, 5.0)
}

/// High-frequency toy encoding, `L = 10, s = 5`.
pub fn toy_high() -> EncodingConfig {
    EncodingConfig::sinusoidal(10, 5.0)
}

/// Coordinate network `enc(x, y) -> intensity` with sigmoid outputs.
#[derive(Clone, Debug)]
pub struct ImageField {
    pub encoding: EncodingConfig,
    pub channels: usize,
    spec: TrunkSpec,
    encoder: Encoder,
    pub params: ParamSet<f32>,
}

fn sigmoid(v: f32) -> f32 {
    1.0 / (1.0 + (-v).exp())
}

impl ImageField {
    pub fn new(encoding: &EncodingConfig, channels: usize, cfg: &ToyConfig) -> Result<Self> {
        let encoder = Encoder::new(encoding, 2)?;
        if cfg.depth == 0 || cfg.width == 0 || channels == 0 {
            return Err(HaloError::InvalidConfig("toy field needs positive depth, width and channels".into()));
        }
        let spec = TrunkSpec {
            input_dim: encoder.output_dim(),
            width: cfg.width,
            depth: cfg.depth,
            skip: None,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut layers = spec.init(&mut rng);
        layers.push(Linear::init_uniform(cfg.width, channels, &mut rng));
        Ok(Self {
            encoding: encoding.clone(),
            channels,
            spec,
            encoder,
            params: ParamSet { layers },
        })
    }

    fn forward(&self, x: &Array2<f32>) -> (Array2<f32>, Array2<f32>, crate::nn::TrunkCache<f32>) {
        let d = self.spec.depth;
        let (h, cache) = trunk_forward(&self.spec, &self.params.layers[..d], x);
        let out = self.params.layers[d].forward(h.view()).mapv(sigmoid);
        (out, h, cache)
    }

    /// Values at raw coordinates, row-major `[n, channels]`.
    pub fn predict(&self, coords: &[f64]) -> Array2<f32> {
        self.forward(&self.encoder.encode_rows(coords)).0
    }

    /// Evaluates on a `width x height` grid of pixel centres spanning
    /// `[-1, 1]^2`.
    pub fn render(&self, width: usize, height: usize) -> Image {
        let coords = grid_coords(width, height);
        let mut data = Vec::with_capacity(width * height * self.channels);
        for chunk in coords.chunks(2 * 4096) {
            data.extend(self.predict(chunk).iter().map(|&v| v as f64));
        }
        Image::new(width, height, self.channels, data).expect("sized")
    }
}

fn grid_coords(width: usize, height: usize) -> Vec<f64> {
    let mut c = Vec::with_capacity(2 * width * height);
    for y in 0..height {
        for x in 0..width {
            c.push(pixel_coordinate(x, width));
            c.push(pixel_coordinate(y, height));
        }
    }
    c
}

#[derive(Clone, Debug)]
pub struct FitOutcome {
    pub field: ImageField,
    /// PSNR of the reconstruction over the training pixels.
    pub train_psnr: f64,
    pub final_loss: f64,
}

/// Fits `img` with squared error. When `mask` is given, pixels with
/// `mask[i] == true` are held out and never read.
pub fn fit_image_field(img: &Image, mask: Option<&[bool]>, encoding: &EncodingConfig, cfg: &ToyConfig) -> Result<FitOutcome> {
    if let Some(m) = mask {
        if m.len() != img.num_pixels() {
            return Err(HaloError::shape(img.num_pixels(), m.len()));
        }
    }
    let mut field = ImageField::new(encoding, img.channels, cfg)?;
    let coords = grid_coords(img.width, img.height);
    let train: Vec<usize> = (0..img.num_pixels()).filter(|&i| !mask.is_some_and(|m| m[i])).collect();
    if train.is_empty() {
        return Err(HaloError::InvalidInput("every pixel is masked".into()));
    }
    let nc = img.channels;
    let target_of = |i: usize| &img.data[i * nc..(i + 1) * nc];
    if train.iter().any(|&i| target_of(i).iter().any(|v| !v.is_finite())) {
        return Err(HaloError::InvalidInput("unmasked pixels must be finite".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed);
    let mut adam = Adam::new(&field.params);
    let batch = cfg.batch_size.min(train.len()).max(1);
    let mut last = f64::NAN;
    let d = cfg.depth;
    for it in 0..cfg.iterations {
        let idx: Vec<usize> = (0..batch).map(|_| train[rng.random_range(0..train.len())]).collect();
        let pts: Vec<f64> = idx.iter().flat_map(|&i| [coords[2 * i], coords[2 * i + 1]]).collect();
        let x = field.encoder.encode_rows::<f32>(&pts);
        let (out, h, cache) = field.forward(&x);
        let mut loss = 0.0f64;
        let scale = 2.0 / (batch * nc) as f32;
        let g_raw = Array2::from_shape_fn((batch, nc), |(r, c)| {
            let y = out[(r, c)];
            let diff = y - target_of(idx[r])[c] as f32;
            loss += (diff * diff) as f64;
            scale * diff * y * (1.0 - y)
        });
        last = loss / (batch * nc) as f64;
        if !last.is_finite() {
            return Err(HaloError::Diverged {
                iteration: it,
                what: "toy loss".into(),
            });
        }
        let mut grads = field.params.zeros_like();
        let gh = field.params.layers[d]
            .backward(h.view(), g_raw.view(), &mut grads.layers[d], true)
            .expect("dx");
        let (tg, _) = grads.layers.split_at_mut(d);
        trunk_backward(&field.spec, &field.params.layers[..d], &cache, gh, tg, false);
        adam.update(&mut field.params, &grads, cfg.lr.at(it, cfg.iterations));
    }

    let recon = field.render(img.width, img.height);
    let pick = |im: &Image| -> Image {
        let data = train.iter().flat_map(|&i| im.data[i * nc..(i + 1) * nc].to_vec()).collect::<Vec<_>>();
        Image::new(train.len(), 1, nc, data).expect("sized")
    };
    let train_psnr = psnr(&pick(&recon), &pick(img), 1.0)?;
    Ok(FitOutcome {
        field,
        train_psnr,
        final_loss: last,
    })
}

/// Bilinear upsampling with pixel-centre alignment and clamped borders.
pub fn bilinear_upsample(img: &Image, factor: usize) -> Image {
    let (w, h) = (img.width * factor, img.height * factor);
    let sample = |pos: f64, n: usize| {
        let p = (pos.clamp(0.0, (n - 1) as f64)).max(0.0);
        let i = (p.floor() as usize).min(n.saturating_sub(2));
        (i, (p - i as f64).min(1.0), (i + 1).min(n - 1))
    };
    Image::from_fn(w, h, img.channels, |x, y, c| {
        let fx = (x as f64 + 0.5) / factor as f64 - 0.5;
        let fy = (y as f64 + 0.5) / factor as f64 - 0.5;
        let (x0, tx, x1) = sample(fx, img.width);
        let (y0, ty, y1) = sample(fy, img.height);
        let top = img.get(x0, y0, c) * (1.0 - tx) + img.get(x1, y0, c) * tx;
        let bot = img.get(x0, y1, c) * (1.0 - tx) + img.get(x1, y1, c) * tx;
        top * (1.0 - ty) + bot * ty
    })
}

#[derive(Clone, Debug)]
pub struct InterpolationReport {
    pub upsampled: Image,
    pub bilinear: Image,
    /// High-frequency energy share of `upsampled - bilinear`.
    pub residual_hf_ratio: f64,
}

/// Share of spectrum above the source image's Nyquist frequency.
pub fn residual_cutoff(factor: usize) -> f64 {
    1.0 / factor as f64
}

/// Renders the field at `factor` times the source resolution and compares
/// it with bilinear upsampling of the source.
pub fn interpolate_experiment(field: &ImageField, source: &Image, factor: usize) -> Result<InterpolationReport> {
    if factor == 0 {
        return Err(HaloError::InvalidInput("upsampling factor must be positive".into()));
    }
    let upsampled = field.render(source.width * factor, source.height * factor);
    let bilinear = bilinear_upsample(source, factor);
    let residual = Image {
        data: upsampled.data.iter().zip(&bilinear.data).map(|(a, b)| a - b).collect(),
        ..upsampled.clone()
    }
    .luminance();
    let residual_hf_ratio = if factor == 1 {
        0.0
    } else {
        hf_energy_ratio(&residual, residual_cutoff(factor))?
    };
    Ok(InterpolationReport {
        upsampled,
        bilinear,
        residual_hf_ratio,
    })
}

/// Procedural single-channel checkerboard in `{0, 1}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckerSpec {
    pub size: usize,
    pub cells: usize,
}

impl CheckerSpec {
    pub fn render(&self) -> Image {
        let cell = (self.size / self.cells.max(1)).max(1);
        Image::from_fn(self.size, self.size, 1, |x, y, _| ((x / cell + y / cell) % 2) as f64)
    }
}

/// Axis-aligned pixel rectangle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaskRect {
    pub x0: usize,
    pub y0: usize,
    pub width: usize,
    pub height: usize,
}

impl MaskRect {
    /// Bottom-right corner covering `fraction` of a square image.
    pub fn corner(size: usize, fraction: f64) -> Self {
        let side = (size as f64 * fraction.sqrt()).round() as usize;
        Self {
            x0: size - side,
            y0: size - side,
            width: side,
            height: side,
        }
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x0 && x < self.x0 + self.width && y >= self.y0 && y < self.y0 + self.height
    }

    pub fn to_mask(&self, width: usize, height: usize) -> Vec<bool> {
        (0..width * height).map(|i| self.contains(i % width, i / width)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtrapolationRow {
    pub label: String,
    /// Thresholded accuracy inside the mask; `None` for an empty mask.
    pub masked_accuracy: Option<f64>,
    pub train_psnr: f64,
}

/// Trains one field per encoding on the unmasked checkerboard and scores
/// the masked region after thresholding at 0.5.
pub fn extrapolate_experiment(
    pattern: &CheckerSpec,
    mask: &MaskRect,
    encodings: &[EncodingConfig],
    cfg: &ToyConfig,
) -> Result<Vec<ExtrapolationRow>> {
    let img = pattern.render();
    let m = mask.to_mask(img.width, img.height);
    encodings
        .iter()
        .map(|enc| {
            let fit = fit_image_field(&img, Some(&m), enc, cfg)?;
            let masked: Vec<usize> = (0..m.len()).filter(|&i| m[i]).collect();
            let masked_accuracy = if masked.is_empty() {
                None
            } else {
                let coords: Vec<f64> = masked
                    .iter()
                    .flat_map(|&i| [pixel_coordinate(i % img.width, img.width), pixel_coordinate(i / img.width, img.height)])
                    .collect();
                let pred: Array1<f32> = fit.field.predict(&coords).column(0).to_owned();
                let correct = masked
                    .iter()
                    .zip(pred.iter())
                    .filter(|(&i, &p)| (p > 0.5) == (img.data[i] > 0.5))
                    .count();
                Some(correct as f64 / masked.len() as f64)
            };
            Ok(ExtrapolationRow {
                label: enc.label(),
                masked_accuracy,
                train_psnr: fit.train_psnr,
            })
        })
        .collect()
}

/// Detailed grayscale test image: smooth blobs, sharp-edged shapes and a
/// fine stripe patch.
pub fn detail_image(size: usize, seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let blobs: Vec<[f64; 4]> = (0..6)
        .map(|_| {
            [
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(0.15..0.5),
                rng.random_range(-0.3..0.3),
            ]
        })
        .collect();
    let disk = [rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), rng.random_range(0.2..0.35)];
    Image::from_fn(size, size, 1, |x, y, _| {
        let (u, v) = (pixel_coordinate(x, size), pixel_coordinate(y, size));
        let mut val = 0.5;
        for b in &blobs {
            let r2 = (u - b[0]).powi(2) + (v - b[1]).powi(2);
            val += b[3] * (-r2 / (b[2] * b[2])).exp();
        }
        if (u - disk[0]).powi(2) + (v - disk[1]).powi(2) < disk[2] * disk[2] {
            val = 1.0 - 0.8 * val;
        }
        if u > 0.3 && v < -0.3 {
            val += 0.2 * if (x / 2) % 2 == 0 { 1.0 } else { -1.0 };
        }
        val.clamp(0.02, 0.98)
    })
}
