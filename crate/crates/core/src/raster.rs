//! Dense floating-point images, row-major with interleaved channels.

use serde::{Deserialize, Serialize};

use crate::error::{HaloError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height * channels {
            return Err(HaloError::shape(
                format!("{width}x{height}x{channels} = {} values", width * height * channels),
                data.len().to_string(),
            ));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Self {
        Self {
            width,
            height,
            channels,
            data: vec![value; width * height * channels],
        }
    }

    pub fn from_fn(width: usize, height: usize, channels: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(x, y, c));
                }
            }
        }
        Self {
            width,
            height,
            channels,
            data,
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: f64) {
        self.data[(y * self.width + x) * self.channels + c] = v;
    }

    pub fn pixel_rgb(&self, x: usize, y: usize) -> [f64; 3] {
        match self.channels {
            1 => [self.get(x, y, 0); 3],
            _ => [self.get(x, y, 0), self.get(x, y, 1), self.get(x, y, 2)],
        }
    }

    pub fn num_pixels(&self) -> usize {
        self.width * self.height
    }

    pub fn same_shape(&self, other: &Image) -> Result<()> {
        if (self.width, self.height, self.channels) != (other.width, other.height, other.channels) {
            return Err(HaloError::shape(
                format!("{}x{}x{}", self.width, self.height, self.channels),
                format!("{}x{}x{}", other.width, other.height, other.channels),
            ));
        }
        Ok(())
    }

    /// Single channel `c`.
    pub fn channel(&self, c: usize) -> Image {
        Image::from_fn(self.width, self.height, 1, |x, y, _| self.get(x, y, c))
    }

    /// Rec. 601 luma for RGB; identity for one channel.
    pub fn luminance(&self) -> Image {
        if self.channels == 1 {
            return self.clone();
        }
        Image::from_fn(self.width, self.height, 1, |x, y, _| {
            let [r, g, b] = self.pixel_rgb(x, y);
            0.299 * r + 0.587 * g + 0.114 * b
        })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Image {
        Image {
            data: self.data.iter().map(|&v| f(v)).collect(),
            ..self.clone()
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}
