use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use image::{ImageBuffer, Luma, Rgb};

use crate::error::{HaloError, Result};
use crate::raster::Image;

/// Reads an 8-bit PNG as RGB in `[0, 1]`. Alpha, when present, is
/// composited over white.
pub fn read_png(path: &Path) -> Result<Image> {
    let img = image::open(path).map_err(|source| match source {
        image::ImageError::IoError(e) => HaloError::io(path, e),
        source => HaloError::Image {
            path: path.to_path_buf(),
            source,
        },
    })?;
    let rgba = img.to_rgba8();
    let (w, h) = rgba.dimensions();
    let mut data = Vec::with_capacity(w as usize * h as usize * 3);
    for p in rgba.pixels() {
        let a = p[3] as f64 / 255.0;
        for c in 0..3 {
            data.push(p[c] as f64 / 255.0 * a + (1.0 - a));
        }
    }
    Image::new(w as usize, h as usize, 3, data)
}

fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Writes a 1- or 3-channel image as an 8-bit PNG, clamping to `[0, 1]`.
pub fn write_png(path: &Path, img: &Image) -> Result<()> {
    let (w, h) = (img.width as u32, img.height as u32);
    let bytes: Vec<u8> = img.data.iter().map(|&v| quantize(v)).collect();
    let map_err = |source| HaloError::Image {
        path: path.to_path_buf(),
        source,
    };
    match img.channels {
        1 => ImageBuffer::<Luma<u8>, _>::from_raw(w, h, bytes)
            .expect("sized")
            .save(path)
            .map_err(map_err),
        3 => ImageBuffer::<Rgb<u8>, _>::from_raw(w, h, bytes)
            .expect("sized")
            .save(path)
            .map_err(map_err),
        c => Err(HaloError::InvalidInput(format!("cannot write {c}-channel image as png"))),
    }
}

const DEPTH_MAGIC: &[u8; 8] = b"HALODPTH";
const DEPTH_VERSION: u32 = 1;

/// Meaning of a depth-sidecar channel.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u32)]
pub enum DepthChannel {
    /// Distance along the unit ray direction.
    Depth = 1,
    /// Accumulated occupancy.
    Acc = 2,
    /// Expected EPI slope angle.
    Theta = 3,
    /// 1 where an analytic ray hit the scene.
    Hit = 4,
}

impl DepthChannel {
    fn from_code(code: u32) -> Option<Self> {
        Some(match code {
            1 => Self::Depth,
            2 => Self::Acc,
            3 => Self::Theta,
            4 => Self::Hit,
            _ => return None,
        })
    }
}

/// Float map stored next to rendered images.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthMap {
    pub width: usize,
    pub height: usize,
    pub channels: Vec<DepthChannel>,
    pub data: Vec<f32>,
}

impl DepthMap {
    pub fn channel(&self, which: DepthChannel) -> Option<Image> {
        let c = self.channels.iter().position(|&k| k == which)?;
        let n = self.channels.len();
        Some(Image::from_fn(self.width, self.height, 1, |x, y, _| {
            self.data[(y * self.width + x) * n + c] as f64
        }))
    }
}

/// Layout: magic, version, width, height, channel count, one code per
/// channel (all `u32` LE), then interleaved `f32` LE values.
pub fn write_depth(path: &Path, map: &DepthMap) -> Result<()> {
    if map.data.len() != map.width * map.height * map.channels.len() {
        return Err(HaloError::shape(map.width * map.height * map.channels.len(), map.data.len()));
    }
    let file = fs::File::create(path).map_err(|e| HaloError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut put = |bytes: &[u8]| w.write_all(bytes).map_err(|e| HaloError::io(path, e));
    put(DEPTH_MAGIC)?;
    for v in [DEPTH_VERSION, map.width as u32, map.height as u32, map.channels.len() as u32] {
        put(&v.to_le_bytes())?;
    }
    for &c in &map.channels {
        put(&(c as u32).to_le_bytes())?;
    }
    for v in &map.data {
        put(&v.to_le_bytes())?;
    }
    w.flush().map_err(|e| HaloError::io(path, e))
}

pub fn read_depth(path: &Path) -> Result<DepthMap> {
    let bytes = fs::read(path).map_err(|e| HaloError::io(path, e))?;
    let corrupt = |reason: &str| HaloError::Corrupt {
        path: path.to_path_buf(),
        reason: reason.into(),
    };
    if bytes.len() < 24 || &bytes[..8] != DEPTH_MAGIC {
        return Err(corrupt("bad depth sidecar header"));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[8 + 4 * i..12 + 4 * i].try_into().expect("4 bytes"));
    if word(0) != DEPTH_VERSION {
        return Err(corrupt("unsupported depth sidecar version"));
    }
    let (width, height, nc) = (word(1) as usize, word(2) as usize, word(3) as usize);
    let header = 24 + 4 * nc;
    let expected = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(nc))
        .and_then(|n| n.checked_mul(4))
        .and_then(|n| n.checked_add(header));
    if expected != Some(bytes.len()) {
        return Err(corrupt("depth sidecar length does not match header"));
    }
    let channels = (0..nc)
        .map(|i| DepthChannel::from_code(word(4 + i)).ok_or_else(|| corrupt("unknown channel code")))
        .collect::<Result<Vec<_>>>()?;
    let data = bytes[header..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    Ok(DepthMap {
        width,
        height,
        channels,
        data,
    })
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn png_round_trip_within_quantization() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for channels in [1, 3] {
            let img = Image::from_fn(13, 7, channels, |_, _, _| rng.random::<f64>());
            let p = dir.path().join(format!("a{channels}.png"));
            write_png(&p, &img).unwrap();
            let back = read_png(&p).unwrap();
            assert_eq!((back.width, back.height, back.channels), (13, 7, 3));
            for y in 0..7 {
                for x in 0..13 {
                    for c in 0..3 {
                        let orig = img.get(x, y, if channels == 1 { 0 } else { c });
                        assert!((back.get(x, y, c) - orig).abs() <= 1.0 / 510.0 + 1e-12);
                    }
                }
            }
            write_png(&p, &back).unwrap();
            assert_eq!(read_png(&p).unwrap(), back);
        }
    }

    #[test]
    fn alpha_composited_over_white() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("rgba.png");
        let buf = ImageBuffer::<image::Rgba<u8>, _>::from_raw(2, 1, vec![0, 0, 0, 0, 255, 0, 0, 255]).unwrap();
        buf.save(&p).unwrap();
        let img = read_png(&p).unwrap();
        assert_eq!(img.pixel_rgb(0, 0), [1.0; 3]);
        assert_eq!(img.pixel_rgb(1, 0), [1.0, 0.0, 0.0]);
    }

    #[test]
    fn depth_round_trip_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.depth");
        let map = DepthMap {
            width: 3,
            height: 2,
            channels: vec![DepthChannel::Depth, DepthChannel::Acc],
            data: vec![1.5, 0.25, f32::NAN, 0.0, -0.0, 1e-30, f32::INFINITY, 1.0, 3.25, 0.5, 7.0, 0.125],
        };
        write_depth(&p, &map).unwrap();
        let back = read_depth(&p).unwrap();
        assert_eq!(back.channels, map.channels);
        let bits = |m: &DepthMap| m.data.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back), bits(&map));
        assert_eq!(back.channel(DepthChannel::Acc).unwrap().get(2, 1, 0), 0.125);
    }

    #[test]
    fn missing_and_corrupt_files_error() {
        let dir = tempfile::tempdir().unwrap();
        let missing = dir.path().join("nope.png");
        assert!(matches!(read_png(&missing), Err(HaloError::Io { .. })));
        assert!(matches!(read_depth(&missing), Err(HaloError::Io { .. })));
        let junk = dir.path().join("junk.png");
        fs::write(&junk, b"not an image at all").unwrap();
        assert!(read_png(&junk).is_err());
        let junk = dir.path().join("junk.depth");
        fs::write(&junk, b"HALODPTH\x01\0\0\0\x05\0\0\0").unwrap();
        assert!(matches!(read_depth(&junk), Err(HaloError::Corrupt { .. })));
    }
}
