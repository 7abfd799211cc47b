use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::io::{read_png, write_png};
use crate::encoding::TwoPlaneGeometry;
use crate::error::{HaloError, Result};
use crate::raster::Image;

/// Maps grid index `i` on a lattice of `n` to `[-1, 1]`.
pub fn grid_coordinate(i: usize, n: usize) -> f64 {
    if n <= 1 {
        0.0
    } else {
        2.0 * i as f64 / (n - 1) as f64 - 1.0
    }
}

/// Maps the centre of pixel `i` in a span of `n` pixels to `[-1, 1]`.
pub fn pixel_coordinate(i: usize, n: usize) -> f64 {
    2.0 * (i as f64 + 0.5) / n as f64 - 1.0
}

#[derive(Clone, Debug, PartialEq)]
pub struct LightFieldView {
    pub row: usize,
    pub col: usize,
    /// Camera-plane coordinates: `u` from the column, `v` from the row.
    pub u: f64,
    pub v: f64,
    pub image: Image,
}

/// Views on a `rows x cols` camera lattice.
#[derive(Clone, Debug, PartialEq)]
pub struct LightFieldGrid {
    pub rows: usize,
    pub cols: usize,
    pub views: Vec<LightFieldView>,
}

impl LightFieldGrid {
    pub fn view(&self, row: usize, col: usize) -> Option<&LightFieldView> {
        self.views.iter().find(|v| v.row == row && v.col == col)
    }
}

fn parse_index(file: &str) -> Option<(usize, usize)> {
    let stem = file.strip_suffix(".png")?;
    let mut parts = stem.rsplitn(3, '_');
    let col = parts.next()?.parse().ok()?;
    let row = parts.next()?.parse().ok()?;
    parts.next()?;
    Some((row, col))
}

/// Reads every `name_ROW_COL.png` in `dir`; the lattice size is one past the
/// largest index seen. Returns the training and evaluation selections.
pub fn load_lightfield_grid(
    dir: &Path,
    train_indices: &[(usize, usize)],
    eval_indices: &[(usize, usize)],
) -> Result<(LightFieldGrid, LightFieldGrid)> {
    let entries = fs::read_dir(dir).map_err(|e| HaloError::io(dir, e))?;
    let mut files = BTreeMap::new();
    for entry in entries {
        let entry = entry.map_err(|e| HaloError::io(dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if let Some(idx) = parse_index(&name) {
            if files.insert(idx, entry.path()).is_some() {
                return Err(HaloError::InvalidInput(format!("duplicate grid index {idx:?}")));
            }
        }
    }
    let rows = files.keys().map(|k| k.0 + 1).max().unwrap_or(0);
    let cols = files.keys().map(|k| k.1 + 1).max().unwrap_or(0);
    let load = |indices: &[(usize, usize)]| -> Result<LightFieldGrid> {
        let mut views = Vec::with_capacity(indices.len());
        for &(row, col) in indices {
            let path = files.get(&(row, col)).ok_or(HaloError::MissingGridIndex { row, col })?;
            let image = read_png(path)?;
            if let Some(first) = views.first() {
                let first: &LightFieldView = first;
                first.image.same_shape(&image)?;
            }
            views.push(LightFieldView {
                row,
                col,
                u: grid_coordinate(col, cols),
                v: grid_coordinate(row, rows),
                image,
            });
        }
        Ok(LightFieldGrid { rows, cols, views })
    };
    Ok((load(train_indices)?, load(eval_indices)?))
}

pub fn write_lightfield_grid(dir: &Path, name: &str, grid: &LightFieldGrid) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| HaloError::io(dir, e))?;
    for v in &grid.views {
        write_png(&dir.join(format!("{name}_{:02}_{:02}.png", v.row, v.col)), &v.image)?;
    }
    Ok(())
}

/// Procedural two-plane scene: a checkered card floating in front of a
/// striped backdrop.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LightFieldSpec {
    pub grid: usize,
    pub width: usize,
    pub height: usize,
    pub baseline: f64,
    pub tan_half_fov: f64,
    pub card_depth: f64,
    pub card_half_size: f64,
    pub backdrop_depth: f64,
    pub checker_cells: usize,
}

impl Default for LightFieldSpec {
    fn default() -> Self {
        Self {
            grid: 17,
            width: 48,
            height: 48,
            baseline: 0.25,
            tan_half_fov: 0.5,
            card_depth: 2.0,
            card_half_size: 0.5,
            backdrop_depth: 4.0,
            checker_cells: 4,
        }
    }
}

impl LightFieldSpec {
    pub fn geometry(&self) -> TwoPlaneGeometry {
        TwoPlaneGeometry {
            baseline: self.baseline,
            tan_half_fov: self.tan_half_fov,
        }
    }

    /// Slope-angle range covering the scene with a margin.
    pub fn theta_range(&self) -> (f64, f64) {
        let g = self.geometry();
        (g.theta_of_depth(0.75 * self.card_depth), g.theta_of_depth(1.25 * self.backdrop_depth))
    }

    fn validate(&self) -> Result<()> {
        if self.grid < 2 || self.width == 0 || self.height == 0 {
            return Err(HaloError::InvalidConfig("light-field grid needs at least 2x2 views".into()));
        }
        if !(self.baseline > 0.0 && self.tan_half_fov > 0.0 && 0.0 < self.card_depth && self.card_depth < self.backdrop_depth) {
            return Err(HaloError::InvalidConfig("light-field geometry is inconsistent".into()));
        }
        Ok(())
    }
}

fn trace(spec: &LightFieldSpec, o: Vector3<f64>, d: Vector3<f64>, phase: f64) -> [f64; 3] {
    let tc = (spec.card_depth - o.z) / d.z;
    let p = o + tc * d;
    let h = spec.card_half_size;
    if p.x.abs() <= h && p.y.abs() <= h {
        let cell = |x: f64| ((x + h) / (2.0 * h) * spec.checker_cells as f64).floor() as i64;
        return if (cell(p.x) + cell(p.y)) % 2 == 0 {
            [0.9, 0.85, 0.2]
        } else {
            [0.15, 0.2, 0.6]
        };
    }
    let tb = (spec.backdrop_depth - o.z) / d.z;
    let q = o + tb * d;
    let stripe = 0.5 + 0.5 * (3.0 * q.x + phase).sin() * (2.0 * q.y).cos();
    [0.3 + 0.5 * stripe, 0.6 - 0.3 * stripe, 0.4]
}

/// Renders the full lattice of views. The seed shifts the backdrop pattern.
pub fn make_lightfield_scene(spec: &LightFieldSpec, seed: u64) -> Result<LightFieldGrid> {
    spec.validate()?;
    let phase = ChaCha8Rng::seed_from_u64(seed).random::<f64>() * std::f64::consts::TAU;
    let geom = spec.geometry();
    let mut views = Vec::with_capacity(spec.grid * spec.grid);
    for row in 0..spec.grid {
        for col in 0..spec.grid {
            let (u, v) = (grid_coordinate(col, spec.grid), grid_coordinate(row, spec.grid));
            let o = geom.camera_origin(u, v);
            let image = Image::from_fn(spec.width, spec.height, 3, {
                let mut cache = (usize::MAX, usize::MAX, [0.0; 3]);
                move |x, y, c| {
                    if (cache.0, cache.1) != (x, y) {
                        let d = geom.ray_direction(pixel_coordinate(x, spec.width), pixel_coordinate(y, spec.height));
                        cache = (x, y, trace(spec, o, d, phase));
                    }
                    cache.2[c]
                }
            });
            views.push(LightFieldView { row, col, u, v, image });
        }
    }
    Ok(LightFieldGrid {
        rows: spec.grid,
        cols: spec.grid,
        views,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const CORNERS: [(usize, usize); 4] = [(4, 4), (4, 12), (12, 4), (12, 12)];
    const EVAL: [(usize, usize); 4] = [(8, 6), (8, 10), (6, 8), (10, 8)];

    #[test]
    fn coordinates() {
        assert_eq!(grid_coordinate(8, 17), 0.0);
        assert_eq!(grid_coordinate(0, 17), -1.0);
        assert_eq!(grid_coordinate(16, 17), 1.0);
        assert_eq!(pixel_coordinate(0, 2), -0.5);
        assert_eq!(parse_index("scene_04_12.png"), Some((4, 12)));
        assert_eq!(parse_index("my_scene_4_12.png"), Some((4, 12)));
        assert_eq!(parse_index("4_12.png"), None);
    }

    #[test]
    fn corner_and_eval_selection_from_disk() {
        let dir = tempfile::tempdir().unwrap();
        let spec = LightFieldSpec {
            width: 8,
            height: 6,
            ..Default::default()
        };
        let grid = make_lightfield_scene(&spec, 1).unwrap();
        write_lightfield_grid(dir.path(), "toy", &grid).unwrap();
        let (train, eval) = load_lightfield_grid(dir.path(), &CORNERS, &EVAL).unwrap();
        assert_eq!((train.views.len(), eval.views.len()), (4, 4));
        assert_eq!((train.rows, train.cols), (17, 17));
        assert_eq!((train.views[1].u, train.views[1].v), (0.5, -0.5));
        let c = grid.view(4, 12).unwrap();
        assert!(c.image.data.iter().zip(&train.views[1].image.data).all(|(a, b)| (a - b).abs() <= 1.0 / 510.0));
        let (_, center) = load_lightfield_grid(dir.path(), &[], &[(8, 8)]).unwrap();
        assert_eq!((center.views[0].u, center.views[0].v), (0.0, 0.0));
        assert!(matches!(
            load_lightfield_grid(dir.path(), &[(17, 0)], &[]),
            Err(HaloError::MissingGridIndex { row: 17, col: 0 })
        ));
    }

    #[test]
    fn card_disparity_follows_geometry() {
        let spec = LightFieldSpec::default();
        let g = spec.geometry();
        // a card point seen by camera (u, v) lands where the projection says
        let p = Vector3::new(0.1, -0.2, spec.card_depth);
        for (u, v) in [(-1.0, 0.0), (0.5, 0.5)] {
            let (s, t) = g.project(&p, u, v);
            let d = g.ray_direction(s, t);
            let o = g.camera_origin(u, v);
            let hit = o + (spec.card_depth / d.z) * d;
            assert!((hit - p).norm() < 1e-12);
        }
        let (lo, hi) = spec.theta_range();
        assert!(lo < g.theta_of_depth(spec.card_depth) && g.theta_of_depth(spec.backdrop_depth) < hi);
        assert!(hi < std::f64::consts::FRAC_PI_2);
    }
}
