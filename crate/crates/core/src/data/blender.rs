use std::fs;
use std::path::Path;

use nalgebra::Matrix4;
use serde::{Deserialize, Serialize};

use super::io::{read_png, write_png};
use super::PosedImageSet;
use crate::error::{HaloError, Result};
use crate::fields::SceneBounds;
use crate::rendering::check_rigid;

const RIGID_TOL: f64 = 1e-6;
const DEFAULT_NEAR: f64 = 2.0;
const DEFAULT_FAR: f64 = 6.0;

#[derive(Serialize, Deserialize)]
struct Transforms {
    camera_angle_x: f64,
    frames: Vec<Frame>,
}

#[derive(Serialize, Deserialize)]
struct Frame {
    file_path: String,
    transform_matrix: [[f64; 4]; 4],
}

fn frame_name(file_path: &str) -> String {
    let base = file_path.rsplit('/').next().unwrap_or(file_path);
    if base.ends_with(".png") {
        base.to_string()
    } else {
        format!("{base}.png")
    }
}

/// Loads `transforms_{split}.json` from `dir`. Frames are ordered by file
/// name; a non-empty `subset` restricts loading to those names (e.g.
/// `"r_2.png"`). Bounds default to near 2, far 6.
pub fn load_blender(dir: &Path, split: &str, subset: &[String]) -> Result<PosedImageSet> {
    let json_path = dir.join(format!("transforms_{split}.json"));
    let text = fs::read_to_string(&json_path).map_err(|e| HaloError::io(&json_path, e))?;
    let tf: Transforms = serde_json::from_str(&text).map_err(|source| HaloError::Json {
        path: json_path.clone(),
        source,
    })?;
    let mut frames: Vec<(String, Frame)> = tf.frames.into_iter().map(|f| (frame_name(&f.file_path), f)).collect();
    frames.sort_by(|a, b| a.0.cmp(&b.0));
    if let Some(unknown) = subset.iter().find(|s| !frames.iter().any(|(n, _)| n == *s)) {
        return Err(HaloError::UnknownSubsetName(unknown.clone()));
    }
    if !subset.is_empty() {
        frames.retain(|(n, _)| subset.contains(n));
    }

    let mut set = PosedImageSet {
        names: Vec::new(),
        images: Vec::new(),
        poses: Vec::new(),
        camera_angle_x: tf.camera_angle_x,
        bounds: SceneBounds {
            near: DEFAULT_NEAR,
            far: DEFAULT_FAR,
            radius: 1.0,
            theta: None,
        },
        split: split.to_string(),
    };
    for (name, frame) in frames {
        let m = frame.transform_matrix;
        let pose = Matrix4::from_fn(|r, c| m[r][c]);
        check_rigid(&pose, RIGID_TOL)?;
        let rel = frame.file_path.trim_start_matches("./");
        let rel = if rel.ends_with(".png") { rel.to_string() } else { format!("{rel}.png") };
        let image = read_png(&dir.join(rel))?;
        if let Some(first) = set.images.first() {
            first.same_shape(&image)?;
        }
        set.names.push(name);
        set.images.push(image);
        set.poses.push(pose);
    }
    set.bounds = SceneBounds::from_camera_distances(DEFAULT_NEAR, DEFAULT_FAR, set.camera_distances())?;
    Ok(set)
}

/// Writes `set` in the same layout `load_blender` reads.
pub fn write_blender(dir: &Path, set: &PosedImageSet) -> Result<()> {
    let sub = dir.join(&set.split);
    fs::create_dir_all(&sub).map_err(|e| HaloError::io(&sub, e))?;
    let mut frames = Vec::new();
    for ((name, image), pose) in set.names.iter().zip(&set.images).zip(&set.poses) {
        write_png(&sub.join(name), image)?;
        let stem = name.trim_end_matches(".png");
        frames.push(Frame {
            file_path: format!("./{}/{stem}", set.split),
            transform_matrix: std::array::from_fn(|r| std::array::from_fn(|c| pose[(r, c)])),
        });
    }
    let tf = Transforms {
        camera_angle_x: set.camera_angle_x,
        frames,
    };
    let path = dir.join(format!("transforms_{}.json", set.split));
    let text = serde_json::to_string_pretty(&tf).expect("serializable");
    fs::write(&path, text).map_err(|e| HaloError::io(&path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{make_procedural_scene, ProceduralSpec};

    fn fixture(n: usize) -> (tempfile::TempDir, PosedImageSet) {
        let dir = tempfile::tempdir().unwrap();
        let spec = ProceduralSpec {
            train_views: n,
            test_views: 0,
            width: 12,
            height: 12,
            ..ProceduralSpec::default()
        };
        let mut scene = make_procedural_scene(&spec, 3).unwrap();
        scene.train.names = (0..n).map(|i| format!("r_{i}.png")).collect();
        write_blender(dir.path(), &scene.train).unwrap();
        (dir, scene.train)
    }

    #[test]
    fn subset_selects_named_frames() {
        let (dir, _) = fixture(12);
        let names: Vec<String> = [2, 16, 26, 55, 73, 76, 86, 93]
            .iter()
            .map(|i| format!("r_{}.png", i % 12))
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        let set = load_blender(dir.path(), "train", &names).unwrap();
        assert_eq!(set.len(), names.len());
        let eight: Vec<String> = (0..8).map(|i| format!("r_{i}.png")).collect();
        assert_eq!(load_blender(dir.path(), "train", &eight).unwrap().len(), 8);
    }

    #[test]
    fn empty_subset_loads_split_in_lexicographic_order() {
        let (dir, orig) = fixture(11);
        let set = load_blender(dir.path(), "train", &[]).unwrap();
        assert_eq!(set.len(), 11);
        let mut sorted = set.names.clone();
        sorted.sort();
        assert_eq!(set.names, sorted);
        assert_eq!(set.names[2], "r_10.png");
        assert_eq!((set.bounds.near, set.bounds.far), (2.0, 6.0));
        let i = orig.names.iter().position(|n| n == "r_10.png").unwrap();
        assert_eq!(set.poses[2], orig.poses[i]);
        for p in &set.poses {
            let r = p.fixed_view::<3, 3>(0, 0);
            assert!((r.transpose() * r - nalgebra::Matrix3::identity()).norm() < 1e-6);
        }
    }

    #[test]
    fn errors_are_explicit() {
        let (dir, _) = fixture(2);
        assert!(matches!(
            load_blender(dir.path(), "train", &["r_9.png".into()]),
            Err(HaloError::UnknownSubsetName(_))
        ));
        assert!(matches!(load_blender(dir.path(), "val", &[]), Err(HaloError::Io { .. })));
        fs::write(dir.path().join("transforms_bad.json"), "{").unwrap();
        assert!(matches!(load_blender(dir.path(), "bad", &[]), Err(HaloError::Json { .. })));
        let skew = r#"{"camera_angle_x":0.7,"frames":[{"file_path":"./train/r_0","transform_matrix":[[2,0,0,0],[0,1,0,0],[0,0,1,4],[0,0,0,1]]}]}"#;
        fs::write(dir.path().join("transforms_skew.json"), skew).unwrap();
        assert!(matches!(load_blender(dir.path(), "skew", &[]), Err(HaloError::NonRigidPose(_))));
    }
}
