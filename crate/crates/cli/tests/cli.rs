use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use halo_core::data::{make_procedural_scene, write_blender, write_png, ProceduralSpec};
use halo_core::raster::Image;
use serde_json::Value;

fn halo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_halo"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("spawn halo")
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

fn error_json(out: &Output) -> Value {
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    let line = stderr.lines().last().expect("error line");
    serde_json::from_str(line).unwrap_or_else(|_| panic!("not json: {line}"))
}

const TINY: &str = r#"
compare_vanilla = true
[scene]
kind = "procedural"
[scene.spec]
train_views = 2
test_views = 1
width = 16
height = 16
[lo]
iterations = 4
batch_size = 16
samples_per_ray = 8
empty_batch_size = 16
[ray]
iterations = 4
batch_size = 16
pool_size = 64
heldout_size = 32
target_samples = 8
width = 16
[hi]
iterations = 4
batch_size = 16
samples_per_ray = 8
empty_batch_size = 16
[eval]
samples_per_ray = 8
[tune]
short_iterations = 2
candidates = [
  { type = "sinusoidal", bands = 6, scale = 1.0 },
  { type = "sinusoidal", bands = 3, scale = 1.0 },
]
[tune.criterion]
num_pairs = 1
render_resolution = 12
"#;

#[test]
fn eval_on_identical_folders() {
    let dir = tempfile::tempdir().unwrap();
    let img = Image::from_fn(16, 16, 3, |x, y, c| ((x * 7 + y * 3 + c) % 11) as f64 / 10.0);
    write_png(&dir.path().join("a.png"), &img).unwrap();
    write_png(&dir.path().join("b.png"), &img.map(|v| 1.0 - v)).unwrap();
    let d = dir.path().to_str().unwrap();
    let report = stdout_json(&halo(&["eval", "--renders", d, "--gt", d]));
    assert_eq!(report["mean_psnr"], "inf");
    assert_eq!(report["mean_ssim"], 1.0);
    assert_eq!(report["views"].as_array().unwrap().len(), 2);
}

#[test]
fn missing_prerequisite_is_a_single_json_line() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let out = halo(&["train", "--stage", "hi", "--out", out.to_str().unwrap()]);
    let err = error_json(&out);
    assert_eq!(err["error"]["kind"], "missing_prerequisite_checkpoint");
    assert!(err["error"]["message"].as_str().unwrap().contains("lo.ckpt"));
    assert_eq!(String::from_utf8_lossy(&out.stderr).trim().lines().count(), 1);
}

#[test]
fn bad_config_and_thread_count_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[lo]\nunknown_key = 3\n").unwrap();
    let out = halo(&["train", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(error_json(&out)["error"]["kind"], "invalid_config");

    let out = Command::new(env!("CARGO_BIN_EXE_halo"))
        .args(["eval", "--renders", ".", "--gt", "."])
        .env("HALO_NUM_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(error_json(&out)["error"]["kind"], "invalid_config");
}

fn file_exists(p: &Path) {
    assert!(p.exists(), "missing {}", p.display());
}

#[test]
fn end_to_end_smoke() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tiny.toml");
    fs::write(&cfg, TINY).unwrap();
    let run = dir.path().join("run");
    let (c, r) = (cfg.to_str().unwrap(), run.to_str().unwrap());

    let tune = stdout_json(&halo(&["tune-freq", "--config", c, "--out", r]));
    assert!(!tune["rows"].as_array().unwrap().is_empty());
    file_exists(&run.join("tune.json"));

    let report = stdout_json(&halo(&["train", "--config", c, "--out", r, "--stage", "all", "--seed", "3"]));
    for key in ["tune", "lo", "ray", "hi"] {
        assert!(!report[key].is_null(), "report lacks {key}");
    }
    assert!(report["hi"]["vanilla"].is_object());
    assert_eq!(report["lo"]["encoding"], tune["chosen"]);
    for name in ["lo", "ray", "hi", "vanilla"] {
        file_exists(&run.join("checkpoints").join(format!("{name}.ckpt")));
    }
    file_exists(&run.join("manifest.json"));
    file_exists(&run.join("logs/lo.ndjson"));
    let on_disk: Value = serde_json::from_str(&fs::read_to_string(run.join("report.json")).unwrap()).unwrap();
    assert_eq!(on_disk, report);

    // Resuming a finished stage keeps the checkpoint untouched.
    let before = fs::read(run.join("checkpoints/lo.ckpt")).unwrap();
    stdout_json(&halo(&["train", "--config", c, "--out", r, "--stage", "lo", "--seed", "3", "--resume"]));
    assert_eq!(fs::read(run.join("checkpoints/lo.ckpt")).unwrap(), before);

    let scene = make_procedural_scene(
        &ProceduralSpec {
            train_views: 2,
            test_views: 1,
            width: 16,
            height: 16,
            ..Default::default()
        },
        3,
    )
    .unwrap();
    let data = dir.path().join("data");
    write_blender(&data, &scene.test).unwrap();
    let renders = dir.path().join("renders");
    let poses = data.join("transforms_test.json");
    let rendered = stdout_json(&halo(&[
        "render",
        "--checkpoint",
        run.join("checkpoints/hi.ckpt").to_str().unwrap(),
        "--ray-checkpoint",
        run.join("checkpoints/ray.ckpt").to_str().unwrap(),
        "--poses",
        poses.to_str().unwrap(),
        "--out",
        renders.to_str().unwrap(),
        "--width",
        "16",
        "--height",
        "16",
        "--samples",
        "8",
    ]));
    let stem = rendered["rendered"][0].as_str().unwrap().to_string();
    file_exists(&renders.join(format!("{stem}.depth")));
    let gt = dir.path().join("gt");
    fs::create_dir_all(&gt).unwrap();
    fs::copy(data.join("test").join(format!("{stem}.png")), gt.join(format!("{stem}.png"))).unwrap();
    fs::remove_file(renders.join(format!("{stem}.depth"))).unwrap();
    let scores = stdout_json(&halo(&["eval", "--renders", renders.to_str().unwrap(), "--gt", gt.to_str().unwrap()]));
    let p = scores["mean_psnr"].as_f64().unwrap();
    assert!(p.is_finite() && p > 0.0);
}

#[test]
fn toy2d_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("toy");
    let report = stdout_json(&halo(&[
        "toy2d",
        "--out",
        out.to_str().unwrap(),
        "--iterations",
        "3",
        "--extrapolation-iterations",
        "3",
        "--repeats",
        "1",
    ]));
    assert_eq!(report["interpolation"].as_array().unwrap().len(), 2);
    assert_eq!(report["extrapolation"].as_array().unwrap().len(), 1);
    file_exists(&out.join("interpolate_high.png"));
    file_exists(&out.join("toy2d.json"));
}
