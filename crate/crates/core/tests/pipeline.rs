use std::fs;
use std::path::Path;

use halo_core::data::{make_procedural_scene, ProceduralSpec};
use halo_core::pipeline::{
    build_ray_pool, sample_pool_rays, train_point_field, train_ray_field, Checkpoint, HiGuidance, PipelineConfig,
    Pipeline, PixelRays, PointState, RayStageConfig, RayState, RunDir, SceneConfig, Stage, StageConfig,
};

fn tiny_config() -> PipelineConfig {
    let mut cfg = PipelineConfig::default();
    cfg.scene = SceneConfig::Procedural {
        spec: ProceduralSpec { train_views: 2, test_views: 1, width: 24, height: 24, ..Default::default() },
        seed: 3,
    };
    for stage in [&mut cfg.lo, &mut cfg.hi] {
        stage.iterations = 12;
        stage.batch_size = 32;
        stage.empty_batch_size = 32;
        stage.samples_per_ray = 8;
        stage.arch.width = 16;
        stage.arch.color_width = 8;
    }
    cfg.ray.iterations = 12;
    cfg.ray.batch_size = 32;
    cfg.ray.width = 16;
    cfg.ray.pool_size = 256;
    cfg.ray.heldout_size = 64;
    cfg.ray.target_samples = 16;
    cfg.eval.samples_per_ray = 8;
    cfg.eval.probe_rays = 64;
    cfg
}

fn bytes(run: &RunDir, name: &str) -> Vec<u8> {
    fs::read(run.checkpoint(name)).unwrap()
}

fn run_all(cfg: &PipelineConfig, root: &Path) -> RunDir {
    let p = Pipeline::new(cfg.clone(), root, false).unwrap();
    p.run_stage(Stage::All).unwrap();
    p.run
}

#[test]
fn same_seeds_give_identical_checkpoints() {
    let cfg = tiny_config();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (ra, rb) = (run_all(&cfg, a.path()), run_all(&cfg, b.path()));
    for name in ["lo", "ray", "hi"] {
        assert!(bytes(&ra, name) == bytes(&rb, name), "{name}");
    }
    let ca = fs::read_to_string(ra.report_path()).unwrap();
    assert_eq!(ca, fs::read_to_string(rb.report_path()).unwrap());

    let mut other = cfg.clone();
    other.reseed(9);
    let c = tempfile::tempdir().unwrap();
    let rc = run_all(&other, c.path());
    assert!(bytes(&ra, "lo") != bytes(&rc, "lo"));
}

#[test]
fn later_stages_leave_earlier_checkpoints_untouched() {
    let cfg = tiny_config();
    let dir = tempfile::tempdir().unwrap();
    let p = Pipeline::new(cfg, dir.path(), false).unwrap();
    p.run_stage(Stage::Lo).unwrap();
    let lo = bytes(&p.run, "lo");
    p.run_stage(Stage::Ray).unwrap();
    assert!(bytes(&p.run, "lo") == lo);
    let ray = bytes(&p.run, "ray");
    p.run_stage(Stage::Hi).unwrap();
    assert!(bytes(&p.run, "lo") == lo);
    assert!(bytes(&p.run, "ray") == ray);
}

#[test]
fn resumed_run_matches_uninterrupted_run() {
    let cfg = tiny_config();
    let full = tempfile::tempdir().unwrap();
    let p = Pipeline::new(cfg.clone(), full.path(), false).unwrap();
    p.run_stage(Stage::Lo).unwrap();

    // interrupted after 5 of 12 steps
    let SceneConfig::Procedural { spec, seed } = &cfg.scene else { unreachable!() };
    let scene = make_procedural_scene(spec, *seed).unwrap();
    let pixels = PixelRays::from_set(&scene.train).unwrap();
    let mut state = PointState::fresh(&cfg.lo).unwrap();
    train_point_field("lo", &pixels, &cfg.lo, None, &mut state, 5, &mut |_| {}).unwrap();
    let split = tempfile::tempdir().unwrap();
    let run = RunDir::create(split.path()).unwrap();
    Checkpoint::point("lo", &state.field, scene.train.bounds, &state.adam, state.iteration)
        .save(&run.checkpoint("lo"))
        .unwrap();

    let resumed = Pipeline::new(cfg, split.path(), true).unwrap();
    resumed.run_stage(Stage::Lo).unwrap();
    assert!(bytes(&p.run, "lo") == bytes(&resumed.run, "lo"));
}

#[test]
fn zero_iterations_keep_initial_parameters() {
    let cfg = tiny_config();
    let SceneConfig::Procedural { spec, seed } = &cfg.scene else { unreachable!() };
    let scene = make_procedural_scene(spec, *seed).unwrap();
    let pixels = PixelRays::from_set(&scene.train).unwrap();

    let lo_cfg = StageConfig { iterations: 0, ..cfg.lo.clone() };
    let mut state = PointState::fresh(&lo_cfg).unwrap();
    let init = state.field.params.clone();
    train_point_field("lo", &pixels, &lo_cfg, None, &mut state, 10, &mut |_| {}).unwrap();
    assert_eq!(state.iteration, 0);
    assert_eq!(state.field.params, init);

    let bounds = scene.train.bounds;
    let rc = RayStageConfig { iterations: 0, ..cfg.ray.clone() };
    let pool = build_ray_pool(&state.field, sample_pool_rays(&pixels, &bounds, 32, 0).unwrap(), &bounds, 8).unwrap();
    let mut ray = RayState::fresh(&rc, bounds).unwrap();
    let init = ray.field.params.clone();
    train_ray_field(&pool, &rc, &mut ray, 10, &mut |_| {}).unwrap();
    assert_eq!(ray.field.params, init);
}

#[test]
fn vanilla_config_ignores_guidance() {
    let cfg = tiny_config();
    let SceneConfig::Procedural { spec, seed } = &cfg.scene else { unreachable!() };
    let scene = make_procedural_scene(spec, *seed).unwrap();
    let pixels = PixelRays::from_set(&scene.train).unwrap();
    let bounds = scene.train.bounds;

    let mut lo = PointState::fresh(&cfg.lo).unwrap();
    train_point_field("lo", &pixels, &cfg.lo, None, &mut lo, cfg.lo.iterations, &mut |_| {}).unwrap();
    let pool = build_ray_pool(&lo.field, sample_pool_rays(&pixels, &bounds, 128, 1).unwrap(), &bounds, 16).unwrap();
    let mut ray = RayState::fresh(&cfg.ray, bounds).unwrap();
    train_ray_field(&pool, &cfg.ray, &mut ray, cfg.ray.iterations, &mut |_| {}).unwrap();

    let vanilla = cfg.hi.vanilla();
    assert!(vanilla.is_vanilla() && !cfg.hi.is_vanilla());
    let guidance = HiGuidance { ray_field: Some(&ray.field), empty_pool: Some(&pool) };
    let mut guided = PointState::fresh(&vanilla).unwrap();
    train_point_field("hi", &pixels, &vanilla, Some(&guidance), &mut guided, vanilla.iterations, &mut |_| {}).unwrap();
    let mut plain = PointState::fresh(&vanilla).unwrap();
    train_point_field("hi", &pixels, &vanilla, None, &mut plain, vanilla.iterations, &mut |_| {}).unwrap();
    assert_eq!(guided.field.params, plain.field.params);

    let mut halo = PointState::fresh(&cfg.hi).unwrap();
    train_point_field("hi", &pixels, &cfg.hi, Some(&guidance), &mut halo, cfg.hi.iterations, &mut |_| {}).unwrap();
    assert_ne!(halo.field.params, plain.field.params);
}

#[test]
fn checkpoints_reload_to_identical_bytes() {
    let cfg = tiny_config();
    let dir = tempfile::tempdir().unwrap();
    let run = run_all(&cfg, dir.path());
    for name in ["lo", "ray", "hi"] {
        let path = run.checkpoint(name);
        let ckpt = Checkpoint::<f32>::load(&path).unwrap();
        assert!(ckpt.to_bytes() == fs::read(&path).unwrap(), "{name}");
    }
}

#[test]
fn low_frequency_stage_fits_the_procedural_scene() {
    let dir = tempfile::tempdir().unwrap();
    let p = Pipeline::new(PipelineConfig::default(), dir.path(), false).unwrap();
    let report = p.run_stage(Stage::Lo).unwrap().lo.unwrap();
    assert_eq!(report.iterations, 2000);
    let trace: Vec<f64> = report.train_psnr_trace.iter().map(|&(_, p)| p).collect();
    assert!(trace.windows(2).all(|w| w[1] > w[0]), "{trace:?}");
    assert!(report.train_psnr > 20.0, "{}", report.train_psnr);
}
