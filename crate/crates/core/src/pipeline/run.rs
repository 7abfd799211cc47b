use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::checkpoint::Checkpoint;
use super::config::{PipelineConfig, SceneConfig, StageConfig};
use super::eval::{evaluate_set, render_view, score_pair, RenderSettings, SetScore, ViewScore};
use super::joint::{render_lightfield_view, train_joint, JointState, LightFieldRays};
use super::train::{
    build_ray_pool, empty_ray_occupancy, heldout_depth_mae, sample_pool_rays, train_point_field, train_ray_field,
    HiGuidance, LogRecord, PixelRays, PointState, RayPool, RayState, TrainState,
};
use crate::data::{
    load_blender, load_lightfield_grid, make_lightfield_scene, make_procedural_scene, write_depth, write_png,
    LightFieldGrid, LightFieldView, PosedImageSet,
};
use crate::encoding::EncodingConfig;
use crate::error::{HaloError, Result};
use crate::fields::{PointField, RayField, SceneBounds};
use crate::freq_tuning::{criterion_sigma, sample_view_pairs, tune_frequency, OrbitDistribution, TuneReport};
use crate::rendering::Intrinsics;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Lo,
    Ray,
    Hi,
    Joint,
    All,
}

impl FromStr for Stage {
    type Err = HaloError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "lo" => Stage::Lo,
            "ray" => Stage::Ray,
            "hi" => Stage::Hi,
            "joint" => Stage::Joint,
            "all" => Stage::All,
            other => return Err(HaloError::InvalidInput(format!("unknown stage {other:?}"))),
        })
    }
}

/// Loaded training and evaluation data.
pub enum Scene {
    Posed { train: PosedImageSet, test: PosedImageSet },
    LightField {
        grid: LightFieldGrid,
        train: Vec<(usize, usize)>,
        eval: Vec<(usize, usize)>,
        theta_range: (f64, f64),
    },
}

pub fn load_scene(cfg: &SceneConfig) -> Result<Scene> {
    match cfg {
        SceneConfig::Procedural { spec, seed } => {
            let s = make_procedural_scene(spec, *seed)?;
            Ok(Scene::Posed { train: s.train, test: s.test })
        }
        SceneConfig::Blender {
            dir,
            subset,
            test_split,
            max_test_views,
        } => {
            let train = load_blender(dir, "train", subset)?;
            let mut test = load_blender(dir, test_split, &[])?;
            if let Some(n) = max_test_views {
                test.names.truncate(*n);
                test.images.truncate(*n);
                test.poses.truncate(*n);
            }
            test.bounds = train.bounds;
            Ok(Scene::Posed { train, test })
        }
        SceneConfig::LightField {
            spec,
            seed,
            train,
            eval,
        } => {
            let grid = make_lightfield_scene(spec, *seed)?;
            for &(row, col) in train.iter().chain(eval) {
                if grid.view(row, col).is_none() {
                    return Err(HaloError::MissingGridIndex { row, col });
                }
            }
            Ok(Scene::LightField {
                grid,
                train: train.clone(),
                eval: eval.clone(),
                theta_range: spec.theta_range(),
            })
        }
    }
}

/// Loads a light-field grid from disk instead of synthesizing it.
pub fn load_lightfield_scene(dir: &Path, train: &[(usize, usize)], eval: &[(usize, usize)], theta_range: (f64, f64)) -> Result<Scene> {
    let (tr, ev) = load_lightfield_grid(dir, train, eval)?;
    Ok(Scene::LightField {
        grid: LightFieldGrid {
            rows: tr.rows,
            cols: tr.cols,
            views: tr.views.into_iter().chain(ev.views).collect(),
        },
        train: train.to_vec(),
        eval: eval.to_vec(),
        theta_range,
    })
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LoReport {
    pub iterations: usize,
    pub encoding: Option<EncodingConfig>,
    /// Full training-set PSNR at evenly spaced points of this invocation.
    pub train_psnr_trace: Vec<(usize, f64)>,
    pub train_psnr: f64,
    pub test: Option<SetScore>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RayReport {
    pub iterations: usize,
    pub heldout_mae: f64,
    /// Held-out error as a fraction of `far - near`.
    pub heldout_mae_fraction: f64,
    pub heldout_rays: usize,
    pub train_mae: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct HiScore {
    pub iterations: usize,
    pub test: SetScore,
    /// Mean occupancy on held-out rays that the low-frequency field leaves empty.
    pub empty_occupancy: f64,
    pub empty_rays: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct HiReport {
    pub halo: HiScore,
    pub vanilla: Option<HiScore>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct JointReport {
    pub iterations: usize,
    pub views: Vec<ViewScore>,
    pub baseline: Option<Vec<ViewScore>>,
}

/// Metrics of every stage run so far in a run directory.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub tune: Option<TuneReport>,
    pub lo: Option<LoReport>,
    pub ray: Option<RayReport>,
    pub hi: Option<HiReport>,
    pub joint: Option<JointReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub dtype: String,
    pub threads: usize,
    pub config: PipelineConfig,
    pub stages: Vec<Stage>,
}

/// Layout: `checkpoints/`, `renders/`, `logs/`, `report.json`, `manifest.json`.
#[derive(Clone, Debug)]
pub struct RunDir {
    pub root: PathBuf,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|source| HaloError::Json {
        path: path.into(),
        source,
    })?;
    let tmp = path.with_extension("json.tmp");
    fs::write(&tmp, text + "\n").map_err(|e| HaloError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| HaloError::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| HaloError::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| HaloError::Json {
        path: path.into(),
        source,
    })
}

impl RunDir {
    pub fn create(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        for sub in ["checkpoints", "renders", "logs"] {
            let p = root.join(sub);
            fs::create_dir_all(&p).map_err(|e| HaloError::io(&p, e))?;
        }
        Ok(Self { root })
    }

    pub fn checkpoint(&self, name: &str) -> PathBuf {
        self.root.join("checkpoints").join(format!("{name}.ckpt"))
    }

    pub fn renders(&self, name: &str) -> Result<PathBuf> {
        let p = self.root.join("renders").join(name);
        fs::create_dir_all(&p).map_err(|e| HaloError::io(&p, e))?;
        Ok(p)
    }

    pub fn log_path(&self, stage: &str) -> PathBuf {
        self.root.join("logs").join(format!("{stage}.ndjson"))
    }

    pub fn report_path(&self) -> PathBuf {
        self.root.join("report.json")
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.root.join("manifest.json")
    }

    pub fn tune_path(&self) -> PathBuf {
        self.root.join("tune.json")
    }

    pub fn load_report(&self) -> Result<RunReport> {
        let p = self.report_path();
        if p.exists() {
            read_json(&p)
        } else {
            Ok(RunReport::default())
        }
    }

    pub fn update_report(&self, f: impl FnOnce(&mut RunReport)) -> Result<RunReport> {
        let mut report = self.load_report()?;
        f(&mut report);
        write_json(&self.report_path(), &report)?;
        Ok(report)
    }

    pub fn write_manifest(&self, cfg: &PipelineConfig, stages: Vec<Stage>) -> Result<()> {
        write_json(
            &self.manifest_path(),
            &Manifest {
                version: env!("CARGO_PKG_VERSION").into(),
                dtype: "f32".into(),
                threads: rayon::current_num_threads(),
                config: cfg.clone(),
                stages,
            },
        )
    }

    pub fn read_tune(&self) -> Result<Option<TuneReport>> {
        let p = self.tune_path();
        if p.exists() {
            read_json(&p).map(Some)
        } else {
            Ok(None)
        }
    }

    pub fn write_tune(&self, report: &TuneReport) -> Result<()> {
        write_json(&self.tune_path(), report)
    }
}

/// Appends log records as NDJSON lines.
struct NdjsonLog {
    out: BufWriter<File>,
    path: PathBuf,
    error: Option<HaloError>,
}

impl NdjsonLog {
    fn open(path: PathBuf, append: bool) -> Result<Self> {
        let file = OpenOptions::new()
            .create(true)
            .write(true)
            .append(append)
            .truncate(!append)
            .open(&path)
            .map_err(|e| HaloError::io(&path, e))?;
        Ok(Self {
            out: BufWriter::new(file),
            path,
            error: None,
        })
    }

    fn record(&mut self, rec: &LogRecord) {
        log::info!("{} {:>6} {:?}", rec.stage, rec.iteration, rec.losses);
        if self.error.is_some() {
            return;
        }
        let line = serde_json::to_string(rec).expect("serializable");
        if let Err(e) = writeln!(self.out, "{line}").and_then(|_| self.out.flush()) {
            self.error = Some(HaloError::io(&self.path, e));
        }
    }

    fn finish(self) -> Result<()> {
        self.error.map_or(Ok(()), Err)
    }
}

fn load_point(path: &Path) -> Result<PointState> {
    let (field, adam, meta) = Checkpoint::<f32>::load(path)?.into_point_field()?;
    Ok(TrainState {
        field,
        adam,
        iteration: meta.iteration,
    })
}

fn load_ray(path: &Path) -> Result<RayState> {
    let (field, adam, meta) = Checkpoint::<f32>::load(path)?.into_ray_field()?;
    Ok(TrainState {
        field,
        adam,
        iteration: meta.iteration,
    })
}

/// Requires every path to exist before a stage starts.
fn require(paths: &[PathBuf]) -> Result<()> {
    match paths.iter().find(|p| !p.exists()) {
        Some(p) => Err(HaloError::MissingCheckpoint(p.clone())),
        None => Ok(()),
    }
}

fn posed(scene: &Scene) -> Result<(&PosedImageSet, &PosedImageSet)> {
    match scene {
        Scene::Posed { train, test } => Ok((train, test)),
        Scene::LightField { .. } => Err(HaloError::InvalidConfig(
            "stages lo, ray and hi need a procedural or blender scene".into(),
        )),
    }
}

/// Evenly spaced stopping points of a run with `n` segments.
fn segments(start: usize, end: usize, n: usize) -> Vec<usize> {
    if end <= start {
        return vec![];
    }
    let mut out: Vec<usize> = (1..=n).map(|i| start + (end - start) * i / n).filter(|&s| s > start).collect();
    out.dedup();
    out
}

/// Orchestrates stages inside one run directory.
pub struct Pipeline {
    pub cfg: PipelineConfig,
    pub run: RunDir,
    pub resume: bool,
}

impl Pipeline {
    pub fn new(cfg: PipelineConfig, root: impl Into<PathBuf>, resume: bool) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            run: RunDir::create(root)?,
            resume,
        })
    }

    /// Runs one stage, or every stage the scene supports for `Stage::All`.
    pub fn run_stage(&self, stage: Stage) -> Result<RunReport> {
        let order: Vec<Stage> = match (stage, &self.cfg.scene) {
            (Stage::All, SceneConfig::LightField { .. }) => vec![Stage::Joint],
            (Stage::All, _) => vec![Stage::Lo, Stage::Ray, Stage::Hi],
            (s, _) => vec![s],
        };
        match order[0] {
            Stage::Ray => require(&[self.run.checkpoint("lo")])?,
            Stage::Hi => require(&[self.run.checkpoint("lo"), self.run.checkpoint("ray")])?,
            _ => {}
        }
        self.run.write_manifest(&self.cfg, order.clone())?;
        let scene = load_scene(&self.cfg.scene)?;
        for s in order {
            match s {
                Stage::Lo => self.stage_lo(&scene)?,
                Stage::Ray => self.stage_ray(&scene)?,
                Stage::Hi => self.stage_hi(&scene)?,
                Stage::Joint => self.stage_joint(&scene)?,
                Stage::All => unreachable!(),
            }
        }
        self.run.load_report()
    }

    /// The low-frequency stage config, with the tuned encoding when a tuning
    /// report exists in the run directory.
    pub fn lo_config(&self) -> Result<StageConfig> {
        let mut cfg = self.cfg.lo.clone();
        if let Some(t) = self.run.read_tune()? {
            cfg.encoding = t.chosen;
        }
        Ok(cfg)
    }

    fn resume_point(&self, name: &str, fresh: impl FnOnce() -> Result<PointState>) -> Result<PointState> {
        let path = self.run.checkpoint(name);
        if self.resume && path.exists() {
            let s = load_point(&path)?;
            log::info!("resuming {name} at iteration {}", s.iteration);
            Ok(s)
        } else {
            fresh()
        }
    }

    fn stage_lo(&self, scene: &Scene) -> Result<()> {
        let (train, test) = posed(scene)?;
        let cfg = self.lo_config()?;
        let pixels = PixelRays::from_set(train)?;
        let mut state = self.resume_point("lo", || PointState::fresh(&cfg))?;
        let mut log = NdjsonLog::open(self.run.log_path("lo"), self.resume)?;
        let settings = RenderSettings {
            samples: self.cfg.eval.samples_per_ray,
            guide: None,
        };
        let mut trace = Vec::new();
        for stop in segments(state.iteration, cfg.iterations, 4) {
            train_point_field("lo", &pixels, &cfg, None, &mut state, stop, &mut |r| log.record(r))?;
            Checkpoint::point("lo", &state.field, train.bounds, &state.adam, state.iteration).save(&self.run.checkpoint("lo"))?;
            trace.push((state.iteration, evaluate_set(&state.field, train, settings)?.0.mean_psnr));
        }
        log.finish()?;
        if !self.run.checkpoint("lo").exists() {
            Checkpoint::point("lo", &state.field, train.bounds, &state.adam, state.iteration).save(&self.run.checkpoint("lo"))?;
        }
        let train_psnr = match trace.last() {
            Some(&(_, p)) => p,
            None => evaluate_set(&state.field, train, settings)?.0.mean_psnr,
        };
        let test_score = self.write_renders("lo", &state.field, test, settings)?;
        self.run.update_report(|r| {
            r.lo = Some(LoReport {
                iterations: state.iteration,
                encoding: Some(cfg.encoding.clone()),
                train_psnr_trace: trace,
                train_psnr,
                test: Some(test_score),
            })
        })?;
        Ok(())
    }

    fn pools(&self, lo: &PointField<f32>, train: &PosedImageSet) -> Result<(RayPool, RayPool)> {
        let rc = &self.cfg.ray;
        let pixels = PixelRays::from_set(train)?;
        let bounds = train.bounds;
        let pool = build_ray_pool(lo, sample_pool_rays(&pixels, &bounds, rc.pool_size, rc.seed)?, &bounds, rc.target_samples)?;
        let held = build_ray_pool(
            lo,
            sample_pool_rays(&pixels, &bounds, rc.heldout_size, rc.seed ^ 0x5eed)?,
            &bounds,
            rc.target_samples,
        )?;
        Ok((pool, held))
    }

    fn stage_ray(&self, scene: &Scene) -> Result<()> {
        let (train, _) = posed(scene)?;
        let lo = load_point(&self.run.checkpoint("lo"))?.field;
        let (pool, held) = self.pools(&lo, train)?;
        let rc = &self.cfg.ray;
        let path = self.run.checkpoint("ray");
        let mut state = if self.resume && path.exists() {
            load_ray(&path)?
        } else {
            RayState::fresh(rc, train.bounds)?
        };
        let mut log = NdjsonLog::open(self.run.log_path("ray"), self.resume)?;
        for stop in segments(state.iteration, rc.iterations, 4) {
            train_ray_field(&pool, rc, &mut state, stop, &mut |r| log.record(r))?;
            Checkpoint::ray("ray", &state.field, &state.adam, state.iteration).save(&path)?;
        }
        log.finish()?;
        if !path.exists() {
            Checkpoint::ray("ray", &state.field, &state.adam, state.iteration).save(&path)?;
        }
        let (mae, n) = heldout_depth_mae(&state.field, &held, rc.tau);
        let (train_mae, _) = heldout_depth_mae(&state.field, &pool, rc.tau);
        let range = train.bounds.far - train.bounds.near;
        self.run.update_report(|r| {
            r.ray = Some(RayReport {
                iterations: state.iteration,
                heldout_mae: mae,
                heldout_mae_fraction: mae / range,
                heldout_rays: n,
                train_mae,
            })
        })?;
        Ok(())
    }

    fn train_hi(&self, name: &str, cfg: &StageConfig, pixels: &PixelRays, guidance: &HiGuidance, bounds: SceneBounds) -> Result<PointState> {
        let path = self.run.checkpoint(name);
        let mut state = self.resume_point(name, || PointState::fresh(cfg))?;
        let mut log = NdjsonLog::open(self.run.log_path(name), self.resume)?;
        for stop in segments(state.iteration, cfg.iterations, 4) {
            train_point_field(name, pixels, cfg, Some(guidance), &mut state, stop, &mut |r| log.record(r))?;
            Checkpoint::point(name, &state.field, bounds, &state.adam, state.iteration).save(&path)?;
        }
        log.finish()?;
        if !path.exists() {
            Checkpoint::point(name, &state.field, bounds, &state.adam, state.iteration).save(&path)?;
        }
        Ok(state)
    }

    fn stage_hi(&self, scene: &Scene) -> Result<()> {
        let (train, test) = posed(scene)?;
        let lo = load_point(&self.run.checkpoint("lo"))?.field;
        let ray = load_ray(&self.run.checkpoint("ray"))?.field;
        let (pool, held) = self.pools(&lo, train)?;
        let pixels = PixelRays::from_set(train)?;
        let guidance = HiGuidance {
            ray_field: Some(&ray),
            empty_pool: Some(&pool),
        };
        let tau = self.cfg.hi.weights.tau;
        let samples = self.cfg.eval.samples_per_ray;
        let score = |name: &str, cfg: &StageConfig| -> Result<HiScore> {
            let state = self.train_hi(name, cfg, &pixels, &guidance, train.bounds)?;
            let settings = RenderSettings {
                samples,
                guide: (!cfg.is_vanilla()).then_some((&ray, cfg.guide)),
            };
            let test_score = self.write_renders(name, &state.field, test, settings)?;
            let (occ, n) = empty_ray_occupancy(&state.field, &held, tau, samples)?;
            Ok(HiScore {
                iterations: state.iteration,
                test: test_score,
                empty_occupancy: occ,
                empty_rays: n,
            })
        };
        let halo = score("hi", &self.cfg.hi)?;
        let vanilla = if self.cfg.compare_vanilla {
            Some(score("vanilla", &self.cfg.hi.vanilla())?)
        } else {
            None
        };
        self.run.update_report(|r| r.hi = Some(HiReport { halo, vanilla }))?;
        Ok(())
    }

    fn write_renders(&self, name: &str, field: &PointField<f32>, set: &PosedImageSet, settings: RenderSettings) -> Result<SetScore> {
        let dir = self.run.renders(name)?;
        let (score, renders) = evaluate_set(field, set, settings)?;
        for (n, (img, depth)) in set.names.iter().zip(&renders) {
            let stem = Path::new(n).file_stem().and_then(|s| s.to_str()).unwrap_or(n);
            write_png(&dir.join(format!("{stem}.png")), img)?;
            write_depth(&dir.join(format!("{stem}.depth")), depth)?;
        }
        Ok(score)
    }

    fn stage_joint(&self, scene: &Scene) -> Result<()> {
        let Scene::LightField {
            grid,
            train,
            eval,
            theta_range,
        } = scene
        else {
            return Err(HaloError::InvalidConfig("stage joint needs a light_field scene".into()));
        };
        let views: Vec<&LightFieldView> = train.iter().filter_map(|&(r, c)| grid.view(r, c)).collect();
        let rays = LightFieldRays::from_views(&views)?;
        let jc = &self.cfg.joint;
        let (pp, rp) = (self.run.checkpoint("joint_point"), self.run.checkpoint("joint_ray"));
        let mut state = if self.resume && pp.exists() && rp.exists() {
            let point = load_point(&pp)?;
            let ray = load_ray(&rp)?;
            if point.iteration != ray.iteration {
                return Err(HaloError::Corrupt {
                    path: rp,
                    reason: "joint checkpoints disagree on the iteration".into(),
                });
            }
            JointState { point, ray }
        } else {
            JointState::fresh(jc, *theta_range)?
        };
        let mut log = NdjsonLog::open(self.run.log_path("joint"), self.resume)?;
        let save = |s: &JointState| -> Result<()> {
            Checkpoint::point("joint", &s.point.field, s.ray.field.bounds, &s.point.adam, s.point.iteration).save(&pp)?;
            Checkpoint::ray("joint", &s.ray.field, &s.ray.adam, s.ray.iteration).save(&rp)
        };
        for stop in segments(state.point.iteration, jc.iterations, 4) {
            train_joint(&rays, jc, &mut state, stop, &mut |r| log.record(r))?;
            save(&state)?;
        }
        log.finish()?;
        if !pp.exists() || !rp.exists() {
            save(&state)?;
        }
        let dir = self.run.renders("joint")?;
        let mut scores = Vec::new();
        for &(row, col) in eval {
            let view = grid.view(row, col).ok_or(HaloError::MissingGridIndex { row, col })?;
            let img = render_lightfield_view(&state, jc, view.u, view.v, view.image.width, view.image.height)?;
            let name = format!("view_{row:02}_{col:02}");
            write_png(&dir.join(format!("{name}.png")), &img)?;
            scores.push(score_pair(&name, &img, &view.image)?);
        }
        self.run.update_report(|r| {
            r.joint = Some(JointReport {
                iterations: state.point.iteration,
                views: scores,
                baseline: None,
            })
        })?;
        Ok(())
    }

    /// Frequency tuning on the training views: each candidate encoding is
    /// trained briefly and scored by the spectral criterion.
    pub fn tune(&self) -> Result<TuneReport> {
        let scene = load_scene(&self.cfg.scene)?;
        let (train, _) = posed(&scene)?;
        let tc = &self.cfg.tune;
        let pixels = PixelRays::from_set(train)?;
        let n = train.len().max(1) as f64;
        let dist = OrbitDistribution {
            distance: train.camera_distances().sum::<f64>() / n,
            elevation: tc.elevation,
        };
        let pairs = sample_view_pairs(&dist, &tc.criterion, &mut ChaCha8Rng::seed_from_u64(tc.seed));
        let res = tc.criterion.render_resolution;
        let intr = Intrinsics::from_camera_angle_x(res, res, train.camera_angle_x);
        let samples = self.cfg.eval.samples_per_ray;
        let mut log = NdjsonLog::open(self.run.log_path("tune"), false)?;
        let report = tune_frequency(&tc.candidates, tc.criterion.threshold, |enc| {
            let cfg = StageConfig {
                encoding: enc.clone(),
                iterations: tc.short_iterations,
                ..self.cfg.lo.clone()
            };
            let mut state = PointState::fresh(&cfg)?;
            train_point_field("tune", &pixels, &cfg, None, &mut state, cfg.iterations, &mut |r| log.record(r))?;
            criterion_sigma(&pairs, tc.criterion.mask_percentile, |pose| {
                Ok(render_view(&state.field, pose, &intr, &train.bounds, RenderSettings { samples, guide: None })?.0)
            })
        })?;
        log.finish()?;
        self.run.write_tune(&report)?;
        self.run.update_report(|r| r.tune = Some(report.clone()))?;
        Ok(report)
    }
}

/// Loads a trained point field, and the ray field guiding it when present.
pub fn load_point_field(path: &Path) -> Result<(PointField<f32>, SceneBounds)> {
    let (field, _, meta) = Checkpoint::<f32>::load(path)?.into_point_field()?;
    Ok((field, meta.bounds))
}

pub fn load_ray_field(path: &Path) -> Result<RayField<f32>> {
    Ok(Checkpoint::<f32>::load(path)?.into_ray_field()?.0)
}
