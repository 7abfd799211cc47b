//! Staged training, evaluation, checkpoints, and run directories.

mod checkpoint;
mod config;
mod eval;
mod joint;
mod run;
mod train;

pub use checkpoint::{Checkpoint, CheckpointMeta, FieldDescriptor, CHECKPOINT_VERSION};
pub use config::{
    ArchConfig, EvalConfig, JointConfig, PipelineConfig, RayStageConfig, SceneConfig, StageConfig, TuneConfig,
};
pub use eval::{evaluate_set, render_view, score_pair, RenderSettings, SetScore, ViewScore};
pub use joint::{
    lightfield_bounds, render_lightfield_view, train_joint, JointState, LightFieldRays, REFERENCE_CAMERA,
};
pub use run::{
    load_lightfield_scene, load_point_field, load_ray_field, load_scene, HiReport, HiScore, JointReport, LoReport,
    Manifest, Pipeline, RayReport, RunDir, RunReport, Scene, Stage,
};
pub use train::{
    build_ray_pool, empty_ray_occupancy, guided_depths, heldout_depth_mae, render_depths, sample_pool_rays,
    sample_positions, step_rng, train_point_field, train_ray_field, HiGuidance, LogRecord, Logger, PixelRays,
    PointState, RayPool, RayState, TrainState,
};
