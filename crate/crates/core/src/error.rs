use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum HaloError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: String, actual: String },

    #[error("degenerate EPI slope: |tan(theta)| = {0:e} is below tolerance")]
    DegenerateSlope(f64),

    #[error("ray misses the bounding sphere of radius {radius}")]
    RayMissesSphere { radius: f64 },

    #[error("non-rigid pose: {0}")]
    NonRigidPose(String),

    #[error("training diverged at iteration {iteration}: {what} is not finite")]
    Diverged { iteration: usize, what: String },

    #[error("missing prerequisite checkpoint: {0}")]
    MissingCheckpoint(PathBuf),

    #[error("unknown subset name: {0}")]
    UnknownSubsetName(String),

    #[error("missing light-field grid index ({row}, {col})")]
    MissingGridIndex { row: usize, col: usize },

    #[error("corrupt file {path}: {reason}")]
    Corrupt { path: PathBuf, reason: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("image error on {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
}

pub type Result<T, E = HaloError> = std::result::Result<T, E>;

impl HaloError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HaloError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn shape(expected: impl ToString, actual: impl ToString) -> Self {
        HaloError::ShapeMismatch {
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    /// Short stable identifier, used by the CLI's machine-parsable error line.
    pub fn kind(&self) -> &'static str {
        match self {
            HaloError::InvalidInput(_) => "invalid_input",
            HaloError::InvalidConfig(_) => "invalid_config",
            HaloError::ShapeMismatch { .. } => "shape_mismatch",
            HaloError::DegenerateSlope(_) => "degenerate_slope",
            HaloError::RayMissesSphere { .. } => "ray_misses_sphere",
            HaloError::NonRigidPose(_) => "non_rigid_pose",
            HaloError::Diverged { .. } => "diverged",
            HaloError::MissingCheckpoint(_) => "missing_prerequisite_checkpoint",
            HaloError::UnknownSubsetName(_) => "unknown_subset_name",
            HaloError::MissingGridIndex { .. } => "missing_grid_index",
            HaloError::Corrupt { .. } => "corrupt_file",
            HaloError::Io { .. } => "io",
            HaloError::Json { .. } => "json",
            HaloError::Image { .. } => "image",
        }
    }
}
