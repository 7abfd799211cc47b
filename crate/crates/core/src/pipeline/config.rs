use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::data::{LightFieldSpec, ProceduralSpec};
use crate::encoding::{EncodingConfig, GaussianEncodingConfig, GaussianGroup};
use crate::error::{HaloError, Result};
use crate::fields::{PointFieldArch, RayFieldArch, RayParameterization};
use crate::freq_tuning::SpectralCriterionConfig;
use crate::losses::LossWeights;
use crate::nn::LrSchedule;
use crate::rendering::DepthGuidedConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArchConfig {
    pub depth: usize,
    pub width: usize,
    pub skip: Option<usize>,
    pub color_width: usize,
}

impl Default for ArchConfig {
    fn default() -> Self {
        Self {
            depth: 4,
            width: 64,
            skip: Some(2),
            color_width: 32,
        }
    }
}

/// Optimizer and sampling settings for a point-field stage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StageConfig {
    pub iterations: usize,
    pub batch_size: usize,
    pub lr: LrSchedule,
    pub samples_per_ray: usize,
    pub encoding: EncodingConfig,
    pub view_encoding: EncodingConfig,
    pub arch: ArchConfig,
    pub weights: LossWeights,
    pub guide: DepthGuidedConfig,
    /// Random rays per step for the empty-space term.
    pub empty_batch_size: usize,
    pub seed: u64,
    pub log_every: usize,
}

impl Default for StageConfig {
    fn default() -> Self {
        Self {
            iterations: 2000,
            batch_size: 128,
            lr: LrSchedule { start: 1e-3, end: 1e-4 },
            samples_per_ray: 32,
            encoding: EncodingConfig::sinusoidal(4, 1.0),
            view_encoding: EncodingConfig::sinusoidal(2, 1.0),
            arch: ArchConfig::default(),
            weights: LossWeights::default(),
            guide: DepthGuidedConfig::default(),
            empty_batch_size: 128,
            seed: 0,
            log_every: 50,
        }
    }
}

impl StageConfig {
    pub fn lo_default() -> Self {
        Self::default()
    }

    pub fn hi_default() -> Self {
        Self {
            iterations: 6000,
            samples_per_ray: 8,
            encoding: EncodingConfig::sinusoidal(10, 1.0),
            seed: 2,
            ..Self::default()
        }
    }

    /// Same budget and seeds with depth guidance and the empty-space term
    /// switched off.
    pub fn vanilla(&self) -> Self {
        Self {
            weights: LossWeights {
                lambda_empty: 0.0,
                ..self.weights
            },
            guide: DepthGuidedConfig {
                uniform_fraction: 1.0,
                ..self.guide
            },
            ..self.clone()
        }
    }

    pub fn is_vanilla(&self) -> bool {
        self.weights.lambda_empty == 0.0 && self.guide.uniform_fraction >= 1.0
    }

    pub fn point_arch(&self) -> PointFieldArch {
        PointFieldArch {
            depth: self.arch.depth,
            width: self.arch.width,
            skip: self.arch.skip,
            color_width: self.arch.color_width,
            point_dim: 3,
            view_dim: 3,
            point_encoding: self.encoding.clone(),
            view_encoding: self.view_encoding.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.samples_per_ray == 0 {
            return Err(HaloError::InvalidConfig("batch_size and samples_per_ray must be positive".into()));
        }
        if !(self.lr.start > 0.0 && self.lr.end > 0.0) {
            return Err(HaloError::InvalidConfig("learning rates must be positive".into()));
        }
        if !(self.guide.window_fraction > 0.0) || !(0.0..=1.0).contains(&self.guide.uniform_fraction) {
            return Err(HaloError::InvalidConfig("invalid depth-guided sampling settings".into()));
        }
        self.encoding.validate()?;
        self.view_encoding.validate()?;
        self.weights.validate()
    }
}

/// Ray-field distillation settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RayStageConfig {
    pub iterations: usize,
    pub batch_size: usize,
    pub lr: LrSchedule,
    pub depth: usize,
    pub width: usize,
    pub encoding: EncodingConfig,
    /// Random rays whose low-frequency depth is precomputed for training.
    pub pool_size: usize,
    /// Fresh rays for the held-out error.
    pub heldout_size: usize,
    /// Samples per ray when rendering low-frequency targets.
    pub target_samples: usize,
    pub tau: f64,
    pub seed: u64,
    pub log_every: usize,
}

impl Default for RayStageConfig {
    fn default() -> Self {
        Self {
            iterations: 8000,
            batch_size: 512,
            lr: LrSchedule { start: 1e-3, end: 5e-5 },
            depth: 4,
            width: 128,
            encoding: EncodingConfig::sinusoidal(3, 2.0),
            pool_size: 131072,
            heldout_size: 4096,
            target_samples: 128,
            tau: 0.01,
            seed: 1,
            log_every: 50,
        }
    }
}

impl RayStageConfig {
    pub fn arch(&self) -> RayFieldArch {
        RayFieldArch {
            depth: self.depth,
            width: self.width,
            encoding: self.encoding.clone(),
            parameterization: RayParameterization::OriginDirection,
        }
    }
}

/// Joint light-field training on two-plane rays.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JointConfig {
    pub iterations: usize,
    pub batch_size: usize,
    pub lr: LrSchedule,
    pub samples_per_ray: usize,
    pub arch: ArchConfig,
    pub ray_depth: usize,
    pub ray_width: usize,
    /// Gaussian feature std for the `uv`, `st` and `theta` groups.
    pub uv_std: f64,
    pub st_std: f64,
    pub theta_std: f64,
    pub num_features: usize,
    pub alpha_end: f64,
    pub decay_iterations: usize,
    pub lambda_consist: f64,
    pub seed: u64,
    pub log_every: usize,
}

impl Default for JointConfig {
    fn default() -> Self {
        Self {
            iterations: 1500,
            batch_size: 256,
            lr: LrSchedule { start: 1e-3, end: 5e-5 },
            samples_per_ray: 32,
            arch: ArchConfig::default(),
            ray_depth: 4,
            ray_width: 64,
            uv_std: 1.0,
            st_std: 4.0,
            theta_std: 8.0,
            num_features: 32,
            alpha_end: 0.5,
            decay_iterations: 500,
            lambda_consist: 1.0,
            seed: 3,
            log_every: 50,
        }
    }
}

impl JointConfig {
    /// No window narrowing and no consistency term.
    pub fn baseline(&self) -> Self {
        Self {
            alpha_end: 1.0,
            lambda_consist: 0.0,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_end > 0.0 && self.alpha_end <= 1.0) {
            return Err(HaloError::InvalidConfig(format!("alpha_end {} outside (0, 1]", self.alpha_end)));
        }
        if self.decay_iterations == 0 || self.batch_size == 0 || self.samples_per_ray == 0 {
            return Err(HaloError::InvalidConfig("joint schedule sizes must be positive".into()));
        }
        Ok(())
    }

    /// `alpha(t)`: linear from 1 to `alpha_end` over `decay_iterations`,
    /// constant afterwards.
    pub fn alpha(&self, iteration: usize) -> f64 {
        let frac = (iteration as f64 / self.decay_iterations as f64).min(1.0);
        1.0 + (self.alpha_end - 1.0) * frac
    }

    fn group(&self, dims: Vec<usize>, std: f64, seed: u64) -> GaussianGroup {
        GaussianGroup {
            dims,
            config: GaussianEncodingConfig {
                std,
                num_features: self.num_features,
                seed,
            },
        }
    }

    /// Point encoding over `(s', t', theta)` and view encoding over `(u, v)`.
    pub fn point_arch(&self) -> PointFieldArch {
        PointFieldArch {
            depth: self.arch.depth,
            width: self.arch.width,
            skip: self.arch.skip,
            color_width: self.arch.color_width,
            point_dim: 3,
            view_dim: 2,
            point_encoding: EncodingConfig::GaussianGroups {
                groups: vec![self.group(vec![0, 1], self.st_std, self.seed), self.group(vec![2], self.theta_std, self.seed + 1)],
            },
            view_encoding: EncodingConfig::GaussianGroups {
                groups: vec![self.group(vec![0, 1], self.uv_std, self.seed + 2)],
            },
        }
    }

    /// Ray encoding over `(u, v, s, t)`.
    pub fn ray_arch(&self) -> RayFieldArch {
        RayFieldArch {
            depth: self.ray_depth,
            width: self.ray_width,
            encoding: EncodingConfig::GaussianGroups {
                groups: vec![self.group(vec![0, 1], self.uv_std, self.seed + 3), self.group(vec![2, 3], self.st_std, self.seed + 4)],
            },
            parameterization: RayParameterization::TwoPlane,
        }
    }
}

/// Frequency-tuning settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuneConfig {
    pub criterion: SpectralCriterionConfig,
    /// Ordered from highest to lowest frequency.
    pub candidates: Vec<EncodingConfig>,
    pub short_iterations: usize,
    /// Elevation range of the pair cameras, in degrees.
    pub elevation: (f64, f64),
    pub seed: u64,
}

impl Default for TuneConfig {
    fn default() -> Self {
        Self {
            criterion: SpectralCriterionConfig::default(),
            candidates: [10, 8, 6, 5, 4].iter().map(|&l| EncodingConfig::sinusoidal(l, 1.0)).collect(),
            short_iterations: 1000,
            elevation: (10.0, 40.0),
            seed: 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SceneConfig {
    Procedural {
        #[serde(default)]
        spec: ProceduralSpec,
        #[serde(default)]
        seed: u64,
    },
    Blender {
        dir: PathBuf,
        #[serde(default)]
        subset: Vec<String>,
        #[serde(default = "default_test_split")]
        test_split: String,
        #[serde(default)]
        max_test_views: Option<usize>,
    },
    LightField {
        #[serde(default)]
        spec: LightFieldSpec,
        #[serde(default)]
        seed: u64,
        #[serde(default = "default_corners")]
        train: Vec<(usize, usize)>,
        #[serde(default = "default_eval")]
        eval: Vec<(usize, usize)>,
    },
}

fn default_test_split() -> String {
    "test".into()
}

pub fn default_corners() -> Vec<(usize, usize)> {
    vec![(4, 4), (4, 12), (12, 4), (12, 12)]
}

pub fn default_eval() -> Vec<(usize, usize)> {
    vec![(8, 8)]
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig::Procedural {
            spec: ProceduralSpec::default(),
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub samples_per_ray: usize,
    /// Random rays used for the empty-space occupancy metric.
    pub probe_rays: usize,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            samples_per_ray: 64,
            probe_rays: 4096,
            seed: 99,
        }
    }
}

/// Whole-pipeline configuration, read from TOML.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub scene: SceneConfig,
    pub tune: TuneConfig,
    pub lo: StageConfig,
    pub ray: RayStageConfig,
    pub hi: StageConfig,
    /// Also train the same-budget baseline during the `hi` stage.
    pub compare_vanilla: bool,
    pub joint: JointConfig,
    pub eval: EvalConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            scene: SceneConfig::default(),
            tune: TuneConfig::default(),
            lo: StageConfig::lo_default(),
            ray: RayStageConfig::default(),
            hi: StageConfig::hi_default(),
            compare_vanilla: false,
            joint: JointConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| HaloError::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("serializable")
    }

    pub fn validate(&self) -> Result<()> {
        self.lo.validate()?;
        self.hi.validate()?;
        self.joint.validate()?;
        self.tune.criterion.validate()?;
        self.ray.encoding.validate()?;
        if !(self.ray.tau > 0.0 && self.ray.tau < 1.0) {
            return Err(HaloError::InvalidConfig(format!("ray.tau {} outside (0, 1)", self.ray.tau)));
        }
        Ok(())
    }

    /// Derives every stage seed from one base seed.
    pub fn reseed(&mut self, seed: u64) {
        let base = seed.wrapping_mul(1000);
        self.lo.seed = base;
        self.ray.seed = base + 1;
        self.hi.seed = base + 2;
        self.joint.seed = base + 3;
        self.tune.seed = base + 4;
        self.eval.seed = base + 5;
        match &mut self.scene {
            SceneConfig::Procedural { seed: s, .. } | SceneConfig::LightField { seed: s, .. } => *s = seed,
            SceneConfig::Blender { .. } => {}
        }
    }
}
