use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{HaloError, Result};
use crate::fields::{PointField, PointFieldArch, RayField, RayFieldArch, SceneBounds};
use crate::nn::{Adam, ParamSet};
use crate::real::Real;

const MAGIC: &[u8; 8] = b"HALOCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldDescriptor {
    Point { arch: PointFieldArch },
    Ray { arch: RayFieldArch },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub stage: String,
    pub dtype: String,
    pub iteration: usize,
    pub adam_step: u64,
    pub bounds: SceneBounds,
    pub field: FieldDescriptor,
    pub shapes: Vec<(usize, usize)>,
}

/// Field parameters plus optimizer state.
///
/// Layout: magic, `u32` version, `u64` metadata length, metadata JSON, then
/// parameters, Adam first moments and Adam second moments as LE scalars.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint<R: Real> {
    pub meta: CheckpointMeta,
    pub params: ParamSet<R>,
    pub adam: Adam<R>,
}

impl<R: Real> Checkpoint<R> {
    pub fn point(stage: &str, field: &PointField<R>, bounds: SceneBounds, adam: &Adam<R>, iteration: usize) -> Self {
        Self::new(stage, FieldDescriptor::Point { arch: field.arch.clone() }, &field.params, bounds, adam, iteration)
    }

    pub fn ray(stage: &str, field: &RayField<R>, adam: &Adam<R>, iteration: usize) -> Self {
        Self::new(stage, FieldDescriptor::Ray { arch: field.arch.clone() }, &field.params, field.bounds, adam, iteration)
    }

    fn new(stage: &str, field: FieldDescriptor, params: &ParamSet<R>, bounds: SceneBounds, adam: &Adam<R>, iteration: usize) -> Self {
        Self {
            meta: CheckpointMeta {
                stage: stage.into(),
                dtype: R::DTYPE.into(),
                iteration,
                adam_step: adam.step,
                bounds,
                field,
                shapes: params.shapes(),
            },
            params: params.clone(),
            adam: adam.clone(),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let meta = serde_json::to_vec(&self.meta).expect("serializable");
        let mut out = Vec::with_capacity(20 + meta.len() + 3 * self.params.num_params() * R::BYTES);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(meta.len() as u64).to_le_bytes());
        out.extend_from_slice(&meta);
        self.params.to_le_bytes(&mut out);
        self.adam.m.to_le_bytes(&mut out);
        self.adam.v.to_le_bytes(&mut out);
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let corrupt = |reason: String| HaloError::Corrupt {
            path: path.to_path_buf(),
            reason,
        };
        if bytes.len() < 20 || &bytes[..8] != MAGIC {
            return Err(corrupt("not a checkpoint".into()));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        if version != CHECKPOINT_VERSION {
            return Err(corrupt(format!("unsupported checkpoint version {version}")));
        }
        let len = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
        let meta_bytes = bytes
            .get(20..20usize.saturating_add(len))
            .ok_or_else(|| corrupt("truncated metadata".into()))?;
        let meta: CheckpointMeta = serde_json::from_slice(meta_bytes).map_err(|e| corrupt(format!("bad metadata: {e}")))?;
        if meta.dtype != R::DTYPE {
            return Err(corrupt(format!("checkpoint holds {} parameters, expected {}", meta.dtype, R::DTYPE)));
        }
        let mut params = ParamSet::<R>::zeros_with_shapes(&meta.shapes);
        let mut adam = Adam::new(&params);
        adam.step = meta.adam_step;
        let mut rest = &bytes[20 + len..];
        for target in [&mut params, &mut adam.m, &mut adam.v] {
            let used = target
                .fill_from_le_bytes(rest)
                .ok_or_else(|| corrupt("truncated tensors".into()))?;
            rest = &rest[used..];
        }
        if !rest.is_empty() {
            return Err(corrupt(format!("{} trailing bytes", rest.len())));
        }
        Ok(Self { meta, params, adam })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| HaloError::io(dir, e))?;
        }
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, self.to_bytes()).map_err(|e| HaloError::io(&tmp, e))?;
        fs::rename(&tmp, path).map_err(|e| HaloError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(HaloError::MissingCheckpoint(path.to_path_buf()));
        }
        let bytes = fs::read(path).map_err(|e| HaloError::io(path, e))?;
        Self::from_bytes(&bytes, path)
    }

    pub fn into_point_field(self) -> Result<(PointField<R>, Adam<R>, CheckpointMeta)> {
        match &self.meta.field {
            FieldDescriptor::Point { arch } => {
                let f = PointField::from_params(arch.clone(), self.params)?;
                Ok((f, self.adam, self.meta))
            }
            FieldDescriptor::Ray { .. } => Err(HaloError::InvalidInput(format!("checkpoint '{}' holds a ray field", self.meta.stage))),
        }
    }

    pub fn into_ray_field(self) -> Result<(RayField<R>, Adam<R>, CheckpointMeta)> {
        match &self.meta.field {
            FieldDescriptor::Ray { arch } => {
                let f = RayField::from_params(arch.clone(), self.meta.bounds, self.params)?;
                Ok((f, self.adam, self.meta))
            }
            FieldDescriptor::Point { .. } => Err(HaloError::InvalidInput(format!("checkpoint '{}' holds a point field", self.meta.stage))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::EncodingConfig;
    use crate::fields::RayParameterization;

    fn bounds() -> SceneBounds {
        SceneBounds {
            near: 2.0,
            far: 6.0,
            radius: 4.4,
            theta: None,
        }
    }

    #[test]
    fn save_load_save_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let field = PointField::<f32>::init(PointFieldArch::desk(EncodingConfig::sinusoidal(4, 1.0)), 3).unwrap();
        let mut adam = Adam::new(&field.params);
        let mut grads = field.params.clone();
        grads.scale(0.01);
        let mut params = field.params.clone();
        adam.update(&mut params, &grads, 1e-3);
        let field = PointField::from_params(field.arch.clone(), params).unwrap();
        let ck = Checkpoint::point("lo", &field, bounds(), &adam, 17);
        let p = dir.path().join("lo.ckpt");
        ck.save(&p).unwrap();
        let back = Checkpoint::<f32>::load(&p).unwrap();
        assert_eq!(back, ck);
        let p2 = dir.path().join("lo2.ckpt");
        back.save(&p2).unwrap();
        assert_eq!(fs::read(&p).unwrap(), fs::read(&p2).unwrap());
        let (f, a, meta) = back.into_point_field().unwrap();
        assert_eq!((f.params, a.step, meta.iteration), (field.params, 1, 17));
    }

    #[test]
    fn ray_checkpoint_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let arch = RayFieldArch {
            depth: 2,
            width: 8,
            encoding: EncodingConfig::sinusoidal(2, 1.0),
            parameterization: RayParameterization::OriginDirection,
        };
        let field = RayField::<f64>::init(arch, bounds(), 1).unwrap();
        let ck = Checkpoint::ray("ray", &field, &Adam::new(&field.params), 0);
        let p = dir.path().join("ray.ckpt");
        ck.save(&p).unwrap();
        assert!(matches!(Checkpoint::<f32>::load(&p), Err(HaloError::Corrupt { .. })));
        let back = Checkpoint::<f64>::load(&p).unwrap();
        assert!(back.clone().into_point_field().is_err());
        assert_eq!(back.into_ray_field().unwrap().0.params, field.params);
        let missing = dir.path().join("none.ckpt");
        assert!(matches!(Checkpoint::<f64>::load(&missing), Err(HaloError::MissingCheckpoint(_))));
        let bytes = fs::read(&p).unwrap();
        fs::write(&p, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(Checkpoint::<f64>::load(&p), Err(HaloError::Corrupt { .. })));
    }
}
