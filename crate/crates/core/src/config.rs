//! Pipeline configuration.
//!
//! A single TOML file; every key is optional except the three roots.
//!
//! ```toml
//! seed = 42
//! dataset_root = "data/train"
//! masks_root = "data/masks"
//! out_dir = "out"
//! quantile = 0.30          # per-class threshold quantile
//! z = 4                    # patches per distilled image (perfect square)
//! n_ipc = 10               # distilled images per class
//! distilled_side = 32
//! workers = 0              # 0 = all cores
//! allow_duplicates = false
//! skip_bad_images = false
//!
//! [select]
//! k = 5
//! area_min = 0.3
//! area_max = 1.0
//! aspect_min = 0.75
//! aspect_max = 1.3333333333333333
//! # s_patch defaults to distilled_side / sqrt(z)
//!
//! [scorer]
//! kind = "mock"            # or "model"
//! model = "observer.onnx"
//! input_side = 32
//! outputs = "auto"         # auto | logits | probs
//!
//! [label]
//! M = 4
//! area_min = 0.4
//! area_max = 1.0
//! # kind, model, input_side and outputs default to the scorer's
//!
//! [segmenter]
//! command = "segment --image {image} --prompt {prompt} --out {out}"
//! max_procs = 2
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::scoring::OutputKind;
use crate::selection::{CropSampler, SelectionParams};
use crate::synthesis::SynthesisPlan;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse config {path}: {reason}")]
    Parse { path: PathBuf, reason: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Model,
    #[default]
    Mock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectConfig {
    pub k: usize,
    pub area_min: f64,
    pub area_max: f64,
    pub aspect_min: f64,
    pub aspect_max: f64,
    pub s_patch: Option<u32>,
}

impl Default for SelectConfig {
    fn default() -> Self {
        let s = CropSampler::SELECTION;
        Self {
            k: 5,
            area_min: s.area_min,
            area_max: s.area_max,
            aspect_min: s.aspect_min,
            aspect_max: s.aspect_max,
            s_patch: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScorerConfig {
    pub kind: ModelKind,
    pub model: Option<PathBuf>,
    pub input_side: u32,
    pub outputs: OutputKind,
}

impl Default for ScorerConfig {
    fn default() -> Self {
        Self {
            kind: ModelKind::Mock,
            model: None,
            input_side: 32,
            outputs: OutputKind::Auto,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabelConfig {
    #[serde(rename = "M", alias = "m")]
    pub m: usize,
    pub kind: Option<ModelKind>,
    pub model: Option<PathBuf>,
    pub input_side: Option<u32>,
    pub outputs: Option<OutputKind>,
    pub area_min: f64,
    pub area_max: f64,
    pub aspect_min: f64,
    pub aspect_max: f64,
}

impl Default for LabelConfig {
    fn default() -> Self {
        let s = CropSampler::LABEL;
        Self {
            m: 4,
            kind: None,
            model: None,
            input_side: None,
            outputs: None,
            area_min: s.area_min,
            area_max: s.area_max,
            aspect_min: s.aspect_min,
            aspect_max: s.aspect_max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmenterConfig {
    pub command: Option<String>,
    pub max_procs: usize,
}

impl Default for SegmenterConfig {
    fn default() -> Self {
        Self {
            command: None,
            max_procs: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub dataset_root: PathBuf,
    pub masks_root: PathBuf,
    pub out_dir: PathBuf,
    #[serde(default = "default_quantile")]
    pub quantile: f64,
    #[serde(default = "default_z", alias = "Z")]
    pub z: usize,
    #[serde(default = "default_n_ipc")]
    pub n_ipc: usize,
    #[serde(default = "default_distilled_side")]
    pub distilled_side: u32,
    /// Thread count; 0 uses every core. Outputs do not depend on it.
    #[serde(default)]
    pub workers: usize,
    #[serde(default)]
    pub allow_duplicates: bool,
    #[serde(default)]
    pub skip_bad_images: bool,
    #[serde(default = "default_bins")]
    pub bins: usize,
    #[serde(default)]
    pub select: SelectConfig,
    #[serde(default)]
    pub scorer: ScorerConfig,
    #[serde(default)]
    pub label: LabelConfig,
    #[serde(default)]
    pub segmenter: SegmenterConfig,
}

fn default_seed() -> u64 {
    0
}
fn default_quantile() -> f64 {
    0.30
}
fn default_z() -> usize {
    4
}
fn default_n_ipc() -> usize {
    10
}
fn default_distilled_side() -> u32 {
    32
}
fn default_bins() -> usize {
    crate::report::DEFAULT_BINS
}

/// Resolved model settings for the soft-label teacher.
#[derive(Debug, Clone, PartialEq)]
pub struct TeacherSettings {
    pub kind: ModelKind,
    pub model: Option<PathBuf>,
    pub input_side: u32,
    pub outputs: OutputKind,
}

impl PipelineConfig {
    /// Defaults for everything but the three roots.
    pub fn new(
        dataset_root: impl Into<PathBuf>,
        masks_root: impl Into<PathBuf>,
        out_dir: impl Into<PathBuf>,
    ) -> Self {
        Self {
            seed: default_seed(),
            dataset_root: dataset_root.into(),
            masks_root: masks_root.into(),
            out_dir: out_dir.into(),
            quantile: default_quantile(),
            z: default_z(),
            n_ipc: default_n_ipc(),
            distilled_side: default_distilled_side(),
            workers: 0,
            allow_duplicates: false,
            skip_bad_images: false,
            bins: default_bins(),
            select: SelectConfig::default(),
            scorer: ScorerConfig::default(),
            label: LabelConfig::default(),
            segmenter: SegmenterConfig::default(),
        }
    }

    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: origin.to_path_buf(),
            reason: e.to_string(),
        })
    }

    /// Load a TOML config. Relative paths inside are resolved against the
    /// file's directory.
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::from_toml_str(&text, path)?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.rebase(base);
        Ok(cfg)
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.dataset_root);
        fix(&mut self.masks_root);
        fix(&mut self.out_dir);
        if let Some(m) = self.scorer.model.as_mut() {
            fix(m);
        }
        if let Some(m) = self.label.model.as_mut() {
            fix(m);
        }
    }

    pub fn synthesis_plan(&self) -> Result<SynthesisPlan, ConfigError> {
        SynthesisPlan::new(self.z, self.n_ipc, self.distilled_side)
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn selection_params(&self) -> Result<SelectionParams, ConfigError> {
        let plan = self.synthesis_plan()?;
        let params = SelectionParams {
            k: self.select.k,
            sampler: CropSampler {
                area_min: self.select.area_min,
                area_max: self.select.area_max,
                aspect_min: self.select.aspect_min,
                aspect_max: self.select.aspect_max,
            },
            s_patch: self.select.s_patch.unwrap_or(plan.cell_side),
        };
        params
            .validate()
            .map_err(|e| ConfigError::Invalid(format!("select: {e}")))?;
        Ok(params)
    }

    pub fn label_sampler(&self) -> CropSampler {
        CropSampler {
            area_min: self.label.area_min,
            area_max: self.label.area_max,
            aspect_min: self.label.aspect_min,
            aspect_max: self.label.aspect_max,
        }
    }

    /// Teacher settings; unset fields fall back to the scorer's.
    pub fn teacher(&self) -> TeacherSettings {
        TeacherSettings {
            kind: self.label.kind.unwrap_or(self.scorer.kind),
            model: self
                .label
                .model
                .clone()
                .or_else(|| self.scorer.model.clone()),
            input_side: self.label.input_side.unwrap_or(self.scorer.input_side),
            outputs: self.label.outputs.unwrap_or(self.scorer.outputs),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |msg: String| Err(ConfigError::Invalid(msg));
        if !(0.0..=1.0).contains(&self.quantile) {
            return invalid(format!("quantile {} outside [0, 1]", self.quantile));
        }
        self.selection_params()?;
        if self.label.m == 0 {
            return invalid("label.M must be at least 1".into());
        }
        self.label_sampler()
            .validate()
            .map_err(|e| ConfigError::Invalid(format!("label: {e}")))?;
        if self.bins == 0 {
            return invalid("bins must be at least 1".into());
        }
        if self.scorer.kind == ModelKind::Model && self.scorer.model.is_none() {
            return invalid("scorer.kind = \"model\" requires scorer.model".into());
        }
        let teacher = self.teacher();
        if teacher.kind == ModelKind::Model && teacher.model.is_none() {
            return invalid("label.kind = \"model\" requires a model path".into());
        }
        if teacher.input_side == 0 || self.scorer.input_side == 0 {
            return invalid("input_side must be at least 1".into());
        }
        if self.segmenter.max_procs == 0 {
            return invalid("segmenter.max_procs must be at least 1".into());
        }
        Ok(())
    }

    /// SHA-256 over the canonical JSON form, ignoring `workers`.
    pub fn content_hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.workers = 0;
        let json = serde_json::to_vec(&canonical).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<PipelineConfig, ConfigError> {
        PipelineConfig::from_toml_str(text, Path::new("test.toml"))
    }

    const ROOTS: &str = "dataset_root = \"d\"\nmasks_root = \"m\"\nout_dir = \"o\"\n";

    #[test]
    fn defaults() {
        let c = parse(ROOTS).unwrap();
        assert_eq!(c.quantile, 0.30);
        assert_eq!((c.z, c.select.k, c.label.m), (4, 5, 4));
        assert_eq!(c.selection_params().unwrap().s_patch, 16);
        c.validate().unwrap();
    }

    #[test]
    fn documented_keys_parse() {
        let c = parse(&format!(
            "{ROOTS}Z = 16\ndistilled_side = 64\n[select]\nk = 3\n[label]\nM = 2\n[scorer]\nkind = \"model\"\nmodel = \"obs.onnx\"\noutputs = \"logits\"\n"
        ))
        .unwrap();
        assert_eq!((c.z, c.select.k, c.label.m), (16, 3, 2));
        assert_eq!(c.scorer.outputs, OutputKind::Logits);
        let t = c.teacher();
        assert_eq!(t.kind, ModelKind::Model);
        assert_eq!(t.model.as_deref(), Some(Path::new("obs.onnx")));
        c.validate().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(
            parse(&format!("{ROOTS}qunatile = 0.2\n")),
            Err(ConfigError::Parse { .. })
        ));
    }

    #[test]
    fn invariants_are_checked() {
        let mut c = PipelineConfig::new("d", "m", "o");
        c.quantile = 1.2;
        assert!(c.validate().is_err());
        c.quantile = 0.3;
        c.z = 3;
        assert!(c.validate().is_err());
        c.z = 9;
        c.distilled_side = 32;
        assert!(c.validate().is_err());
        c.distilled_side = 33;
        c.validate().unwrap();
        c.scorer.kind = ModelKind::Model;
        assert!(c.validate().is_err());
    }

    #[test]
    fn hash_ignores_workers_only() {
        let mut a = PipelineConfig::new("d", "m", "o");
        let h = a.content_hash();
        a.workers = 8;
        assert_eq!(a.content_hash(), h);
        a.seed = 1;
        assert_ne!(a.content_hash(), h);
    }

    #[test]
    fn relative_paths_follow_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, ROOTS).unwrap();
        let c = PipelineConfig::from_file(&path).unwrap();
        assert_eq!(c.dataset_root, dir.path().join("d"));
    }
}
