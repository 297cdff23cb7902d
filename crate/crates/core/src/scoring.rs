//! Realism scoring: how confidently an observer classifier assigns a patch
//! to its image's ground-truth class.
//!
//! Two backends sit behind [`PatchScorer`]:
//! * [`OnnxClassifier`], a single-input NCHW float32 ONNX model whose output
//!   is a length-n vector of logits or probabilities;
//! * [`MockScorer`], the foreground fraction of the patch rectangle under the
//!   image's mask. It needs no model and is exact, which makes it the oracle
//!   for selection tests.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::foreground::{ForegroundError, Mask};
use crate::num::Real;
use crate::raster::{CropRect, Raster};

#[derive(Debug, Error)]
pub enum ScoringError {
    #[error("cannot load model {path}: {reason}")]
    ModelLoad { path: PathBuf, reason: String },
    #[error("inference failed: {0}")]
    InferenceError(String),
    #[error("model output has {actual} values, expected {expected} classes")]
    ShapeError { expected: usize, actual: usize },
    #[error("class {class} out of range for {class_count} classes")]
    ClassOutOfRange { class: usize, class_count: usize },
    #[error("mock scoring needs the image mask")]
    MaskRequired,
    #[error(transparent)]
    Foreground(#[from] ForegroundError),
}

/// How to interpret raw model outputs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputKind {
    /// Probe the model once at load time.
    #[default]
    Auto,
    Logits,
    Probs,
}

/// Everything a scorer may look at for one patch.
#[derive(Debug, Clone, Copy)]
pub struct ScoringInput<'a> {
    pub patch: &'a Raster,
    /// Where the patch came from in the source image.
    pub rect: CropRect,
    pub mask: Option<&'a Mask>,
    pub true_class: usize,
}

pub trait PatchScorer<F: Real>: Send + Sync {
    /// Score in `[0, 1]`; higher means more recognisable as `true_class`.
    fn score(&self, input: &ScoringInput<'_>) -> Result<F, ScoringError>;
}

impl<F: Real, S: PatchScorer<F> + ?Sized> PatchScorer<F> for &S {
    fn score(&self, input: &ScoringInput<'_>) -> Result<F, ScoringError> {
        (**self).score(input)
    }
}

/// Foreground pixel fraction of `rect` under `mask`.
pub fn mock_score<F: Real>(rect: CropRect, mask: &Mask) -> Result<F, ScoringError> {
    Ok(mask.fraction_in(rect)?.value())
}

#[derive(Debug, Clone, Copy, Default)]
pub struct MockScorer;

impl<F: Real> PatchScorer<F> for MockScorer {
    fn score(&self, input: &ScoringInput<'_>) -> Result<F, ScoringError> {
        mock_score(input.rect, input.mask.ok_or(ScoringError::MaskRequired)?)
    }
}

/// ONNX image classifier. Immutable after load and shareable across threads.
pub struct OnnxClassifier {
    path: PathBuf,
    backend: backend::Backend,
    input_side: u32,
    class_count: usize,
    logits: bool,
}

impl fmt::Debug for OnnxClassifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OnnxClassifier")
            .field("path", &self.path)
            .field("input_side", &self.input_side)
            .field("class_count", &self.class_count)
            .field("logits", &self.logits)
            .finish()
    }
}

impl OnnxClassifier {
    pub fn load(
        path: &Path,
        input_side: u32,
        class_count: usize,
        outputs: OutputKind,
    ) -> Result<Self, ScoringError> {
        if input_side == 0 {
            return Err(ScoringError::ModelLoad {
                path: path.to_path_buf(),
                reason: "input_side must be positive".into(),
            });
        }
        let backend =
            backend::Backend::load(path, input_side).map_err(|reason| ScoringError::ModelLoad {
                path: path.to_path_buf(),
                reason,
            })?;
        let mut classifier = Self {
            path: path.to_path_buf(),
            backend,
            input_side,
            class_count,
            logits: false,
        };
        let probe = classifier.run(&Raster::filled(input_side, input_side, [128; 3]))?;
        classifier.logits = match outputs {
            OutputKind::Logits => true,
            OutputKind::Probs => false,
            OutputKind::Auto => !looks_like_distribution(&probe),
        };
        log::debug!("loaded {classifier:?}");
        Ok(classifier)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn input_side(&self) -> u32 {
        self.input_side
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn outputs_are_logits(&self) -> bool {
        self.logits
    }

    /// Raw model output for `patch`, resized to the input side and scaled to `[0, 1]`.
    pub fn run(&self, patch: &Raster) -> Result<Vec<f32>, ScoringError> {
        let resized = patch.resize(self.input_side);
        let side = self.input_side as usize;
        let px = resized.pixels();
        // NCHW, scaled to [0, 1]
        let mut input = vec![0f32; 3 * side * side];
        for (i, rgb) in px.chunks_exact(3).enumerate() {
            for (c, &v) in rgb.iter().enumerate() {
                input[c * side * side + i] = v as f32 / 255.0;
            }
        }
        let values = self
            .backend
            .run(input, side)
            .map_err(ScoringError::InferenceError)?;
        if values.len() != self.class_count {
            return Err(ScoringError::ShapeError {
                expected: self.class_count,
                actual: values.len(),
            });
        }
        Ok(values)
    }

    /// Class distribution for `patch`.
    pub fn predict<F: Real>(&self, patch: &Raster) -> Result<Vec<F>, ScoringError> {
        let raw = self.run(patch)?;
        Ok(if self.logits {
            softmax(&raw)
        } else {
            raw.iter().map(|&v| F::of(v as f64)).collect()
        })
    }
}

#[cfg(feature = "onnx")]
mod backend {
    use std::path::Path;

    use tract_onnx::prelude::*;

    pub(super) struct Backend {
        plan: Arc<TypedRunnableModel>,
    }

    impl Backend {
        pub(super) fn load(path: &Path, side: u32) -> Result<Self, String> {
            let side = side as usize;
            let plan = tract_onnx::onnx()
                .model_for_path(path)
                .and_then(|m| {
                    m.with_input_fact(
                        0,
                        InferenceFact::dt_shape(f32::datum_type(), tvec!(1, 3, side, side)),
                    )
                })
                .and_then(|m| m.into_optimized())
                .and_then(|m| m.into_runnable())
                .map_err(|e| format!("{e:#}"))?;
            Ok(Self { plan })
        }

        pub(super) fn run(&self, input: Vec<f32>, side: usize) -> Result<Vec<f32>, String> {
            let tensor: Tensor = tract_ndarray::Array4::from_shape_vec((1, 3, side, side), input)
                .map_err(|e| e.to_string())?
                .into();
            let outputs = self
                .plan
                .run(tvec!(tensor.into()))
                .map_err(|e| format!("{e:#}"))?;
            let first = outputs
                .first()
                .ok_or_else(|| "model produced no outputs".to_string())?;
            Ok(first
                .to_plain_array_view::<f32>()
                .map_err(|e| format!("{e:#}"))?
                .iter()
                .copied()
                .collect())
        }
    }
}

#[cfg(not(feature = "onnx"))]
mod backend {
    use std::path::Path;

    pub(super) struct Backend;

    impl Backend {
        pub(super) fn load(_: &Path, _: u32) -> Result<Self, String> {
            Err("built without the `onnx` feature".into())
        }

        pub(super) fn run(&self, _: Vec<f32>, _: usize) -> Result<Vec<f32>, String> {
            unreachable!("Backend cannot be constructed without the `onnx` feature")
        }
    }
}

fn looks_like_distribution(values: &[f32]) -> bool {
    let sum: f64 = values.iter().map(|&v| v as f64).sum();
    values
        .iter()
        .all(|&v| (0.0..=1.0 + 1e-6).contains(&(v as f64)) || v.abs() < 1e-6)
        && (sum - 1.0).abs() <= 1e-3
}

/// Numerically stable softmax, evaluated in f64.
pub fn softmax<F: Real>(logits: &[f32]) -> Vec<F> {
    let max = logits
        .iter()
        .map(|&v| v as f64)
        .fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&v| (v as f64 - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| F::of(e / total)).collect()
}

/// The observer used for realism scores.
#[derive(Debug)]
pub enum ScorerHandle {
    Model(OnnxClassifier),
    Mock(MockScorer),
}

impl ScorerHandle {
    pub fn mock() -> Self {
        ScorerHandle::Mock(MockScorer)
    }

    /// Load a model scorer; its output length must equal `class_count`.
    pub fn model(
        path: &Path,
        input_side: u32,
        class_count: usize,
        outputs: OutputKind,
    ) -> Result<Self, ScoringError> {
        OnnxClassifier::load(path, input_side, class_count, outputs).map(ScorerHandle::Model)
    }
}

impl<F: Real> PatchScorer<F> for ScorerHandle {
    fn score(&self, input: &ScoringInput<'_>) -> Result<F, ScoringError> {
        match self {
            ScorerHandle::Mock(m) => m.score(input),
            ScorerHandle::Model(model) => {
                if input.true_class >= model.class_count {
                    return Err(ScoringError::ClassOutOfRange {
                        class: input.true_class,
                        class_count: model.class_count,
                    });
                }
                let dist: Vec<F> = model.predict(input.patch)?;
                Ok(dist[input.true_class].max(F::zero()).min(F::one()))
            }
        }
    }
}

/// Score `patch` as a member of `true_class`.
pub fn score_patch<F: Real>(
    scorer: &ScorerHandle,
    patch: &Raster,
    rect: CropRect,
    mask: Option<&Mask>,
    true_class: usize,
) -> Result<F, ScoringError> {
    scorer.score(&ScoringInput {
        patch,
        rect,
        mask,
        true_class,
    })
}
