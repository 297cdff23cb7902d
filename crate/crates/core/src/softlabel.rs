//! Soft labels: the mean teacher distribution over `M` random crops of a
//! distilled image.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::num::{pairwise_sum, Real};
use crate::raster::{CropRect, Raster};
use crate::scoring::{OnnxClassifier, ScoringError};
use crate::selection::{CropSampler, SelectionError};
use crate::synthesis::DistilledImage;

#[derive(Debug, Error)]
pub enum SoftLabelError {
    #[error("at least one crop is required")]
    NoCrops,
    #[error("teacher input side must be at least 1")]
    InvalidInputSide,
    #[error(transparent)]
    Sampler(#[from] SelectionError),
    #[error(transparent)]
    Teacher(#[from] ScoringError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelCrop {
    /// Region of the distilled image.
    pub rect: CropRect,
    /// The region resized to the teacher's input side.
    pub pixels: Raster,
}

/// Draw `m` crops of `image`, each resized to `input_side`.
pub fn label_crops<R: Rng + ?Sized>(
    image: &Raster,
    m: usize,
    sampler: &CropSampler,
    input_side: u32,
    rng: &mut R,
) -> Result<Vec<LabelCrop>, SoftLabelError> {
    if m == 0 {
        return Err(SoftLabelError::NoCrops);
    }
    if input_side == 0 {
        return Err(SoftLabelError::InvalidInputSide);
    }
    sampler.validate()?;
    Ok((0..m)
        .map(|_| {
            let rect = sampler.sample(image.width(), image.height(), rng);
            let pixels = image
                .crop(rect)
                .expect("sampled rect lies inside the image")
                .resize(input_side);
            LabelCrop { rect, pixels }
        })
        .collect())
}

/// What a teacher sees for one crop.
#[derive(Debug, Clone, Copy)]
pub struct TeacherInput<'a, F> {
    pub crop: &'a LabelCrop,
    pub image: &'a DistilledImage<F>,
}

pub trait Teacher<F: Real>: Send + Sync {
    fn class_count(&self) -> usize;

    /// Side length crops are resized to before prediction.
    fn input_side(&self) -> u32;

    /// A probability distribution over `class_count` classes.
    fn predict(&self, input: &TeacherInput<'_, F>) -> Result<Vec<F>, ScoringError>;
}

/// Model-free teacher. Each grid cell votes in proportion to its overlap
/// with the crop: a cell whose member scored `s` puts `s` on the distilled
/// image's class and spreads `1 - s` evenly over the other classes.
#[derive(Debug, Clone, Copy)]
pub struct MockTeacher {
    pub class_count: usize,
    pub input_side: u32,
}

impl<F: Real> Teacher<F> for MockTeacher {
    fn class_count(&self) -> usize {
        self.class_count
    }

    fn input_side(&self) -> u32 {
        self.input_side
    }

    fn predict(&self, input: &TeacherInput<'_, F>) -> Result<Vec<F>, ScoringError> {
        let n = self.class_count;
        let class = input.image.class_id;
        if class >= n {
            return Err(ScoringError::ClassOutOfRange {
                class,
                class_count: n,
            });
        }
        let crop_area = input.crop.rect.area();
        let mut dist = vec![F::zero(); n];
        for (j, member) in input.image.members.iter().enumerate() {
            let Some(overlap) = input.crop.rect.intersect(&input.image.plan.cell_rect(j)) else {
                continue;
            };
            let weight = F::ratio(overlap.area(), crop_area);
            let confidence = member.score.max(F::zero()).min(F::one());
            if n == 1 {
                dist[0] = dist[0] + weight;
                continue;
            }
            let rest = (F::one() - confidence) / F::from_usize(n - 1).expect("class count fits");
            for (c, p) in dist.iter_mut().enumerate() {
                *p = *p + weight * if c == class { confidence } else { rest };
            }
        }
        Ok(dist)
    }
}

/// Teacher backed by an ONNX classifier.
impl<F: Real> Teacher<F> for OnnxClassifier {
    fn class_count(&self) -> usize {
        OnnxClassifier::class_count(self)
    }

    fn input_side(&self) -> u32 {
        OnnxClassifier::input_side(self)
    }

    fn predict(&self, input: &TeacherInput<'_, F>) -> Result<Vec<F>, ScoringError> {
        OnnxClassifier::predict(self, &input.crop.pixels)
    }
}

#[derive(Debug)]
pub enum TeacherHandle {
    Model(OnnxClassifier),
    Mock(MockTeacher),
}

impl<F: Real> Teacher<F> for TeacherHandle {
    fn class_count(&self) -> usize {
        match self {
            TeacherHandle::Model(m) => Teacher::<F>::class_count(m),
            TeacherHandle::Mock(m) => Teacher::<F>::class_count(m),
        }
    }

    fn input_side(&self) -> u32 {
        match self {
            TeacherHandle::Model(m) => Teacher::<F>::input_side(m),
            TeacherHandle::Mock(m) => Teacher::<F>::input_side(m),
        }
    }

    fn predict(&self, input: &TeacherInput<'_, F>) -> Result<Vec<F>, ScoringError> {
        match self {
            TeacherHandle::Model(m) => Teacher::<F>::predict(m, input),
            TeacherHandle::Mock(m) => Teacher::<F>::predict(m, input),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftLabel<F> {
    pub distilled_id: String,
    /// Ground-truth class of the distilled image's members.
    pub class_id: usize,
    pub probs: Vec<F>,
}

/// Arithmetic mean of the teacher's distributions over `crops`, summed
/// per class in a fixed pairwise order.
pub fn soft_label<F: Real, T: Teacher<F> + ?Sized>(
    teacher: &T,
    crops: &[LabelCrop],
    image: &DistilledImage<F>,
    distilled_id: &str,
) -> Result<SoftLabel<F>, SoftLabelError> {
    if crops.is_empty() {
        return Err(SoftLabelError::NoCrops);
    }
    let n = teacher.class_count();
    let predictions = crops
        .iter()
        .map(|crop| {
            let p = teacher.predict(&TeacherInput { crop, image })?;
            if p.len() != n {
                return Err(ScoringError::ShapeError {
                    expected: n,
                    actual: p.len(),
                });
            }
            Ok(p)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SoftLabel {
        distilled_id: distilled_id.to_string(),
        class_id: image.class_id,
        probs: mean_distribution(&predictions, n),
    })
}

/// Per-class arithmetic mean of equal-length vectors.
pub fn mean_distribution<F: Real>(predictions: &[Vec<F>], n: usize) -> Vec<F> {
    let m = F::from_usize(predictions.len()).expect("crop count fits");
    let mut column = Vec::with_capacity(predictions.len());
    (0..n)
        .map(|c| {
            column.clear();
            column.extend(predictions.iter().map(|p| p[c]));
            pairwise_sum(&column) / m
        })
        .collect()
}
