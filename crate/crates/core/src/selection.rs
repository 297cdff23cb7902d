//! Candidate cropping and the dual-path patch selection.
//!
//! Images whose foreground occupancy is below their class threshold are
//! cropped `k` times and the best-scoring crop is kept. All other images are
//! resized whole, so a dominant foreground object is never cut.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::foreground::Mask;
use crate::num::Real;
use crate::raster::{CropRect, Raster};
use crate::scoring::{PatchScorer, ScoringError, ScoringInput};

#[derive(Debug, Error)]
pub enum SelectionError {
    #[error("image {width}x{height} is smaller than 2x2")]
    DegenerateImage { width: u32, height: u32 },
    #[error("candidate count must be at least 1")]
    NoCandidates,
    #[error("invalid crop sampler: {0}")]
    InvalidSampler(String),
    #[error("patch side must be at least 1")]
    InvalidPatchSide,
    #[error(transparent)]
    Scoring(#[from] ScoringError),
}

/// Random crop geometry: area fraction and aspect ratio (w/h), each drawn
/// uniformly from its range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CropSampler {
    pub area_min: f64,
    pub area_max: f64,
    pub aspect_min: f64,
    pub aspect_max: f64,
}

impl CropSampler {
    /// Candidate crops for patch selection.
    pub const SELECTION: CropSampler = CropSampler {
        area_min: 0.3,
        area_max: 1.0,
        aspect_min: 3.0 / 4.0,
        aspect_max: 4.0 / 3.0,
    };

    /// Crops of distilled images for soft labeling.
    pub const LABEL: CropSampler = CropSampler {
        area_min: 0.4,
        area_max: 1.0,
        aspect_min: 3.0 / 4.0,
        aspect_max: 4.0 / 3.0,
    };

    pub fn validate(&self) -> Result<(), SelectionError> {
        let ok = self.area_min > 0.0
            && self.area_min <= self.area_max
            && self.area_max <= 1.0
            && self.aspect_min > 0.0
            && self.aspect_min <= self.aspect_max
            && self.aspect_max.is_finite();
        if ok {
            Ok(())
        } else {
            Err(SelectionError::InvalidSampler(format!("{self:?}")))
        }
    }

    /// Draw one rectangle inside a `width`x`height` image. Always consumes
    /// exactly four values from `rng`.
    ///
    /// Side lengths are `round(sqrt(a*W*H*r))` and `round(sqrt(a*W*H/r))`.
    /// A side that overflows the image is clamped and the other side is
    /// recomputed from the target area, so `a = 1` always yields the full
    /// image whatever the aspect draw.
    pub fn sample<R: Rng + ?Sized>(&self, width: u32, height: u32, rng: &mut R) -> CropRect {
        let area_frac = rng.random_range(self.area_min..=self.area_max);
        let aspect = rng.random_range(self.aspect_min..=self.aspect_max);
        let (wf, hf) = (width as f64, height as f64);
        let target = area_frac * wf * hf;
        let mut w = (target * aspect).sqrt().round();
        let mut h = (target / aspect).sqrt().round();
        if w > wf {
            w = wf;
            h = (target / wf).round();
        }
        if h > hf {
            h = hf;
            w = (target / hf).round().min(wf);
        }
        let w = (w as u32).clamp(1, width);
        let h = (h as u32).clamp(1, height);
        let x = rng.random_range(0..=width - w);
        let y = rng.random_range(0..=height - h);
        CropRect::new(x, y, w, h)
    }
}

impl Default for CropSampler {
    fn default() -> Self {
        Self::SELECTION
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatchCandidate {
    pub image_id: String,
    pub rect: CropRect,
    /// The crop resized to `s_patch` x `s_patch`.
    pub pixels: Raster,
    pub index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PatchSource {
    Cropped,
    Resized,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectedPatch<F> {
    pub image_id: String,
    pub class_id: usize,
    pub source: PatchSource,
    /// Crop rectangle, or the full image for resized patches.
    pub rect: CropRect,
    pub score: F,
    pub pixels: Raster,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionParams {
    pub k: usize,
    pub sampler: CropSampler,
    pub s_patch: u32,
}

impl SelectionParams {
    pub fn validate(&self) -> Result<(), SelectionError> {
        if self.k == 0 {
            return Err(SelectionError::NoCandidates);
        }
        if self.s_patch == 0 {
            return Err(SelectionError::InvalidPatchSide);
        }
        self.sampler.validate()
    }
}

/// Per-image inputs to [`select_dynamic`].
#[derive(Debug, Clone, Copy)]
pub struct ImageContext<'a, F> {
    pub image_id: &'a str,
    pub class_id: usize,
    pub ratio: F,
    pub threshold: F,
    pub mask: Option<&'a Mask>,
}

/// Draw `k` crops in index order, each resized to `s_patch`.
pub fn crop_candidates<R: Rng + ?Sized>(
    image_id: &str,
    image: &Raster,
    k: usize,
    sampler: &CropSampler,
    s_patch: u32,
    rng: &mut R,
) -> Result<Vec<PatchCandidate>, SelectionError> {
    if image.width() < 2 || image.height() < 2 {
        return Err(SelectionError::DegenerateImage {
            width: image.width(),
            height: image.height(),
        });
    }
    if k == 0 {
        return Err(SelectionError::NoCandidates);
    }
    if s_patch == 0 {
        return Err(SelectionError::InvalidPatchSide);
    }
    Ok((0..k)
        .map(|index| {
            let rect = sampler.sample(image.width(), image.height(), rng);
            let pixels = image
                .crop(rect)
                .expect("sampled rect lies inside the image")
                .resize(s_patch);
            PatchCandidate {
                image_id: image_id.to_string(),
                rect,
                pixels,
                index,
            }
        })
        .collect())
}

/// Pick the patch for one image.
///
/// `ratio < threshold` takes the crop path and returns the highest-scoring
/// candidate (lowest index on ties). Otherwise the whole image is resized;
/// that patch is scored too so ranking treats both paths alike.
pub fn select_dynamic<F: Real, S: PatchScorer<F> + ?Sized, R: Rng + ?Sized>(
    image: &Raster,
    ctx: &ImageContext<'_, F>,
    params: &SelectionParams,
    scorer: &S,
    rng: &mut R,
) -> Result<SelectedPatch<F>, SelectionError> {
    params.validate()?;
    if ctx.ratio < ctx.threshold {
        let candidates = crop_candidates(
            ctx.image_id,
            image,
            params.k,
            &params.sampler,
            params.s_patch,
            rng,
        )?;
        let mut best: Option<(F, PatchCandidate)> = None;
        for candidate in candidates {
            let score = scorer.score(&ScoringInput {
                patch: &candidate.pixels,
                rect: candidate.rect,
                mask: ctx.mask,
                true_class: ctx.class_id,
            })?;
            if best.as_ref().is_none_or(|(top, _)| score > *top) {
                best = Some((score, candidate));
            }
        }
        let (score, winner) = best.expect("k >= 1 candidates");
        Ok(SelectedPatch {
            image_id: ctx.image_id.to_string(),
            class_id: ctx.class_id,
            source: PatchSource::Cropped,
            rect: winner.rect,
            score,
            pixels: winner.pixels,
        })
    } else {
        let pixels = resize(image, params.s_patch);
        let rect = image.full_rect();
        let score = scorer.score(&ScoringInput {
            patch: &pixels,
            rect,
            mask: ctx.mask,
            true_class: ctx.class_id,
        })?;
        Ok(SelectedPatch {
            image_id: ctx.image_id.to_string(),
            class_id: ctx.class_id,
            source: PatchSource::Resized,
            rect,
            score,
            pixels,
        })
    }
}

/// Bilinear resize to a `side`x`side` square (half-pixel centres, round half up).
pub fn resize(image: &Raster, side: u32) -> Raster {
    image.resize(side)
}
