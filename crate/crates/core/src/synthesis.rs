//! Per-class ranking of selected patches and grid composition of distilled images.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::num::Real;
use crate::raster::{CropRect, Raster};
use crate::selection::{PatchSource, SelectedPatch};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SynthesisError {
    #[error("patches per image must be a positive perfect square, got {0}")]
    NotSquare(usize),
    #[error("images per class must be at least 1")]
    NoImagesPerClass,
    #[error("distilled side {side} is not a positive multiple of grid dimension {grid_dim}")]
    IndivisibleSide { side: u32, grid_dim: u32 },
    #[error("class {class_id} has {available} patches, {needed} needed")]
    InsufficientPatches {
        class_id: usize,
        available: usize,
        needed: usize,
    },
    #[error("patches from classes {0} and {1} mixed in one ranking")]
    MixedClasses(usize, usize),
    #[error("{len} ranked patches cannot be split into groups of {z}")]
    LengthNotDivisible { len: usize, z: usize },
    #[error("group holds {actual} patches, plan needs {expected}")]
    GroupSizeMismatch { expected: usize, actual: usize },
}

/// Layout of distilled images: `z` patches on a `grid_dim` x `grid_dim` grid
/// of `cell_side` pixel cells, `n_ipc` images per class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthesisPlan {
    pub z: usize,
    pub n_ipc: usize,
    pub grid_dim: u32,
    pub cell_side: u32,
    pub distilled_side: u32,
}

impl SynthesisPlan {
    pub fn new(z: usize, n_ipc: usize, distilled_side: u32) -> Result<Self, SynthesisError> {
        let grid_dim = perfect_sqrt(z).ok_or(SynthesisError::NotSquare(z))?;
        if n_ipc == 0 {
            return Err(SynthesisError::NoImagesPerClass);
        }
        if distilled_side == 0 || !distilled_side.is_multiple_of(grid_dim) {
            return Err(SynthesisError::IndivisibleSide {
                side: distilled_side,
                grid_dim,
            });
        }
        Ok(Self {
            z,
            n_ipc,
            grid_dim,
            cell_side: distilled_side / grid_dim,
            distilled_side,
        })
    }

    /// Patches consumed per class: `z * n_ipc`.
    pub fn k_select(&self) -> usize {
        self.z * self.n_ipc
    }

    /// Pixel rectangle of member `j` (row-major cells).
    pub fn cell_rect(&self, j: usize) -> CropRect {
        let row = j as u32 / self.grid_dim;
        let col = j as u32 % self.grid_dim;
        CropRect::new(
            col * self.cell_side,
            row * self.cell_side,
            self.cell_side,
            self.cell_side,
        )
    }
}

fn perfect_sqrt(z: usize) -> Option<u32> {
    if z == 0 {
        return None;
    }
    let r = (z as f64).sqrt().round() as usize;
    (r * r == z).then_some(r as u32)
}

/// Provenance of one cell of a distilled image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberRef<F> {
    pub image_id: String,
    pub source: PatchSource,
    pub rect: CropRect,
    pub score: F,
}

impl<F: Real> From<&SelectedPatch<F>> for MemberRef<F> {
    fn from(p: &SelectedPatch<F>) -> Self {
        MemberRef {
            image_id: p.image_id.clone(),
            source: p.source,
            rect: p.rect,
            score: p.score,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistilledImage<F> {
    pub class_id: usize,
    pub index: usize,
    /// Members in rank order; member `j` fills `plan.cell_rect(j)`.
    pub members: Vec<MemberRef<F>>,
    pub plan: SynthesisPlan,
    pub pixels: Raster,
}

fn rank_order<F: Real>(a: &SelectedPatch<F>, b: &SelectedPatch<F>) -> Ordering {
    b.score
        .partial_cmp(&a.score)
        .unwrap_or_else(|| b.score.is_nan().cmp(&a.score.is_nan()))
        .then_with(|| a.image_id.cmp(&b.image_id))
}

/// The `z * n_ipc` best patches of one class, by descending score with ties
/// broken by ascending image id.
///
/// With `allow_duplicates`, a class smaller than `k_select` cycles through
/// its ranking until enough patches are collected.
pub fn top_k<'a, F: Real>(
    patches: &'a [SelectedPatch<F>],
    plan: &SynthesisPlan,
    allow_duplicates: bool,
) -> Result<Vec<&'a SelectedPatch<F>>, SynthesisError> {
    let class_id = patches.first().map_or(0, |p| p.class_id);
    if let Some(other) = patches.iter().find(|p| p.class_id != class_id) {
        return Err(SynthesisError::MixedClasses(class_id, other.class_id));
    }
    let needed = plan.k_select();
    if patches.len() < needed && (!allow_duplicates || patches.is_empty()) {
        return Err(SynthesisError::InsufficientPatches {
            class_id,
            available: patches.len(),
            needed,
        });
    }
    let mut ranked: Vec<&SelectedPatch<F>> = patches.iter().collect();
    ranked.sort_by(|a, b| rank_order(a, b));
    Ok(ranked.iter().cycle().take(needed).copied().collect())
}

/// Split a ranking into consecutive groups of `z`.
pub fn partition<T: Clone>(ranked: &[T], z: usize) -> Result<Vec<Vec<T>>, SynthesisError> {
    if z == 0 || !ranked.len().is_multiple_of(z) {
        return Err(SynthesisError::LengthNotDivisible {
            len: ranked.len(),
            z,
        });
    }
    Ok(ranked.chunks(z).map(<[T]>::to_vec).collect())
}

/// Compose one distilled image, member `j` at grid cell `(j / grid_dim, j % grid_dim)`.
/// Members whose side differs from `cell_side` are resized first.
pub fn synth<F: Real>(
    group: &[&SelectedPatch<F>],
    plan: &SynthesisPlan,
    class_id: usize,
    index: usize,
) -> Result<DistilledImage<F>, SynthesisError> {
    if group.len() != plan.z {
        return Err(SynthesisError::GroupSizeMismatch {
            expected: plan.z,
            actual: group.len(),
        });
    }
    let mut canvas = Raster::filled(plan.distilled_side, plan.distilled_side, [0; 3]);
    for (j, patch) in group.iter().enumerate() {
        let cell = plan.cell_rect(j);
        let member =
            if patch.pixels.width() == plan.cell_side && patch.pixels.height() == plan.cell_side {
                patch.pixels.clone()
            } else {
                patch.pixels.resize(plan.cell_side)
            };
        canvas
            .blit(&member, cell.x, cell.y)
            .expect("cells tile the canvas");
    }
    Ok(DistilledImage {
        class_id,
        index,
        members: group.iter().map(|p| MemberRef::from(*p)).collect(),
        plan: *plan,
        pixels: canvas,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn patch(id: &str, score: f64, rgb: [u8; 3], side: u32) -> SelectedPatch<f64> {
        SelectedPatch {
            image_id: id.into(),
            class_id: 0,
            source: PatchSource::Cropped,
            rect: CropRect::new(0, 0, 1, 1),
            score,
            pixels: Raster::filled(side, side, rgb),
        }
    }

    #[test]
    fn plan_validation() {
        assert_eq!(SynthesisPlan::new(4, 10, 32).unwrap().k_select(), 40);
        let p = SynthesisPlan::new(16, 1, 64).unwrap();
        assert_eq!((p.grid_dim, p.cell_side), (4, 16));
        assert_eq!(
            SynthesisPlan::new(3, 1, 32),
            Err(SynthesisError::NotSquare(3))
        );
        assert_eq!(
            SynthesisPlan::new(0, 1, 32),
            Err(SynthesisError::NotSquare(0))
        );
        assert!(matches!(
            SynthesisPlan::new(9, 1, 32),
            Err(SynthesisError::IndivisibleSide { .. })
        ));
        assert_eq!(
            SynthesisPlan::new(4, 0, 32),
            Err(SynthesisError::NoImagesPerClass)
        );
    }

    #[test]
    fn top_k_sorts_and_truncates() {
        let ps: Vec<_> = [0.9, 0.1, 0.5, 0.7]
            .iter()
            .enumerate()
            .map(|(i, &s)| patch(&format!("c/{i}"), s, [0; 3], 1))
            .collect();
        let plan = SynthesisPlan::new(1, 2, 4).unwrap();
        let top: Vec<f64> = top_k(&ps, &plan, false)
            .unwrap()
            .iter()
            .map(|p| p.score)
            .collect();
        assert_eq!(top, vec![0.9, 0.7]);
    }

    #[test]
    fn top_k_ties_by_image_id() {
        let ps = vec![patch("c/b", 0.5, [0; 3], 1), patch("c/a", 0.5, [0; 3], 1)];
        let plan = SynthesisPlan::new(1, 2, 4).unwrap();
        let ids: Vec<_> = top_k(&ps, &plan, false)
            .unwrap()
            .iter()
            .map(|p| p.image_id.as_str())
            .collect();
        assert_eq!(ids, vec!["c/a", "c/b"]);
    }

    #[test]
    fn insufficient_and_duplicates() {
        let ps = vec![patch("c/a", 0.2, [0; 3], 1), patch("c/b", 0.8, [0; 3], 1)];
        let plan = SynthesisPlan::new(4, 1, 4).unwrap();
        assert_eq!(
            top_k(&ps, &plan, false).unwrap_err(),
            SynthesisError::InsufficientPatches {
                class_id: 0,
                available: 2,
                needed: 4
            }
        );
        let ids: Vec<_> = top_k(&ps, &plan, true)
            .unwrap()
            .iter()
            .map(|p| p.image_id.as_str())
            .collect();
        assert_eq!(ids, vec!["c/b", "c/a", "c/b", "c/a"]);
        assert!(top_k::<f64>(&[], &plan, true).is_err());
    }

    #[test]
    fn top_k_rejects_mixed_classes() {
        let mut other = patch("d/a", 0.3, [0; 3], 1);
        other.class_id = 1;
        let ps = vec![patch("c/a", 0.2, [0; 3], 1), other];
        let plan = SynthesisPlan::new(1, 1, 4).unwrap();
        assert_eq!(
            top_k(&ps, &plan, false),
            Err(SynthesisError::MixedClasses(0, 1))
        );
    }

    #[test]
    fn partition_chunks() {
        let ranked: Vec<usize> = (0..8).collect();
        assert_eq!(
            partition(&ranked, 4).unwrap(),
            vec![vec![0, 1, 2, 3], vec![4, 5, 6, 7]]
        );
        assert_eq!(
            partition(&ranked[..3], 1).unwrap(),
            vec![vec![0], vec![1], vec![2]]
        );
        assert_eq!(
            partition(&ranked[..6], 4),
            Err(SynthesisError::LengthNotDivisible { len: 6, z: 4 })
        );
    }

    #[test]
    fn four_solid_cells() {
        let colors = [[255, 0, 0], [0, 255, 0], [0, 0, 255], [255, 255, 255]];
        let ps: Vec<_> = colors
            .iter()
            .enumerate()
            .map(|(i, &c)| patch(&format!("c/{i}"), 1.0, c, 2))
            .collect();
        let refs: Vec<_> = ps.iter().collect();
        let plan = SynthesisPlan::new(4, 1, 4).unwrap();
        let img = synth(&refs, &plan, 0, 0).unwrap();
        let expected = Raster::from_fn(4, 4, |x, y| colors[(y / 2 * 2 + x / 2) as usize]);
        assert_eq!(img.pixels, expected);
        assert_eq!(img.members.len(), 4);
    }

    #[test]
    fn single_member_is_identity() {
        let p = SelectedPatch {
            pixels: Raster::from_fn(6, 6, |x, y| [x as u8, y as u8, 1]),
            ..patch("c/a", 0.4, [0; 3], 6)
        };
        let plan = SynthesisPlan::new(1, 1, 6).unwrap();
        let img = synth(&[&p], &plan, 0, 0).unwrap();
        assert_eq!(img.pixels, p.pixels);
    }

    #[test]
    fn mismatched_members_are_resized_and_group_checked() {
        let ps: Vec<_> = (0..4)
            .map(|i| patch(&format!("c/{i}"), 0.1, [i * 60; 3], 5))
            .collect();
        let refs: Vec<_> = ps.iter().collect();
        let plan = SynthesisPlan::new(4, 1, 4).unwrap();
        let img = synth(&refs, &plan, 0, 0).unwrap();
        assert_eq!(
            img.pixels.crop(plan.cell_rect(3)).unwrap(),
            Raster::filled(2, 2, [180; 3])
        );
        assert_eq!(
            synth(&refs[..3], &plan, 0, 0).unwrap_err(),
            SynthesisError::GroupSizeMismatch {
                expected: 4,
                actual: 3
            }
        );
    }
}
