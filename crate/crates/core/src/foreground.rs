//! Foreground masks, per-image occupancy and per-class decision thresholds.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use image::DynamicImage;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{ClassSpec, ImageRecord};
use crate::num::{PixelFraction, Real};
use crate::raster::{CropRect, RasterError};

#[derive(Debug, Error)]
pub enum ForegroundError {
    #[error("mask missing: {0}")]
    MaskMissing(PathBuf),
    #[error("mask {path} is {actual:?}, paired image is {expected:?}")]
    MaskDimensionMismatch {
        path: PathBuf,
        expected: (u32, u32),
        actual: (u32, u32),
    },
    #[error("cannot decode mask {path}: {reason}")]
    MaskDecode { path: PathBuf, reason: String },
    #[error("mask bits must be 0 or 1 and fill {width}x{height}")]
    InvalidMask { width: u32, height: u32 },
    #[error("no occupancy ratios for class")]
    EmptyClass,
    #[error("quantile {0} outside [0, 1]")]
    InvalidQuantile(f64),
    #[error("ratio {0} outside [0, 1]")]
    InvalidRatio(f64),
    #[error(transparent)]
    Rect(#[from] RasterError),
    #[error("segmenter template is missing placeholder {0}")]
    TemplatePlaceholder(&'static str),
    #[error("segmenter template cannot be parsed: {0}")]
    TemplateSyntax(String),
    #[error("segmenter failed ({status}) for {image}: {stderr}")]
    SegmenterFailed {
        image: PathBuf,
        status: String,
        stderr: String,
    },
}

/// Binary foreground map, row-major, `1` = foreground.
#[derive(Clone, PartialEq, Eq)]
pub struct Mask {
    image_id: String,
    width: u32,
    height: u32,
    bits: Vec<u8>,
}

impl std::fmt::Debug for Mask {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Mask")
            .field("image_id", &self.image_id)
            .field("width", &self.width)
            .field("height", &self.height)
            .field("foreground", &self.foreground_count())
            .finish()
    }
}

impl Mask {
    pub fn new(
        image_id: impl Into<String>,
        width: u32,
        height: u32,
        bits: Vec<u8>,
    ) -> Result<Self, ForegroundError> {
        let valid = width > 0
            && height > 0
            && bits.len() == width as usize * height as usize
            && bits.iter().all(|&b| b <= 1);
        if !valid {
            return Err(ForegroundError::InvalidMask { width, height });
        }
        Ok(Self {
            image_id: image_id.into(),
            width,
            height,
            bits,
        })
    }

    /// # Panics
    /// If either dimension is zero.
    pub fn from_fn(
        image_id: impl Into<String>,
        width: u32,
        height: u32,
        mut f: impl FnMut(u32, u32) -> bool,
    ) -> Self {
        assert!(width > 0 && height > 0, "mask must be non-empty");
        let mut bits = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y) as u8);
            }
        }
        Self {
            image_id: image_id.into(),
            width,
            height,
            bits,
        }
    }

    pub fn image_id(&self) -> &str {
        &self.image_id
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[y as usize * self.width as usize + x as usize] == 1
    }

    pub fn area(&self) -> u64 {
        self.width as u64 * self.height as u64
    }

    pub fn foreground_count(&self) -> u64 {
        self.bits.iter().map(|&b| b as u64).sum()
    }

    /// Foreground pixels inside `rect`.
    pub fn count_in(&self, rect: CropRect) -> Result<u64, ForegroundError> {
        rect.check(self.width, self.height)?;
        let w = self.width as usize;
        Ok((rect.y..rect.y + rect.h)
            .map(|y| {
                let start = y as usize * w + rect.x as usize;
                self.bits[start..start + rect.w as usize]
                    .iter()
                    .map(|&b| b as u64)
                    .sum::<u64>()
            })
            .sum())
    }

    /// Foreground fraction inside `rect` as an exact count pair.
    pub fn fraction_in(&self, rect: CropRect) -> Result<PixelFraction, ForegroundError> {
        Ok(PixelFraction::new(self.count_in(rect)?, rect.area()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyStats<F> {
    pub image_id: String,
    pub ratio: F,
    pub foreground: u64,
    pub area: u64,
}

/// Foreground pixel count over image area.
pub fn occupancy<F: Real>(mask: &Mask) -> OccupancyStats<F> {
    let foreground = mask.foreground_count();
    let area = mask.area();
    OccupancyStats {
        image_id: mask.image_id.clone(),
        ratio: PixelFraction::new(foreground, area).value(),
        foreground,
        area,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassThreshold<F> {
    pub class_id: usize,
    pub name: String,
    pub quantile: F,
    pub threshold: F,
    pub count: usize,
}

/// Linear-interpolation sample quantile of `ratios`: position
/// `quantile * (m - 1)` in sorted order, interpolated between its neighbours.
pub fn class_threshold<F: Real>(ratios: &[F], quantile: F) -> Result<F, ForegroundError> {
    if ratios.is_empty() {
        return Err(ForegroundError::EmptyClass);
    }
    if !(quantile >= F::zero() && quantile <= F::one()) {
        return Err(ForegroundError::InvalidQuantile(quantile.to_f64_lossy()));
    }
    if let Some(bad) = ratios
        .iter()
        .find(|r| !(**r >= F::zero() && **r <= F::one()))
    {
        return Err(ForegroundError::InvalidRatio(bad.to_f64_lossy()));
    }
    let mut sorted = ratios.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("ratios are finite"));
    Ok(sorted_quantile(&sorted, quantile))
}

pub(crate) fn sorted_quantile<F: Real>(sorted: &[F], quantile: F) -> F {
    let last = sorted.len() - 1;
    let pos = quantile * F::from_usize(last).expect("length fits in F");
    let lo = pos.floor();
    let lo_idx = lo.to_usize().unwrap_or(0).min(last);
    let hi_idx = pos.ceil().to_usize().unwrap_or(last).min(last);
    let (a, b) = (sorted[lo_idx], sorted[hi_idx]);
    // clamp keeps the result monotone across interval boundaries
    (a + (pos - lo) * (b - a)).max(a).min(b)
}

/// One threshold per class from the ratios of that class's images.
pub fn class_thresholds<F: Real>(
    classes: &[ClassSpec],
    ratios_by_class: &[Vec<F>],
    quantile: F,
) -> Result<Vec<ClassThreshold<F>>, ForegroundError> {
    classes
        .iter()
        .zip(ratios_by_class)
        .map(|(class, ratios)| {
            Ok(ClassThreshold {
                class_id: class.class_id,
                name: class.name.clone(),
                quantile,
                threshold: class_threshold(ratios, quantile)?,
                count: ratios.len(),
            })
        })
        .collect()
}

/// Where the mask for `record` lives: `masks_root/<class_name>/<stem>.png`.
pub fn mask_path(masks_root: &Path, class: &ClassSpec, record: &ImageRecord) -> PathBuf {
    masks_root
        .join(&class.name)
        .join(format!("{}.png", record.stem()))
}

/// Read a mask PNG; any nonzero sample is foreground.
pub fn load_mask(path: &Path, record: &ImageRecord) -> Result<Mask, ForegroundError> {
    if !path.is_file() {
        return Err(ForegroundError::MaskMissing(path.to_path_buf()));
    }
    let decoded = image::open(path).map_err(|e| ForegroundError::MaskDecode {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let actual = (decoded.width(), decoded.height());
    if actual != (record.width, record.height) {
        return Err(ForegroundError::MaskDimensionMismatch {
            path: path.to_path_buf(),
            expected: (record.width, record.height),
            actual,
        });
    }
    let bits = match decoded {
        DynamicImage::ImageLuma8(gray) => {
            gray.into_raw().into_iter().map(|v| (v > 0) as u8).collect()
        }
        other => other
            .into_rgb16()
            .pixels()
            .map(|p| p.0.iter().any(|&c| c > 0) as u8)
            .collect(),
    };
    Mask::new(record.image_id.clone(), actual.0, actual.1, bits)
}

/// External segmenter invoked once per image through a command template.
///
/// The template is split with POSIX shell word rules; `{image}`, `{prompt}`
/// and `{out}` are substituted inside each word, so values are never
/// re-parsed by a shell.
#[derive(Debug, Clone)]
pub struct SegmenterAdapter {
    words: Vec<String>,
}

impl SegmenterAdapter {
    pub fn new(template: &str) -> Result<Self, ForegroundError> {
        for placeholder in ["{image}", "{prompt}", "{out}"] {
            if !template.contains(placeholder) {
                return Err(ForegroundError::TemplatePlaceholder(placeholder));
            }
        }
        let words = shlex::split(template)
            .filter(|w| !w.is_empty())
            .ok_or_else(|| ForegroundError::TemplateSyntax(template.to_string()))?;
        Ok(Self { words })
    }

    /// Run the segmenter for one image, writing its mask to `out`.
    pub fn run(&self, image: &Path, prompt: &str, out: &Path) -> Result<PathBuf, ForegroundError> {
        let vars = [
            ("{image}", image.display().to_string()),
            ("{prompt}", prompt.to_string()),
            ("{out}", out.display().to_string()),
        ];
        let argv: Vec<String> = self.words.iter().map(|w| substitute(w, &vars)).collect();
        if let Some(parent) = out.parent() {
            fs::create_dir_all(parent).map_err(|e| ForegroundError::SegmenterFailed {
                image: image.to_path_buf(),
                status: "setup".into(),
                stderr: e.to_string(),
            })?;
        }
        let output = Command::new(&argv[0])
            .args(&argv[1..])
            .output()
            .map_err(|e| ForegroundError::SegmenterFailed {
                image: image.to_path_buf(),
                status: "spawn".into(),
                stderr: e.to_string(),
            })?;
        if !output.status.success() {
            return Err(ForegroundError::SegmenterFailed {
                image: image.to_path_buf(),
                status: output.status.to_string(),
                stderr: String::from_utf8_lossy(&output.stderr).trim().to_string(),
            });
        }
        if !out.is_file() {
            return Err(ForegroundError::MaskMissing(out.to_path_buf()));
        }
        Ok(out.to_path_buf())
    }
}

/// Replace placeholders in one pass, so substituted text is never rescanned.
fn substitute(word: &str, vars: &[(&str, String)]) -> String {
    let mut out = String::with_capacity(word.len());
    let mut rest = word;
    while !rest.is_empty() {
        match vars.iter().find(|(k, _)| rest.starts_with(k)) {
            Some((k, v)) => {
                out.push_str(v);
                rest = &rest[k.len()..];
            }
            None => {
                let c = rest.chars().next().expect("non-empty");
                out.push(c);
                rest = &rest[c.len_utf8()..];
            }
        }
    }
    out
}

/// One-shot form of [`SegmenterAdapter::run`].
pub fn run_segmenter_adapter(
    command_template: &str,
    image_path: &Path,
    prompt: &str,
    out: &Path,
) -> Result<PathBuf, ForegroundError> {
    SegmenterAdapter::new(command_template)?.run(image_path, prompt, out)
}
