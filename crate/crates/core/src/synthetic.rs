//! Deterministic shapes dataset with exact foreground masks, for smoke
//! tests and desk-scale experiments without a segmentation model.
//!
//! Each class draws one shape (rectangle, ellipse or diamond, by class
//! index) in a class colour over a noisy background. The mask is exactly
//! the set of painted shape pixels.

use std::fs;
use std::io;
use std::path::Path;

use image::{GrayImage, Luma};
use rand::Rng;

use crate::raster::Raster;
use crate::rng::substream;

const PALETTE: [[u8; 3]; 6] = [
    [220, 40, 40],
    [40, 180, 60],
    [50, 80, 220],
    [230, 200, 40],
    [180, 60, 200],
    [40, 200, 210],
];

#[derive(Debug, Clone, PartialEq)]
pub struct ShapesSpec {
    pub classes: usize,
    pub images_per_class: usize,
    pub side: u32,
    /// Share of images whose shape fills a large part of the frame.
    pub dense_share: f64,
    /// Occupancy range for dense images. Shapes may overflow the frame.
    pub dense_range: (f64, f64),
    /// Occupancy range for the other images.
    pub sparse_range: (f64, f64),
    pub seed: u64,
}

impl Default for ShapesSpec {
    fn default() -> Self {
        Self {
            classes: 3,
            images_per_class: 20,
            side: 32,
            dense_share: 0.5,
            dense_range: (0.6, 0.85),
            sparse_range: (0.04, 0.15),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Shape {
    Rectangle,
    Ellipse,
    Diamond,
}

/// One generated image and its mask bits (row-major, 1 = foreground).
#[derive(Debug, Clone)]
pub struct ShapeSample {
    pub class_id: usize,
    pub index: usize,
    pub image: Raster,
    pub mask: Vec<u8>,
}

impl ShapeSample {
    pub fn ratio(&self) -> f64 {
        self.mask.iter().map(|&b| b as u64).sum::<u64>() as f64 / self.mask.len() as f64
    }
}

pub fn class_name(class_id: usize) -> String {
    format!("class{class_id}")
}

pub fn generate(spec: &ShapesSpec) -> Vec<ShapeSample> {
    let mut out = Vec::with_capacity(spec.classes * spec.images_per_class);
    for class_id in 0..spec.classes {
        let shape = match class_id % 3 {
            0 => Shape::Rectangle,
            1 => Shape::Ellipse,
            _ => Shape::Diamond,
        };
        let color = PALETTE[class_id % PALETTE.len()];
        for index in 0..spec.images_per_class {
            let key = format!("{}/{index}", class_name(class_id));
            let mut rng = substream(spec.seed, "synthetic-shapes", &key);
            out.push(sample(spec, shape, color, class_id, index, &mut rng));
        }
    }
    out
}

const MAX_ATTEMPTS: usize = 64;

fn sample<R: Rng>(
    spec: &ShapesSpec,
    shape: Shape,
    color: [u8; 3],
    class_id: usize,
    index: usize,
    rng: &mut R,
) -> ShapeSample {
    let side = spec.side;
    let dense = rng.random::<f64>() < spec.dense_share;
    let (lo, hi) = if dense {
        spec.dense_range
    } else {
        spec.sparse_range
    };
    let target = rng.random_range(lo..=hi);
    // shapes other than rectangles cover only part of their bounding box
    let fill = match shape {
        Shape::Rectangle => 1.0,
        Shape::Ellipse => std::f64::consts::FRAC_PI_4,
        Shape::Diamond => 0.5,
    };
    let n = side as i64;
    let mut mask = Vec::new();
    // redraw the geometry until clipping lands the occupancy inside the range
    for _ in 0..MAX_ATTEMPTS {
        let aspect = rng.random_range(0.75..=1.33);
        let box_area = target / fill * (n * n) as f64;
        let bw = ((box_area * aspect).sqrt().round() as i64).clamp(2, 2 * n);
        let bh = ((box_area / aspect).sqrt().round() as i64).clamp(2, 2 * n);
        let x0 = rng.random_range((n - bw).min(0)..=(n - bw).max(0));
        let y0 = rng.random_range((n - bh).min(0)..=(n - bh).max(0));
        let (cx, cy) = (x0 as f64 + bw as f64 / 2.0, y0 as f64 + bh as f64 / 2.0);
        let (rx, ry) = (bw as f64 / 2.0, bh as f64 / 2.0);
        mask.clear();
        for y in 0..n {
            for x in 0..n {
                let inside = x >= x0 && y >= y0 && x < x0 + bw && y < y0 + bh && {
                    let dx = (x as f64 + 0.5 - cx) / rx;
                    let dy = (y as f64 + 0.5 - cy) / ry;
                    match shape {
                        Shape::Rectangle => true,
                        Shape::Ellipse => dx * dx + dy * dy <= 1.0,
                        Shape::Diamond => dx.abs() + dy.abs() <= 1.0,
                    }
                };
                mask.push(inside as u8);
            }
        }
        let ratio = mask.iter().map(|&b| b as f64).sum::<f64>() / (n * n) as f64;
        if (lo..=hi).contains(&ratio) {
            break;
        }
    }
    let image = Raster::from_fn(side, side, |x, y| {
        let v = rng.random_range(60u8..140);
        if mask[(y * side + x) as usize] == 1 {
            color.map(|c| c.saturating_sub(v / 8))
        } else {
            [v, v.saturating_add(8), v.saturating_sub(8)]
        }
    });
    ShapeSample {
        class_id,
        index,
        image,
        mask,
    }
}

/// Write `images_root/<class>/<index>.png` and the matching masks under `masks_root`.
pub fn write_dataset(
    samples: &[ShapeSample],
    images_root: &Path,
    masks_root: &Path,
) -> io::Result<()> {
    for s in samples {
        let name = class_name(s.class_id);
        let file = format!("{:03}.png", s.index);
        let image_dir = images_root.join(&name);
        let mask_dir = masks_root.join(&name);
        fs::create_dir_all(&image_dir)?;
        fs::create_dir_all(&mask_dir)?;
        fs::write(image_dir.join(&file), s.image.encode_png())?;
        let side = s.image.width();
        let mask = GrayImage::from_fn(side, s.image.height(), |x, y| {
            Luma([s.mask[(y * side + x) as usize] * 255])
        });
        mask.save(mask_dir.join(&file)).map_err(io::Error::other)?;
    }
    Ok(())
}
