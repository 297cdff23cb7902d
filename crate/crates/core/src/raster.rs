//! In-memory RGB rasters, crop rectangles and bilinear resampling.

use std::io::Cursor;

use image::{ImageFormat, RgbImage};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const CHANNELS: usize = 3;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RasterError {
    #[error("pixel buffer holds {actual} bytes, expected {expected} for {width}x{height} RGB")]
    BufferLength {
        width: u32,
        height: u32,
        expected: usize,
        actual: usize,
    },
    #[error("raster dimensions must be at least 1x1, got {width}x{height}")]
    Empty { width: u32, height: u32 },
    #[error("rectangle {rect} does not fit inside {width}x{height}")]
    RectOutOfBounds {
        rect: CropRect,
        width: u32,
        height: u32,
    },
}

/// Axis-aligned rectangle in pixel coordinates; `(x, y)` is the top-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CropRect {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl CropRect {
    pub fn new(x: u32, y: u32, w: u32, h: u32) -> Self {
        Self { x, y, w, h }
    }

    pub fn full(width: u32, height: u32) -> Self {
        Self::new(0, 0, width, height)
    }

    pub fn area(&self) -> u64 {
        self.w as u64 * self.h as u64
    }

    pub fn fits_within(&self, width: u32, height: u32) -> bool {
        self.w >= 1
            && self.h >= 1
            && self.x as u64 + self.w as u64 <= width as u64
            && self.y as u64 + self.h as u64 <= height as u64
    }

    /// Overlap with `other`, if any.
    pub fn intersect(&self, other: &CropRect) -> Option<CropRect> {
        let x0 = self.x.max(other.x);
        let y0 = self.y.max(other.y);
        let x1 = (self.x + self.w).min(other.x + other.w);
        let y1 = (self.y + self.h).min(other.y + other.h);
        (x1 > x0 && y1 > y0).then(|| CropRect::new(x0, y0, x1 - x0, y1 - y0))
    }

    pub(crate) fn check(&self, width: u32, height: u32) -> Result<(), RasterError> {
        if self.fits_within(width, height) {
            Ok(())
        } else {
            Err(RasterError::RectOutOfBounds {
                rect: *self,
                width,
                height,
            })
        }
    }
}

impl std::fmt::Display for CropRect {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}+{}+{}", self.w, self.h, self.x, self.y)
    }
}

/// Row-major 8-bit RGB image.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Raster {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl std::fmt::Debug for Raster {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Raster")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

impl Raster {
    pub fn new(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self, RasterError> {
        if width == 0 || height == 0 {
            return Err(RasterError::Empty { width, height });
        }
        let expected = width as usize * height as usize * CHANNELS;
        if pixels.len() != expected {
            return Err(RasterError::BufferLength {
                width,
                height,
                expected,
                actual: pixels.len(),
            });
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    /// # Panics
    /// If either dimension is zero.
    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Self {
        Self::from_fn(width, height, |_, _| rgb)
    }

    /// # Panics
    /// If either dimension is zero.
    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> [u8; 3]) -> Self {
        assert!(width > 0 && height > 0, "raster must be non-empty");
        let mut pixels = Vec::with_capacity(width as usize * height as usize * CHANNELS);
        for y in 0..height {
            for x in 0..width {
                pixels.extend_from_slice(&f(x, y));
            }
        }
        Self {
            width,
            height,
            pixels,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    pub fn full_rect(&self) -> CropRect {
        CropRect::full(self.width, self.height)
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = self.offset(x, y);
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    fn offset(&self, x: u32, y: u32) -> usize {
        (y as usize * self.width as usize + x as usize) * CHANNELS
    }

    pub fn crop(&self, rect: CropRect) -> Result<Raster, RasterError> {
        rect.check(self.width, self.height)?;
        let row_bytes = rect.w as usize * CHANNELS;
        let mut pixels = Vec::with_capacity(row_bytes * rect.h as usize);
        for y in rect.y..rect.y + rect.h {
            let start = self.offset(rect.x, y);
            pixels.extend_from_slice(&self.pixels[start..start + row_bytes]);
        }
        Ok(Raster {
            width: rect.w,
            height: rect.h,
            pixels,
        })
    }

    /// Copy `src` into `self` with its top-left corner at `(x, y)`.
    pub fn blit(&mut self, src: &Raster, x: u32, y: u32) -> Result<(), RasterError> {
        CropRect::new(x, y, src.width, src.height).check(self.width, self.height)?;
        let row_bytes = src.width as usize * CHANNELS;
        for row in 0..src.height {
            let dst = self.offset(x, y + row);
            let from = row as usize * row_bytes;
            self.pixels[dst..dst + row_bytes].copy_from_slice(&src.pixels[from..from + row_bytes]);
        }
        Ok(())
    }

    /// Bilinear resample to a `side`x`side` square.
    ///
    /// # Panics
    /// If `side` is zero.
    pub fn resize(&self, side: u32) -> Raster {
        self.resize_to(side, side)
    }

    /// Bilinear resample with half-pixel centre alignment. Source coordinates
    /// are clamped at the borders and results rounded half up.
    ///
    /// # Panics
    /// If either target dimension is zero.
    pub fn resize_to(&self, width: u32, height: u32) -> Raster {
        assert!(width > 0 && height > 0, "resize target must be non-empty");
        if width == self.width && height == self.height {
            return self.clone();
        }
        let xs = axis_taps(self.width, width);
        let ys = axis_taps(self.height, height);
        let mut pixels = Vec::with_capacity(width as usize * height as usize * CHANNELS);
        for &(y0, y1, fy) in &ys {
            for &(x0, x1, fx) in &xs {
                let p00 = self.offset(x0, y0);
                let p01 = self.offset(x1, y0);
                let p10 = self.offset(x0, y1);
                let p11 = self.offset(x1, y1);
                for c in 0..CHANNELS {
                    let top = lerp(self.pixels[p00 + c], self.pixels[p01 + c], fx);
                    let bottom = lerp(self.pixels[p10 + c], self.pixels[p11 + c], fx);
                    let v = top + (bottom - top) * fy;
                    pixels.push((v + 0.5).floor().clamp(0.0, 255.0) as u8);
                }
            }
        }
        Raster {
            width,
            height,
            pixels,
        }
    }

    pub fn from_rgb_image(img: RgbImage) -> Raster {
        let (width, height) = img.dimensions();
        Raster {
            width,
            height,
            pixels: img.into_raw(),
        }
    }

    pub fn to_rgb_image(&self) -> RgbImage {
        RgbImage::from_raw(self.width, self.height, self.pixels.clone())
            .expect("raster buffer length is an invariant")
    }

    /// Encode as an 8-bit RGB PNG. Output bytes are a pure function of the pixels.
    pub fn encode_png(&self) -> Vec<u8> {
        let mut out = Cursor::new(Vec::new());
        self.to_rgb_image()
            .write_to(&mut out, ImageFormat::Png)
            .expect("PNG encoding into memory cannot fail");
        out.into_inner()
    }
}

fn lerp(a: u8, b: u8, t: f64) -> f64 {
    let a = a as f64;
    a + (b as f64 - a) * t
}

/// For each output index: the two source indices and the weight of the second.
fn axis_taps(src: u32, dst: u32) -> Vec<(u32, u32, f64)> {
    let scale = src as f64 / dst as f64;
    let last = (src - 1) as f64;
    (0..dst)
        .map(|i| {
            let s = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, last);
            let lo = s.floor();
            let hi = (lo as u32 + 1).min(src - 1);
            (lo as u32, hi, s - lo)
        })
        .collect()
}
