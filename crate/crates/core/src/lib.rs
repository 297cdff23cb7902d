//! Foreground-aware dataset distillation.
//!
//! A labeled image dataset and its foreground masks go in; a small set of
//! grid-composited images with soft labels comes out:
//!
//! 1. [`foreground`]: per-image foreground occupancy and a per-class
//!    threshold taken as a quantile of the class's occupancy distribution.
//! 2. [`selection`]: images below their class threshold keep the best of `k`
//!    random crops under a realism [`scoring`] model; the rest are resized
//!    whole.
//! 3. [`synthesis`]: each class's top `z * n_ipc` patches are tiled `z` at a
//!    time onto a square grid.
//! 4. [`softlabel`]: each distilled image is labeled with the mean teacher
//!    distribution over random crops.
//!
//! [`pipeline::Pipeline`] runs the whole thing from a [`config::PipelineConfig`].
//!
//! Numeric code is generic over [`num::Real`] (`f32` or `f64`); the aliases
//! below fix it to `f64`, which is what the pipeline uses.

pub mod config;
pub mod error;
pub mod foreground;
pub mod ingest;
pub mod num;
pub mod pipeline;
pub mod raster;
pub mod report;
pub mod rng;
pub mod scoring;
pub mod selection;
pub mod softlabel;
pub mod synthesis;
pub mod synthetic;

pub use config::PipelineConfig;
pub use error::{Error, ErrorClass, Result};
pub use num::{PixelFraction, Real};
pub use pipeline::Pipeline;
pub use raster::{CropRect, Raster};

pub type OccupancyStats = foreground::OccupancyStats<f64>;
pub type ClassThreshold = foreground::ClassThreshold<f64>;
pub type SelectedPatch = selection::SelectedPatch<f64>;
pub type DistilledImage = synthesis::DistilledImage<f64>;
pub type MemberRef = synthesis::MemberRef<f64>;
pub type SoftLabel = softlabel::SoftLabel<f64>;
pub type HistogramReport = report::HistogramReport<f64>;
pub type RetentionReport = report::RetentionReport<f64>;
