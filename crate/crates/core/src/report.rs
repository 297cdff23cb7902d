//! Occupancy histograms and foreground-retention summaries.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::foreground::{ForegroundError, Mask};
use crate::num::Real;
use crate::raster::CropRect;

pub const DEFAULT_BINS: usize = 20;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("no ratios for class")]
    EmptyClass,
    #[error("histogram needs at least one bin")]
    NoBins,
    #[error(transparent)]
    Foreground(#[from] ForegroundError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramReport<F> {
    pub class_id: usize,
    pub name: String,
    /// `bins + 1` uniform edges over `[0, 1]`.
    pub bin_edges: Vec<F>,
    /// Fraction of the class's images per bin.
    pub fractions: Vec<F>,
    pub threshold: F,
}

impl<F: Real> HistogramReport<F> {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_lo,bin_hi,fraction\n");
        for (i, f) in self.fractions.iter().enumerate() {
            let _ = writeln!(
                out,
                "{:.6},{:.6},{:.6}",
                self.bin_edges[i].to_f64_lossy(),
                self.bin_edges[i + 1].to_f64_lossy(),
                f.to_f64_lossy()
            );
        }
        out
    }
}

/// Bin edges and per-bin fractions of `ratios` over `bins` uniform bins on
/// `[0, 1]`. Bins are half-open except the last, which also takes `1.0`.
pub fn histogram<F: Real>(ratios: &[F], bins: usize) -> Result<(Vec<F>, Vec<F>), ReportError> {
    if ratios.is_empty() {
        return Err(ReportError::EmptyClass);
    }
    if bins == 0 {
        return Err(ReportError::NoBins);
    }
    let scale = F::from_usize(bins).expect("bin count fits");
    let mut counts = vec![0u64; bins];
    for r in ratios {
        let idx = (*r * scale).floor().to_usize().unwrap_or(0).min(bins - 1);
        counts[idx] += 1;
    }
    let total = ratios.len() as u64;
    let edges = (0..=bins)
        .map(|i| F::ratio(i as u64, bins as u64))
        .collect();
    let fractions = counts.into_iter().map(|c| F::ratio(c, total)).collect();
    Ok((edges, fractions))
}

/// Share of the mask's foreground that falls inside `rect`; 1 when the mask is empty.
pub fn retention<F: Real>(rect: CropRect, mask: &Mask) -> Result<F, ReportError> {
    let inside = mask.count_in(rect)?;
    let total = mask.foreground_count();
    Ok(if total == 0 {
        F::one()
    } else {
        F::ratio(inside, total)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetentionPolicy {
    /// Threshold-driven crop-or-resize selection.
    Dynamic,
    /// One random crop per image, no scoring.
    RandomCrop,
    /// Every image resized whole.
    ResizeOnly,
}

impl RetentionPolicy {
    pub const ALL: [RetentionPolicy; 3] = [
        RetentionPolicy::Dynamic,
        RetentionPolicy::RandomCrop,
        RetentionPolicy::ResizeOnly,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            RetentionPolicy::Dynamic => "dynamic",
            RetentionPolicy::RandomCrop => "random_crop",
            RetentionPolicy::ResizeOnly => "resize_only",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetentionReport<F> {
    pub policy: RetentionPolicy,
    /// Unweighted mean over images.
    pub mean_retention: F,
    /// Mean per class; `NaN` for a class without images.
    pub per_class: Vec<F>,
}

/// Aggregate per-image `(class_id, retention)` pairs.
pub fn summarize_retention<F: Real>(
    policy: RetentionPolicy,
    values: &[(usize, F)],
    class_count: usize,
) -> RetentionReport<F> {
    let mean = |xs: &[F]| {
        if xs.is_empty() {
            F::nan()
        } else {
            crate::num::pairwise_sum(xs) / F::from_usize(xs.len()).expect("count fits")
        }
    };
    let mut by_class = vec![Vec::new(); class_count];
    for &(c, v) in values {
        by_class[c].push(v);
    }
    let all: Vec<F> = values.iter().map(|&(_, v)| v).collect();
    RetentionReport {
        policy,
        mean_retention: mean(&all),
        per_class: by_class.iter().map(|xs| mean(xs)).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_mass() {
        let (edges, fr) = histogram(&[0.5f64; 7], 20).unwrap();
        assert_eq!(edges.len(), 21);
        assert_eq!(fr[10], 1.0);
        assert_eq!(fr.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn boundaries() {
        let (_, fr) = histogram(&[0.0f64, 1.0], 2).unwrap();
        assert_eq!(fr, vec![0.5, 0.5]);
        let (_, one) = histogram(&[1.0f64], 1).unwrap();
        assert_eq!(one, vec![1.0]);
    }

    #[test]
    fn histogram_errors() {
        assert!(matches!(
            histogram::<f64>(&[], 20),
            Err(ReportError::EmptyClass)
        ));
        assert!(matches!(histogram(&[0.1f64], 0), Err(ReportError::NoBins)));
    }

    #[test]
    fn csv_has_one_row_per_bin() {
        let (bin_edges, fractions) = histogram(&[0.1f64, 0.9], 4).unwrap();
        let r = HistogramReport {
            class_id: 0,
            name: "a".into(),
            bin_edges,
            fractions,
            threshold: 0.3,
        };
        let csv = r.to_csv();
        assert_eq!(csv.lines().count(), 5);
        assert_eq!(csv.lines().nth(1).unwrap(), "0.000000,0.250000,0.500000");
    }

    #[test]
    fn retention_cases() {
        let blob = Mask::from_fn("m", 10, 10, |x, y| {
            (3..6).contains(&x) && (3..6).contains(&y)
        });
        assert_eq!(
            retention::<f64>(CropRect::full(10, 10), &blob).unwrap(),
            1.0
        );
        assert_eq!(
            retention::<f64>(CropRect::new(2, 2, 5, 5), &blob).unwrap(),
            1.0
        );
        assert_eq!(
            retention::<f64>(CropRect::new(0, 0, 4, 10), &blob).unwrap(),
            1.0 / 3.0
        );
        let empty = Mask::from_fn("e", 4, 4, |_, _| false);
        assert_eq!(
            retention::<f64>(CropRect::new(0, 0, 1, 1), &empty).unwrap(),
            1.0
        );
        assert!(retention::<f64>(CropRect::new(8, 8, 4, 4), &blob).is_err());
    }

    #[test]
    fn retention_summary() {
        let r = summarize_retention(
            RetentionPolicy::Dynamic,
            &[(0, 1.0f64), (0, 0.5), (1, 0.0)],
            3,
        );
        assert_eq!(r.mean_retention, 0.5);
        assert_eq!(r.per_class[0], 0.75);
        assert_eq!(r.per_class[1], 0.0);
        assert!(r.per_class[2].is_nan());
    }
}
