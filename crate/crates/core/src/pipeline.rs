//! End-to-end orchestration: analysis, selection, synthesis, labeling and
//! the files each command writes.
//!
//! Every per-image and per-distilled-image step is a pure function of its
//! inputs and a random stream keyed by the item id, so outputs do not depend
//! on the worker count.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{ConfigError, ModelKind, PipelineConfig};
use crate::error::{Error, Result};
use crate::foreground::{
    class_thresholds, load_mask, mask_path, occupancy, ClassThreshold, Mask, OccupancyStats,
    SegmenterAdapter,
};
use crate::ingest::{load_image, scan_dataset, scan_dataset_lenient, ImageRecord, Manifest};
use crate::report::{
    histogram, retention, summarize_retention, HistogramReport, RetentionPolicy, RetentionReport,
};
use crate::rng::{substream, BASELINE_DOMAIN, LABEL_DOMAIN, SELECT_DOMAIN};
use crate::scoring::{OnnxClassifier, PatchScorer, ScorerHandle};
use crate::selection::{select_dynamic, ImageContext, SelectedPatch, SelectionParams};
use crate::softlabel::{label_crops, soft_label, MockTeacher, SoftLabel, Teacher, TeacherHandle};
use crate::synthesis::{partition, synth, top_k, DistilledImage, MemberRef, SynthesisPlan};

pub const OCCUPANCY_FILE: &str = "occupancy.csv";
pub const THRESHOLDS_FILE: &str = "thresholds.json";
pub const DATASET_FILE: &str = "dataset.json";
pub const LABELS_FILE: &str = "labels.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const RUN_FILE: &str = "run.json";
pub const REPORT_DIR: &str = "report";
pub const RETENTION_FILE: &str = "retention.json";
pub const SWEEP_FILE: &str = "sweep.csv";

/// One image that passed analysis.
#[derive(Debug, Clone)]
pub struct AnalyzedImage {
    pub record: ImageRecord,
    pub mask_path: PathBuf,
    pub occupancy: OccupancyStats<f64>,
}

/// Per-image occupancy and per-class thresholds.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub manifest: Manifest,
    /// Images in manifest order, excluding any skipped as bad.
    pub images: Vec<AnalyzedImage>,
    /// `(path or image id, reason)` for each skipped image.
    pub skipped: Vec<(String, String)>,
    pub thresholds: Vec<ClassThreshold<f64>>,
}

impl Analysis {
    pub fn ratios_by_class(&self) -> Vec<Vec<f64>> {
        let mut out = vec![Vec::new(); self.manifest.class_count()];
        for img in &self.images {
            out[img.record.class_id].push(img.occupancy.ratio);
        }
        out
    }

    pub fn thresholds_at(&self, quantile: f64) -> Result<Vec<ClassThreshold<f64>>> {
        Ok(class_thresholds(
            &self.manifest.classes,
            &self.ratios_by_class(),
            quantile,
        )?)
    }

    pub fn histograms(&self, bins: usize) -> Result<Vec<HistogramReport<f64>>> {
        self.ratios_by_class()
            .iter()
            .zip(&self.thresholds)
            .map(|(ratios, t)| {
                let (bin_edges, fractions) = histogram(ratios, bins)?;
                Ok(HistogramReport {
                    class_id: t.class_id,
                    name: t.name.clone(),
                    bin_edges,
                    fractions,
                    threshold: t.threshold,
                })
            })
            .collect()
    }
}

/// Both selection paths evaluated for one image, for retention analysis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathRetention {
    pub class_id: usize,
    pub ratio: f64,
    /// Retention of the best-scoring candidate, as chosen on the crop path.
    pub crop_path: f64,
    /// Retention of one unscored random crop.
    pub random_crop: f64,
}

/// One row of a threshold sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub quantile: f64,
    pub thresholds: Vec<f64>,
    pub crop_count: usize,
    pub resize_count: usize,
    pub dynamic_retention: f64,
    pub random_crop_retention: f64,
    pub resize_only_retention: f64,
}

/// Contents of `run.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunRecord {
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    /// SHA-256 of every file written by the run, keyed by path relative to `out_dir`.
    pub outputs: BTreeMap<String, String>,
}

#[derive(Debug, Serialize)]
struct LabelEntry<'a> {
    distilled_id: &'a str,
    class_id: usize,
    probs: Vec<f64>,
}

#[derive(Debug, Serialize)]
struct DistilledEntry<'a> {
    distilled_id: String,
    class_id: usize,
    class_name: &'a str,
    index: usize,
    path: String,
    members: &'a [MemberRef<f64>],
}

#[derive(Debug, Serialize)]
struct DistillManifest<'a> {
    plan: SynthesisPlan,
    quantile: f64,
    seed: u64,
    thresholds: &'a [ClassThreshold<f64>],
    images: Vec<DistilledEntry<'a>>,
}

/// Files written under `out_dir`, with their digests.
struct OutputSet {
    root: PathBuf,
    digests: BTreeMap<String, String>,
}

impl OutputSet {
    fn new(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
        Ok(Self {
            root: root.to_path_buf(),
            digests: BTreeMap::new(),
        })
    }

    fn write(&mut self, relative: &str, bytes: &[u8]) -> Result<()> {
        let path = self.root.join(relative);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.digests.insert(relative.to_string(), sha256_hex(bytes));
        Ok(())
    }

    fn write_json<T: Serialize + ?Sized>(&mut self, relative: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value).expect("output types serialize");
        text.push('\n');
        self.write(relative, text.as_bytes())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Round to 8 significant digits.
fn sig8(x: f64) -> f64 {
    format!("{x:.7e}").parse().unwrap_or(x)
}

pub fn distilled_id(class_name: &str, index: usize) -> String {
    format!("{class_name}/distilled_{index}")
}

pub struct Pipeline {
    config: PipelineConfig,
    plan: SynthesisPlan,
    params: SelectionParams,
    pool: rayon::ThreadPool,
}

impl std::fmt::Debug for Pipeline {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Pipeline")
            .field("config", &self.config)
            .finish_non_exhaustive()
    }
}

impl Pipeline {
    pub fn new(config: PipelineConfig) -> Result<Self> {
        config.validate()?;
        let plan = config.synthesis_plan()?;
        let params = config.selection_params()?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build()
            .map_err(|e| ConfigError::Invalid(format!("worker pool: {e}")))?;
        Ok(Self {
            config,
            plan,
            params,
            pool,
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn plan(&self) -> &SynthesisPlan {
        &self.plan
    }

    pub fn selection_params(&self) -> &SelectionParams {
        &self.params
    }

    /// Scan the dataset, obtain masks, compute occupancy and thresholds.
    pub fn analyze_dataset(&self) -> Result<Analysis> {
        let root = &self.config.dataset_root;
        let (manifest, rejected) = if self.config.skip_bad_images {
            scan_dataset_lenient(root)?
        } else {
            (scan_dataset(root)?, Vec::new())
        };
        let mut skipped: Vec<(String, String)> = rejected
            .into_iter()
            .map(|(p, e)| {
                log::warn!("skipping {}: {e}", p.display());
                (p.display().to_string(), e.to_string())
            })
            .collect();
        log::info!(
            "scanned {} images in {} classes",
            manifest.images.len(),
            manifest.class_count()
        );
        self.ensure_masks(&manifest)?;

        let results: Vec<Result<AnalyzedImage>> = self.pool.install(|| {
            manifest
                .images
                .par_iter()
                .map(|record| {
                    let class = manifest.class(record.class_id);
                    let mask_path = mask_path(&self.config.masks_root, class, record);
                    let wrap = |e: Error| Error::at(&record.image_id, e);
                    load_image(record).map_err(|e| wrap(e.into()))?;
                    let mask = load_mask(&mask_path, record).map_err(|e| wrap(e.into()))?;
                    Ok(AnalyzedImage {
                        record: record.clone(),
                        mask_path,
                        occupancy: occupancy(&mask),
                    })
                })
                .collect()
        });
        let mut images = Vec::with_capacity(results.len());
        for result in results {
            match result {
                Ok(img) => images.push(img),
                Err(Error::AtImage { image_id, source }) if self.config.skip_bad_images => {
                    log::warn!("skipping {image_id}: {source}");
                    skipped.push((image_id, source.to_string()));
                }
                Err(e) => return Err(e),
            }
        }
        let mut analysis = Analysis {
            manifest,
            images,
            skipped,
            thresholds: Vec::new(),
        };
        analysis.thresholds = analysis.thresholds_at(self.config.quantile)?;
        Ok(analysis)
    }

    /// Run the configured segmenter for images that have no mask file yet.
    fn ensure_masks(&self, manifest: &Manifest) -> Result<()> {
        let Some(template) = self.config.segmenter.command.as_deref() else {
            return Ok(());
        };
        let adapter = SegmenterAdapter::new(template)?;
        let missing: Vec<(&ImageRecord, PathBuf)> = manifest
            .images
            .iter()
            .map(|r| {
                let class = manifest.class(r.class_id);
                (r, mask_path(&self.config.masks_root, class, r))
            })
            .filter(|(_, p)| !p.is_file())
            .collect();
        if missing.is_empty() {
            return Ok(());
        }
        log::info!("segmenting {} images", missing.len());
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.config.segmenter.max_procs)
            .build()
            .map_err(|e| ConfigError::Invalid(format!("segmenter pool: {e}")))?;
        let results: Vec<Result<()>> = pool.install(|| {
            missing
                .par_iter()
                .map(|(record, out)| {
                    let prompt = &manifest.class(record.class_id).prompt;
                    adapter
                        .run(&record.path, prompt, out)
                        .map(|_| ())
                        .map_err(|e| Error::at(&record.image_id, e))
                })
                .collect()
        });
        for result in results {
            match result {
                Err(e) if self.config.skip_bad_images => log::warn!("{e}"),
                other => other?,
            }
        }
        Ok(())
    }

    pub fn load_mask(&self, image: &AnalyzedImage) -> Result<Mask> {
        load_mask(&image.mask_path, &image.record).map_err(|e| Error::at(&image.record.image_id, e))
    }

    pub fn load_scorer(&self, class_count: usize) -> Result<ScorerHandle> {
        let cfg = &self.config.scorer;
        Ok(match cfg.kind {
            ModelKind::Mock => ScorerHandle::mock(),
            ModelKind::Model => ScorerHandle::model(
                cfg.model.as_deref().expect("validated"),
                cfg.input_side,
                class_count,
                cfg.outputs,
            )?,
        })
    }

    pub fn load_teacher(&self, class_count: usize) -> Result<TeacherHandle> {
        let t = self.config.teacher();
        Ok(match t.kind {
            ModelKind::Mock => TeacherHandle::Mock(MockTeacher {
                class_count,
                input_side: t.input_side,
            }),
            ModelKind::Model => TeacherHandle::Model(OnnxClassifier::load(
                t.model.as_deref().expect("validated"),
                t.input_side,
                class_count,
                t.outputs,
            )?),
        })
    }

    /// One selected patch per analyzed image, in analysis order.
    pub fn select_patches<S: PatchScorer<f64> + ?Sized>(
        &self,
        analysis: &Analysis,
        thresholds: &[ClassThreshold<f64>],
        scorer: &S,
    ) -> Result<Vec<SelectedPatch<f64>>> {
        self.pool.install(|| {
            analysis
                .images
                .par_iter()
                .map(|img| self.select_one(img, thresholds[img.record.class_id].threshold, scorer))
                .collect()
        })
    }

    fn select_one<S: PatchScorer<f64> + ?Sized>(
        &self,
        img: &AnalyzedImage,
        threshold: f64,
        scorer: &S,
    ) -> Result<SelectedPatch<f64>> {
        let id = &img.record.image_id;
        let raster = load_image(&img.record).map_err(|e| Error::at(id, e))?;
        let mask = self.load_mask(img)?;
        let ctx = ImageContext {
            image_id: id,
            class_id: img.record.class_id,
            ratio: img.occupancy.ratio,
            threshold,
            mask: Some(&mask),
        };
        let mut rng = substream(self.config.seed, SELECT_DOMAIN, id);
        select_dynamic(&raster, &ctx, &self.params, scorer, &mut rng).map_err(|e| Error::at(id, e))
    }

    /// Rank, partition and compose each class's patches. Output is grouped by
    /// class, then by distilled index.
    pub fn synthesize(
        &self,
        class_count: usize,
        patches: &[SelectedPatch<f64>],
    ) -> Result<Vec<DistilledImage<f64>>> {
        let mut by_class: Vec<Vec<SelectedPatch<f64>>> = vec![Vec::new(); class_count];
        for p in patches {
            by_class[p.class_id].push(p.clone());
        }
        let per_class: Vec<Result<Vec<DistilledImage<f64>>>> = self.pool.install(|| {
            by_class
                .par_iter()
                .enumerate()
                .map(|(class_id, class_patches)| {
                    let ranked = top_k(class_patches, &self.plan, self.config.allow_duplicates)?;
                    partition(&ranked, self.plan.z)?
                        .iter()
                        .enumerate()
                        .map(|(index, group)| Ok(synth(group, &self.plan, class_id, index)?))
                        .collect()
                })
                .collect()
        });
        let mut out = Vec::new();
        for images in per_class {
            out.extend(images?);
        }
        Ok(out)
    }

    /// Soft label for each distilled image, in the same order.
    pub fn label_images<T: Teacher<f64> + ?Sized>(
        &self,
        manifest: &Manifest,
        images: &[DistilledImage<f64>],
        teacher: &T,
    ) -> Result<Vec<SoftLabel<f64>>> {
        let sampler = self.config.label_sampler();
        self.pool.install(|| {
            images
                .par_iter()
                .map(|img| {
                    let id = distilled_id(&manifest.class(img.class_id).name, img.index);
                    let mut rng = substream(self.config.seed, LABEL_DOMAIN, &id);
                    let crops = label_crops(
                        &img.pixels,
                        self.config.label.m,
                        &sampler,
                        teacher.input_side(),
                        &mut rng,
                    )
                    .map_err(|e| Error::at(&id, e))?;
                    soft_label(teacher, &crops, img, &id).map_err(|e| Error::at(&id, e))
                })
                .collect()
        })
    }

    /// Retention of the crop-path winner and of a single random crop for
    /// every analyzed image. The crop path uses the same random stream as
    /// selection, so it reproduces what [`Self::select_patches`] picks for
    /// any image routed to cropping.
    pub fn path_retention<S: PatchScorer<f64> + ?Sized>(
        &self,
        analysis: &Analysis,
        scorer: &S,
    ) -> Result<Vec<PathRetention>> {
        self.pool.install(|| {
            analysis
                .images
                .par_iter()
                .map(|img| {
                    let id = &img.record.image_id;
                    let mask = self.load_mask(img)?;
                    let crop = self.select_one(img, f64::INFINITY, scorer)?;
                    let mut rng = substream(self.config.seed, BASELINE_DOMAIN, id);
                    let random =
                        self.params
                            .sampler
                            .sample(img.record.width, img.record.height, &mut rng);
                    let at = |e| Error::at(id, e);
                    Ok(PathRetention {
                        class_id: img.record.class_id,
                        ratio: img.occupancy.ratio,
                        crop_path: retention(crop.rect, &mask).map_err(at)?,
                        random_crop: retention(random, &mask).map_err(at)?,
                    })
                })
                .collect()
        })
    }

    /// Per-policy retention for the given thresholds.
    pub fn retention_reports(
        &self,
        class_count: usize,
        paths: &[PathRetention],
        thresholds: &[ClassThreshold<f64>],
    ) -> Vec<RetentionReport<f64>> {
        RetentionPolicy::ALL
            .iter()
            .map(|&policy| {
                let values: Vec<(usize, f64)> = paths
                    .iter()
                    .map(|p| {
                        let v = match policy {
                            RetentionPolicy::Dynamic => {
                                if p.ratio < thresholds[p.class_id].threshold {
                                    p.crop_path
                                } else {
                                    1.0
                                }
                            }
                            RetentionPolicy::RandomCrop => p.random_crop,
                            RetentionPolicy::ResizeOnly => 1.0,
                        };
                        (p.class_id, v)
                    })
                    .collect();
                summarize_retention(policy, &values, class_count)
            })
            .collect()
    }

    fn write_analysis(&self, out: &mut OutputSet, analysis: &Analysis) -> Result<()> {
        let mut csv = String::from("image_id,class_id,ratio\n");
        for img in &analysis.images {
            let _ = writeln!(
                csv,
                "{},{},{:.6}",
                img.record.image_id, img.record.class_id, img.occupancy.ratio
            );
        }
        out.write(OCCUPANCY_FILE, csv.as_bytes())?;
        out.write_json(THRESHOLDS_FILE, &analysis.thresholds)?;
        out.write(DATASET_FILE, analysis.manifest.records_json().as_bytes())?;
        for h in analysis.histograms(self.config.bins)? {
            out.write(
                &format!("{REPORT_DIR}/occupancy_hist_{}.csv", h.name),
                h.to_csv().as_bytes(),
            )?;
        }
        out.write_json(
            &format!("{REPORT_DIR}/{THRESHOLDS_FILE}"),
            &analysis.thresholds,
        )?;
        Ok(())
    }

    /// `analyze`: occupancy CSV, thresholds and histograms.
    pub fn run_analyze(&self) -> Result<Analysis> {
        let analysis = self.analyze_dataset()?;
        let mut out = OutputSet::new(&self.config.out_dir)?;
        self.write_analysis(&mut out, &analysis)?;
        Ok(analysis)
    }

    /// `distill`: distilled images, labels, manifest and `run.json`.
    pub fn run_distill(&self) -> Result<RunRecord> {
        let analysis = self.analyze_dataset()?;
        let n = analysis.manifest.class_count();
        let scorer = self.load_scorer(n)?;
        let teacher = self.load_teacher(n)?;
        let patches = self.select_patches(&analysis, &analysis.thresholds, &scorer)?;
        log::info!("selected {} patches", patches.len());
        let images = self.synthesize(n, &patches)?;
        let labels = self.label_images(&analysis.manifest, &images, &teacher)?;
        log::info!("synthesized {} distilled images", images.len());

        let mut out = OutputSet::new(&self.config.out_dir)?;
        self.write_analysis(&mut out, &analysis)?;
        let mut entries = Vec::with_capacity(images.len());
        for img in &images {
            let class_name = analysis.manifest.class(img.class_id).name.as_str();
            let id = distilled_id(class_name, img.index);
            let path = format!("{id}.png");
            out.write(&path, &img.pixels.encode_png())?;
            entries.push(DistilledEntry {
                distilled_id: id,
                class_id: img.class_id,
                class_name,
                index: img.index,
                path,
                members: &img.members,
            });
        }
        let label_entries: Vec<LabelEntry> = labels
            .iter()
            .map(|l| LabelEntry {
                distilled_id: &l.distilled_id,
                class_id: l.class_id,
                probs: l.probs.iter().map(|&p| sig8(p)).collect(),
            })
            .collect();
        out.write_json(LABELS_FILE, &label_entries)?;
        out.write_json(
            MANIFEST_FILE,
            &DistillManifest {
                plan: self.plan,
                quantile: self.config.quantile,
                seed: self.config.seed,
                thresholds: &analysis.thresholds,
                images: entries,
            },
        )?;

        let record = RunRecord {
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: self.config.content_hash(),
            seed: self.config.seed,
            outputs: out.digests.clone(),
        };
        out.write_json(RUN_FILE, &record)?;
        Ok(record)
    }

    /// `report`: analysis outputs plus per-policy retention.
    pub fn run_report(&self) -> Result<Vec<RetentionReport<f64>>> {
        let analysis = self.analyze_dataset()?;
        let n = analysis.manifest.class_count();
        let scorer = self.load_scorer(n)?;
        let paths = self.path_retention(&analysis, &scorer)?;
        let reports = self.retention_reports(n, &paths, &analysis.thresholds);
        let mut out = OutputSet::new(&self.config.out_dir)?;
        self.write_analysis(&mut out, &analysis)?;
        out.write_json(&format!("{REPORT_DIR}/{RETENTION_FILE}"), &reports)?;
        Ok(reports)
    }

    /// Threshold statistics and retention for each quantile.
    pub fn sweep(
        &self,
        analysis: &Analysis,
        paths: &[PathRetention],
        quantiles: &[f64],
    ) -> Result<Vec<SweepRow>> {
        let n = analysis.manifest.class_count();
        quantiles
            .iter()
            .map(|&q| {
                if !(0.0..=1.0).contains(&q) {
                    return Err(
                        ConfigError::Invalid(format!("sweep quantile {q} outside [0, 1]")).into(),
                    );
                }
                let thresholds = analysis.thresholds_at(q)?;
                let crop_count = paths
                    .iter()
                    .filter(|p| p.ratio < thresholds[p.class_id].threshold)
                    .count();
                let reports = self.retention_reports(n, paths, &thresholds);
                Ok(SweepRow {
                    quantile: q,
                    thresholds: thresholds.iter().map(|t| t.threshold).collect(),
                    crop_count,
                    resize_count: paths.len() - crop_count,
                    dynamic_retention: reports[0].mean_retention,
                    random_crop_retention: reports[1].mean_retention,
                    resize_only_retention: reports[2].mean_retention,
                })
            })
            .collect()
    }

    /// `sweep`: one CSV row per quantile.
    pub fn run_sweep(&self, quantiles: &[f64]) -> Result<Vec<SweepRow>> {
        let analysis = self.analyze_dataset()?;
        let scorer = self.load_scorer(analysis.manifest.class_count())?;
        let paths = self.path_retention(&analysis, &scorer)?;
        let rows = self.sweep(&analysis, &paths, quantiles)?;
        let mut out = OutputSet::new(&self.config.out_dir)?;
        out.write(
            &format!("{REPORT_DIR}/{SWEEP_FILE}"),
            sweep_csv(&analysis, &rows).as_bytes(),
        )?;
        Ok(rows)
    }
}

fn sweep_csv(analysis: &Analysis, rows: &[SweepRow]) -> String {
    let mut csv = String::from("quantile");
    for c in &analysis.manifest.classes {
        let _ = write!(csv, ",threshold_{}", c.name);
    }
    csv.push_str(
        ",crop_count,resize_count,dynamic_retention,random_crop_retention,resize_only_retention\n",
    );
    for r in rows {
        let _ = write!(csv, "{:.6}", r.quantile);
        for t in &r.thresholds {
            let _ = write!(csv, ",{t:.6}");
        }
        let _ = writeln!(
            csv,
            ",{},{},{:.6},{:.6},{:.6}",
            r.crop_count,
            r.resize_count,
            r.dynamic_retention,
            r.random_crop_retention,
            r.resize_only_retention
        );
    }
    csv
}

/// Recompute the digests recorded in `out_dir/run.json` and return the
/// paths whose content no longer matches.
pub fn verify_run(out_dir: &Path) -> Result<Vec<String>> {
    let path = out_dir.join(RUN_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let record: RunRecord = serde_json::from_str(&text).map_err(|e| {
        Error::io(
            &path,
            std::io::Error::new(std::io::ErrorKind::InvalidData, e),
        )
    })?;
    let mut mismatched = Vec::new();
    for (rel, digest) in &record.outputs {
        let file = out_dir.join(rel);
        let ok = fs::read(&file)
            .map(|bytes| &sha256_hex(&bytes) == digest)
            .unwrap_or(false);
        if !ok {
            mismatched.push(rel.clone());
        }
    }
    Ok(mismatched)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eight_significant_digits() {
        assert_eq!(sig8(0.123456789), 0.12345679);
        assert_eq!(sig8(0.7), 0.7);
        assert_eq!(sig8(1.0 / 3.0), 0.33333333);
        assert_eq!(sig8(0.0), 0.0);
    }

    #[test]
    fn distilled_ids() {
        assert_eq!(distilled_id("cat", 3), "cat/distilled_3");
    }
}
