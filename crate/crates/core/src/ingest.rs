//! Directory-per-class dataset scanning and image decoding.
//!
//! Layout: `root/<class_name>/<image>.{png,jpg,jpeg}` with an optional
//! `root/prompts.json` mapping class names to segmenter prompts.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::Raster;

pub const PROMPTS_FILE: &str = "prompts.json";
const IMAGE_EXTENSIONS: &[&str] = &["png", "jpg", "jpeg"];

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("empty dataset: {0}")]
    EmptyDataset(String),
    #[error("cannot read {path}: {reason}")]
    UnreadableEntry { path: PathBuf, reason: String },
    #[error("cannot decode {path}: {reason}")]
    DecodeError { path: PathBuf, reason: String },
    #[error("{path}: manifest says {expected:?}, file is {actual:?}")]
    DimensionMismatch {
        path: PathBuf,
        expected: (u32, u32),
        actual: (u32, u32),
    },
    #[error("invalid {path}: {reason}")]
    InvalidPrompts { path: PathBuf, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassSpec {
    pub class_id: usize,
    pub name: String,
    pub prompt: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageRecord {
    /// `<class_name>/<filename>`, unique across the manifest.
    pub image_id: String,
    pub class_id: usize,
    pub path: PathBuf,
    pub width: u32,
    pub height: u32,
    /// Ground-truth label; always equals `class_id`.
    pub label: usize,
}

impl ImageRecord {
    /// File name without extension.
    pub fn stem(&self) -> &str {
        self.path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub classes: Vec<ClassSpec>,
    pub images: Vec<ImageRecord>,
}

impl Manifest {
    pub fn class_count(&self) -> usize {
        self.classes.len()
    }

    pub fn class(&self, class_id: usize) -> &ClassSpec {
        &self.classes[class_id]
    }

    /// Indices into `images`, grouped by class id.
    pub fn images_by_class(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.classes.len()];
        for (i, rec) in self.images.iter().enumerate() {
            groups[rec.class_id].push(i);
        }
        groups
    }

    /// The image records as a JSON array with stable field order.
    pub fn records_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.images).expect("records serialize");
        s.push('\n');
        s
    }
}

/// Entries skipped by [`scan_dataset_lenient`].
pub type Rejected = Vec<(PathBuf, IngestError)>;

/// Scan a dataset tree. Fails on the first unreadable entry.
pub fn scan_dataset(root: &Path) -> Result<Manifest, IngestError> {
    let (manifest, mut rejected) = scan(root, false)?;
    match rejected.pop() {
        Some((_, err)) => Err(err),
        None => Ok(manifest),
    }
}

/// Scan a dataset tree, collecting images whose headers cannot be read
/// instead of failing. A class left with no images is still an error.
pub fn scan_dataset_lenient(root: &Path) -> Result<(Manifest, Rejected), IngestError> {
    scan(root, true)
}

fn scan(root: &Path, lenient: bool) -> Result<(Manifest, Rejected), IngestError> {
    let unreadable = |path: &Path, e: std::io::Error| IngestError::UnreadableEntry {
        path: path.to_path_buf(),
        reason: e.to_string(),
    };
    let mut class_dirs = Vec::new();
    for entry in fs::read_dir(root).map_err(|e| unreadable(root, e))? {
        let entry = entry.map_err(|e| unreadable(root, e))?;
        let path = entry.path();
        if path.is_dir() {
            let name = entry.file_name().to_string_lossy().into_owned();
            class_dirs.push((name, path));
        }
    }
    if class_dirs.is_empty() {
        return Err(IngestError::EmptyDataset(format!(
            "no class directories under {}",
            root.display()
        )));
    }
    class_dirs.sort();

    let prompts = read_prompts(root)?;
    let mut classes = Vec::with_capacity(class_dirs.len());
    let mut images = Vec::new();
    let mut rejected = Vec::new();
    for (class_id, (name, dir)) in class_dirs.into_iter().enumerate() {
        let mut files = Vec::new();
        for entry in fs::read_dir(&dir).map_err(|e| unreadable(&dir, e))? {
            let entry = entry.map_err(|e| unreadable(&dir, e))?;
            let path = entry.path();
            if path.is_file() && has_image_extension(&path) {
                files.push((entry.file_name().to_string_lossy().into_owned(), path));
            } else {
                log::debug!("ignoring non-image entry {}", path.display());
            }
        }
        files.sort();
        let before = images.len();
        for (file_name, path) in files {
            match read_dimensions(&path) {
                Ok((width, height)) => images.push(ImageRecord {
                    image_id: format!("{name}/{file_name}"),
                    class_id,
                    path,
                    width,
                    height,
                    label: class_id,
                }),
                Err(err) if lenient => rejected.push((path, err)),
                Err(err) => return Err(err),
            }
        }
        if images.len() == before {
            return Err(IngestError::EmptyDataset(format!(
                "class directory {} holds no readable images",
                dir.display()
            )));
        }
        let prompt = prompts.get(&name).cloned().unwrap_or_else(|| name.clone());
        classes.push(ClassSpec {
            class_id,
            name,
            prompt,
        });
    }
    Ok((Manifest { classes, images }, rejected))
}

fn has_image_extension(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
}

fn read_prompts(root: &Path) -> Result<BTreeMap<String, String>, IngestError> {
    let path = root.join(PROMPTS_FILE);
    if !path.is_file() {
        return Ok(BTreeMap::new());
    }
    let text = fs::read_to_string(&path).map_err(|e| IngestError::UnreadableEntry {
        path: path.clone(),
        reason: e.to_string(),
    })?;
    serde_json::from_str(&text).map_err(|e| IngestError::InvalidPrompts {
        path,
        reason: e.to_string(),
    })
}

fn read_dimensions(path: &Path) -> Result<(u32, u32), IngestError> {
    let reader = image::ImageReader::open(path)
        .and_then(|r| r.with_guessed_format())
        .map_err(|e| IngestError::UnreadableEntry {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
    let (w, h) = reader
        .into_dimensions()
        .map_err(|e| IngestError::UnreadableEntry {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
    if w == 0 || h == 0 {
        return Err(IngestError::UnreadableEntry {
            path: path.to_path_buf(),
            reason: format!("zero-sized image {w}x{h}"),
        });
    }
    Ok((w, h))
}

/// Decode the image behind `record` to RGB. Grayscale is replicated across
/// channels; alpha is dropped.
pub fn load_image(record: &ImageRecord) -> Result<Raster, IngestError> {
    let decoded = image::ImageReader::open(&record.path)
        .and_then(|r| r.with_guessed_format())
        .map_err(|e| IngestError::DecodeError {
            path: record.path.clone(),
            reason: e.to_string(),
        })?
        .decode()
        .map_err(|e| IngestError::DecodeError {
            path: record.path.clone(),
            reason: e.to_string(),
        })?;
    let actual = (decoded.width(), decoded.height());
    if actual != (record.width, record.height) {
        return Err(IngestError::DimensionMismatch {
            path: record.path.clone(),
            expected: (record.width, record.height),
            actual,
        });
    }
    Ok(Raster::from_rgb_image(decoded.to_rgb8()))
}
