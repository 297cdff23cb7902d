#![allow(dead_code)]

use std::path::PathBuf;

use patchstill::synthetic::{generate, write_dataset, ShapeSample, ShapesSpec};
use patchstill::PipelineConfig;
use tempfile::TempDir;

pub struct Workspace {
    pub dir: TempDir,
    pub samples: Vec<ShapeSample>,
}

impl Workspace {
    pub fn new(spec: &ShapesSpec) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let samples = generate(spec);
        write_dataset(
            &samples,
            &dir.path().join("images"),
            &dir.path().join("masks"),
        )
        .unwrap();
        Self { dir, samples }
    }

    pub fn shapes(seed: u64) -> Self {
        Self::new(&ShapesSpec {
            seed,
            ..ShapesSpec::default()
        })
    }

    pub fn images(&self) -> PathBuf {
        self.dir.path().join("images")
    }

    pub fn masks(&self) -> PathBuf {
        self.dir.path().join("masks")
    }

    pub fn out(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    pub fn config(&self, out: &str) -> PipelineConfig {
        PipelineConfig::new(self.images(), self.masks(), self.out(out))
    }
}
