//! Deterministic random substreams.
//!
//! Every random draw in the pipeline comes from a stream keyed by
//! `(seed, domain, key)`, where `key` is an image or distilled-image id.
//! Results therefore do not depend on processing order or worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha8Rng;

pub const SELECT_DOMAIN: &str = "select";
pub const LABEL_DOMAIN: &str = "label";
pub const BASELINE_DOMAIN: &str = "baseline-crop";

pub fn substream(seed: u64, domain: &str, key: &str) -> StreamRng {
    let mut hasher = Sha256::new();
    hasher.update(b"patchstill/v1\0");
    hasher.update(seed.to_le_bytes());
    hasher.update(domain.as_bytes());
    hasher.update([0u8]);
    hasher.update(key.as_bytes());
    let digest = hasher.finalize();
    let mut bytes = [0u8; 32];
    bytes.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(bytes)
}
