//! Content hashes used as cache keys and as provenance tags in exported files.

use serde::Serialize;
use sha2::{Digest, Sha256};

/// Incremental SHA-256 over the exact bit patterns of the fed values.
#[derive(Default, Clone)]
pub struct ContentHasher {
    inner: Sha256,
}

impl ContentHasher {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn f64(&mut self, v: f64) -> &mut Self {
        self.inner.update(v.to_bits().to_le_bytes());
        self
    }

    pub fn u64(&mut self, v: u64) -> &mut Self {
        self.inner.update(v.to_le_bytes());
        self
    }

    pub fn bytes(&mut self, b: &[u8]) -> &mut Self {
        self.u64(b.len() as u64);
        self.inner.update(b);
        self
    }

    pub fn str(&mut self, s: &str) -> &mut Self {
        self.bytes(s.as_bytes())
    }

    /// Hashes the canonical JSON encoding of `value`.
    pub fn json<T: Serialize>(&mut self, value: &T) -> &mut Self {
        let text = serde_json::to_string(value).expect("serializable value");
        self.str(&text)
    }

    /// Full 64-character hex digest.
    pub fn finish(&self) -> String {
        hex::encode(self.inner.clone().finalize())
    }

    /// 16-character prefix used in file headers.
    pub fn finish_short(&self) -> String {
        self.finish()[..16].to_string()
    }
}

/// Short hash of the canonical JSON encoding of a configuration value.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    ContentHasher::new().json(value).finish_short()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = ContentHasher::new().f64(1.0).str("x").finish();
        let b = ContentHasher::new().f64(1.0).str("x").finish();
        let c = ContentHasher::new().f64(1.0 + f64::EPSILON).str("x").finish();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(config_hash(&(1, "a")).len(), 16);
    }
}
