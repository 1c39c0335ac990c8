//! Token-level embedding providers standing in for frozen multilingual
//! encoders.

mod deterministic;
mod file_store;
mod remote;

use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use deterministic::DeterministicProvider;
pub use file_store::{content_digest, FileStore, HEADER_LEN};
pub use remote::{EmbedRequest, EmbedResponse, RemoteProvider};

#[derive(Debug, thiserror::Error)]
pub enum EmbedError {
    #[error("cannot embed empty text")]
    EmptyText,
    #[error("embedding cache miss for digest {digest}")]
    CacheMiss { digest: String },
    #[error("embedding width {found} does not match provider width {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("malformed embedding matrix: {0}")]
    Malformed(String),
    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("remote embedding service: {0}")]
    Remote(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    DeterministicTest,
    FileStore,
    Remote,
}

impl ProviderKind {
    pub fn code(self) -> u8 {
        match self {
            ProviderKind::DeterministicTest => 0,
            ProviderKind::FileStore => 1,
            ProviderKind::Remote => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(ProviderKind::DeterministicTest),
            1 => Some(ProviderKind::FileStore),
            2 => Some(ProviderKind::Remote),
            _ => None,
        }
    }
}

/// Describes where embeddings come from. `identity` names the encoder (and
/// layer, where relevant) and is part of the file-store digest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProviderDescriptor {
    pub kind: ProviderKind,
    pub dim: usize,
    pub identity: String,
}

/// Row-major `rows x dim` matrix, one row per token.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingMatrix {
    rows: usize,
    dim: usize,
    values: Vec<f64>,
}

impl EmbeddingMatrix {
    pub fn new(rows: usize, dim: usize, values: Vec<f64>) -> Result<Self, EmbedError> {
        if rows == 0 || dim == 0 {
            return Err(EmbedError::Malformed(format!("shape {rows}x{dim} is empty")));
        }
        if values.len() != rows * dim {
            return Err(EmbedError::Malformed(format!(
                "{} values for shape {rows}x{dim}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(EmbedError::Malformed("non-finite entry".into()));
        }
        Ok(EmbeddingMatrix { rows, dim, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, EmbedError> {
        let dim = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(EmbedError::Malformed("ragged rows".into()));
        }
        Self::new(rows.len(), dim, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    /// The same matrix rounded to 32-bit floats, i.e. what the file store
    /// persists.
    pub fn to_f32_precision(&self) -> EmbeddingMatrix {
        EmbeddingMatrix {
            rows: self.rows,
            dim: self.dim,
            values: self.values.iter().map(|&v| v as f32 as f64).collect(),
        }
    }
}

pub trait EmbeddingProvider: Send + Sync {
    fn descriptor(&self) -> &ProviderDescriptor;

    fn embed(&self, text: &str) -> Result<EmbeddingMatrix, EmbedError>;

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingMatrix>, EmbedError> {
        texts.iter().map(|t| self.embed(t)).collect()
    }
}

impl<P: EmbeddingProvider + ?Sized> EmbeddingProvider for Arc<P> {
    fn descriptor(&self) -> &ProviderDescriptor {
        (**self).descriptor()
    }

    fn embed(&self, text: &str) -> Result<EmbeddingMatrix, EmbedError> {
        (**self).embed(text)
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingMatrix>, EmbedError> {
        (**self).embed_batch(texts)
    }
}

impl<P: EmbeddingProvider + ?Sized> EmbeddingProvider for Box<P> {
    fn descriptor(&self) -> &ProviderDescriptor {
        (**self).descriptor()
    }

    fn embed(&self, text: &str) -> Result<EmbeddingMatrix, EmbedError> {
        (**self).embed(text)
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingMatrix>, EmbedError> {
        (**self).embed_batch(texts)
    }
}

/// Provider selection as it appears in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProviderConfig {
    DeterministicTest {
        dim: usize,
        #[serde(default)]
        seed: u64,
    },
    FileStore {
        dir: PathBuf,
        dim: usize,
        identity: String,
    },
    Remote {
        url: String,
        dim: usize,
        identity: String,
    },
}

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig::DeterministicTest { dim: 32, seed: 0 }
    }
}

impl ProviderConfig {
    pub fn build(&self) -> Result<Box<dyn EmbeddingProvider>, EmbedError> {
        Ok(match self {
            ProviderConfig::DeterministicTest { dim, seed } => {
                Box::new(DeterministicProvider::new(*dim, *seed)?)
            }
            ProviderConfig::FileStore { dir, dim, identity } => {
                Box::new(FileStore::open(dir, identity, *dim)?)
            }
            ProviderConfig::Remote { url, dim, identity } => {
                Box::new(RemoteProvider::new(url, identity, *dim)?)
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_shape_checks() {
        assert!(EmbeddingMatrix::new(0, 3, vec![]).is_err());
        assert!(EmbeddingMatrix::new(1, 3, vec![1.0, 2.0]).is_err());
        assert!(EmbeddingMatrix::new(1, 2, vec![1.0, f64::NAN]).is_err());
        let m = EmbeddingMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(m.row(1), &[3.0, 4.0]);
        assert!(EmbeddingMatrix::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn config_parses_from_toml() {
        let cfg: ProviderConfig = toml::from_str("kind = \"deterministic_test\"\ndim = 8\n").unwrap();
        assert_eq!(cfg, ProviderConfig::DeterministicTest { dim: 8, seed: 0 });
        assert_eq!(cfg.build().unwrap().descriptor().dim, 8);
    }
}
