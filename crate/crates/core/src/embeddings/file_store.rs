use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::{EmbedError, EmbeddingMatrix, EmbeddingProvider, ProviderDescriptor, ProviderKind};

/// `{rows: u32 LE, dim: u32 LE}` precedes the little-endian f32 values.
pub const HEADER_LEN: usize = 8;

/// Hex SHA-256 of the provider identity immediately followed by the text.
pub fn content_digest(identity: &str, text: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(identity.as_bytes());
    hasher.update(text.as_bytes());
    hex::encode(hasher.finalize())
}

/// Directory of precomputed matrices, one `<digest>.bin` file per text.
#[derive(Debug, Clone)]
pub struct FileStore {
    dir: PathBuf,
    descriptor: ProviderDescriptor,
}

impl FileStore {
    /// `identity` must be the identity of the encoder that produced the
    /// matrices; it is part of every lookup key.
    pub fn open(dir: impl AsRef<Path>, identity: &str, dim: usize) -> Result<Self, EmbedError> {
        if dim == 0 {
            return Err(EmbedError::Malformed("dim must be positive".into()));
        }
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir).map_err(|source| EmbedError::Io {
            path: dir.clone(),
            source,
        })?;
        Ok(FileStore {
            dir,
            descriptor: ProviderDescriptor {
                kind: ProviderKind::FileStore,
                dim,
                identity: identity.to_string(),
            },
        })
    }

    pub fn path_for(&self, text: &str) -> PathBuf {
        self.dir
            .join(format!("{}.bin", content_digest(&self.descriptor.identity, text)))
    }

    pub fn contains(&self, text: &str) -> bool {
        self.path_for(text).is_file()
    }

    /// Writes `matrix` for `text` atomically. Values are stored as f32.
    pub fn store(&self, text: &str, matrix: &EmbeddingMatrix) -> Result<(), EmbedError> {
        if matrix.dim() != self.descriptor.dim {
            return Err(EmbedError::DimensionMismatch {
                expected: self.descriptor.dim,
                found: matrix.dim(),
            });
        }
        let mut bytes = Vec::with_capacity(HEADER_LEN + 4 * matrix.values().len());
        bytes.extend_from_slice(&(matrix.rows() as u32).to_le_bytes());
        bytes.extend_from_slice(&(matrix.dim() as u32).to_le_bytes());
        for &v in matrix.values() {
            bytes.extend_from_slice(&(v as f32).to_le_bytes());
        }
        let path = self.path_for(text);
        let io_err = |source| EmbedError::Io {
            path: path.clone(),
            source,
        };
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir).map_err(io_err)?;
        tmp.write_all(&bytes).map_err(io_err)?;
        tmp.persist(&path).map_err(|e| io_err(e.error))?;
        Ok(())
    }

    pub fn decode(bytes: &[u8]) -> Result<EmbeddingMatrix, EmbedError> {
        if bytes.len() < HEADER_LEN {
            return Err(EmbedError::Malformed("file shorter than header".into()));
        }
        let rows = u32::from_le_bytes(bytes[0..4].try_into().expect("4 bytes")) as usize;
        let dim = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
        let body = &bytes[HEADER_LEN..];
        if body.len() != rows * dim * 4 {
            return Err(EmbedError::Malformed(format!(
                "{} payload bytes for shape {rows}x{dim}",
                body.len()
            )));
        }
        let values = body
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
            .collect();
        EmbeddingMatrix::new(rows, dim, values)
    }
}

impl EmbeddingProvider for FileStore {
    fn descriptor(&self) -> &ProviderDescriptor {
        &self.descriptor
    }

    fn embed(&self, text: &str) -> Result<EmbeddingMatrix, EmbedError> {
        if text.trim().is_empty() {
            return Err(EmbedError::EmptyText);
        }
        let path = self.path_for(text);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(EmbedError::CacheMiss {
                    digest: content_digest(&self.descriptor.identity, text),
                })
            }
            Err(source) => return Err(EmbedError::Io { path, source }),
        };
        let matrix = Self::decode(&bytes)?;
        if matrix.dim() != self.descriptor.dim {
            return Err(EmbedError::DimensionMismatch {
                expected: self.descriptor.dim,
                found: matrix.dim(),
            });
        }
        Ok(matrix)
    }
}
