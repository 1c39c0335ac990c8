//! Binary checkpoint format, all integers little-endian:
//!
//! ```text
//! "MTBE" | version u32 | mode u8 | layout u8 | dim u32
//! | provider kind u8 | identity len u32 | identity utf-8
//! | hidden count u32 | hidden widths u32...
//! | min f64 | max f64
//! | config len u32 | config json
//! | n_params u64 | params f32...
//! | crc32 of everything above
//! ```

use std::io::Write;
use std::path::Path;

use super::features::LAYOUT_VERSION;
use super::model::{EstimatorMode, EstimatorModel};
use super::train::TrainConfig;
use super::EstimatorError;
use crate::embeddings::{ProviderDescriptor, ProviderKind};
use crate::qa::MinMax;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"MTBE";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Serialises `model` to bytes.
pub fn write_model(model: &EstimatorModel) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.push(model.mode().code());
    out.push(LAYOUT_VERSION);
    out.extend_from_slice(&(model.dim() as u32).to_le_bytes());
    let d = model.descriptor();
    out.push(d.kind.code());
    out.extend_from_slice(&(d.identity.len() as u32).to_le_bytes());
    out.extend_from_slice(d.identity.as_bytes());
    out.extend_from_slice(&(model.hidden().len() as u32).to_le_bytes());
    for &h in model.hidden() {
        out.extend_from_slice(&(h as u32).to_le_bytes());
    }
    out.extend_from_slice(&model.bounds().min.to_le_bytes());
    out.extend_from_slice(&model.bounds().max.to_le_bytes());
    let config = serde_json::to_vec(model.train_config()).expect("config serialises");
    out.extend_from_slice(&(config.len() as u32).to_le_bytes());
    out.extend_from_slice(&config);
    out.extend_from_slice(&(model.params().len() as u64).to_le_bytes());
    for &p in model.params() {
        out.extend_from_slice(&(p as f32).to_le_bytes());
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], EstimatorError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| EstimatorError::Corrupt(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, EstimatorError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, EstimatorError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, EstimatorError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64, EstimatorError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

/// Parses a checkpoint. The checksum is verified before anything else.
pub fn read_model(bytes: &[u8]) -> Result<EstimatorModel, EstimatorError> {
    if bytes.len() < 4 {
        return Err(EstimatorError::Corrupt("file too short".into()));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(EstimatorError::Checksum { stored, computed });
    }
    let mut c = Cursor { bytes: body, pos: 0 };
    if c.take(4)? != CHECKPOINT_MAGIC {
        return Err(EstimatorError::Corrupt("bad magic".into()));
    }
    let version = c.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(EstimatorError::VersionMismatch {
            what: "format",
            found: version,
            expected: CHECKPOINT_VERSION,
        });
    }
    let mode_code = c.u8()?;
    let mode = EstimatorMode::from_code(mode_code)
        .ok_or_else(|| EstimatorError::Corrupt(format!("unknown mode code {mode_code}")))?;
    let layout = c.u8()?;
    if layout != LAYOUT_VERSION {
        return Err(EstimatorError::VersionMismatch {
            what: "feature layout",
            found: layout as u32,
            expected: LAYOUT_VERSION as u32,
        });
    }
    let dim = c.u32()? as usize;
    let kind_code = c.u8()?;
    let kind = ProviderKind::from_code(kind_code)
        .ok_or_else(|| EstimatorError::Corrupt(format!("unknown provider kind {kind_code}")))?;
    let id_len = c.u32()? as usize;
    let identity = std::str::from_utf8(c.take(id_len)?)
        .map_err(|_| EstimatorError::Corrupt("identity is not utf-8".into()))?
        .to_string();
    let n_hidden = c.u32()? as usize;
    let hidden = (0..n_hidden)
        .map(|_| c.u32().map(|h| h as usize))
        .collect::<Result<Vec<_>, _>>()?;
    let min = c.f64()?;
    let max = c.f64()?;
    let cfg_len = c.u32()? as usize;
    let train_config: TrainConfig = serde_json::from_slice(c.take(cfg_len)?)
        .map_err(|e| EstimatorError::Corrupt(format!("train config: {e}")))?;
    let n_params = c.u64()? as usize;
    let descriptor = ProviderDescriptor { kind, dim, identity };
    let mut model = EstimatorModel::zeros(mode, descriptor, &hidden)?;
    if n_params != model.params().len() {
        return Err(EstimatorError::Corrupt(format!(
            "{n_params} parameters stored, architecture needs {}",
            model.params().len()
        )));
    }
    let raw = c.take(n_params.checked_mul(4).ok_or_else(|| EstimatorError::Corrupt("size overflow".into()))?)?;
    for (p, chunk) in model.params_mut().iter_mut().zip(raw.chunks_exact(4)) {
        *p = f32::from_le_bytes(chunk.try_into().expect("4 bytes")) as f64;
    }
    if c.pos != body.len() {
        return Err(EstimatorError::Corrupt("trailing bytes".into()));
    }
    model.set_bounds(MinMax { min, max });
    model.train_config = train_config;
    Ok(model)
}

/// Writes the checkpoint atomically.
pub fn save_model(model: &EstimatorModel, path: impl AsRef<Path>) -> Result<(), EstimatorError> {
    let path = path.as_ref();
    let io_err = |source| EstimatorError::Io {
        path: path.to_path_buf(),
        source,
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
    tmp.write_all(&write_model(model)).map_err(io_err)?;
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<EstimatorModel, EstimatorError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| EstimatorError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_model(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(mode: EstimatorMode) -> EstimatorModel {
        let d = ProviderDescriptor {
            kind: ProviderKind::FileStore,
            dim: 3,
            identity: "enc/layer-9 ẹ".into(),
        };
        let mut m = EstimatorModel::new(mode, d, &[7, 4], 11).unwrap();
        m.set_bounds(MinMax { min: -1.25, max: 0.75 });
        m
    }

    #[test]
    fn round_trip_is_exact() {
        for mode in [EstimatorMode::StlRef, EstimatorMode::StlQe, EstimatorMode::Mtl] {
            let m = model(mode);
            let back = read_model(&write_model(&m)).unwrap();
            assert_eq!(back, m);
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("m.ckpt");
            save_model(&m, &p).unwrap();
            assert_eq!(load_model(&p).unwrap(), m);
        }
    }

    #[test]
    fn layout_prefix() {
        let bytes = write_model(&model(EstimatorMode::Mtl));
        assert_eq!(&bytes[..4], b"MTBE");
        assert_eq!(&bytes[4..8], &1u32.to_le_bytes());
        assert_eq!(bytes[8], 2);
        assert_eq!(bytes[9], LAYOUT_VERSION);
        assert_eq!(&bytes[10..14], &3u32.to_le_bytes());
        assert_eq!(bytes[14], ProviderKind::FileStore.code());
    }

    #[test]
    fn corruption_detected() {
        let bytes = write_model(&model(EstimatorMode::StlQe));
        let truncated = &bytes[..bytes.len() - 10];
        assert!(matches!(read_model(truncated), Err(EstimatorError::Checksum { .. })));
        let mut flipped = bytes.clone();
        flipped[40] ^= 0x01;
        assert!(matches!(read_model(&flipped), Err(EstimatorError::Checksum { .. })));
        assert!(read_model(&[]).is_err());
    }

    #[test]
    fn future_version_rejected() {
        let mut bytes = write_model(&model(EstimatorMode::StlQe));
        bytes.truncate(bytes.len() - 4);
        bytes[4..8].copy_from_slice(&2u32.to_le_bytes());
        let crc = crc32fast::hash(&bytes);
        bytes.extend_from_slice(&crc.to_le_bytes());
        assert!(matches!(
            read_model(&bytes),
            Err(EstimatorError::VersionMismatch { what: "format", found: 2, .. })
        ));
    }
}
