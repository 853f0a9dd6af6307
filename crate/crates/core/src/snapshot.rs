//! `WFGRID1` grid snapshots: an 8-byte magic, a little-endian `u32` header
//! length, a UTF-8 JSON header and row-major little-endian `f64` samples.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fields::WaveField;

pub const MAGIC: &[u8; 8] = b"WFGRID1\0";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SnapshotError {
    #[error("i/o: {0}")]
    Io(String),
    #[error("not a WFGRID1 file")]
    BadMagic,
    #[error("header does not describe the payload: {0}")]
    HeaderMismatch(String),
    #[error("payload has {got} bytes, header needs {want}")]
    TruncatedPayload { got: usize, want: usize },
    #[error("refusing to write non-finite samples")]
    NonFinite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotHeader {
    pub dims: Vec<usize>,
    pub origin: Vec<f64>,
    pub extent: Vec<f64>,
    pub h: f64,
    pub dt: f64,
    pub time_index: usize,
    pub endianness: String,
    pub dtype: String,
}

impl SnapshotHeader {
    pub fn new(dims: Vec<usize>, origin: Vec<f64>, h: f64, dt: f64, time_index: usize) -> Self {
        let extent = dims.iter().map(|&n| n as f64 * h).collect();
        Self { dims, origin, extent, h, dt, time_index, endianness: "LE".into(), dtype: "f64".into() }
    }

    pub fn count(&self) -> usize {
        self.dims.iter().product()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub header: SnapshotHeader,
    pub data: Vec<f64>,
}

impl Snapshot {
    /// Recorded slice `k` of a field.
    pub fn from_field(field: &WaveField, k: usize) -> Self {
        let g = field.grid();
        let mut header = SnapshotHeader::new(g.n.clone(), g.origin.clone(), g.h, g.dt, field.steps[k]);
        header.extent = g.extent.clone();
        Self { header, data: field.slices[k].clone() }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, SnapshotError> {
        if self.data.iter().any(|v| !v.is_finite()) {
            return Err(SnapshotError::NonFinite);
        }
        if self.data.len() != self.header.count() {
            return Err(SnapshotError::HeaderMismatch(format!(
                "{} samples for dims {:?}",
                self.data.len(),
                self.header.dims
            )));
        }
        let json = serde_json::to_vec(&self.header).map_err(|e| SnapshotError::Io(e.to_string()))?;
        let mut out = Vec::with_capacity(12 + json.len() + 8 * self.data.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, SnapshotError> {
        if bytes.len() < 8 || &bytes[..8] != MAGIC {
            return Err(SnapshotError::BadMagic);
        }
        let len_bytes: [u8; 4] = bytes
            .get(8..12)
            .and_then(|b| b.try_into().ok())
            .ok_or_else(|| SnapshotError::HeaderMismatch("missing header length".into()))?;
        let hlen = u32::from_le_bytes(len_bytes) as usize;
        let json = bytes.get(12..12 + hlen).ok_or_else(|| SnapshotError::HeaderMismatch("header cut short".into()))?;
        let header: SnapshotHeader =
            serde_json::from_slice(json).map_err(|e| SnapshotError::HeaderMismatch(e.to_string()))?;
        if header.endianness != "LE" || header.dtype != "f64" {
            return Err(SnapshotError::HeaderMismatch(format!("{} {}", header.endianness, header.dtype)));
        }
        if header.origin.len() != header.dims.len() || header.extent.len() != header.dims.len() {
            return Err(SnapshotError::HeaderMismatch("origin/extent rank differs from dims".into()));
        }
        let payload = &bytes[12 + hlen..];
        let want = 8 * header.count();
        if payload.len() < want {
            return Err(SnapshotError::TruncatedPayload { got: payload.len(), want });
        }
        if payload.len() > want {
            return Err(SnapshotError::HeaderMismatch(format!("{} trailing bytes", payload.len() - want)));
        }
        let data = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        Ok(Self { header, data })
    }

    pub fn write(&self, path: &Path) -> Result<(), SnapshotError> {
        fs::write(path, self.to_bytes()?).map_err(|e| SnapshotError::Io(format!("{}: {e}", path.display())))
    }

    pub fn read(path: &Path) -> Result<Self, SnapshotError> {
        let bytes = fs::read(path).map_err(|e| SnapshotError::Io(format!("{}: {e}", path.display())))?;
        Self::from_bytes(&bytes)
    }
}
