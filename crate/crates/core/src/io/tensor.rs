//! Tensor file:
//!
//! ```text
//! "EMCT" | version u32 LE | header length u64 LE | JSON header | f32 LE payload, row-major
//! ```
//!
//! The header carries dtype, shape, axis labels, optional protocol and
//! provenance, and a CRC32 of the payload bytes.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::container::{frame, read_f32s_le, unframe, write_atomic};
use crate::emc_sim::SequenceProtocol;
use crate::error::{invalid, Error, Result};

pub const TENSOR_MAGIC: &[u8; 4] = b"EMCT";
pub const TENSOR_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checksum {
    pub algorithm: String,
    /// Lower-case hex, 8 digits.
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorHeader {
    pub dtype: String,
    pub shape: Vec<usize>,
    pub axes: Vec<String>,
    #[serde(default)]
    pub protocol: Option<SequenceProtocol>,
    #[serde(default)]
    pub provenance: Option<serde_json::Value>,
    pub checksum: Checksum,
}

/// An f32 tensor with its metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorFile {
    pub shape: Vec<usize>,
    pub axes: Vec<String>,
    pub protocol: Option<SequenceProtocol>,
    pub provenance: Option<serde_json::Value>,
    pub data: Vec<f32>,
}

impl TensorFile {
    pub fn new(shape: Vec<usize>, axes: &[&str], data: Vec<f32>) -> Result<Self> {
        let t = TensorFile {
            shape,
            axes: axes.iter().map(|s| s.to_string()).collect(),
            protocol: None,
            provenance: None,
            data,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn with_protocol(mut self, protocol: SequenceProtocol) -> Self {
        self.protocol = Some(protocol);
        self
    }

    pub fn with_provenance(mut self, provenance: serde_json::Value) -> Self {
        self.provenance = Some(provenance);
        self
    }

    fn validate(&self) -> Result<()> {
        if self.axes.len() != self.shape.len() {
            return Err(invalid(format!(
                "{} axis labels for a rank-{} tensor",
                self.axes.len(),
                self.shape.len()
            )));
        }
        let n: usize = self.shape.iter().product();
        if n != self.data.len() {
            return Err(Error::ShapeMismatch(format!(
                "shape {:?} holds {n} values, payload has {}",
                self.shape,
                self.data.len()
            )));
        }
        Ok(())
    }

    pub fn payload_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.data.len() * 4);
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        self.validate()?;
        let payload = self.payload_bytes();
        let header = TensorHeader {
            dtype: "f32".into(),
            shape: self.shape.clone(),
            axes: self.axes.clone(),
            protocol: self.protocol.clone(),
            provenance: self.provenance.clone(),
            checksum: Checksum { algorithm: "crc32".into(), value: format!("{:08x}", crc32fast::hash(&payload)) },
        };
        let header = serde_json::to_vec(&header).map_err(|e| Error::Format(e.to_string()))?;
        let mut bytes = frame(TENSOR_MAGIC, TENSOR_VERSION, &header);
        bytes.extend_from_slice(&payload);
        Ok(bytes)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let framed = unframe(bytes, TENSOR_MAGIC, TENSOR_VERSION)?;
        let header: TensorHeader = serde_json::from_slice(framed.header)
            .map_err(|e| Error::Format(format!("tensor header: {e}")))?;
        if header.dtype != "f32" {
            return Err(Error::Format(format!("unsupported dtype {:?}", header.dtype)));
        }
        if header.checksum.algorithm != "crc32" {
            return Err(Error::Format(format!("unsupported checksum {:?}", header.checksum.algorithm)));
        }
        let n = header
            .shape
            .iter()
            .try_fold(1usize, |acc, d| acc.checked_mul(*d))
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| Error::Format("tensor shape overflows".into()))?;
        let payload = framed.payload;
        if payload.len() < n {
            return Err(Error::Checksum(format!("file truncated: payload has {} bytes, expected {n}", payload.len())));
        }
        if payload.len() > n {
            return Err(Error::Format("trailing bytes after tensor payload".into()));
        }
        let computed = format!("{:08x}", crc32fast::hash(payload));
        if computed != header.checksum.value.to_ascii_lowercase() {
            return Err(Error::Checksum(format!("stored {}, computed {computed}", header.checksum.value)));
        }
        if let Some(p) = &header.protocol {
            p.validate()?;
        }
        let t = TensorFile {
            shape: header.shape,
            axes: header.axes,
            protocol: header.protocol,
            provenance: header.provenance,
            data: read_f32s_le(payload),
        };
        t.validate().map_err(|e| Error::Format(e.to_string()))?;
        Ok(t)
    }
}

pub fn write_tensor(path: impl AsRef<Path>, tensor: &TensorFile) -> Result<()> {
    write_atomic(path.as_ref(), &tensor.encode()?)
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<TensorFile> {
    let bytes = fs::read(path.as_ref()).map_err(|e| Error::with_path(e, path.as_ref()))?;
    TensorFile::decode(&bytes)
}
