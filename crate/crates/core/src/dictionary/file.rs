//! Dictionary file:
//!
//! ```text
//! "EMCD" | version u32 LE | header length u64 LE | JSON header
//!        | curves f64 LE, row-major | raw_first_echo f64 LE | CRC32 u32 LE
//! ```
//!
//! The trailing CRC32 covers the JSON header and both matrices.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{DictionaryGrid, EmcDictionary};
use crate::emc_sim::SequenceProtocol;
use crate::error::{Error, Result};
use crate::io::container::{f64s_le, frame, read_f64s_le, unframe, write_atomic};

pub const DICTIONARY_MAGIC: &[u8; 4] = b"EMCD";
pub const DICTIONARY_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    grid: DictionaryGrid,
    protocol: SequenceProtocol,
    rows: usize,
    echoes: usize,
    dtype: String,
    checksum: String,
}

pub fn save_dictionary(dict: &EmcDictionary, path: impl AsRef<Path>) -> Result<()> {
    let header = Header {
        grid: dict.grid().clone(),
        protocol: dict.protocol().clone(),
        rows: dict.n_rows(),
        echoes: dict.n_echoes(),
        dtype: "f64".into(),
        checksum: "crc32".into(),
    };
    let header = serde_json::to_vec(&header).map_err(|e| Error::Format(e.to_string()))?;
    let mut bytes = frame(DICTIONARY_MAGIC, DICTIONARY_VERSION, &header);
    let body_start = bytes.len();
    f64s_le(dict.curves_slice().iter().copied(), &mut bytes);
    f64s_le(dict.raw_first_echo().iter().copied(), &mut bytes);
    let mut h = crc32fast::Hasher::new();
    h.update(&header);
    h.update(&bytes[body_start..]);
    bytes.extend_from_slice(&h.finalize().to_le_bytes());
    write_atomic(path.as_ref(), &bytes)
}

pub fn load_dictionary(path: impl AsRef<Path>) -> Result<EmcDictionary> {
    let bytes = fs::read(path.as_ref()).map_err(|e| Error::with_path(e, path.as_ref()))?;
    decode(&bytes)
}

fn decode(bytes: &[u8]) -> Result<EmcDictionary> {
    let framed = unframe(bytes, DICTIONARY_MAGIC, DICTIONARY_VERSION)?;
    let header: Header = serde_json::from_slice(framed.header)
        .map_err(|e| Error::Format(format!("dictionary header: {e}")))?;
    if header.dtype != "f64" || header.checksum != "crc32" {
        return Err(Error::Format(format!(
            "unsupported dtype/checksum {}/{}",
            header.dtype, header.checksum
        )));
    }
    let n_curve = header
        .rows
        .checked_mul(header.echoes)
        .ok_or_else(|| Error::Format("dictionary shape overflows".into()))?;
    let body_len = (n_curve + header.rows) * 8;
    let payload = framed.payload;
    if payload.len() < body_len + 4 {
        return Err(Error::Checksum(format!(
            "file truncated: payload has {} bytes, expected {}",
            payload.len(),
            body_len + 4
        )));
    }
    if payload.len() > body_len + 4 {
        return Err(Error::Format("trailing bytes after dictionary payload".into()));
    }
    let (body, crc) = payload.split_at(body_len);
    let stored = u32::from_le_bytes(crc.try_into().unwrap());
    let mut h = crc32fast::Hasher::new();
    h.update(framed.header);
    h.update(body);
    let computed = h.finalize();
    if stored != computed {
        return Err(Error::Checksum(format!("stored {stored:08x}, computed {computed:08x}")));
    }

    header.grid.validate()?;
    header.protocol.validate()?;
    let (curve_bytes, raw_bytes) = body.split_at(n_curve * 8);
    let curves = Array2::from_shape_vec((header.rows, header.echoes), read_f64s_le(curve_bytes))
        .map_err(|e| Error::Format(e.to_string()))?;
    EmcDictionary::from_parts(header.grid, header.protocol, curves, read_f64s_le(raw_bytes))
        .map_err(|e| Error::Format(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dictionary::build_dictionary;

    fn small() -> EmcDictionary {
        let grid = DictionaryGrid::new(vec![40.0, 80.0, 120.0], vec![0.8, 1.0]).unwrap();
        build_dictionary(grid, SequenceProtocol::default()).unwrap()
    }

    fn encoded(d: &EmcDictionary) -> Vec<u8> {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.emcd");
        save_dictionary(d, &p).unwrap();
        fs::read(&p).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let d = small();
        let back = decode(&encoded(&d)).unwrap();
        assert_eq!(back.grid(), d.grid());
        assert_eq!(back.protocol(), d.protocol());
        let bits = |x: &[f64]| x.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(back.curves_slice()), bits(d.curves_slice()));
        assert_eq!(bits(back.raw_first_echo()), bits(d.raw_first_echo()));
        assert_eq!(back.checksum(), d.checksum());
    }

    #[test]
    fn layout_starts_with_magic_and_version() {
        let bytes = encoded(&small());
        assert_eq!(&bytes[..4], b"EMCD");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        let hlen = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let header: serde_json::Value = serde_json::from_slice(&bytes[16..16 + hlen]).unwrap();
        assert_eq!(header["rows"], 6);
        assert_eq!(header["echoes"], 10);
        assert_eq!(bytes.len(), 16 + hlen + 6 * 10 * 8 + 6 * 8 + 4);
    }

    #[test]
    fn truncation_is_a_checksum_error() {
        let bytes = encoded(&small());
        for cut in [bytes.len() - 1, bytes.len() - 100, 20, 10, 2] {
            match decode(&bytes[..cut]) {
                Err(Error::Checksum(_)) => {}
                other => panic!("cut at {cut}: {other:?}"),
            }
        }
    }

    #[test]
    fn flipped_payload_bit_is_detected() {
        let mut bytes = encoded(&small());
        let n = bytes.len();
        bytes[n - 40] ^= 0x01;
        assert!(matches!(decode(&bytes), Err(Error::Checksum(_))));
    }

    #[test]
    fn wrong_magic_and_version() {
        let mut bytes = encoded(&small());
        bytes[0] = b'X';
        assert!(matches!(decode(&bytes), Err(Error::Format(_))));
        let mut bytes = encoded(&small());
        bytes[4] = 9;
        assert!(matches!(decode(&bytes), Err(Error::Format(_))));
    }
}
