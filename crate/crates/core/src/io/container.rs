//! Shared framing for the binary files: 4-byte magic, u32 LE version,
//! u64 LE header length, UTF-8 JSON header, then the raw payload.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

pub(crate) const PREAMBLE_LEN: usize = 16;

pub(crate) fn frame(magic: &[u8; 4], version: u32, header: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(PREAMBLE_LEN + header.len());
    out.extend_from_slice(magic);
    out.extend_from_slice(&version.to_le_bytes());
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(header);
    out
}

pub(crate) struct Framed<'a> {
    pub header: &'a [u8],
    pub payload: &'a [u8],
}

pub(crate) fn unframe<'a>(bytes: &'a [u8], magic: &[u8; 4], version: u32) -> Result<Framed<'a>> {
    if bytes.len() < 4 {
        return Err(Error::Checksum("file truncated before the magic".into()));
    }
    if &bytes[..4] != magic {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&bytes[..4]),
            String::from_utf8_lossy(magic)
        )));
    }
    if bytes.len() < PREAMBLE_LEN {
        return Err(Error::Checksum("file truncated inside the preamble".into()));
    }
    let found = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if found != version {
        return Err(Error::Format(format!("unsupported format version {found}, expected {version}")));
    }
    let header_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let end = (PREAMBLE_LEN as u64).checked_add(header_len).filter(|e| *e <= bytes.len() as u64);
    let Some(end) = end else {
        return Err(Error::Checksum("file truncated inside the header".into()));
    };
    let end = end as usize;
    Ok(Framed { header: &bytes[PREAMBLE_LEN..end], payload: &bytes[end..] })
}

/// Write through a sibling temporary file and rename into place.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp_name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    tmp_name.push(".partial");
    let tmp = path.with_file_name(tmp_name);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).map_err(Error::from)
}

pub(crate) fn f64s_le(values: impl IntoIterator<Item = f64>, out: &mut Vec<u8>) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub(crate) fn read_f64s_le(bytes: &[u8]) -> Vec<f64> {
    bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect()
}

pub(crate) fn read_f32s_le(bytes: &[u8]) -> Vec<f32> {
    bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect()
}
