//! File formats and run configuration.
//!
//! Stacks are stored as one tensor file with axes `(slice, echo, row, col)`
//! and the acquisition protocol in its header. A set of parameter maps is a
//! directory holding `t2.emct` and `pd.emct`, plus `b1.emct`, `residual.emct`
//! and `flags.emct` when present. Each map has axes `(slice, row, col)`.

mod config;
pub(crate) mod container;
mod tensor;

use std::fs;
use std::path::Path;

use ndarray::{Array3, Array4};

pub use config::{FitSection, GridSection, MethodName, PathsSection, ProtocolOverrides, RunConfig};
pub use tensor::{read_tensor, write_tensor, Checksum, TensorFile, TensorHeader, TENSOR_MAGIC, TENSOR_VERSION};

use crate::error::{Error, Result};
use crate::fitter::{MeseStack, ParameterMaps, Provenance};

pub const STACK_AXES: [&str; 4] = ["slice", "echo", "row", "col"];
pub const MAP_AXES: [&str; 3] = ["slice", "row", "col"];

pub const T2_FILE: &str = "t2.emct";
pub const PD_FILE: &str = "pd.emct";
pub const B1_FILE: &str = "b1.emct";
pub const RESIDUAL_FILE: &str = "residual.emct";
pub const FLAGS_FILE: &str = "flags.emct";

fn to_f32<'a>(it: impl Iterator<Item = &'a f64>) -> Vec<f32> {
    it.map(|v| *v as f32).collect()
}

pub fn stack_to_tensor(stack: &MeseStack) -> Result<TensorFile> {
    stack.validate()?;
    let shape = stack.data.shape().to_vec();
    Ok(TensorFile::new(shape, &STACK_AXES, to_f32(stack.data.iter()))?.with_protocol(stack.protocol.clone()))
}

/// Rebuild a stack; the tensor must carry a protocol. The mask is not part of the file.
pub fn tensor_to_stack(t: &TensorFile) -> Result<MeseStack> {
    let protocol = t
        .protocol
        .clone()
        .ok_or_else(|| Error::Format("stack file carries no protocol".into()))?;
    let [s, e, r, c]: [usize; 4] = t
        .shape
        .as_slice()
        .try_into()
        .map_err(|_| Error::ShapeMismatch(format!("stack must be rank 4, got shape {:?}", t.shape)))?;
    let data = Array4::from_shape_vec((s, e, r, c), t.data.iter().map(|v| *v as f64).collect())
        .map_err(|e| Error::ShapeMismatch(e.to_string()))?;
    MeseStack::new(data, protocol, None)
}

pub fn write_stack(path: impl AsRef<Path>, stack: &MeseStack) -> Result<()> {
    write_tensor(path, &stack_to_tensor(stack)?)
}

pub fn read_stack(path: impl AsRef<Path>) -> Result<MeseStack> {
    tensor_to_stack(&read_tensor(path)?)
}

/// Masks are stored as 0/1 maps.
pub fn write_mask(path: impl AsRef<Path>, mask: &Array3<bool>) -> Result<()> {
    let data = mask.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect();
    write_tensor(path, &TensorFile::new(mask.shape().to_vec(), &MAP_AXES, data)?)
}

pub fn read_mask(path: impl AsRef<Path>) -> Result<Array3<bool>> {
    Ok(tensor_to_map(&read_tensor(path)?)?.mapv(|v| v > 0.5))
}

pub fn map_to_tensor(map: &Array3<f64>) -> Result<TensorFile> {
    TensorFile::new(map.shape().to_vec(), &MAP_AXES, to_f32(map.iter()))
}

pub fn tensor_to_map(t: &TensorFile) -> Result<Array3<f64>> {
    let [s, r, c]: [usize; 3] = t
        .shape
        .as_slice()
        .try_into()
        .map_err(|_| Error::ShapeMismatch(format!("map must be rank 3, got shape {:?}", t.shape)))?;
    Array3::from_shape_vec((s, r, c), t.data.iter().map(|v| *v as f64).collect())
        .map_err(|e| Error::ShapeMismatch(e.to_string()))
}

/// Write every present map into `dir`, creating it if needed. Each file carries the provenance.
pub fn write_maps(dir: impl AsRef<Path>, maps: &ParameterMaps) -> Result<()> {
    maps.validate()?;
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let prov = serde_json::to_value(&maps.provenance).map_err(|e| Error::Format(e.to_string()))?;
    let put = |name: &str, map: &Array3<f64>| -> Result<()> {
        write_tensor(dir.join(name), &map_to_tensor(map)?.with_provenance(prov.clone()))
    };
    put(T2_FILE, &maps.t2)?;
    put(PD_FILE, &maps.pd)?;
    if let Some(m) = &maps.b1 {
        put(B1_FILE, m)?;
    }
    if let Some(m) = &maps.residual {
        put(RESIDUAL_FILE, m)?;
    }
    if let Some(m) = &maps.flags {
        put(FLAGS_FILE, &m.mapv(f64::from))?;
    }
    Ok(())
}

/// Read a map directory. Provenance comes from `t2.emct`; an unrecognized one is kept as `fitter = "unknown"`.
pub fn read_maps(dir: impl AsRef<Path>) -> Result<ParameterMaps> {
    let dir = dir.as_ref();
    let t2_file = read_tensor(dir.join(T2_FILE))?;
    let provenance = t2_file
        .provenance
        .clone()
        .and_then(|v| serde_json::from_value::<Provenance>(v).ok())
        .unwrap_or_else(|| Provenance { fitter: "unknown".into(), ..Default::default() });
    let optional = |name: &str| -> Result<Option<Array3<f64>>> {
        let p = dir.join(name);
        if p.exists() {
            Ok(Some(tensor_to_map(&read_tensor(p)?)?))
        } else {
            Ok(None)
        }
    };
    let maps = ParameterMaps {
        t2: tensor_to_map(&t2_file)?,
        pd: tensor_to_map(&read_tensor(dir.join(PD_FILE))?)?,
        b1: optional(B1_FILE)?,
        residual: optional(RESIDUAL_FILE)?,
        flags: optional(FLAGS_FILE)?.map(|m| m.mapv(|v| v as u8)),
        provenance,
    };
    maps.validate()?;
    Ok(maps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::emc_sim::SequenceProtocol;

    #[test]
    fn stack_round_trip() {
        let data = Array4::from_shape_fn((2, 3, 4, 5), |(s, e, r, c)| (s * 60 + e * 20 + r * 5 + c) as f64 * 0.25);
        let stack = MeseStack::new(data, SequenceProtocol::new(10.0, 10.0, 3, 3000.0), None).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("stack.emct");
        write_stack(&path, &stack).unwrap();
        let back = read_stack(&path).unwrap();
        assert_eq!(back.data, stack.data);
        assert_eq!(back.protocol, stack.protocol);
    }

    #[test]
    fn stack_without_protocol_is_rejected() {
        let t = TensorFile::new(vec![1, 1, 1, 1], &STACK_AXES, vec![1.0]).unwrap();
        assert!(matches!(tensor_to_stack(&t), Err(Error::Format(_))));
    }

    #[test]
    fn maps_round_trip() {
        let t2 = Array3::from_shape_fn((1, 2, 3), |(_, r, c)| 40.0 + (r * 3 + c) as f64);
        let maps = ParameterMaps {
            pd: t2.mapv(|v| v / 128.0),
            b1: Some(t2.mapv(|_| 0.9)),
            residual: None,
            flags: Some(Array3::from_elem((1, 2, 3), 2u8)),
            t2,
            provenance: Provenance { fitter: "exact".into(), echo_selection: vec![1, 2, 3], ..Default::default() },
        };
        let dir = tempfile::tempdir().unwrap();
        write_maps(dir.path(), &maps).unwrap();
        assert!(!dir.path().join(RESIDUAL_FILE).exists());
        let back = read_maps(dir.path()).unwrap();
        assert_eq!(back.t2, maps.t2);
        assert_eq!(back.pd, maps.pd);
        assert_eq!(back.flags, maps.flags);
        assert_eq!(back.provenance, maps.provenance);
        assert!(back.b1.unwrap().iter().all(|v| (v - 0.9).abs() < 1e-7));
    }

    #[test]
    fn mask_round_trip() {
        let mask = Array3::from_shape_fn((2, 2, 2), |(s, r, c)| (s + r + c) % 2 == 0);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("mask.emct");
        write_mask(&p, &mask).unwrap();
        assert_eq!(read_mask(&p).unwrap(), mask);
    }
}
