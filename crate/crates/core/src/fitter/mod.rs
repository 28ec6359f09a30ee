//! Pixel-wise dictionary matching and proton-density back-projection.

mod matching;

pub use matching::{match_pixel_exact, match_pixel_fast, FastConfig, PixelMatch};

use ndarray::{s, Array3, Array4, ArrayView3, Axis, Zip};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dictionary::EmcDictionary;
use crate::emc_sim::SequenceProtocol;
use crate::error::{invalid, Error, Result};

/// Pixel could not be matched (all-zero or non-finite curve).
pub const FLAG_DEGENERATE: u8 = 1;
/// Fast search fell back to the exhaustive scan.
pub const FLAG_FALLBACK: u8 = 2;
/// Pixel lies outside the fitting mask.
pub const FLAG_OUTSIDE_MASK: u8 = 4;

/// Multi-echo image volume, `(slices, echoes, rows, cols)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeseStack {
    pub data: Array4<f64>,
    pub protocol: SequenceProtocol,
    /// `(slices, rows, cols)`; `None` fits every pixel.
    pub mask: Option<Array3<bool>>,
}

impl MeseStack {
    pub fn new(data: Array4<f64>, protocol: SequenceProtocol, mask: Option<Array3<bool>>) -> Result<Self> {
        let stack = MeseStack { data, protocol, mask };
        stack.validate()?;
        Ok(stack)
    }

    pub fn validate(&self) -> Result<()> {
        self.protocol.validate()?;
        let (ns, ne, nr, nc) = self.data.dim();
        if ne != self.protocol.n_retained() {
            return Err(Error::ShapeMismatch(format!(
                "stack has {ne} echoes, protocol retains {}",
                self.protocol.n_retained()
            )));
        }
        if let Some(m) = &self.mask {
            if m.dim() != (ns, nr, nc) {
                return Err(Error::ShapeMismatch(format!(
                    "mask shape {:?} does not match stack {:?}",
                    m.dim(),
                    (ns, nr, nc)
                )));
            }
        }
        if self.data.iter().any(|v| !v.is_finite()) {
            return Err(invalid("stack contains non-finite values"));
        }
        Ok(())
    }

    /// `(slices, rows, cols)`.
    pub fn image_dim(&self) -> (usize, usize, usize) {
        let (ns, _, nr, nc) = self.data.dim();
        (ns, nr, nc)
    }

    /// Image of the `i`-th retained echo (0-based position on the echo axis).
    pub fn echo_image(&self, i: usize) -> ArrayView3<'_, f64> {
        self.data.index_axis(Axis(1), i)
    }

    fn in_mask(&self, s: usize, r: usize, c: usize) -> bool {
        self.mask.as_ref().is_none_or(|m| m[(s, r, c)])
    }
}

/// Where a set of maps came from.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub fitter: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dictionary_checksum: Option<u32>,
    pub echo_selection: Vec<usize>,
    #[serde(default)]
    pub distance_evaluations: u64,
    #[serde(default)]
    pub fallbacks: u64,
    #[serde(default)]
    pub degenerate_pixels: u64,
}

/// Co-registered T2 / PD (and optionally B1) maps, `(slices, rows, cols)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterMaps {
    pub t2: Array3<f64>,
    pub pd: Array3<f64>,
    pub b1: Option<Array3<f64>>,
    pub residual: Option<Array3<f64>>,
    pub flags: Option<Array3<u8>>,
    pub provenance: Provenance,
}

impl ParameterMaps {
    pub fn dim(&self) -> (usize, usize, usize) {
        self.t2.dim()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.t2.dim();
        let shapes_ok = self.pd.dim() == d
            && self.b1.as_ref().is_none_or(|m| m.dim() == d)
            && self.residual.as_ref().is_none_or(|m| m.dim() == d)
            && self.flags.as_ref().is_none_or(|m| m.dim() == d);
        if !shapes_ok {
            return Err(Error::ShapeMismatch("parameter maps disagree in shape".into()));
        }
        if self.t2.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(invalid("T2 map must be finite and non-negative"));
        }
        if self.pd.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(invalid("PD map must be finite and non-negative"));
        }
        Ok(())
    }
}

/// Matching strategy for [`fit_maps`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Exact,
    Fast(FastConfig),
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::Fast(_) => "fast",
        }
    }
}

/// `pd = I₁ / exp(-TE1 / T2)` per pixel; pixels with the T2 = 0 sentinel get 0.
pub fn backproject_pd(first_echo: ArrayView3<'_, f64>, t2: ArrayView3<'_, f64>, te1: f64) -> Result<Array3<f64>> {
    if !(te1 > 0.0) {
        return Err(invalid(format!("TE1 must be positive, got {te1}")));
    }
    if first_echo.dim() != t2.dim() {
        return Err(Error::ShapeMismatch(format!(
            "first echo {:?} vs T2 map {:?}",
            first_echo.dim(),
            t2.dim()
        )));
    }
    if t2.iter().any(|v| *v < 0.0 || v.is_nan()) {
        return Err(invalid("T2 map contains negative values"));
    }
    let mut pd = Array3::zeros(t2.dim());
    Zip::from(&mut pd).and(first_echo).and(t2).for_each(|p, &i1, &t| {
        *p = if t > 0.0 { i1 / (-te1 / t).exp() } else { 0.0 };
    });
    Ok(pd)
}

/// Match every masked pixel, then back-project the first echo to PD.
pub fn fit_maps(stack: &MeseStack, dict: &EmcDictionary, method: Method) -> Result<ParameterMaps> {
    stack.validate()?;
    let dict_fp = dict.protocol().fingerprint();
    let stack_fp = stack.protocol.fingerprint();
    if dict_fp != stack_fp {
        return Err(Error::ProtocolMismatch { dictionary: dict_fp, stack: stack_fp });
    }
    if !stack.protocol.starts_at_first_echo() {
        return Err(Error::UnsupportedProtocol(format!(
            "PD back-projection needs echo 1, selection starts at echo {}",
            stack.protocol.echo_selection[0]
        )));
    }

    let (ns, nr, nc) = stack.image_dim();
    let n_echo = stack.protocol.n_retained();
    let results: Vec<(f64, f64, f64, u8, usize)> = (0..ns * nr * nc)
        .into_par_iter()
        .map_init(
            || vec![0.0; n_echo],
            |curve, p| {
                let (s, r, c) = (p / (nr * nc), (p / nc) % nr, p % nc);
                if !stack.in_mask(s, r, c) {
                    return (0.0, 0.0, 0.0, FLAG_OUTSIDE_MASK, 0);
                }
                for (dst, v) in curve.iter_mut().zip(stack.data.slice(s![s, .., r, c])) {
                    *dst = *v;
                }
                let m = match method {
                    Method::Exact => match_pixel_exact(curve, dict),
                    Method::Fast(cfg) => match_pixel_fast(curve, dict, &cfg),
                };
                match m {
                    Ok(m) => {
                        let flag = if m.fell_back { FLAG_FALLBACK } else { 0 };
                        (m.t2_ms, m.b1_factor, m.residual, flag, m.evaluations)
                    }
                    Err(Error::Degenerate(_)) => (0.0, 0.0, 0.0, FLAG_DEGENERATE, 0),
                    Err(e) => unreachable!("pixel curve already validated: {e}"),
                }
            },
        )
        .collect();

    let shape = (ns, nr, nc);
    let pick = |f: fn(&(f64, f64, f64, u8, usize)) -> f64| {
        Array3::from_shape_vec(shape, results.iter().map(f).collect()).unwrap()
    };
    let t2 = pick(|x| x.0);
    let b1 = pick(|x| x.1);
    let residual = pick(|x| x.2);
    let flags = Array3::from_shape_vec(shape, results.iter().map(|x| x.3).collect()).unwrap();
    let pd = backproject_pd(stack.echo_image(0), t2.view(), stack.protocol.te1)?;

    let provenance = Provenance {
        fitter: method.name().into(),
        dictionary_checksum: Some(dict.checksum()),
        echo_selection: stack.protocol.echo_selection.clone(),
        distance_evaluations: results.iter().map(|x| x.4 as u64).sum(),
        fallbacks: flags.iter().filter(|f| **f & FLAG_FALLBACK != 0).count() as u64,
        degenerate_pixels: flags.iter().filter(|f| **f & FLAG_DEGENERATE != 0).count() as u64,
    };
    log::info!(
        "{} fit: {} pixels, {} distance evaluations, {} fallbacks, {} degenerate",
        provenance.fitter,
        ns * nr * nc,
        provenance.distance_evaluations,
        provenance.fallbacks,
        provenance.degenerate_pixels
    );
    Ok(ParameterMaps { t2, pd, b1: Some(b1), residual: Some(residual), flags: Some(flags), provenance })
}
