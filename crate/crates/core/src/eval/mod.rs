//! Range-masked relative-error scoring of predicted maps against references.
//!
//! T2 range masks are built from the reference T2 map only and are
//! half-open, `[lo, hi)`. PD error is averaged over the union of the ranges.

mod report;
mod ttest;

pub use ttest::{paired_t_test, TTest, SIGNIFICANCE_LEVEL};

use ndarray::{Array3, ArrayView3, Axis, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fitter::ParameterMaps;

/// Boundaries of the default T2 ranges in ms: [40,80), [80,120), [120,160).
pub const DEFAULT_T2_BOUNDS: [f64; 4] = [40.0, 80.0, 120.0, 160.0];

/// Per-pixel `|pred − ref| / ref × 100`, NaN outside the mask.
#[derive(Debug, Clone)]
pub struct RelativeErrorMap {
    pub errors: Array3<f64>,
    /// Pixels inside the mask whose reference was zero; they are excluded.
    pub excluded_zero_ref: usize,
}

impl RelativeErrorMap {
    pub fn count(&self) -> usize {
        self.errors.iter().filter(|v| !v.is_nan()).count()
    }

    pub fn mean(&self) -> Option<f64> {
        mean(self.errors.iter().copied().filter(|v| !v.is_nan()))
    }
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (n, sum) = values.fold((0usize, 0.0), |(n, s), v| (n + 1, s + v));
    (n > 0).then(|| sum / n as f64)
}

pub fn relative_error_map(
    pred: ArrayView3<'_, f64>,
    reference: ArrayView3<'_, f64>,
    mask: ArrayView3<'_, bool>,
) -> Result<RelativeErrorMap> {
    if pred.dim() != reference.dim() || mask.dim() != reference.dim() {
        return Err(Error::ShapeMismatch(format!(
            "pred {:?}, ref {:?}, mask {:?}",
            pred.dim(),
            reference.dim(),
            mask.dim()
        )));
    }
    let mut excluded = 0usize;
    let mut errors = Array3::from_elem(reference.dim(), f64::NAN);
    Zip::from(&mut errors).and(pred).and(reference).and(mask).for_each(|e, &p, &r, &m| {
        if !m {
            return;
        }
        if r == 0.0 {
            excluded += 1;
            return;
        }
        *e = (p - r).abs() / r * 100.0;
    });
    if excluded > 0 {
        log::warn!("{excluded} masked pixels have a zero reference and were excluded");
    }
    Ok(RelativeErrorMap { errors, excluded_zero_ref: excluded })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeError {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    /// `None` when the range mask is empty.
    pub mean_error_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdError {
    pub count: usize,
    pub mean_error_pct: Option<f64>,
    pub excluded_zero_ref: usize,
    /// Human-readable description of the pixels averaged over.
    pub support: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    /// `"t2 [lo, hi)"` or `"pd"`.
    pub quantity: String,
    pub n_cases: usize,
    pub mean_a: f64,
    pub mean_b: f64,
    pub t_statistic: f64,
    pub p_value: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub t2_ranges: Vec<RangeError>,
    pub pd: PdError,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub comparisons: Vec<Comparison>,
}

fn check_bounds(bounds: &[f64]) -> Result<()> {
    if bounds.len() < 2 || bounds.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(invalid("range bounds need at least two strictly increasing values"));
    }
    Ok(())
}

fn range_of(bounds: &[f64], t2: f64) -> Option<usize> {
    if t2 < bounds[0] || t2 >= *bounds.last().unwrap() {
        return None;
    }
    Some(bounds.windows(2).position(|w| t2 >= w[0] && t2 < w[1]).unwrap())
}

/// Score `pred` against `reference` with range masks from the reference T2.
///
/// `mask`, when given, further restricts the pixels considered.
pub fn range_masked_t2_errors(
    pred: &ParameterMaps,
    reference: &ParameterMaps,
    bounds: &[f64],
    mask: Option<ArrayView3<'_, bool>>,
) -> Result<EvalReport> {
    check_bounds(bounds)?;
    if pred.dim() != reference.dim() {
        return Err(Error::ShapeMismatch(format!("pred {:?} vs ref {:?}", pred.dim(), reference.dim())));
    }
    if let Some(m) = &mask {
        if m.dim() != reference.dim() {
            return Err(Error::ShapeMismatch("mask does not match maps".into()));
        }
    }
    let inside = |idx: (usize, usize, usize)| mask.as_ref().is_none_or(|m| m[idx]);

    let n_ranges = bounds.len() - 1;
    let mut sums = vec![(0usize, 0.0f64); n_ranges];
    let mut pd_sum = (0usize, 0.0f64);
    let mut pd_zero = 0usize;
    for (idx, &r) in reference.t2.indexed_iter() {
        if !inside(idx) {
            continue;
        }
        let Some(k) = range_of(bounds, r) else { continue };
        sums[k].0 += 1;
        sums[k].1 += (pred.t2[idx] - r).abs() / r * 100.0;
        let pd_ref = reference.pd[idx];
        if pd_ref == 0.0 {
            pd_zero += 1;
        } else {
            pd_sum.0 += 1;
            pd_sum.1 += (pred.pd[idx] - pd_ref).abs() / pd_ref * 100.0;
        }
    }
    if pd_zero > 0 {
        log::warn!("{pd_zero} pixels have zero reference PD and were excluded from the PD error");
    }

    let t2_ranges = bounds
        .windows(2)
        .zip(&sums)
        .map(|(w, &(count, sum))| RangeError {
            lo: w[0],
            hi: w[1],
            count,
            mean_error_pct: (count > 0).then(|| sum / count as f64),
        })
        .collect();
    let pd = PdError {
        count: pd_sum.0,
        mean_error_pct: (pd_sum.0 > 0).then(|| pd_sum.1 / pd_sum.0 as f64),
        excluded_zero_ref: pd_zero,
        support: format!(
            "reference T2 in [{}, {}){}",
            bounds[0],
            bounds.last().unwrap(),
            if mask.is_some() { " and inside mask" } else { "" }
        ),
    };
    Ok(EvalReport { t2_ranges, pd, comparisons: Vec::new() })
}

/// Score every slice separately; slices are the cases of a paired comparison.
pub fn per_slice_reports(
    pred: &ParameterMaps,
    reference: &ParameterMaps,
    bounds: &[f64],
) -> Result<Vec<EvalReport>> {
    if pred.dim() != reference.dim() {
        return Err(Error::ShapeMismatch(format!("pred {:?} vs ref {:?}", pred.dim(), reference.dim())));
    }
    let slice = |m: &ParameterMaps, s: usize| ParameterMaps {
        t2: m.t2.index_axis(Axis(0), s).insert_axis(Axis(0)).to_owned(),
        pd: m.pd.index_axis(Axis(0), s).insert_axis(Axis(0)).to_owned(),
        b1: None,
        residual: None,
        flags: None,
        provenance: m.provenance.clone(),
    };
    (0..reference.dim().0)
        .map(|s| range_masked_t2_errors(&slice(pred, s), &slice(reference, s), bounds, None))
        .collect()
}

type Getter = Box<dyn Fn(&EvalReport) -> Option<f64>>;

/// Paired comparison of two prediction sets against one reference, per range
/// and for PD, using slices as cases. Quantities that are undefined in some
/// slice, or whose paired differences have no spread, are skipped with a
/// warning.
pub fn compare_methods(
    pred_a: &ParameterMaps,
    pred_b: &ParameterMaps,
    reference: &ParameterMaps,
    bounds: &[f64],
) -> Result<Vec<Comparison>> {
    let a = per_slice_reports(pred_a, reference, bounds)?;
    let b = per_slice_reports(pred_b, reference, bounds)?;
    let mut out = Vec::new();
    let mut quantities: Vec<(String, Getter)> = Vec::new();
    for (k, w) in bounds.windows(2).enumerate() {
        quantities.push((format!("t2 [{}, {})", w[0], w[1]), Box::new(move |r| r.t2_ranges[k].mean_error_pct)));
    }
    quantities.push(("pd".into(), Box::new(|r| r.pd.mean_error_pct)));

    for (name, get) in quantities {
        let xa: Option<Vec<f64>> = a.iter().map(&get).collect();
        let xb: Option<Vec<f64>> = b.iter().map(&get).collect();
        let (Some(xa), Some(xb)) = (xa, xb) else {
            log::warn!("{name}: undefined in at least one case, skipped");
            continue;
        };
        match paired_t_test(&xa, &xb) {
            Ok(t) => out.push(Comparison {
                quantity: name,
                n_cases: xa.len(),
                mean_a: xa.iter().sum::<f64>() / xa.len() as f64,
                mean_b: xb.iter().sum::<f64>() / xb.len() as f64,
                t_statistic: t.t,
                p_value: t.p_value,
                significant: t.p_value < SIGNIFICANCE_LEVEL,
            }),
            Err(Error::Degenerate(msg)) => log::warn!("{name}: {msg}, skipped"),
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}
