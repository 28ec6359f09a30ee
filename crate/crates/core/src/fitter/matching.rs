use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::dictionary::{normalize, EmcDictionary};
use crate::error::{Error, Result};

/// Outcome of matching one decay curve against a dictionary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelMatch {
    /// Canonical dictionary row of the best match.
    pub row: usize,
    pub t2_ms: f64,
    pub b1_factor: f64,
    /// L2 distance between the normalized curve and the matched row.
    pub residual: f64,
    /// Number of curve-to-row distances computed.
    pub evaluations: usize,
    /// The fast search gave up and rescanned the whole dictionary.
    pub fell_back: bool,
}

/// Tuning of the two-stage search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FastConfig {
    /// Coarse stage visits every `coarse_t2_stride`-th T2 grid value.
    pub coarse_t2_stride: usize,
    pub coarse_b1_stride: usize,
    /// Number of coarse candidates a descent is started from.
    pub starts: usize,
    /// Residual of the local minimum above which the exact scan is rerun.
    pub fallback_residual: f64,
}

impl Default for FastConfig {
    fn default() -> Self {
        FastConfig { coarse_t2_stride: 4, coarse_b1_stride: 3, starts: 5, fallback_residual: 0.25 }
    }
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn prepare(curve: &[f64], dict: &EmcDictionary) -> Result<Vec<f64>> {
    if curve.len() != dict.n_echoes() {
        return Err(Error::ShapeMismatch(format!(
            "curve has {} echoes, dictionary has {}",
            curve.len(),
            dict.n_echoes()
        )));
    }
    if curve.iter().any(|v| !v.is_finite()) {
        return Err(Error::Degenerate("curve contains non-finite values".into()));
    }
    normalize(curve).ok_or_else(|| Error::Degenerate("all-zero curve".into()))
}

fn finish(dict: &EmcDictionary, unit: &[f64], row: usize, evaluations: usize, fell_back: bool) -> PixelMatch {
    let row = dict.canonical_row(row);
    let (t2_ms, b1_factor) = dict.grid().row_params(row);
    PixelMatch {
        row,
        t2_ms,
        b1_factor,
        residual: sq_dist(unit, dict.row(row)).sqrt(),
        evaluations,
        fell_back,
    }
}

fn scan_all(unit: &[f64], dict: &EmcDictionary) -> usize {
    let n = dict.n_echoes();
    let mut best = (f64::INFINITY, 0);
    for (r, row) in dict.curves_slice().chunks_exact(n).enumerate() {
        let d = sq_dist(unit, row);
        if d < best.0 {
            best = (d, r);
        }
    }
    best.1
}

/// Brute-force nearest row to the normalized curve. Ties go to the lowest
/// row index.
pub fn match_pixel_exact(curve: &[f64], dict: &EmcDictionary) -> Result<PixelMatch> {
    let unit = prepare(curve, dict)?;
    let row = scan_all(&unit, dict);
    Ok(finish(dict, &unit, row, dict.n_rows(), false))
}

fn strided(n: usize, stride: usize) -> Vec<usize> {
    let stride = stride.max(1);
    let mut idx: Vec<usize> = (0..n).step_by(stride).collect();
    if idx.last() != Some(&(n - 1)) {
        idx.push(n - 1);
    }
    idx
}

/// Steepest descent over the eight neighbouring grid cells until no neighbour is closer.
fn descend(
    mut best: (f64, usize),
    unit: &[f64],
    dict: &EmcDictionary,
    seen: &mut HashMap<usize, f64>,
    evaluations: &mut usize,
) -> (f64, usize) {
    let grid = dict.grid();
    let (nt, nb) = (grid.n_t2() as i64, grid.n_b1() as i64);
    loop {
        let (ci, cj) = grid.row_indices(best.1);
        let mut step = best;
        for di in -1i64..=1 {
            for dj in -1i64..=1 {
                let (i, j) = (ci as i64 + di, cj as i64 + dj);
                if (di == 0 && dj == 0) || i < 0 || j < 0 || i >= nt || j >= nb {
                    continue;
                }
                let r = grid.row_index(i as usize, j as usize);
                let d = *seen.entry(r).or_insert_with(|| {
                    *evaluations += 1;
                    sq_dist(unit, dict.row(r))
                });
                if d < step.0 || (d == step.0 && r < step.1) {
                    step = (d, r);
                }
            }
        }
        if step.1 == best.1 {
            return best;
        }
        best = step;
    }
}

/// Coarse scan of a subsampled grid, then steepest descent from the
/// `starts` best coarse points. Falls back to the exact scan when the best
/// local minimum is a poor fit.
pub fn match_pixel_fast(curve: &[f64], dict: &EmcDictionary, config: &FastConfig) -> Result<PixelMatch> {
    let unit = prepare(curve, dict)?;
    let grid = dict.grid();
    let (nt, nb) = (grid.n_t2(), grid.n_b1());
    let mut evaluations = 0usize;

    let t2_coarse = strided(nt, config.coarse_t2_stride);
    let b1_coarse = strided(nb, config.coarse_b1_stride);
    let mut coarse: Vec<(f64, usize)> = Vec::with_capacity(t2_coarse.len() * b1_coarse.len());
    for &i in &t2_coarse {
        for &j in &b1_coarse {
            let r = grid.row_index(i, j);
            coarse.push((sq_dist(&unit, dict.row(r)), r));
        }
    }
    evaluations += coarse.len();
    coarse.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut seen: HashMap<usize, f64> = coarse.iter().map(|&(d, r)| (r, d)).collect();
    let mut best = (f64::INFINITY, 0usize);
    for &start in coarse.iter().take(config.starts.max(1)) {
        let end = descend(start, &unit, dict, &mut seen, &mut evaluations);
        if end.0 < best.0 || (end.0 == best.0 && end.1 < best.1) {
            best = end;
        }
    }

    if best.0.sqrt() > config.fallback_residual {
        let row = scan_all(&unit, dict);
        return Ok(finish(dict, &unit, row, evaluations + dict.n_rows(), true));
    }
    Ok(finish(dict, &unit, best.1, evaluations, false))
}
