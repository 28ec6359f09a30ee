//! The dictionary of simulated echo-modulation curves over a (T2, B1) grid.

mod compress;
mod file;
mod grid;

pub use compress::{compress_dictionary, CompressedDictionary};
pub use file::{load_dictionary, save_dictionary, DICTIONARY_MAGIC, DICTIONARY_VERSION};
pub use grid::{DictionaryGrid, DEFAULT_B1_RANGE, DEFAULT_T2_RANGE};

use ndarray::Array2;
use rayon::prelude::*;

use crate::emc_sim::{simulate_emc, SequenceProtocol};
use crate::error::{invalid, Result};

/// Two rows closer than this (max-abs) are treated as the same curve.
pub const DUPLICATE_ROW_TOL: f64 = 1e-12;

/// Unit-normalized echo-modulation curves, one row per grid point.
#[derive(Debug, Clone)]
pub struct EmcDictionary {
    grid: DictionaryGrid,
    protocol: SequenceProtocol,
    curves: Array2<f64>,
    raw_first_echo: Vec<f64>,
    canonical: Vec<usize>,
}

/// Raw curves (unit proton density) with an L2 norm below this carry no signal.
pub const NULL_CURVE_TOL: f64 = 1e-9;

/// Scale `v` to unit L2 norm. Returns `None` for a zero or non-finite norm.
pub fn normalize(v: &[f64]) -> Option<Vec<f64>> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 && norm.is_finite() {
        Some(v.iter().map(|x| x / norm).collect())
    } else {
        None
    }
}

/// Simulate every grid point under `protocol` and unit-normalize each row.
///
/// Rows are computed independently, so the result does not depend on how many
/// worker threads the global pool has.
pub fn build_dictionary(grid: DictionaryGrid, protocol: SequenceProtocol) -> Result<EmcDictionary> {
    grid.validate()?;
    protocol.validate()?;
    let n_echo = protocol.n_retained();
    let rows: Vec<Vec<f64>> = (0..grid.n_rows())
        .into_par_iter()
        .map(|r| {
            let (t2, b1) = grid.row_params(r);
            simulate_emc(t2, b1, &protocol).map(|c| c.values)
        })
        .collect::<Result<_>>()?;

    let mut curves = Array2::zeros((grid.n_rows(), n_echo));
    let mut raw_first_echo = Vec::with_capacity(grid.n_rows());
    for (r, raw) in rows.iter().enumerate() {
        let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
        let unit = normalize(raw).filter(|_| norm > NULL_CURVE_TOL).ok_or_else(|| {
            let (t2, b1) = grid.row_params(r);
            invalid(format!("grid point T2={t2} B1={b1} simulates to a null curve"))
        })?;
        raw_first_echo.push(raw[0]);
        curves.row_mut(r).assign(&ndarray::ArrayView1::from(&unit));
    }
    EmcDictionary::from_parts(grid, protocol, curves, raw_first_echo)
}

impl EmcDictionary {
    pub(crate) fn from_parts(
        grid: DictionaryGrid,
        protocol: SequenceProtocol,
        curves: Array2<f64>,
        raw_first_echo: Vec<f64>,
    ) -> Result<Self> {
        if curves.nrows() != grid.n_rows() || raw_first_echo.len() != grid.n_rows() {
            return Err(invalid("dictionary row count does not match its grid"));
        }
        if curves.ncols() != protocol.n_retained() {
            return Err(invalid("dictionary echo count does not match its protocol"));
        }
        let curves = curves.as_standard_layout().into_owned();
        let canonical = canonical_rows(&grid, &curves);
        Ok(EmcDictionary { grid, protocol, curves, raw_first_echo, canonical })
    }

    pub fn grid(&self) -> &DictionaryGrid {
        &self.grid
    }

    pub fn protocol(&self) -> &SequenceProtocol {
        &self.protocol
    }

    /// Row-major (rows × echoes) matrix of unit-norm curves.
    pub fn curves(&self) -> &Array2<f64> {
        &self.curves
    }

    pub fn curves_slice(&self) -> &[f64] {
        self.curves.as_slice().expect("standard layout")
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let n = self.n_echoes();
        &self.curves_slice()[r * n..(r + 1) * n]
    }

    pub fn raw_first_echo(&self) -> &[f64] {
        &self.raw_first_echo
    }

    pub fn n_rows(&self) -> usize {
        self.curves.nrows()
    }

    pub fn n_echoes(&self) -> usize {
        self.curves.ncols()
    }

    /// Lowest-index row carrying the same curve as `r` (within
    /// [`DUPLICATE_ROW_TOL`]). Under the hard-pulse model B1 = 1 ± δ are
    /// indistinguishable, so the upper mirror maps onto the lower one.
    pub fn canonical_row(&self, r: usize) -> usize {
        self.canonical[r]
    }

    /// Number of rows that duplicate a lower-index row.
    pub fn duplicate_rows(&self) -> usize {
        self.canonical.iter().enumerate().filter(|(r, c)| *r != **c).count()
    }

    /// CRC32 of the little-endian curve matrix followed by `raw_first_echo`.
    pub fn checksum(&self) -> u32 {
        let mut h = crc32fast::Hasher::new();
        for v in self.curves_slice().iter().chain(&self.raw_first_echo) {
            h.update(&v.to_le_bytes());
        }
        h.finalize()
    }
}

// Only rows with equal T2 can coincide, so the search stays within a T2 block.
fn canonical_rows(grid: &DictionaryGrid, curves: &Array2<f64>) -> Vec<usize> {
    let nb = grid.n_b1();
    let mut canonical: Vec<usize> = (0..grid.n_rows()).collect();
    for i in 0..grid.n_t2() {
        for j in 1..nb {
            let r = grid.row_index(i, j);
            for jj in 0..j {
                let q = grid.row_index(i, jj);
                if canonical[q] != q {
                    continue;
                }
                let same = curves
                    .row(r)
                    .iter()
                    .zip(curves.row(q).iter())
                    .all(|(a, b)| (a - b).abs() <= DUPLICATE_ROW_TOL);
                if same {
                    canonical[r] = q;
                    break;
                }
            }
        }
    }
    canonical
}
