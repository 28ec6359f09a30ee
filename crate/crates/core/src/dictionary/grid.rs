use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::range::RangeSpec;

/// The (T2, B1) lattice a dictionary is simulated on.
///
/// Rows are laid out T2-major: row `r` holds `(t2[r / n_b1], b1[r % n_b1])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DictionaryGrid {
    pub t2_values: Vec<f64>,
    pub b1_values: Vec<f64>,
}

/// T2 10–300 ms in 1 ms steps.
pub const DEFAULT_T2_RANGE: RangeSpec = RangeSpec { lo: 10.0, hi: 300.0, step: 1.0 };
/// B1 0.7–1.3 in steps of 0.02.
pub const DEFAULT_B1_RANGE: RangeSpec = RangeSpec { lo: 0.7, hi: 1.3, step: 0.02 };

impl Default for DictionaryGrid {
    fn default() -> Self {
        DictionaryGrid::from_ranges(&DEFAULT_T2_RANGE, &DEFAULT_B1_RANGE).expect("default grid is valid")
    }
}

impl DictionaryGrid {
    pub fn new(t2_values: Vec<f64>, b1_values: Vec<f64>) -> Result<Self> {
        let g = DictionaryGrid { t2_values, b1_values };
        g.validate()?;
        Ok(g)
    }

    pub fn from_ranges(t2: &RangeSpec, b1: &RangeSpec) -> Result<Self> {
        DictionaryGrid::new(t2.values(), b1.values())
    }

    pub fn validate(&self) -> Result<()> {
        if self.t2_values.is_empty() || self.b1_values.is_empty() {
            return Err(invalid("dictionary grid must not be empty"));
        }
        for axis in [&self.t2_values, &self.b1_values] {
            if axis.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(invalid("grid axes must be strictly increasing"));
            }
        }
        if self.t2_values.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
            return Err(invalid("grid T2 values must be positive"));
        }
        if self.b1_values.iter().any(|b| !(*b > 0.0 && *b <= 2.0)) {
            return Err(invalid("grid B1 values must lie in (0, 2]"));
        }
        Ok(())
    }

    pub fn n_t2(&self) -> usize {
        self.t2_values.len()
    }

    pub fn n_b1(&self) -> usize {
        self.b1_values.len()
    }

    pub fn n_rows(&self) -> usize {
        self.n_t2() * self.n_b1()
    }

    pub fn row_index(&self, t2_index: usize, b1_index: usize) -> usize {
        t2_index * self.n_b1() + b1_index
    }

    pub fn row_indices(&self, row: usize) -> (usize, usize) {
        (row / self.n_b1(), row % self.n_b1())
    }

    pub fn row_params(&self, row: usize) -> (f64, f64) {
        let (i, j) = self.row_indices(row);
        (self.t2_values[i], self.b1_values[j])
    }

    pub fn t2_bounds(&self) -> (f64, f64) {
        (self.t2_values[0], *self.t2_values.last().unwrap())
    }

    pub fn b1_bounds(&self) -> (f64, f64) {
        (self.b1_values[0], *self.b1_values.last().unwrap())
    }

    /// Index of an exact grid T2 value, if any.
    pub fn t2_index_of(&self, t2: f64) -> Option<usize> {
        self.t2_values.iter().position(|&v| v == t2)
    }

    pub fn b1_index_of(&self, b1: f64) -> Option<usize> {
        self.b1_values.iter().position(|&v| v == b1)
    }
}
