use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

pub const SIGNIFICANCE_LEVEL: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTest {
    pub t: f64,
    pub df: f64,
    /// Two-sided p-value.
    pub p_value: f64,
    pub significant: bool,
}

/// Two-sided paired Student t-test on `a − b`.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch(format!("paired samples of length {} and {}", a.len(), b.len())));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::Degenerate(format!("paired t-test needs at least 2 cases, got {n}")));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    if d.iter().any(|v| !v.is_finite()) {
        return Err(Error::Degenerate("non-finite paired difference".into()));
    }
    let mean = d.iter().sum::<f64>() / n as f64;
    let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();
    let scale = d.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    if sd <= 1e-12 * scale {
        return Err(Error::Degenerate("paired differences have zero variance".into()));
    }
    let t = mean / (sd / (n as f64).sqrt());
    let df = (n - 1) as f64;
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::Degenerate(e.to_string()))?;
    let p_value = (2.0 * dist.sf(t.abs())).min(1.0);
    Ok(TTest { t, df, p_value, significant: p_value < SIGNIFICANCE_LEVEL })
}
