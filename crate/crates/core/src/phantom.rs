//! Synthetic ground-truth maps and noisy MESE stacks generated from them.

use ndarray::{Array3, Array4, Axis, Zip};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dictionary::{DEFAULT_B1_RANGE, DEFAULT_T2_RANGE};
use crate::emc_sim::{full_train, SequenceProtocol};
use crate::error::{invalid, Result};
use crate::fitter::{MeseStack, ParameterMaps, Provenance};
use crate::range::{round12, RangeSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Layout {
    /// Rectangular tiles, T2 and PD evenly spaced across their ranges.
    TissueBlocks { blocks: usize },
    /// T2 ramps linearly down the rows, PD along the diagonal.
    SmoothGradient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum B1Field {
    Constant { value: f64 },
    /// Linear in the column index from `from` (first column) to `to` (last).
    PlanarRamp { from: f64, to: f64 },
}

impl Default for B1Field {
    fn default() -> Self {
        B1Field::PlanarRamp { from: 0.85, to: 1.15 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseModel {
    /// Gaussian noise on the magnitude, clamped at zero.
    #[default]
    Gaussian,
    /// Gaussian noise on both quadratures before taking the magnitude.
    Rician,
}

/// Grid the phantom must stay inside, normally the dictionary's.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Coverage {
    pub t2: RangeSpec,
    pub b1: RangeSpec,
}

impl Default for Coverage {
    fn default() -> Self {
        Coverage { t2: DEFAULT_T2_RANGE, b1: DEFAULT_B1_RANGE }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhantomSpec {
    pub rows: usize,
    pub cols: usize,
    pub slices: usize,
    pub layout: Layout,
    pub t2_range: [f64; 2],
    pub pd_range: [f64; 2],
    #[serde(default)]
    pub b1_field: B1Field,
    /// Noise standard deviation relative to the mean first-echo signal.
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub noise_model: NoiseModel,
    #[serde(default)]
    pub seed: u64,
    /// Snap T2 and B1 onto the coverage lattice.
    #[serde(default)]
    pub quantize: bool,
    #[serde(default)]
    pub coverage: Coverage,
}

impl PhantomSpec {
    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 || self.slices == 0 {
            return Err(invalid("phantom shape must be non-empty"));
        }
        let [t_lo, t_hi] = self.t2_range;
        if !(t_lo > 0.0 && t_lo <= t_hi) {
            return Err(invalid(format!("bad T2 range {:?}", self.t2_range)));
        }
        if t_lo < self.coverage.t2.lo || t_hi > self.coverage.t2.hi {
            return Err(invalid(format!(
                "T2 range {:?} lies outside dictionary coverage {}..{}",
                self.t2_range, self.coverage.t2.lo, self.coverage.t2.hi
            )));
        }
        let [p_lo, p_hi] = self.pd_range;
        if !(p_lo >= 0.0 && p_lo <= p_hi && p_hi.is_finite()) {
            return Err(invalid(format!("bad PD range {:?}", self.pd_range)));
        }
        let (b_lo, b_hi) = match self.b1_field {
            B1Field::Constant { value } => (value, value),
            B1Field::PlanarRamp { from, to } => (from.min(to), from.max(to)),
        };
        if !(b_lo > 0.0) || b_lo < self.coverage.b1.lo || b_hi > self.coverage.b1.hi {
            return Err(invalid(format!(
                "B1 field {b_lo}..{b_hi} lies outside dictionary coverage {}..{}",
                self.coverage.b1.lo, self.coverage.b1.hi
            )));
        }
        if let Layout::TissueBlocks { blocks } = self.layout {
            if blocks == 0 {
                return Err(invalid("tissue-block layout needs at least one block"));
            }
        }
        if !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            return Err(invalid("noise_sigma must be non-negative"));
        }
        Ok(())
    }
}

fn lerp(range: [f64; 2], t: f64) -> f64 {
    range[0] + (range[1] - range[0]) * t
}

fn frac(i: usize, n: usize) -> f64 {
    if n <= 1 {
        0.0
    } else {
        i as f64 / (n - 1) as f64
    }
}

fn snap(v: f64, lattice: &RangeSpec) -> f64 {
    let k = ((v - lattice.lo) / lattice.step).round();
    round12(lattice.lo + k * lattice.step).clamp(lattice.lo, lattice.hi)
}

/// Ground-truth T2, PD and B1 maps for `spec`.
pub fn make_phantom(spec: &PhantomSpec) -> Result<ParameterMaps> {
    spec.validate()?;
    let shape = (spec.slices, spec.rows, spec.cols);
    let (t2, pd): (Array3<f64>, Array3<f64>) = match spec.layout {
        Layout::TissueBlocks { blocks } => {
            let across = (blocks as f64).sqrt().ceil() as usize;
            let down = blocks.div_ceil(across);
            let block_of = |r: usize, c: usize| {
                let b = (r * down / spec.rows) * across + c * across / spec.cols;
                b.min(blocks - 1)
            };
            (
                Array3::from_shape_fn(shape, |(_, r, c)| lerp(spec.t2_range, frac(block_of(r, c), blocks))),
                Array3::from_shape_fn(shape, |(_, r, c)| lerp(spec.pd_range, frac(block_of(r, c), blocks))),
            )
        }
        Layout::SmoothGradient => (
            Array3::from_shape_fn(shape, |(_, r, _)| lerp(spec.t2_range, frac(r, spec.rows))),
            Array3::from_shape_fn(shape, |(_, r, c)| {
                lerp(spec.pd_range, frac(r + c, spec.rows + spec.cols - 1))
            }),
        ),
    };
    let b1 = Array3::from_shape_fn(shape, |(_, _, c)| match spec.b1_field {
        B1Field::Constant { value } => value,
        B1Field::PlanarRamp { from, to } => lerp([from, to], frac(c, spec.cols)),
    });
    let (t2, b1) = if spec.quantize {
        (t2.mapv(|v| snap(v, &spec.coverage.t2)), b1.mapv(|v| snap(v, &spec.coverage.b1)))
    } else {
        (t2, b1)
    };
    Ok(ParameterMaps {
        t2,
        pd,
        b1: Some(b1),
        residual: None,
        flags: None,
        provenance: Provenance { fitter: "phantom".into(), ..Default::default() },
    })
}

/// Noise settings for [`forward_simulate`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub sigma: f64,
    #[serde(default)]
    pub model: NoiseModel,
}

/// Forward-simulate a MESE stack from parameter maps.
///
/// Each pixel's echo-modulation curve is scaled so that echo 1 equals
/// `PD · exp(-TE1 / T2)`; back-projecting echo 1 therefore returns PD exactly.
/// Pixels with T2 = 0 are background and stay zero before noise is added.
/// The random stream of each pixel is keyed by its flat index, so the output
/// does not depend on thread scheduling.
pub fn forward_simulate(
    maps: &ParameterMaps,
    protocol: &SequenceProtocol,
    noise: NoiseSpec,
    seed: u64,
) -> Result<MeseStack> {
    maps.validate()?;
    protocol.validate()?;
    if !(noise.sigma >= 0.0) || !noise.sigma.is_finite() {
        return Err(invalid("noise sigma must be non-negative"));
    }
    let (ns, nr, nc) = maps.dim();
    let n_echo = protocol.n_retained();
    let t2 = maps.t2.as_slice().expect("standard layout");
    let pd = maps.pd.as_slice().expect("standard layout");
    let b1 = maps.b1.as_ref().map(|b| b.as_slice().expect("standard layout"));

    let clean: Vec<Vec<f64>> = (0..ns * nr * nc)
        .into_par_iter()
        .map(|p| {
            if t2[p] <= 0.0 {
                return Ok(vec![0.0; n_echo]);
            }
            let full = full_train(t2[p], b1.map_or(1.0, |b| b[p]), protocol)?;
            let scale = pd[p] * (-protocol.te1 / t2[p]).exp() / full[0];
            Ok(protocol.echo_selection.iter().map(|&k| scale * full[k - 1]).collect())
        })
        .collect::<Result<_>>()?;

    let foreground: Vec<f64> = clean
        .iter()
        .zip(t2)
        .filter(|(_, t)| **t > 0.0)
        .map(|(c, _)| c[0])
        .collect();
    let mean_first = if foreground.is_empty() {
        0.0
    } else {
        foreground.iter().sum::<f64>() / foreground.len() as f64
    };
    let sigma = noise.sigma * mean_first;

    let noisy: Vec<Vec<f64>> = clean
        .into_par_iter()
        .enumerate()
        .map(|(p, c)| {
            if sigma == 0.0 {
                return c;
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(p as u64);
            c.into_iter()
                .map(|v| {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    match noise.model {
                        NoiseModel::Gaussian => (v + sigma * re).max(0.0),
                        NoiseModel::Rician => {
                            let im: f64 = StandardNormal.sample(&mut rng);
                            (v + sigma * re).hypot(sigma * im)
                        }
                    }
                })
                .collect()
        })
        .collect();

    let mut data = Array4::zeros((ns, n_echo, nr, nc));
    for (p, curve) in noisy.iter().enumerate() {
        let (s, r, c) = (p / (nr * nc), (p / nc) % nr, p % nc);
        for (k, v) in curve.iter().enumerate() {
            data[(s, k, r, c)] = *v;
        }
    }
    MeseStack::new(data, protocol.clone(), None)
}

/// Keep only the echoes numbered `indices` (1-based echo numbers of the
/// full train, each of which must already be present in `stack`).
pub fn select_echoes(stack: &MeseStack, indices: &[usize]) -> Result<MeseStack> {
    let current = &stack.protocol.echo_selection;
    let positions: Vec<usize> = indices
        .iter()
        .map(|k| {
            current
                .iter()
                .position(|c| c == k)
                .ok_or_else(|| invalid(format!("echo {k} is not present in the stack (has {current:?})")))
        })
        .collect::<Result<_>>()?;
    let protocol = stack.protocol.clone().with_selection(indices.to_vec())?;
    let data = stack.data.select(Axis(1), &positions);
    MeseStack::new(data, protocol, stack.mask.clone())
}

/// Standard deviation of `noisy − clean` over all samples.
pub fn residual_std(noisy: &MeseStack, clean: &MeseStack) -> f64 {
    let mut n = 0usize;
    let mut sum = 0.0;
    let mut sum2 = 0.0;
    Zip::from(&noisy.data).and(&clean.data).for_each(|a, b| {
        let d = a - b;
        n += 1;
        sum += d;
        sum2 += d * d;
    });
    let mean = sum / n as f64;
    (sum2 / n as f64 - mean * mean).max(0.0).sqrt()
}
