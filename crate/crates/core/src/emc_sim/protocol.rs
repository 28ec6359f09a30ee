use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Timing and pulse description of a multi-echo spin-echo acquisition.
///
/// Times are in milliseconds. `echo_selection` holds the 1-based indices of
/// the echoes that are kept out of the full `n_echoes` train.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceProtocol {
    pub te1: f64,
    pub delta_te: f64,
    pub n_echoes: usize,
    #[serde(default = "default_refocus")]
    pub nominal_refocus_deg: f64,
    pub tr: f64,
    #[serde(default = "default_t1")]
    pub t1_assumed: f64,
    pub echo_selection: Vec<usize>,
    #[serde(default)]
    pub pulse: PulseModel,
}

fn default_refocus() -> f64 {
    180.0
}

fn default_t1() -> f64 {
    1000.0
}

/// How the refocusing pulses act across the slice.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PulseModel {
    /// Every spin sees the same angle, `b1 * nominal`.
    #[default]
    Hard,
    /// The curve is the weighted mean of hard-pulse curves at `b1 * nominal * scale`.
    SliceProfile { samples: Vec<ProfileSample> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSample {
    pub scale: f64,
    pub weight: f64,
}

impl Default for SequenceProtocol {
    /// 10 echoes, TE1 = ΔTE = 15 ms, TR = 4100 ms, 180° refocusing.
    fn default() -> Self {
        SequenceProtocol::new(15.0, 15.0, 10, 4100.0)
    }
}

impl SequenceProtocol {
    /// Protocol retaining every echo, with 180° refocusing and T1 = 1000 ms.
    pub fn new(te1: f64, delta_te: f64, n_echoes: usize, tr: f64) -> Self {
        SequenceProtocol {
            te1,
            delta_te,
            n_echoes,
            nominal_refocus_deg: default_refocus(),
            tr,
            t1_assumed: default_t1(),
            echo_selection: (1..=n_echoes).collect(),
            pulse: PulseModel::Hard,
        }
    }

    pub fn with_selection(mut self, selection: Vec<usize>) -> Result<Self> {
        self.echo_selection = selection;
        self.validate()?;
        Ok(self)
    }

    pub fn with_pulse(mut self, pulse: PulseModel) -> Self {
        self.pulse = pulse;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.te1,
            self.delta_te,
            self.tr,
            self.t1_assumed,
            self.nominal_refocus_deg,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(invalid("protocol timings must be finite"));
        }
        if self.te1 <= 0.0 || self.delta_te <= 0.0 {
            return Err(invalid("te1 and delta_te must be positive"));
        }
        if self.n_echoes == 0 {
            return Err(invalid("n_echoes must be at least 1"));
        }
        if self.tr <= self.n_echoes as f64 * self.delta_te {
            return Err(invalid(format!(
                "tr ({} ms) must exceed n_echoes * delta_te ({} ms)",
                self.tr,
                self.n_echoes as f64 * self.delta_te
            )));
        }
        if self.t1_assumed <= 0.0 {
            return Err(invalid("t1_assumed must be positive"));
        }
        if self.nominal_refocus_deg <= 0.0 {
            return Err(invalid("nominal_refocus_deg must be positive"));
        }
        if self.echo_selection.is_empty() {
            return Err(invalid("echo_selection must not be empty"));
        }
        if self.echo_selection.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("echo_selection must be strictly increasing"));
        }
        let first = self.echo_selection[0];
        let last = *self.echo_selection.last().unwrap();
        if first < 1 || last > self.n_echoes {
            return Err(invalid(format!(
                "echo_selection must lie within 1..={}",
                self.n_echoes
            )));
        }
        if let PulseModel::SliceProfile { samples } = &self.pulse {
            if samples.is_empty() {
                return Err(invalid("slice profile needs at least one sample"));
            }
            if samples
                .iter()
                .any(|s| !(s.scale > 0.0 && s.scale.is_finite()) || !(s.weight >= 0.0 && s.weight.is_finite()))
            {
                return Err(invalid("slice profile samples need positive scale and non-negative weight"));
            }
            if samples.iter().map(|s| s.weight).sum::<f64>() <= 0.0 {
                return Err(invalid("slice profile weights sum to zero"));
            }
        }
        Ok(())
    }

    /// Number of retained echoes.
    pub fn n_retained(&self) -> usize {
        self.echo_selection.len()
    }

    /// Echo time (ms) of 1-based echo `k` in the full train.
    pub fn echo_time(&self, k: usize) -> f64 {
        self.te1 + (k as f64 - 1.0) * self.delta_te
    }

    /// Echo times of the retained echoes.
    pub fn retained_echo_times(&self) -> Vec<f64> {
        self.echo_selection.iter().map(|&k| self.echo_time(k)).collect()
    }

    /// Whether the first retained echo is echo 1 of the train.
    pub fn starts_at_first_echo(&self) -> bool {
        self.echo_selection.first() == Some(&1)
    }

    /// CRC32 of the canonical JSON form. Two protocols with equal
    /// fingerprints produce identical dictionaries.
    pub fn fingerprint(&self) -> u32 {
        let bytes = serde_json::to_vec(self).expect("protocol serializes");
        crc32fast::hash(&bytes)
    }
}
