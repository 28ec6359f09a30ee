use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dictionary::DictionaryGrid;
use crate::emc_sim::{PulseModel, SequenceProtocol};
use crate::error::{Error, Result};
use crate::fitter::{FastConfig, Method};
use crate::phantom::NoiseSpec;
use crate::range::RangeSpec;

/// TOML run configuration. Every section is optional; command line flags take precedence.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub paths: PathsSection,
    pub grid: Option<GridSection>,
    #[serde(default)]
    pub protocol: ProtocolOverrides,
    pub fit: Option<FitSection>,
    pub noise: Option<NoiseSpec>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsSection {
    pub dictionary: Option<PathBuf>,
    pub stack: Option<PathBuf>,
    pub mask: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub t2: RangeSpec,
    pub b1: RangeSpec,
}

impl GridSection {
    pub fn to_grid(&self) -> Result<DictionaryGrid> {
        DictionaryGrid::from_ranges(&self.t2, &self.b1)
    }
}

/// Fields left unset keep the value of the protocol they are applied to.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolOverrides {
    pub te1: Option<f64>,
    pub delta_te: Option<f64>,
    pub n_echoes: Option<usize>,
    pub nominal_refocus_deg: Option<f64>,
    pub tr: Option<f64>,
    pub t1_assumed: Option<f64>,
    pub echo_selection: Option<Vec<usize>>,
    pub pulse: Option<PulseModel>,
}

impl ProtocolOverrides {
    pub fn apply(&self, base: &SequenceProtocol) -> Result<SequenceProtocol> {
        let mut p = base.clone();
        if let Some(v) = self.te1 {
            p.te1 = v;
        }
        if let Some(v) = self.delta_te {
            p.delta_te = v;
        }
        if let Some(n) = self.n_echoes {
            p.n_echoes = n;
            if self.echo_selection.is_none() {
                p.echo_selection = (1..=n).collect();
            }
        }
        if let Some(v) = self.nominal_refocus_deg {
            p.nominal_refocus_deg = v;
        }
        if let Some(v) = self.tr {
            p.tr = v;
        }
        if let Some(v) = self.t1_assumed {
            p.t1_assumed = v;
        }
        if let Some(v) = &self.echo_selection {
            p.echo_selection = v.clone();
        }
        if let Some(v) = &self.pulse {
            p.pulse = v.clone();
        }
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodName {
    Exact,
    Fast,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    pub method: MethodName,
    #[serde(default)]
    pub fast: FastConfig,
}

impl FitSection {
    pub fn method(&self) -> Method {
        match self.method {
            MethodName::Exact => Method::Exact,
            MethodName::Fast => Method::Fast(self.fast),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::with_path(e, path))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        if let Some(g) = &self.grid {
            g.to_grid().map_err(|e| Error::Config(e.to_string()))?;
        }
        if let Some(n) = &self.noise {
            if !(n.sigma >= 0.0) || !n.sigma.is_finite() {
                return Err(Error::Config(format!("noise sigma must be finite and non-negative, got {}", n.sigma)));
            }
        }
        if let Some(f) = &self.fit {
            if f.fast.coarse_t2_stride == 0 || f.fast.coarse_b1_stride == 0 {
                return Err(Error::Config("coarse strides must be at least 1".into()));
            }
        }
        self.protocol
            .apply(&SequenceProtocol::default())
            .map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FULL: &str = r#"
seed = 7
threads = 2

[paths]
dictionary = "dict.emcd"
out_dir = "maps"

[grid]
t2 = "10:300:1"
b1 = "0.7:1.3:0.02"

[protocol]
te1 = 12.0
delta_te = 12.0
n_echoes = 8

[fit]
method = "fast"
[fit.fast]
coarse_t2_stride = 6

[noise]
sigma = 0.02
model = "rician"
"#;

    #[test]
    fn parses_full_config() {
        let cfg = RunConfig::from_toml_str(FULL).unwrap();
        assert_eq!(cfg.seed, Some(7));
        assert_eq!(cfg.grid.as_ref().unwrap().to_grid().unwrap().n_rows(), 9021);
        let p = cfg.protocol.apply(&SequenceProtocol::default()).unwrap();
        assert_eq!((p.te1, p.n_echoes, p.echo_selection.len()), (12.0, 8, 8));
        match cfg.fit.unwrap().method() {
            Method::Fast(f) => assert_eq!((f.coarse_t2_stride, f.coarse_b1_stride), (6, 3)),
            Method::Exact => panic!("expected fast"),
        }
    }

    #[test]
    fn empty_config_is_valid() {
        assert_eq!(RunConfig::from_toml_str("").unwrap(), RunConfig::default());
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        for bad in [
            "colour = 1",
            "[protocol]\nte_one = 3.0",
            "threads = 0",
            "[grid]\nt2 = \"10:5:1\"\nb1 = \"1:1:0.1\"",
            "[protocol]\nn_echoes = 4\necho_selection = [1, 5]",
            "[noise]\nsigma = -1.0",
        ] {
            assert!(matches!(RunConfig::from_toml_str(bad), Err(Error::Config(_))), "{bad}");
        }
    }
}
