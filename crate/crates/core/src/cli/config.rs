//! Experiment and model files.
//!
//! ```toml
//! [system]
//! e1 = -0.5
//! e2 = 0.5
//! v = 3.141592653589793
//! t1 = 0.0
//! t2 = 0.5
//! t_total = 0.58
//!
//! [measurement]
//! fuzziness_ratio = 1.3333333333333333   # or: kappa = ...
//! # smoothing_window = 0.5               # defaults to t2 - t1
//!
//! [prior]                                # optional; sized automatically otherwise
//! dt = 0.125
//! e_lo = -3.0
//! e_hi = 3.0
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::micro::{concrete_model_params, ElementaryModel};
use crate::readout::PriorSpec;
use crate::system::{SystemConfig, REFERENCE_TAIL};

#[derive(Debug, Clone, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub e1: f64,
    pub e2: f64,
    pub v: f64,
    pub t1: f64,
    pub t2: f64,
    pub t_total: f64,
}

impl Default for SystemSection {
    /// Reference geometry: `ΔE = 1`, `T_R = 1`, π-pulse on `[0, 1/2]`.
    fn default() -> Self {
        SystemSection { e1: -0.5, e2: 0.5, v: std::f64::consts::PI, t1: 0.0, t2: 0.5, t_total: 0.5 + REFERENCE_TAIL }
    }
}

#[derive(Debug, Clone, Default, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MeasurementSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fuzziness_ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub smoothing_window: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PriorSection {
    pub dt: f64,
    pub e_lo: f64,
    pub e_hi: f64,
}

#[derive(Debug, Clone, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentFile {
    pub system: SystemSection,
    pub measurement: MeasurementSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prior: Option<PriorSection>,
}

/// Measurement strength as written in a config.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Strength {
    Kappa(f64),
    Fuzziness(f64),
}

impl ExperimentFile {
    /// Reference geometry at the given fuzziness.
    pub fn reference(ratio: f64) -> Self {
        ExperimentFile {
            system: SystemSection::default(),
            measurement: MeasurementSection { fuzziness_ratio: Some(ratio), ..Default::default() },
            prior: None,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let f: ExperimentFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        f.strength()?;
        f.system_config()?;
        Ok(f)
    }

    pub fn strength(&self) -> Result<Strength> {
        match (self.measurement.kappa, self.measurement.fuzziness_ratio) {
            (Some(k), None) => Ok(Strength::Kappa(k)),
            (None, Some(r)) => Ok(Strength::Fuzziness(r)),
            _ => Err(Error::Config("[measurement] needs exactly one of `kappa` and `fuzziness_ratio`".into())),
        }
    }

    /// Same file with the strength replaced by a fuzziness ratio.
    pub fn with_fuzziness(&self, ratio: f64) -> Self {
        let mut f = self.clone();
        f.measurement.kappa = None;
        f.measurement.fuzziness_ratio = Some(ratio);
        f
    }

    pub fn system_config(&self) -> Result<SystemConfig> {
        let s = &self.system;
        let r = match self.strength()? {
            Strength::Kappa(k) => SystemConfig::new(s.e1, s.e2, s.v, s.t1, s.t2, s.t_total, k),
            Strength::Fuzziness(r) => SystemConfig::with_fuzziness_ratio(s.e1, s.e2, s.v, s.t1, s.t2, s.t_total, r),
        };
        r.map_err(|e| Error::Config(e.to_string()))
    }

    pub fn prior(&self, config: &SystemConfig) -> Result<PriorSpec> {
        match &self.prior {
            Some(p) => PriorSpec::new(p.dt, p.e_lo, p.e_hi).map_err(|e| Error::Config(e.to_string())),
            None => PriorSpec::auto(config),
        }
    }
}

/// Elementary-model file: `p1, p2` or `g, a_sq, b`, plus `tau` and
/// optional phases.
#[derive(Debug, Clone, Default, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a_sq: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    pub tau: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chi_prime: Option<f64>,
}

impl ModelFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let m: ModelFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        m.model()?;
        Ok(m)
    }

    pub fn model(&self) -> Result<ElementaryModel> {
        let direct = (self.p1, self.p2);
        let concrete = (self.g, self.a_sq, self.b);
        let m = match (direct, concrete) {
            ((Some(p1), Some(p2)), (None, None, None)) => {
                ElementaryModel::new(p1, p2, self.chi.unwrap_or(0.0), self.chi_prime.unwrap_or(0.0), self.tau)
            }
            ((None, None), (Some(g), Some(a_sq), b)) => {
                if self.chi.is_some() || self.chi_prime.is_some() {
                    return Err(Error::Config("phases follow from g and b; do not set chi/chi_prime".into()));
                }
                concrete_model_params(g, a_sq, b.unwrap_or(0.0), self.tau)
            }
            _ => return Err(Error::Config("model needs either `p1, p2` or `g, a_sq[, b]`".into())),
        };
        m.map_err(|e| Error::Config(e.to_string()))
    }
}

/// Parses `"4/3"`, `"1.5"` or `"2"`.
pub fn parse_ratio(s: &str) -> std::result::Result<f64, String> {
    let s = s.trim();
    let v = match s.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|_| format!("bad number `{a}`"))?;
            let b: f64 = b.trim().parse().map_err(|_| format!("bad number `{b}`"))?;
            a / b
        }
        None => s.parse().map_err(|_| format!("bad number `{s}`"))?,
    };
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(format!("ratio must be positive and finite, got `{s}`"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FULL: &str = r#"
[system]
e1 = -0.5
e2 = 0.5
v = 3.141592653589793
t1 = 0.0
t2 = 0.5
t_total = 0.6

[measurement]
fuzziness_ratio = 2.0
"#;

    #[test]
    fn parses_full_config() {
        let f = ExperimentFile::parse(FULL).unwrap();
        let c = f.system_config().unwrap();
        assert_eq!(c.t_total, 0.6);
        assert!((c.kappa - 2.0 * std::f64::consts::PI).abs() < 1e-12);
        assert!(f.prior(&c).is_ok());
    }

    #[test]
    fn needs_exactly_one_strength() {
        let both = FULL.replace("fuzziness_ratio = 2.0", "fuzziness_ratio = 2.0\nkappa = 1.0");
        assert!(matches!(ExperimentFile::parse(&both), Err(Error::Config(_))));
        let none = FULL.replace("fuzziness_ratio = 2.0", "");
        assert!(matches!(ExperimentFile::parse(&none), Err(Error::Config(_))));
        let kappa = FULL.replace("fuzziness_ratio = 2.0", "kappa = 1.5");
        assert_eq!(ExperimentFile::parse(&kappa).unwrap().system_config().unwrap().kappa, 1.5);
    }

    #[test]
    fn rejects_invalid_system_and_unknown_keys() {
        let bad = FULL.replace("t2 = 0.5", "t2 = 0.7");
        assert!(ExperimentFile::parse(&bad).is_err());
        let typo = FULL.replace("t1 = 0.0", "t_1 = 0.0");
        assert!(ExperimentFile::parse(&typo).is_err());
    }

    #[test]
    fn model_files() {
        let m = ModelFile::parse("p1 = 0.4\np2 = 0.6\ntau = 0.01\n").unwrap().model().unwrap();
        assert_eq!((m.p1, m.p2, m.chi), (0.4, 0.6, 0.0));
        let m = ModelFile::parse("g = 0.1\na_sq = 0.25\nb = 1.0\ntau = 0.01\n").unwrap().model().unwrap();
        assert!((m.delta_p() - 0.1).abs() < 1e-15);
        assert!(ModelFile::parse("p1 = 0.4\ng = 0.1\ntau = 1.0\n").is_err());
        assert!(ModelFile::parse("p1 = 0.4\np2 = 0.6\n").is_err());
    }

    #[test]
    fn ratios() {
        assert!((parse_ratio("10/3").unwrap() - 10.0 / 3.0).abs() < 1e-15);
        assert_eq!(parse_ratio(" 2 ").unwrap(), 2.0);
        assert!(parse_ratio("0").is_err());
        assert!(parse_ratio("x/3").is_err());
    }
}
