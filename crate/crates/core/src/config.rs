//! Flat `key = value` experiment files. Blank lines and `#` comments are
//! ignored; every key may appear at most once.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::gcs::{Epsilon, SpinEnsemble};
use crate::geometry::{SpherePoint, Tessellation};
use crate::povm::{Mode, DEFAULT_TOLERANCE};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("key {0:?} appears more than once")]
    Duplicate(String),
    #[error("unknown key {0:?}")]
    UnknownKey(String),
    #[error("invalid value {value:?} for {key}: {reason}")]
    Invalid { key: String, value: String, reason: String },
    #[error("{0}")]
    Usage(String),
}

impl ConfigError {
    fn invalid(key: &str, value: &str, reason: impl fmt::Display) -> Self {
        Self::Invalid { key: key.into(), value: value.into(), reason: reason.to_string() }
    }
}

/// Raw key/value pairs.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct KeyValues(BTreeMap<String, String>);

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut map = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .filter(|(k, _)| !k.is_empty())
                .ok_or_else(|| ConfigError::Syntax { line: n + 1, text: raw.to_string() })?;
            if map.insert(key.to_string(), value.to_string()).is_some() {
                return Err(ConfigError::Duplicate(key.to_string()));
            }
        }
        Ok(Self(map))
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    /// Inserts or replaces `key`; command-line flags override file values this way.
    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.0.insert(key.to_string(), value.to_string());
    }

    fn reject_unknown(&self, allowed: &[&str]) -> Result<(), ConfigError> {
        match self.0.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => Err(ConfigError::UnknownKey(k.clone())),
            None => Ok(()),
        }
    }

    fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: fmt::Display,
    {
        self.get(key).map(|v| v.parse().map_err(|e| ConfigError::invalid(key, v, e))).transpose()
    }
}

/// Which coherent state is measured.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SigmaSpec {
    /// Sampled point `Λ_i` of tile `i`.
    Sampled(usize),
    Point { theta: f64, phi: f64 },
}

impl FromStr for SigmaSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        if let Some(rest) = s.strip_prefix("lambda") {
            return rest.parse().map(SigmaSpec::Sampled).map_err(|_| format!("expected lambda<i>, got {s:?}"));
        }
        if let Some(rest) = s.strip_prefix("sampled:") {
            return rest.parse().map(SigmaSpec::Sampled).map_err(|_| format!("expected sampled:<i>, got {s:?}"));
        }
        let (t, p) = s.split_once(',').ok_or_else(|| "expected lambda<i>, sampled:<i> or theta,phi".to_string())?;
        let theta = t.trim().parse().map_err(|_| format!("bad colatitude {t:?}"))?;
        let phi = p.trim().parse().map_err(|_| format!("bad longitude {p:?}"))?;
        Ok(SigmaSpec::Point { theta, phi })
    }
}

impl fmt::Display for SigmaSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SigmaSpec::Sampled(i) => write!(f, "sampled:{i}"),
            SigmaSpec::Point { theta, phi } => write!(f, "{theta},{phi}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModeSpec {
    Exact,
    Truncated,
}

impl FromStr for ModeSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "exact" => Ok(ModeSpec::Exact),
            "truncated" => Ok(ModeSpec::Truncated),
            other => Err(format!("expected exact or truncated, got {other:?}")),
        }
    }
}

/// Parameters of one measurement run.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub k: u32,
    pub size: u64,
    pub reduction: u64,
    pub epsilon: f64,
    pub sigma: SigmaSpec,
    pub mode: ModeSpec,
    pub tol: f64,
    pub seed: u64,
    /// Tile rows written to the table; `None` writes all of them.
    pub rows: Option<usize>,
    pub shots: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            k: 4,
            size: 3430,
            reduction: 0,
            epsilon: 0.22,
            sigma: SigmaSpec::Sampled(1),
            mode: ModeSpec::Truncated,
            tol: DEFAULT_TOLERANCE,
            seed: 0,
            rows: None,
            shots: 1,
        }
    }
}

pub const EXPERIMENT_KEYS: [&str; 10] = ["k", "N", "n", "epsilon", "sigma", "mode", "tol", "seed", "rows", "shots"];

/// A config with everything resolved against its tessellation.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub tessellation: Tessellation,
    pub ensemble: SpinEnsemble,
    pub sigma: SpherePoint,
    pub mode: Mode,
    pub tol: f64,
    pub seed: u64,
    pub rows: Option<usize>,
    pub shots: usize,
}

impl ExperimentConfig {
    pub fn from_key_values(kv: &KeyValues) -> Result<Self, ConfigError> {
        kv.reject_unknown(&EXPERIMENT_KEYS)?;
        let d = Self::default();
        Ok(Self {
            k: kv.parsed("k")?.unwrap_or(d.k),
            size: kv.parsed("N")?.unwrap_or(d.size),
            reduction: kv.parsed("n")?.unwrap_or(d.reduction),
            epsilon: kv.parsed("epsilon")?.unwrap_or(d.epsilon),
            sigma: kv.parsed("sigma")?.unwrap_or(d.sigma),
            mode: kv.parsed("mode")?.unwrap_or(d.mode),
            tol: kv.parsed("tol")?.unwrap_or(d.tol),
            seed: kv.parsed("seed")?.unwrap_or(d.seed),
            rows: kv.parsed("rows")?.or(d.rows),
            shots: kv.parsed("shots")?.unwrap_or(d.shots),
        })
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Self::from_key_values(&KeyValues::parse(text)?)
    }

    pub fn resolve(&self) -> Result<Experiment, ConfigError> {
        let tessellation = Tessellation::new(self.k).map_err(|e| ConfigError::invalid("k", &self.k.to_string(), e))?;
        let ensemble = SpinEnsemble::new(self.size, self.reduction)
            .map_err(|e| ConfigError::invalid("n", &self.reduction.to_string(), e))?;
        let epsilon = Epsilon::new(self.epsilon).map_err(|e| ConfigError::invalid("epsilon", &self.epsilon.to_string(), e))?;
        let sigma = match self.sigma {
            SigmaSpec::Sampled(i) => tessellation.tile(i).map(|t| t.sampled_point()),
            SigmaSpec::Point { theta, phi } => SpherePoint::new(theta, phi),
        }
        .map_err(|e| ConfigError::invalid("sigma", &self.sigma.to_string(), e))?;
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(ConfigError::invalid("tol", &self.tol.to_string(), "must be positive"));
        }
        let mode = match self.mode {
            ModeSpec::Exact => Mode::Exact,
            ModeSpec::Truncated => Mode::Truncated(epsilon),
        };
        Ok(Experiment { tessellation, ensemble, sigma, mode, tol: self.tol, seed: self.seed, rows: self.rows, shots: self.shots })
    }
}

/// Parameters of a Monge-distance curve over `J = j_min..=j_max`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MongeConfig {
    pub j_min: u32,
    pub j_max: u32,
    pub theta: f64,
    pub tol: f64,
}

impl Default for MongeConfig {
    fn default() -> Self {
        Self { j_min: 1, j_max: 20, theta: std::f64::consts::FRAC_PI_3, tol: crate::monge::DEFAULT_SERIES_TOLERANCE }
    }
}

pub const MONGE_KEYS: [&str; 4] = ["j_min", "j_max", "theta", "tol"];

impl MongeConfig {
    pub fn from_key_values(kv: &KeyValues) -> Result<Self, ConfigError> {
        kv.reject_unknown(&MONGE_KEYS)?;
        let d = Self::default();
        let theta = match kv.get("theta") {
            Some(v) => parse_angle(v).map_err(|e| ConfigError::invalid("theta", v, e))?,
            None => d.theta,
        };
        Ok(Self {
            j_min: kv.parsed("j_min")?.unwrap_or(d.j_min),
            j_max: kv.parsed("j_max")?.unwrap_or(d.j_max),
            theta,
            tol: kv.parsed("tol")?.unwrap_or(d.tol),
        })
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Self::from_key_values(&KeyValues::parse(text)?)
    }
}

/// A number of radians, or `pi/<d>` / `<m>pi/<d>` for rational multiples of π.
pub fn parse_angle(s: &str) -> Result<f64, String> {
    let s = s.trim();
    if let Ok(x) = s.parse::<f64>() {
        return Ok(x);
    }
    let (num, den) = s.split_once('/').unwrap_or((s, "1"));
    let den: f64 = den.trim().parse().map_err(|_| format!("bad angle {s:?}"))?;
    let mult = num.trim().strip_suffix("pi").ok_or_else(|| format!("bad angle {s:?}"))?.trim();
    let mult: f64 = if mult.is_empty() { 1.0 } else { mult.trim_end_matches('*').parse().map_err(|_| format!("bad angle {s:?}"))? };
    Ok(mult * std::f64::consts::PI / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn defaults_and_overrides() {
        let c = ExperimentConfig::parse("# fig 6\nN = 300\nsigma = 1.25, 1.0\nmode=exact\n").unwrap();
        assert_eq!(c.size, 300);
        assert_eq!(c.k, 4);
        assert_eq!(c.sigma, SigmaSpec::Point { theta: 1.25, phi: 1.0 });
        assert_eq!(c.mode, ModeSpec::Exact);
        let e = ExperimentConfig::default().resolve().unwrap();
        assert_eq!(e.sigma, e.tessellation.tile(1).unwrap().sampled_point());
        assert_eq!(e.ensemble.spin().twice(), 3430);
    }

    #[test]
    fn errors() {
        assert!(matches!(KeyValues::parse("N 30"), Err(ConfigError::Syntax { line: 1, .. })));
        assert!(matches!(KeyValues::parse("N=1\nN=2"), Err(ConfigError::Duplicate(_))));
        assert!(matches!(ExperimentConfig::parse("J=3"), Err(ConfigError::UnknownKey(_))));
        assert!(matches!(ExperimentConfig::parse("N=-3"), Err(ConfigError::Invalid { .. })));
        assert!(ExperimentConfig::parse("epsilon=1.5").unwrap().resolve().is_err());
        assert!(ExperimentConfig::parse("sigma=lambda200").unwrap().resolve().is_err());
        assert!(ExperimentConfig::parse("N=3\nn=5").unwrap().resolve().is_err());
    }

    #[test]
    fn sigma_and_angles() {
        assert_eq!("lambda1".parse::<SigmaSpec>().unwrap(), SigmaSpec::Sampled(1));
        assert_eq!("sampled:17".parse::<SigmaSpec>().unwrap(), SigmaSpec::Sampled(17));
        assert_eq!(parse_angle("pi/3").unwrap(), PI / 3.0);
        assert_eq!(parse_angle("2pi/3").unwrap(), 2.0 * PI / 3.0);
        assert_eq!(parse_angle("0.5").unwrap(), 0.5);
        assert!(parse_angle("tau").is_err());
        let m = MongeConfig::parse("j_max = 20\ntheta = pi/3\n").unwrap();
        assert_eq!((m.j_min, m.j_max, m.theta), (1, 20, PI / 3.0));
    }
}
