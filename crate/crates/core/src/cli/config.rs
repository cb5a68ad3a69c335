//! Strict JSON run configuration.
//!
//! Angles are strings with an explicit unit (`"13.68 deg"`, `"0.25 rad"`).
//! Delays are µm, either a bare number or a string ending in `um`.
//! Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::de::{self, Deserializer};
use serde::Deserialize;

use crate::fit::{FitOptions, ModelKind};
use crate::scan::{CircuitAngles, ScanConfig, Sweep, SweepVariable};
use crate::source::{DelayModel, SourceSpec, DEFAULT_COHERENCE_LENGTH_UM};
use crate::{Error, Result};

/// A number tagged with the unit it was written in.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Quantity {
    Radians(f64),
    Micrometers(f64),
}

impl Quantity {
    pub fn parse(text: &str) -> Result<Self> {
        let t = text.trim();
        let split = t
            .find(|c: char| c.is_ascii_alphabetic() && c != 'e' && c != 'E')
            .ok_or_else(|| Error::Config(format!("'{text}' has no unit (use deg, rad or um)")))?;
        let (num, unit) = t.split_at(split);
        let value: f64 = num
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("cannot parse number in '{text}'")))?;
        if !value.is_finite() {
            return Err(Error::Config(format!("'{text}' is not finite")));
        }
        match unit.trim() {
            "deg" => Ok(Quantity::Radians(value.to_radians())),
            "rad" => Ok(Quantity::Radians(value)),
            "um" => Ok(Quantity::Micrometers(value)),
            other => Err(Error::Config(format!("unknown unit '{other}' in '{text}'"))),
        }
    }

    pub fn radians(self) -> Result<f64> {
        match self {
            Quantity::Radians(v) => Ok(v),
            Quantity::Micrometers(_) => Err(Error::Config("expected an angle, got a length".into())),
        }
    }

    pub fn micrometers(self) -> Result<f64> {
        match self {
            Quantity::Micrometers(v) => Ok(v),
            Quantity::Radians(_) => Err(Error::Config("expected a length, got an angle".into())),
        }
    }
}

impl<'de> Deserialize<'de> for Quantity {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Number(v) => Ok(Quantity::Micrometers(v)),
            Raw::Text(s) => Quantity::parse(&s).map_err(de::Error::custom),
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitSection {
    pub theta1: Option<Quantity>,
    pub theta2: Option<Quantity>,
    pub phi: Option<Quantity>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub variable: SweepVariable,
    pub from: Quantity,
    pub to: Quantity,
    pub steps: usize,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelaySection {
    pub delta_um: Option<f64>,
    pub coherence_length_um: Option<f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingSection {
    pub mean_counts_at_max: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    pub model: ModelKind,
    #[serde(default)]
    pub weighted: bool,
    #[serde(default)]
    pub free_phase: bool,
}

impl FitSection {
    pub fn options(&self) -> FitOptions {
        FitOptions {
            weighted: self.weighted,
            free_phase: self.free_phase,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BalanceSection {
    pub tolerance: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub source: SourceSpec,
    pub circuit: Option<CircuitSection>,
    pub sweep: Option<SweepSection>,
    pub delay: Option<DelaySection>,
    pub output: Option<PathBuf>,
    pub seed: Option<u64>,
    pub sampling: Option<SamplingSection>,
    pub fit: Option<FitSection>,
    pub balance: Option<BalanceSection>,
}

/// Tolerance on `|V2|` used by `balance` when the config has no
/// `balance` section.
pub const DEFAULT_BALANCE_TOLERANCE: f64 = 0.02;

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        RunConfig::from_json(&text)
    }

    /// The scan described by `circuit`, `sweep` and `delay`. Every circuit
    /// angle other than the swept one must be given; `delay.delta_um` is
    /// required unless the delay is swept.
    pub fn scan_config(&self) -> Result<ScanConfig> {
        let sweep = self
            .sweep
            .as_ref()
            .ok_or_else(|| Error::Config("missing 'sweep' section".into()))?;
        let variable = sweep.variable;
        let (from, to) = if variable.is_angle() {
            (sweep.from.radians()?, sweep.to.radians()?)
        } else {
            (sweep.from.micrometers()?, sweep.to.micrometers()?)
        };
        let circuit = self.circuit.clone().unwrap_or_default();
        let angle = |q: Option<Quantity>, name: &str, swept: bool| -> Result<f64> {
            match q {
                Some(q) => q.radians(),
                None if swept => Ok(0.0),
                None => Err(Error::Config(format!("missing circuit.{name}"))),
            }
        };
        let angles = CircuitAngles {
            theta1: angle(circuit.theta1, "theta1", variable == SweepVariable::Theta1)?,
            theta2: angle(circuit.theta2, "theta2", variable == SweepVariable::Theta2)?,
            phi: angle(circuit.phi, "phi", variable == SweepVariable::Phi)?,
        };
        let delta_um = match self.delay.as_ref().and_then(|d| d.delta_um) {
            Some(d) => d,
            None if variable == SweepVariable::Delay => 0.0,
            None => return Err(Error::Config("missing delay.delta_um".into())),
        };
        let coherence_length_um = self
            .delay
            .as_ref()
            .and_then(|d| d.coherence_length_um)
            .unwrap_or(DEFAULT_COHERENCE_LENGTH_UM);
        let cfg = ScanConfig {
            source: self.source.clone(),
            circuit: angles,
            sweep: Sweep {
                variable,
                from,
                to,
                steps: sweep.steps,
            },
            delay: DelayModel {
                delta_um,
                coherence_length_um,
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
