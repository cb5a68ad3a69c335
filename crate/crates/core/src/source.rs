//! Double-pair input states on channels H = 0 and V = 1.
//!
//! A pair source emitting `sum_k lambda_k h_k^dag v_k^dag` in Schmidt modes
//! `k` yields the four-photon state `(sum_k lambda_k h_k^dag v_k^dag)^2 |0>`.
//! Unequal populations of the Schmidt modes make the two pairs partially
//! distinguishable, with the mismatch parameter `E/A = sum_k lambda_k^4`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::fock::{apply_linear_map, FockState, Ket, ModeId};
use crate::{Error, Result, C64};

pub const H: usize = 0;
pub const V: usize = 1;

pub const MAX_SCHMIDT_MODES: usize = 4;

/// Coherence length used when a configuration does not give one.
pub const DEFAULT_COHERENCE_LENGTH_UM: f64 = 120.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchmidtSpec {
    lambdas: Vec<f64>,
}

impl SchmidtSpec {
    /// Validates `sum lambda^2 = 1` (to 1e-12), non-negativity and
    /// `1 <= K <= 4`.
    pub fn new(lambdas: Vec<f64>) -> Result<Self> {
        if lambdas.is_empty() || lambdas.len() > MAX_SCHMIDT_MODES {
            return Err(Error::invalid(format!(
                "need between 1 and {} Schmidt coefficients, got {}",
                MAX_SCHMIDT_MODES,
                lambdas.len()
            )));
        }
        if lambdas.iter().any(|l| !l.is_finite() || *l < 0.0) {
            return Err(Error::invalid("Schmidt coefficients must be finite and >= 0"));
        }
        if lambdas.iter().all(|&l| l == 0.0) {
            return Err(Error::invalid("at least one Schmidt coefficient must be positive"));
        }
        let sum: f64 = lambdas.iter().map(|l| l * l).sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!(
                "Schmidt coefficients must satisfy sum lambda^2 = 1, got {sum}"
            )));
        }
        Ok(SchmidtSpec { lambdas })
    }

    /// Rescales arbitrary non-negative weights so that `sum lambda^2 = 1`.
    pub fn from_unnormalized(weights: Vec<f64>) -> Result<Self> {
        let sum: f64 = weights.iter().map(|l| l * l).sum();
        if !(sum > 0.0 && sum.is_finite()) {
            return Err(Error::invalid("Schmidt weights must have a positive finite norm"));
        }
        let s = sum.sqrt();
        SchmidtSpec::new(weights.into_iter().map(|l| l / s).collect())
    }

    pub fn single_mode() -> Self {
        SchmidtSpec { lambdas: vec![1.0] }
    }

    /// Two-mode spec with the requested `E/A`, which must lie in `[1/2, 1]`:
    /// `lambda_1^2 = (1 + sqrt(2x - 1)) / 2`.
    pub fn from_e_over_a(x: f64) -> Result<Self> {
        if !(0.5..=1.0).contains(&x) {
            return Err(Error::invalid(format!(
                "a two-mode source realizes E/A in [0.5, 1], got {x}"
            )));
        }
        if x == 1.0 {
            return Ok(SchmidtSpec::single_mode());
        }
        let l1sq = (1.0 + (2.0 * x - 1.0).sqrt()) / 2.0;
        SchmidtSpec::new(vec![l1sq.sqrt(), (1.0 - l1sq).sqrt()])
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn modes(&self) -> usize {
        self.lambdas.len()
    }
}

pub fn e_over_a(s: &SchmidtSpec) -> f64 {
    s.lambdas.iter().map(|l| l.powi(4)).sum()
}

/// Relative H/V delay with a Gaussian temporal overlap.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DelayModel {
    pub delta_um: f64,
    pub coherence_length_um: f64,
}

impl DelayModel {
    pub fn new(delta_um: f64, coherence_length_um: f64) -> Result<Self> {
        if !delta_um.is_finite() {
            return Err(Error::invalid("delay must be finite"));
        }
        if !(coherence_length_um > 0.0 && coherence_length_um.is_finite()) {
            return Err(Error::invalid(format!(
                "coherence length must be positive, got {coherence_length_um}"
            )));
        }
        Ok(DelayModel {
            delta_um,
            coherence_length_um,
        })
    }

    /// `exp(-delta^2 / (2 Lc^2))`
    pub fn overlap(&self) -> f64 {
        let r = self.delta_um / self.coherence_length_um;
        (-0.5 * r * r).exp()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SourceState {
    pub ket: Ket,
    pub schmidt: SchmidtSpec,
    pub delay: Option<DelayModel>,
}

/// `|2_H, 2_V>` in internal mode 0.
pub fn ideal_two_pairs() -> SourceState {
    SourceState {
        ket: Ket::basis(FockState::from_channel_counts(&[2, 2])),
        schmidt: SchmidtSpec::single_mode(),
        delay: None,
    }
}

/// Normalized `(sum_k lambda_k h_k^dag v_k^dag)^2 |0>`.
pub fn schmidt_two_pairs(s: &SchmidtSpec) -> Result<SourceState> {
    let mut poly: BTreeMap<FockState, C64> = BTreeMap::new();
    for (k, &lk) in s.lambdas.iter().enumerate() {
        for (l, &ll) in s.lambdas.iter().enumerate() {
            let mono = FockState::from_counts([
                (ModeId::new(H, k), 1),
                (ModeId::new(H, l), 1),
                (ModeId::new(V, k), 1),
                (ModeId::new(V, l), 1),
            ]);
            *poly.entry(mono).or_default() += C64::new(lk * ll, 0.0);
        }
    }
    let terms = poly
        .into_iter()
        .map(|(mono, c)| {
            let norm = mono.factorial_product().sqrt();
            (mono, c * norm)
        });
    let ket = Ket::from_terms(terms)?.normalized()?;
    Ok(SourceState {
        ket,
        schmidt: s.clone(),
        delay: None,
    })
}

/// Delays the H photons by `d`.
///
/// With `K` the current internal extent, every H creation operator in
/// internal mode `k` becomes `eta h_k^dag + sqrt(1 - eta^2) h_{K+k}^dag`,
/// where `eta` is the Gaussian overlap. V photons are untouched, so the
/// delayed components live in modes no V photon occupies.
pub fn apply_delay(src: &SourceState, d: &DelayModel) -> Result<SourceState> {
    let eta = d.overlap();
    let k_extent = src.ket.internal_extent().max(1);
    let rest = (1.0 - eta * eta).max(0.0).sqrt();
    let ket = apply_linear_map(&src.ket, |mode| {
        if mode.external == H {
            vec![
                (mode, C64::new(eta, 0.0)),
                (
                    ModeId::new(H, k_extent + mode.internal),
                    C64::new(rest, 0.0),
                ),
            ]
        } else {
            vec![(mode, C64::new(1.0, 0.0))]
        }
    })?;
    Ok(SourceState {
        ket,
        schmidt: src.schmidt.clone(),
        delay: Some(*d),
    })
}

/// How the double-pair input is specified in a scan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceSpec {
    Ideal {},
    Schmidt { lambdas: Vec<f64> },
    EffectiveEOverA { value: f64 },
}

impl SourceSpec {
    pub fn schmidt_spec(&self) -> Result<SchmidtSpec> {
        match self {
            SourceSpec::Ideal {} => Ok(SchmidtSpec::single_mode()),
            SourceSpec::Schmidt { lambdas } => SchmidtSpec::new(lambdas.clone()),
            SourceSpec::EffectiveEOverA { value } => SchmidtSpec::from_e_over_a(*value),
        }
    }

    pub fn build(&self) -> Result<SourceState> {
        match self {
            SourceSpec::Ideal {} => Ok(ideal_two_pairs()),
            other => schmidt_two_pairs(&other.schmidt_spec()?),
        }
    }
}
