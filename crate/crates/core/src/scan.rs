//! Scenario runners producing probability curves, and Poisson sampling of
//! synthetic counts.
//!
//! Every scenario evaluates the same pipeline per row:
//! source, relative H/V delay, HWP1 (as a beam splitter), phase shifter on
//! channel 1, HWP2, then the probability of two photons in each output.

use rand::SeedableRng;
use rand_distr::{Distribution, Poisson};
use rand_pcg::Pcg64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::optics::{detect_prob, run_circuit, theta_star, Circuit, DetectionPattern, Element};
use crate::source::{apply_delay, DelayModel, SourceSpec, SourceState, DEFAULT_COHERENCE_LENGTH_UM};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    Delay,
    Theta1,
    Theta2,
    Phi,
}

impl SweepVariable {
    /// Scenario name written into table headers.
    pub fn scenario(self) -> &'static str {
        match self {
            SweepVariable::Delay => "hom_dip",
            SweepVariable::Theta1 => "theta1_scan",
            SweepVariable::Theta2 => "theta_scan",
            SweepVariable::Phi => "fringe",
        }
    }

    pub fn is_angle(self) -> bool {
        !matches!(self, SweepVariable::Delay)
    }
}

/// Fixed element settings, radians.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircuitAngles {
    pub theta1: f64,
    pub theta2: f64,
    pub phi: f64,
}

/// Linear sweep including both endpoints; µm for delay, radians for angles.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub variable: SweepVariable,
    pub from: f64,
    pub to: f64,
    pub steps: usize,
}

impl Sweep {
    pub fn points(&self) -> Vec<f64> {
        let n = self.steps;
        let step = (self.to - self.from) / (n - 1) as f64;
        (0..n)
            .map(|i| {
                if i + 1 == n {
                    self.to
                } else {
                    self.from + step * i as f64
                }
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    pub source: SourceSpec,
    pub circuit: CircuitAngles,
    pub sweep: Sweep,
    pub delay: DelayModel,
}

impl ScanConfig {
    /// Delay scan: HWP1 at 0, HWP2 at the four-photon HOM angle.
    pub fn hom_dip(source: SourceSpec, from_um: f64, to_um: f64, steps: usize) -> Self {
        ScanConfig {
            source,
            circuit: CircuitAngles {
                theta1: 0.0,
                theta2: theta_star(),
                phi: 0.0,
            },
            sweep: Sweep {
                variable: SweepVariable::Delay,
                from: from_um,
                to: to_um,
                steps,
            },
            delay: DelayModel {
                delta_um: 0.0,
                coherence_length_um: DEFAULT_COHERENCE_LENGTH_UM,
            },
        }
    }

    /// HWP2 angle scan at zero delay with HWP1 at 0.
    pub fn theta(source: SourceSpec, from: f64, to: f64, steps: usize) -> Self {
        ScanConfig {
            source,
            circuit: CircuitAngles {
                theta1: 0.0,
                theta2: 0.0,
                phi: 0.0,
            },
            sweep: Sweep {
                variable: SweepVariable::Theta2,
                from,
                to,
                steps,
            },
            delay: DelayModel {
                delta_um: 0.0,
                coherence_length_um: DEFAULT_COHERENCE_LENGTH_UM,
            },
        }
    }

    /// Phase scan with HWP1 at `theta1` and HWP2 at 22.5 degrees.
    pub fn fringe(source: SourceSpec, theta1: f64, from: f64, to: f64, steps: usize) -> Self {
        ScanConfig {
            source,
            circuit: CircuitAngles {
                theta1,
                theta2: 22.5f64.to_radians(),
                phi: 0.0,
            },
            sweep: Sweep {
                variable: SweepVariable::Phi,
                from,
                to,
                steps,
            },
            delay: DelayModel {
                delta_um: 0.0,
                coherence_length_um: DEFAULT_COHERENCE_LENGTH_UM,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.sweep;
        if s.steps < 2 {
            return Err(Error::Config(format!("sweep needs at least 2 steps, got {}", s.steps)));
        }
        if !(s.from.is_finite() && s.to.is_finite()) || !(s.from < s.to) {
            return Err(Error::Config(format!(
                "sweep range must satisfy from < to, got [{}, {}]",
                s.from, s.to
            )));
        }
        let c = &self.circuit;
        if ![c.theta1, c.theta2, c.phi].iter().all(|v| v.is_finite()) {
            return Err(Error::Config("circuit angles must be finite".into()));
        }
        DelayModel::new(self.delay.delta_um, self.delay.coherence_length_um)
            .map_err(|e| Error::Config(e.to_string()))?;
        self.source
            .schmidt_spec()
            .map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub x: f64,
    pub probability: f64,
    pub counts: Option<u64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanTable {
    pub scenario: String,
    pub rows: Vec<ScanRow>,
    pub config: Option<ScanConfig>,
}

impl ScanTable {
    /// Checks that x is strictly increasing and probabilities lie in [0, 1].
    pub fn new(scenario: impl Into<String>, rows: Vec<ScanRow>) -> Result<Self> {
        for w in rows.windows(2) {
            if !(w[0].x < w[1].x) {
                return Err(Error::invalid(format!(
                    "x must be strictly increasing ({} then {})",
                    w[0].x, w[1].x
                )));
            }
        }
        if let Some(r) = rows
            .iter()
            .find(|r| !(0.0..=1.0).contains(&r.probability))
        {
            return Err(Error::invalid(format!(
                "probability {} at x = {} outside [0, 1]",
                r.probability, r.x
            )));
        }
        Ok(ScanTable {
            scenario: scenario.into(),
            rows,
            config: None,
        })
    }

    pub fn xs(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.x).collect()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.probability).collect()
    }

    /// The counts column, if every row has one.
    pub fn counts(&self) -> Option<Vec<f64>> {
        self.rows.iter().map(|r| r.counts.map(|c| c as f64)).collect()
    }

    pub fn has_counts(&self) -> bool {
        !self.rows.is_empty() && self.rows.iter().all(|r| r.counts.is_some())
    }
}

fn circuit_for(angles: &CircuitAngles) -> Result<Circuit> {
    Circuit::new(
        2,
        vec![
            Element::half_wave_plate(angles.theta1),
            Element::phase_shifter(angles.phi),
            Element::half_wave_plate(angles.theta2),
        ],
    )
}

/// Probability of the (2, 2) pattern for `base` with the sweep variable set
/// to `x`.
fn evaluate(cfg: &ScanConfig, base: &SourceState, x: f64) -> Result<f64> {
    let mut angles = cfg.circuit;
    let mut delay = cfg.delay;
    match cfg.sweep.variable {
        SweepVariable::Delay => delay.delta_um = x,
        SweepVariable::Theta1 => angles.theta1 = x,
        SweepVariable::Theta2 => angles.theta2 = x,
        SweepVariable::Phi => angles.phi = x,
    }
    let src = if delay.delta_um == 0.0 {
        base.clone()
    } else {
        apply_delay(base, &delay)?
    };
    let out = run_circuit(&src.ket, &circuit_for(&angles)?)?;
    detect_prob(&out, &DetectionPattern::two_two())
}

/// Runs any scan. Rows are evaluated in parallel and emitted in x order.
pub fn run_scan(cfg: &ScanConfig) -> Result<ScanTable> {
    cfg.validate()?;
    let base = cfg.source.build()?;
    let rows = cfg
        .sweep
        .points()
        .into_par_iter()
        .map(|x| {
            evaluate(cfg, &base, x).map(|probability| ScanRow {
                x,
                probability,
                counts: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut table = ScanTable::new(cfg.sweep.variable.scenario(), rows)?;
    table.config = Some(cfg.clone());
    Ok(table)
}

fn require(cfg: &ScanConfig, variable: SweepVariable) -> Result<()> {
    if cfg.sweep.variable != variable {
        return Err(Error::Config(format!(
            "{} scan needs sweep variable {:?}, got {:?}",
            variable.scenario(),
            variable,
            cfg.sweep.variable
        )));
    }
    Ok(())
}

/// Four-photon coincidence against H/V delay.
pub fn hom_dip_scan(cfg: &ScanConfig) -> Result<ScanTable> {
    require(cfg, SweepVariable::Delay)?;
    run_scan(cfg)
}

/// Four-photon coincidence against the HWP2 angle.
pub fn theta_scan(cfg: &ScanConfig) -> Result<ScanTable> {
    require(cfg, SweepVariable::Theta2)?;
    run_scan(cfg)
}

/// Four-photon coincidence against the interferometer phase.
pub fn fringe_scan(cfg: &ScanConfig) -> Result<ScanTable> {
    require(cfg, SweepVariable::Phi)?;
    run_scan(cfg)
}

/// Replaces the counts column with Poisson draws whose means are
/// `probability / max(probability) * mean_counts_at_max`.
///
/// Draws come from a PCG64 stream seeded with `seed`, one per row in x
/// order, so the output is a pure function of its inputs.
pub fn poissonize(t: &ScanTable, mean_counts_at_max: f64, seed: u64) -> Result<ScanTable> {
    if !(mean_counts_at_max >= 0.0 && mean_counts_at_max.is_finite()) {
        return Err(Error::invalid(format!(
            "mean counts must be finite and >= 0, got {mean_counts_at_max}"
        )));
    }
    let p_max = t.rows.iter().map(|r| r.probability).fold(0.0, f64::max);
    let mut rng = Pcg64::seed_from_u64(seed);
    let mut out = t.clone();
    for row in &mut out.rows {
        let mean = if p_max > 0.0 {
            row.probability / p_max * mean_counts_at_max
        } else {
            0.0
        };
        let k = if mean > 0.0 {
            let dist = Poisson::new(mean)
                .map_err(|e| Error::Numerical(format!("poisson mean {mean}: {e}")))?;
            dist.sample(&mut rng) as u64
        } else {
            0
        };
        row.counts = Some(k);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn sweep_points_include_endpoints() {
        let s = Sweep {
            variable: SweepVariable::Phi,
            from: 0.0,
            to: 1.0,
            steps: 5,
        };
        assert_eq!(s.points(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn invalid_configs() {
        let mut cfg = ScanConfig::theta(SourceSpec::Ideal {}, 0.0, 1.0, 1);
        assert!(matches!(run_scan(&cfg), Err(Error::Config(_))));
        cfg.sweep.steps = 3;
        cfg.sweep.from = 2.0;
        assert!(matches!(run_scan(&cfg), Err(Error::Config(_))));
        let bad = ScanConfig::theta(SourceSpec::Schmidt { lambdas: vec![0.5] }, 0.0, 1.0, 3);
        assert!(matches!(run_scan(&bad), Err(Error::Config(_))));
    }

    #[test]
    fn runner_rejects_wrong_variable() {
        let cfg = ScanConfig::theta(SourceSpec::Ideal {}, 0.0, 1.0, 3);
        assert!(fringe_scan(&cfg).is_err());
        assert!(hom_dip_scan(&cfg).is_err());
        assert!(theta_scan(&cfg).is_ok());
    }

    #[test]
    fn theta_zero_passes_unsplit() {
        let t = theta_scan(&ScanConfig::theta(SourceSpec::Ideal {}, 0.0, 0.1, 2)).unwrap();
        assert!((t.rows[0].probability - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dip_center_is_dark() {
        let t = hom_dip_scan(&ScanConfig::hom_dip(SourceSpec::Ideal {}, -1200.0, 1200.0, 3)).unwrap();
        assert!(t.rows[1].probability.abs() < 1e-12);
        assert!((t.rows[0].probability - 0.5).abs() < 1e-6);
        assert!((t.rows[2].probability - 0.5).abs() < 1e-6);
    }

    #[test]
    fn ideal_fringe_minimum() {
        let cfg = ScanConfig::fringe(SourceSpec::Ideal {}, theta_star(), 0.0, PI / 2.0, 3);
        let t = fringe_scan(&cfg).unwrap();
        assert!((t.rows[0].probability - 0.25).abs() < 1e-12);
        assert!(t.rows[1].probability.abs() < 1e-12);
    }

    #[test]
    fn poissonize_zero_rows_stay_zero_and_is_seeded() {
        let t = ScanTable::new(
            "test",
            vec![
                ScanRow { x: 0.0, probability: 0.0, counts: None },
                ScanRow { x: 1.0, probability: 0.5, counts: None },
                ScanRow { x: 2.0, probability: 0.25, counts: None },
            ],
        )
        .unwrap();
        let a = poissonize(&t, 50.0, 7).unwrap();
        let b = poissonize(&t, 50.0, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.rows[0].counts, Some(0));
        let z = poissonize(&t, 0.0, 7).unwrap();
        assert!(z.rows.iter().all(|r| r.counts == Some(0)));
        assert!(poissonize(&t, -1.0, 7).is_err());
    }

    #[test]
    fn poissonize_large_mean_tracks_curve() {
        let t = ScanTable::new(
            "test",
            vec![
                ScanRow { x: 0.0, probability: 0.2, counts: None },
                ScanRow { x: 1.0, probability: 0.4, counts: None },
            ],
        )
        .unwrap();
        let s = poissonize(&t, 1e6, 11).unwrap();
        let c = s.rows[1].counts.unwrap() as f64;
        // 3 sigma at mean 1e6 is 0.3 %
        assert!((c / 1e6 - 1.0).abs() < 0.01);
    }

    #[test]
    fn table_rejects_unsorted_or_out_of_range() {
        let r = |x, p| ScanRow { x, probability: p, counts: None };
        assert!(ScanTable::new("t", vec![r(1.0, 0.1), r(0.0, 0.1)]).is_err());
        assert!(ScanTable::new("t", vec![r(0.0, 1.5)]).is_err());
    }
}
