//! Optical elements, circuits and internal-mode-blind detection.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::fock::{apply_mode_transform, Ket, ModeId, ModeTransform};
use crate::{Error, Result, C64};

/// A state is accepted by [`detect_prob`] if its squared norm is this close to 1.
pub const NORMALIZATION_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Element {
    /// Transmits `sqrt(T)` on both ports; reflects `+sqrt(R)` into the first
    /// port and `-sqrt(R)` into the second.
    BeamSplitter {
        transmissivity: f64,
        ports: (usize, usize),
    },
    /// A half-wave plate in front of a polarizing splitter, equivalent to a
    /// beam splitter with `T = cos^2(2 theta)`.
    HalfWavePlate { theta: f64, ports: (usize, usize) },
    /// Multiplies the annihilation operator of `port` by `exp(i phi)`.
    PhaseShifter { phi: f64, port: usize },
}

impl Element {
    pub fn beam_splitter(transmissivity: f64) -> Self {
        Element::BeamSplitter {
            transmissivity,
            ports: (0, 1),
        }
    }

    pub fn half_wave_plate(theta: f64) -> Self {
        Element::HalfWavePlate {
            theta,
            ports: (0, 1),
        }
    }

    pub fn phase_shifter(phi: f64) -> Self {
        Element::PhaseShifter { phi, port: 1 }
    }

    pub fn validate(&self, channels: usize) -> Result<()> {
        let check_ports = |(p, q): (usize, usize)| {
            if p == q {
                return Err(Error::invalid(format!("ports must differ, got ({p}, {q})")));
            }
            if p >= channels || q >= channels {
                return Err(Error::invalid(format!(
                    "ports ({p}, {q}) out of range for {channels} channels"
                )));
            }
            Ok(())
        };
        match *self {
            Element::BeamSplitter {
                transmissivity,
                ports,
            } => {
                if !(0.0..=1.0).contains(&transmissivity) {
                    return Err(Error::invalid(format!(
                        "transmissivity {transmissivity} outside [0, 1]"
                    )));
                }
                check_ports(ports)
            }
            Element::HalfWavePlate { theta, ports } => {
                if !theta.is_finite() {
                    return Err(Error::invalid("half-wave plate angle must be finite"));
                }
                check_ports(ports)
            }
            Element::PhaseShifter { phi, port } => {
                if !phi.is_finite() {
                    return Err(Error::invalid("phase must be finite"));
                }
                if port >= channels {
                    return Err(Error::invalid(format!(
                        "port {port} out of range for {channels} channels"
                    )));
                }
                Ok(())
            }
        }
    }

    pub fn transform(&self, channels: usize) -> Result<ModeTransform> {
        element_transform(self, channels)
    }
}

/// HWP angle whose equivalent splitter has `T = (3 + sqrt 3) / 6`, where
/// the (2, 2) output of `|2, 2>` vanishes (about 13.68 degrees).
pub fn theta_star() -> f64 {
    0.5 * ((3.0 + 3f64.sqrt()) / 6.0).sqrt().acos()
}

/// Transmissivity of the beam splitter equivalent to a half-wave plate at
/// `theta` radians: `cos^2(2 theta)`.
pub fn hwp_transmissivity(theta: f64) -> f64 {
    (2.0 * theta).cos().powi(2)
}

/// The `channels`-dimensional unitary of `e`, identity outside its ports.
pub fn element_transform(e: &Element, channels: usize) -> Result<ModeTransform> {
    e.validate(channels)?;
    let mut m = DMatrix::<C64>::identity(channels, channels);
    let (t, ports, label) = match *e {
        Element::BeamSplitter {
            transmissivity,
            ports,
        } => (transmissivity, ports, format!("BS(T={transmissivity})")),
        Element::HalfWavePlate { theta, ports } => (
            hwp_transmissivity(theta),
            ports,
            format!("HWP(theta={theta})"),
        ),
        Element::PhaseShifter { phi, port } => {
            m[(port, port)] = C64::from_polar(1.0, phi);
            return ModeTransform::new(m, format!("PS(phi={phi})"));
        }
    };
    let (p, q) = ports;
    let st = t.sqrt();
    let sr = (1.0 - t).max(0.0).sqrt();
    m[(p, p)] = C64::new(st, 0.0);
    m[(p, q)] = C64::new(sr, 0.0);
    m[(q, p)] = C64::new(-sr, 0.0);
    m[(q, q)] = C64::new(st, 0.0);
    ModeTransform::new(m, label)
}

/// An ordered sequence of elements on `channels` external channels.
#[derive(Clone, Debug, PartialEq)]
pub struct Circuit {
    elements: Vec<Element>,
    channels: usize,
}

impl Circuit {
    pub fn new(channels: usize, elements: Vec<Element>) -> Result<Self> {
        if channels == 0 {
            return Err(Error::invalid("a circuit needs at least one channel"));
        }
        for e in &elements {
            e.validate(channels)?;
        }
        Ok(Circuit { elements, channels })
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// The single unitary equal to applying every element in order.
    pub fn transform(&self) -> Result<ModeTransform> {
        let mut total = ModeTransform::identity(self.channels);
        for e in &self.elements {
            total = total.then(&element_transform(e, self.channels)?)?;
        }
        Ok(total)
    }
}

pub fn run_circuit(input: &Ket, c: &Circuit) -> Result<Ket> {
    if input.channel_extent() > c.channels() {
        return Err(Error::invalid(format!(
            "input uses channel {} but the circuit has {} channels",
            input.channel_extent() - 1,
            c.channels()
        )));
    }
    if c.elements().is_empty() {
        return Ok(input.clone());
    }
    apply_mode_transform(input, &c.transform()?)
}

/// Photon counts per external channel as seen by internal-mode-blind
/// number-resolving detectors.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DetectionPattern {
    counts: Vec<u32>,
}

impl DetectionPattern {
    pub fn new(counts: Vec<u32>) -> Self {
        DetectionPattern { counts }
    }

    /// Two photons in each of two channels.
    pub fn two_two() -> Self {
        DetectionPattern::new(vec![2, 2])
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn total_n(&self) -> u32 {
        self.counts.iter().sum()
    }
}

fn check_normalized(state: &Ket) -> Result<()> {
    let n2 = state.norm_sqr();
    if (n2 - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::InvalidState(format!(
            "state is not normalized (squared norm {n2})"
        )));
    }
    Ok(())
}

/// Probability of `pattern`, summing over all internal-mode assignments.
/// Unnormalized states are rejected.
pub fn detect_prob(state: &Ket, pattern: &DetectionPattern) -> Result<f64> {
    check_normalized(state)?;
    // `+ 0.0` turns an empty sum's -0.0 into 0.0
    Ok(pattern_weight(state, pattern).clamp(0.0, 1.0) + 0.0)
}

/// Like [`detect_prob`] but divides by the squared norm instead of rejecting.
pub fn detect_prob_renormalized(state: &Ket, pattern: &DetectionPattern) -> Result<f64> {
    let n2 = state.norm_sqr();
    if !(n2 > 0.0 && n2.is_finite()) {
        return Err(Error::InvalidState(format!(
            "cannot renormalize a state with squared norm {n2}"
        )));
    }
    Ok(pattern_weight(state, pattern) / n2 + 0.0)
}

fn pattern_weight(state: &Ket, pattern: &DetectionPattern) -> f64 {
    let channels = pattern.counts.len();
    if state.photon_number() != pattern.total_n() || state.channel_extent() > channels {
        return 0.0;
    }
    state
        .terms()
        .filter(|(s, _)| s.channel_counts(channels) == pattern.counts)
        .map(|(_, a)| a.norm_sqr())
        .sum()
}

/// Probability of every detection pattern over `channels` channels.
pub fn pattern_distribution(state: &Ket, channels: usize) -> Result<BTreeMap<DetectionPattern, f64>> {
    check_normalized(state)?;
    if state.channel_extent() > channels {
        return Err(Error::invalid(format!(
            "state uses {} channels, asked for {}",
            state.channel_extent(),
            channels
        )));
    }
    let mut out = BTreeMap::new();
    for (s, a) in state.terms() {
        *out.entry(DetectionPattern::new(s.channel_counts(channels)))
            .or_insert(0.0) += a.norm_sqr();
    }
    Ok(out)
}

/// `<C^dag^2 D^dag^2 D^2 C^2>` for the channel pair `(c, d)`, where each
/// channel operator runs over all internal modes.
///
/// Computed as `sum_{i,j,k,l} || d_l d_k c_j c_i |psi> ||^2` by explicit
/// annihilation, independently of the detection-pattern sum.
pub fn normally_ordered_moment(state: &Ket, channel_pair: (usize, usize)) -> Result<f64> {
    if state.photon_number() != 4 {
        return Err(Error::invalid(format!(
            "moment needs a four-photon state, got {} photons",
            state.photon_number()
        )));
    }
    let (c, d) = channel_pair;
    if c == d {
        return Err(Error::invalid("moment channels must differ"));
    }
    let k = state.internal_extent();
    let sequence = [c, c, d, d];
    let mut frontier = vec![state.clone()];
    for &channel in &sequence {
        frontier = frontier
            .iter()
            .flat_map(|psi| (0..k).map(move |i| psi.annihilate(ModeId::new(channel, i))))
            .filter(|psi| !psi.is_empty())
            .collect();
    }
    Ok(frontier.iter().map(Ket::norm_sqr).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::FockState;
    use std::f64::consts::PI;

    fn t_star() -> f64 {
        (3.0 + 3f64.sqrt()) / 6.0
    }

    fn ket(counts: &[u32]) -> Ket {
        Ket::basis(FockState::from_channel_counts(counts))
    }

    fn interferometer(phi: f64) -> Circuit {
        Circuit::new(
            2,
            vec![
                Element::beam_splitter(t_star()),
                Element::phase_shifter(phi),
                Element::beam_splitter(0.5),
            ],
        )
        .unwrap()
    }

    #[test]
    fn hwp_transmissivity_values() {
        assert_eq!(hwp_transmissivity(0.0), 1.0);
        assert!((hwp_transmissivity(22.5f64.to_radians()) - 0.5).abs() < 1e-15);
        let theta_star = 0.5 * t_star().sqrt().acos();
        assert!((theta_star.to_degrees() - 13.68).abs() < 0.005);
        assert!((hwp_transmissivity(theta_star) - t_star()).abs() < 1e-12);
    }

    #[test]
    fn zero_phase_is_identity() {
        let u = element_transform(&Element::phase_shifter(0.0), 2).unwrap();
        assert_eq!(u.matrix(), ModeTransform::identity(2).matrix());
    }

    #[test]
    fn full_transmission_is_identity() {
        let u = element_transform(&Element::beam_splitter(1.0), 2).unwrap();
        assert_eq!(u.matrix(), ModeTransform::identity(2).matrix());
    }

    #[test]
    fn balanced_splitter_has_no_coincidences() {
        let c = Circuit::new(2, vec![Element::beam_splitter(0.5)]).unwrap();
        let out = run_circuit(&ket(&[1, 1]), &c).unwrap();
        assert!(out.amplitude(&FockState::from_channel_counts(&[1, 1])).norm() < 1e-12);
    }

    #[test]
    fn invalid_elements_are_rejected() {
        assert!(Element::beam_splitter(1.5).validate(2).is_err());
        let same = Element::BeamSplitter {
            transmissivity: 0.5,
            ports: (1, 1),
        };
        assert!(same.validate(2).is_err());
        assert!(Element::PhaseShifter { phi: 0.0, port: 2 }.validate(2).is_err());
        assert!(Circuit::new(2, vec![Element::beam_splitter(-0.1)]).is_err());
    }

    #[test]
    fn empty_circuit_is_identity() {
        let c = Circuit::new(2, vec![]).unwrap();
        let k = ket(&[2, 2]);
        assert_eq!(run_circuit(&k, &c).unwrap(), k);
    }

    #[test]
    fn channel_mismatch_is_rejected() {
        let c = Circuit::new(2, vec![]).unwrap();
        assert!(run_circuit(&ket(&[1, 1, 1]), &c).is_err());
    }

    #[test]
    fn interferometer_fringe_extremes() {
        let out = run_circuit(&ket(&[2, 2]), &interferometer(0.0)).unwrap();
        let p = detect_prob(&out, &DetectionPattern::two_two()).unwrap();
        assert!((p - 0.25).abs() < 1e-12);
        let out = run_circuit(&ket(&[2, 2]), &interferometer(PI / 4.0)).unwrap();
        let p = detect_prob(&out, &DetectionPattern::two_two()).unwrap();
        assert!(p.abs() < 1e-12);
    }

    #[test]
    fn four_photon_hom_and_balanced_value() {
        for (t, want) in [(t_star(), 0.0), (1.0 - t_star(), 0.0), (0.5, 0.25)] {
            let c = Circuit::new(2, vec![Element::beam_splitter(t)]).unwrap();
            let out = run_circuit(&ket(&[2, 2]), &c).unwrap();
            let p = detect_prob(&out, &DetectionPattern::two_two()).unwrap();
            assert!((p - want).abs() < 1e-12, "T={t}: {p}");
        }
    }

    #[test]
    fn three_photon_hom_zero() {
        let c = Circuit::new(2, vec![Element::beam_splitter(2.0 / 3.0)]).unwrap();
        let out = run_circuit(&ket(&[2, 1]), &c).unwrap();
        let p = detect_prob(&out, &DetectionPattern::new(vec![2, 1])).unwrap();
        assert!(p < 1e-12);
    }

    #[test]
    fn unnormalized_state_is_rejected() {
        let k = ket(&[2, 2]).scaled(C64::new(2.0, 0.0));
        let pat = DetectionPattern::two_two();
        assert!(matches!(detect_prob(&k, &pat), Err(Error::InvalidState(_))));
        assert!((detect_prob_renormalized(&k, &pat).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn moment_values() {
        let out = run_circuit(&ket(&[2, 2]), &interferometer(0.0)).unwrap();
        assert!((normally_ordered_moment(&out, (0, 1)).unwrap() - 1.0).abs() < 1e-12);
        let out = run_circuit(&ket(&[2, 2]), &interferometer(PI / 4.0)).unwrap();
        assert!(normally_ordered_moment(&out, (0, 1)).unwrap().abs() < 1e-12);
        assert!(normally_ordered_moment(&ket(&[2, 1]), (0, 1)).is_err());
    }

    #[test]
    fn hwp_and_splitter_agree_exactly() {
        let theta = 0.3;
        let a = Circuit::new(2, vec![Element::half_wave_plate(theta)]).unwrap();
        let b = Circuit::new(2, vec![Element::beam_splitter(hwp_transmissivity(theta))]).unwrap();
        let ka = run_circuit(&ket(&[2, 2]), &a).unwrap();
        let kb = run_circuit(&ket(&[2, 2]), &b).unwrap();
        assert_eq!(ka, kb);
    }
}
