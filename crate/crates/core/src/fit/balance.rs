//! Search for the HWP1 angle that cancels the `cos 2 phi` fringe term.

use rayon::prelude::*;

use super::{fit_xy, golden_section_min, FitOptions, FitReport, ModelKind, ModelParams};
use crate::fock::Ket;
use crate::optics::{detect_prob, run_circuit, theta_star, Circuit, DetectionPattern, Element};
use crate::source::{schmidt_two_pairs, SchmidtSpec};
use crate::{Error, Result};

/// Phase samples per noiseless fringe, evenly spaced over `[0, 2 pi)`.
pub const BALANCE_FRINGE_POINTS: usize = 72;

const HALF_RANGE_DEG: f64 = 3.0;
const GRID_STEP_DEG: f64 = 0.05;
const REFINE_TOL_RAD: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct Balance {
    pub theta1: f64,
    pub v2: f64,
    pub v4: f64,
    /// `|V2| <= tolerance` at `theta1`.
    pub balanced: bool,
    pub report: FitReport,
}

/// Noiseless fringe of `source` with HWP1 at `theta1` and HWP2 at 22.5
/// degrees, fitted with the fixed-phase fringe model.
pub fn fringe_components(source: &Ket, theta1: f64) -> Result<FitReport> {
    let phis: Vec<f64> = (0..BALANCE_FRINGE_POINTS)
        .map(|i| 2.0 * std::f64::consts::PI * i as f64 / BALANCE_FRINGE_POINTS as f64)
        .collect();
    let probs = phis
        .iter()
        .map(|&phi| {
            let c = Circuit::new(
                2,
                vec![
                    Element::half_wave_plate(theta1),
                    Element::phase_shifter(phi),
                    Element::half_wave_plate(22.5f64.to_radians()),
                ],
            )?;
            detect_prob(&run_circuit(source, &c)?, &DetectionPattern::two_two())
        })
        .collect::<Result<Vec<_>>>()?;
    fit_xy(&phis, &probs, ModelKind::Fringe, None, &FitOptions::default())
}

fn v_terms(r: &FitReport) -> (f64, f64) {
    match r.params {
        ModelParams::Fringe(p) => (p.v4, p.v2),
        _ => unreachable!("fringe fit returns fringe parameters"),
    }
}

/// Scans HWP1 over `theta* +- 3 deg` on a 0.05 degree grid, then refines the
/// best cell by golden-section search on `|V2|`.
pub fn balance_theta1(source: &SchmidtSpec, tolerance: f64) -> Result<Balance> {
    if !(tolerance >= 0.0) {
        return Err(Error::invalid(format!("tolerance must be >= 0, got {tolerance}")));
    }
    let ket = schmidt_two_pairs(source)?.ket;
    let center = theta_star();
    let steps = (2.0 * HALF_RANGE_DEG / GRID_STEP_DEG).round() as usize;
    let grid: Vec<f64> = (0..=steps)
        .map(|i| center + (-HALF_RANGE_DEG + GRID_STEP_DEG * i as f64).to_radians())
        .collect();
    let abs_v2 = grid
        .par_iter()
        .map(|&t| fringe_components(&ket, t).map(|r| v_terms(&r).1.abs()))
        .collect::<Result<Vec<_>>>()?;
    let best = abs_v2
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .expect("grid is non-empty");
    let lo = grid[best.saturating_sub(1)];
    let hi = grid[(best + 1).min(grid.len() - 1)];
    let objective = |t: f64| {
        fringe_components(&ket, t)
            .map(|r| v_terms(&r).1.abs())
            .unwrap_or(f64::INFINITY)
    };
    let (refined, refined_v2) = golden_section_min(objective, lo, hi, REFINE_TOL_RAD, 200);
    let theta1 = if refined_v2 <= abs_v2[best] {
        refined
    } else {
        grid[best]
    };
    let report = fringe_components(&ket, theta1)?;
    let (v4, v2) = v_terms(&report);
    Ok(Balance {
        theta1,
        v2,
        v4,
        balanced: v2.abs() <= tolerance,
        report,
    })
}
