//! Dip, theta and fringe models and their least-squares fits.
//!
//! * dip: `B [1 - V exp(-(x - x0)^2 / (2 w^2))]`, x in µm.
//! * theta: `C [(1 - 1.5 s)^2 + (3 s - 1)(1 - s)(1 - E/A) / 2]`,
//!   `s = sin^2(4 theta)`, theta in radians.
//! * fringe: `C [1 + V4 cos 4 phi + V2 cos 2 phi]`, phi in radians.
//!
//! Fits are unweighted by default. With `weighted` each residual is scaled
//! by `1 / sqrt(max(y, 1))`, the Poisson variance estimate.

mod balance;
mod golden;
mod lm;

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::scan::ScanTable;
use crate::{Error, Result};

pub use balance::{balance_theta1, fringe_components, Balance, BALANCE_FRINGE_POINTS};
pub use golden::golden_section_min;
pub use lm::{central_jacobian, forward_jacobian, levenberg_marquardt, LmOutcome};

pub const MAX_ITERATIONS: usize = 500;

const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_3; // 2 sqrt(2 ln 2)

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Dip,
    Theta,
    Fringe,
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dip" => Ok(ModelKind::Dip),
            "theta" => Ok(ModelKind::Theta),
            "fringe" => Ok(ModelKind::Fringe),
            other => Err(Error::invalid(format!(
                "unknown model '{other}' (expected dip, theta or fringe)"
            ))),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Dip => "dip",
            ModelKind::Theta => "theta",
            ModelKind::Fringe => "fringe",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DipParams {
    pub baseline: f64,
    pub visibility: f64,
    pub center: f64,
    pub width: f64,
}

impl DipParams {
    pub fn from_fwhm(baseline: f64, visibility: f64, center: f64, fwhm: f64) -> Self {
        DipParams {
            baseline,
            visibility,
            center,
            width: fwhm / FWHM_PER_SIGMA,
        }
    }

    pub fn fwhm(&self) -> f64 {
        self.width * FWHM_PER_SIGMA
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThetaParams {
    pub scale: f64,
    pub e_over_a: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FringeParams {
    pub scale: f64,
    pub v4: f64,
    pub v2: f64,
    /// Phase origin; zero unless fitted with `free_phase`.
    pub phase: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ModelParams {
    Dip(DipParams),
    Theta(ThetaParams),
    Fringe(FringeParams),
}

impl ModelParams {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelParams::Dip(_) => ModelKind::Dip,
            ModelParams::Theta(_) => ModelKind::Theta,
            ModelParams::Fringe(_) => ModelKind::Fringe,
        }
    }

    /// Parameter names and values in a fixed order.
    pub fn named(&self) -> Vec<(&'static str, f64)> {
        match *self {
            ModelParams::Dip(p) => vec![
                ("baseline", p.baseline),
                ("visibility", p.visibility),
                ("center", p.center),
                ("width", p.width),
            ],
            ModelParams::Theta(p) => vec![("scale", p.scale), ("e_over_a", p.e_over_a)],
            ModelParams::Fringe(p) => vec![
                ("scale", p.scale),
                ("v4", p.v4),
                ("v2", p.v2),
                ("phase", p.phase),
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            ModelParams::Dip(p) => {
                p.baseline > 0.0 && (0.0..=1.0).contains(&p.visibility) && p.width > 0.0
            }
            ModelParams::Theta(p) => p.scale > 0.0 && (0.0..=1.0).contains(&p.e_over_a),
            ModelParams::Fringe(p) => p.scale > 0.0 && p.v4.abs() <= 1.0 && p.v2.abs() <= 1.0,
        };
        if ok && self.named().iter().all(|(_, v)| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::invalid(format!("parameters out of range: {:?}", self)))
        }
    }
}

pub fn dip_value(p: &DipParams, x: f64) -> f64 {
    let z = (x - p.center) / p.width;
    p.baseline * (1.0 - p.visibility * (-0.5 * z * z).exp())
}

pub fn theta_value(p: &ThetaParams, theta: f64) -> f64 {
    let s = (4.0 * theta).sin().powi(2);
    p.scale * ((1.0 - 1.5 * s).powi(2) + (3.0 * s - 1.0) * (1.0 - s) * (1.0 - p.e_over_a) / 2.0)
}

pub fn fringe_value(p: &FringeParams, phi: f64) -> f64 {
    let a = phi - p.phase;
    p.scale * (1.0 + p.v4 * (4.0 * a).cos() + p.v2 * (2.0 * a).cos())
}

pub fn eval_model(params: &ModelParams, x: f64) -> f64 {
    match params {
        ModelParams::Dip(p) => dip_value(p, x),
        ModelParams::Theta(p) => theta_value(p, x),
        ModelParams::Fringe(p) => fringe_value(p, x),
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct FitOptions {
    pub weighted: bool,
    /// Fringe model only: also fit a phase origin.
    pub free_phase: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitReport {
    pub params: ModelParams,
    /// Standard errors in the order of [`ModelParams::named`].
    pub stderr: Vec<f64>,
    pub rss: f64,
    pub r2: f64,
    pub iterations: usize,
    pub converged: bool,
    pub gradient_inf: f64,
}

impl FitReport {
    pub fn param(&self, name: &str) -> Option<f64> {
        self.params
            .named()
            .into_iter()
            .find(|(n, _)| *n == name)
            .map(|(_, v)| v)
    }

    pub fn stderr_of(&self, name: &str) -> Option<f64> {
        self.params
            .named()
            .iter()
            .position(|(n, _)| *n == name)
            .and_then(|i| self.stderr.get(i).copied())
    }
}

fn logistic(u: f64) -> f64 {
    1.0 / (1.0 + (-u).exp())
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Free parameters of each model as seen by the optimizer.
#[derive(Clone, Copy)]
enum Layout {
    Dip,
    Theta,
    Fringe { free_phase: bool },
}

impl Layout {
    fn new(kind: ModelKind, opts: &FitOptions) -> Self {
        match kind {
            ModelKind::Dip => Layout::Dip,
            ModelKind::Theta => Layout::Theta,
            ModelKind::Fringe => Layout::Fringe {
                free_phase: opts.free_phase,
            },
        }
    }

    fn len(self) -> usize {
        match self {
            Layout::Dip => 4,
            Layout::Theta => 2,
            Layout::Fringe { free_phase } => 3 + free_phase as usize,
        }
    }

    /// Optimizer vector to model parameters. E/A goes through a logistic map
    /// so that it stays inside [0, 1].
    fn decode(self, v: &[f64]) -> ModelParams {
        match self {
            Layout::Dip => ModelParams::Dip(DipParams {
                baseline: v[0],
                visibility: v[1],
                center: v[2],
                width: v[3].abs(),
            }),
            Layout::Theta => ModelParams::Theta(ThetaParams {
                scale: v[0],
                e_over_a: logistic(v[1]),
            }),
            Layout::Fringe { free_phase } => ModelParams::Fringe(FringeParams {
                scale: v[0],
                v4: v[1],
                v2: v[2],
                phase: if free_phase { v[3] } else { 0.0 },
            }),
        }
    }

    fn encode(self, p: &ModelParams) -> Vec<f64> {
        match (self, p) {
            (Layout::Dip, ModelParams::Dip(d)) => {
                vec![d.baseline, d.visibility, d.center, d.width]
            }
            (Layout::Theta, ModelParams::Theta(t)) => {
                let ea = t.e_over_a.clamp(1e-9, 1.0 - 1e-9);
                vec![t.scale, logit(ea)]
            }
            (Layout::Fringe { free_phase }, ModelParams::Fringe(f)) => {
                let mut v = vec![f.scale, f.v4, f.v2];
                if free_phase {
                    v.push(f.phase);
                }
                v
            }
            _ => unreachable!("layout and parameters disagree"),
        }
    }

    /// Natural (reported) parameter vector, without the logistic map.
    fn natural(self, p: &ModelParams) -> Vec<f64> {
        let mut v: Vec<f64> = p.named().into_iter().map(|(_, v)| v).collect();
        if let Layout::Fringe { free_phase: false } = self {
            v.truncate(3);
        }
        v
    }

    fn natural_params(self, v: &[f64]) -> ModelParams {
        match self {
            Layout::Theta => ModelParams::Theta(ThetaParams {
                scale: v[0],
                e_over_a: v[1],
            }),
            other => other.decode(v),
        }
    }
}

struct Problem<'a> {
    x: &'a [f64],
    y: &'a [f64],
    sqrt_w: Vec<f64>,
}

impl<'a> Problem<'a> {
    fn new(x: &'a [f64], y: &'a [f64], weighted: bool) -> Self {
        let sqrt_w = y
            .iter()
            .map(|&yi| if weighted { 1.0 / yi.max(1.0).sqrt() } else { 1.0 })
            .collect();
        Problem { x, y, sqrt_w }
    }

    fn residuals(&self, p: &ModelParams) -> Vec<f64> {
        self.x
            .iter()
            .zip(self.y)
            .zip(&self.sqrt_w)
            .map(|((&x, &y), &w)| w * (y - eval_model(p, x)))
            .collect()
    }

    fn r2(&self, rss: f64) -> f64 {
        let wsum: f64 = self.sqrt_w.iter().map(|w| w * w).sum();
        let mean: f64 = self
            .y
            .iter()
            .zip(&self.sqrt_w)
            .map(|(y, w)| w * w * y)
            .sum::<f64>()
            / wsum;
        let tss: f64 = self
            .y
            .iter()
            .zip(&self.sqrt_w)
            .map(|(y, w)| (w * (y - mean)).powi(2))
            .sum();
        1.0 - rss / tss
    }

    /// `sqrt(diag(s^2 (J^T J)^-1))` with `s^2 = RSS / (n - p)`, J taken in
    /// the reported parameters.
    fn standard_errors(&self, layout: Layout, p: &ModelParams, rss: f64) -> Vec<f64> {
        let natural = layout.natural(p);
        let res = |v: &[f64]| self.residuals(&layout.natural_params(v));
        let jac = central_jacobian(&res, &natural, self.x.len());
        let dof = (self.x.len() - natural.len()) as f64;
        let s2 = rss / dof;
        let mut out = match (jac.transpose() * &jac).try_inverse() {
            Some(inv) => (0..natural.len()).map(|i| (s2 * inv[(i, i)]).max(0.0).sqrt()).collect(),
            None => vec![f64::NAN; natural.len()],
        };
        if let Layout::Fringe { free_phase: false } = layout {
            out.push(0.0);
        }
        out
    }
}

fn check_data(x: &[f64], y: &[f64], min_rows: usize) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::invalid(format!(
            "x and y lengths differ ({} vs {})",
            x.len(),
            y.len()
        )));
    }
    if x.len() < min_rows {
        return Err(Error::invalid(format!(
            "need at least {} rows, got {}",
            min_rows,
            x.len()
        )));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::invalid("data contains non-finite values"));
    }
    Ok(())
}

fn is_flat(y: &[f64]) -> bool {
    y.iter().all(|&v| v == y[0])
}

/// Linear least squares for `a + b cos 4 phi + c cos 2 phi`, returned as
/// `(C, V4, V2) = (a, b / a, c / a)`.
fn fringe_linear(x: &[f64], y: &[f64], sqrt_w: &[f64]) -> Result<FringeParams> {
    let n = x.len();
    let design = DMatrix::from_fn(n, 3, |i, j| {
        let basis = match j {
            0 => 1.0,
            1 => (4.0 * x[i]).cos(),
            _ => (2.0 * x[i]).cos(),
        };
        sqrt_w[i] * basis
    });
    let rhs = DVector::from_iterator(n, y.iter().zip(sqrt_w).map(|(y, w)| w * y));
    let svd = design.svd(true, true);
    let coef = svd
        .solve(&rhs, 1e-12)
        .map_err(|e| Error::Numerical(format!("fringe linear solve: {e}")))?;
    let sv = svd.singular_values;
    if sv.min() <= 1e-10 * sv.max() {
        return Err(Error::Numerical(
            "fringe design matrix is rank deficient (phase samples too sparse)".into(),
        ));
    }
    let (a, b, c) = (coef[0], coef[1], coef[2]);
    if a == 0.0 {
        return Err(Error::Numerical("fitted fringe scale is zero".into()));
    }
    Ok(FringeParams {
        scale: a,
        v4: b / a,
        v2: c / a,
        phase: 0.0,
    })
}

/// Starting parameters from simple features of the data.
pub fn init_guess(x: &[f64], y: &[f64], kind: ModelKind) -> Result<ModelParams> {
    check_data(x, y, 4)?;
    if is_flat(y) {
        return Err(Error::FlatData);
    }
    let (imin, &ymin) = y
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty");
    let ymax = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    match kind {
        ModelKind::Dip => {
            let level = 0.5 * (ymax + ymin);
            let crossing = |range: &mut dyn Iterator<Item = usize>| -> Option<f64> {
                let mut prev = imin;
                for i in range {
                    if y[i] >= level {
                        let t = (level - y[prev]) / (y[i] - y[prev]);
                        return Some(x[prev] + t * (x[i] - x[prev]));
                    }
                    prev = i;
                }
                None
            };
            let left = crossing(&mut (0..imin).rev());
            let right = crossing(&mut (imin + 1..x.len()));
            let half = match (left, right) {
                (Some(l), Some(r)) => 0.5 * (r - l),
                (Some(l), None) => x[imin] - l,
                (None, Some(r)) => r - x[imin],
                (None, None) => 0.25 * (x[x.len() - 1] - x[0]).abs(),
            };
            Ok(ModelParams::Dip(DipParams {
                baseline: ymax,
                visibility: 1.0 - ymin / ymax,
                center: x[imin],
                width: (2.0 * half / FWHM_PER_SIGMA).max(f64::MIN_POSITIVE),
            }))
        }
        ModelKind::Theta => {
            // linear in (C, C (1 - E/A)): solve the 2x2 normal equations
            let (mut ff, mut fg, mut gg, mut fy, mut gy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for (&t, &v) in x.iter().zip(y) {
                let s = (4.0 * t).sin().powi(2);
                let f = (1.0 - 1.5 * s).powi(2);
                let g = (3.0 * s - 1.0) * (1.0 - s) / 2.0;
                ff += f * f;
                fg += f * g;
                gg += g * g;
                fy += f * v;
                gy += g * v;
            }
            let det = ff * gg - fg * fg;
            let (scale, e_over_a) = if det.abs() > 1e-12 * ff * gg {
                let a = (fy * gg - gy * fg) / det;
                let b = (ff * gy - fg * fy) / det;
                (a, 1.0 - b / a)
            } else {
                (ymax, 0.5)
            };
            let scale = if scale > 0.0 { scale } else { ymax.max(f64::MIN_POSITIVE) };
            Ok(ModelParams::Theta(ThetaParams {
                scale,
                e_over_a: if e_over_a.is_finite() { e_over_a.clamp(0.0, 1.0) } else { 0.5 },
            }))
        }
        ModelKind::Fringe => {
            let ones = vec![1.0; x.len()];
            Ok(ModelParams::Fringe(fringe_linear(x, y, &ones)?))
        }
    }
}

/// Fits `kind` to `(x, y)`.
///
/// The fringe model without a free phase is linear in `(C, C V4, C V2)` and
/// is solved exactly; the other models run Levenberg-Marquardt from `init`
/// or from [`init_guess`].
pub fn fit_xy(
    x: &[f64],
    y: &[f64],
    kind: ModelKind,
    init: Option<ModelParams>,
    opts: &FitOptions,
) -> Result<FitReport> {
    let layout = Layout::new(kind, opts);
    check_data(x, y, layout.len() + 1)?;
    if is_flat(y) {
        return Err(Error::FlatData);
    }
    if let Some(p) = &init {
        if p.kind() != kind {
            return Err(Error::invalid(format!(
                "initial parameters are for the {} model, fitting {}",
                p.kind(),
                kind
            )));
        }
    }
    let problem = Problem::new(x, y, opts.weighted);

    if let Layout::Fringe { free_phase: false } = layout {
        let params = ModelParams::Fringe(fringe_linear(x, y, &problem.sqrt_w)?);
        let rss: f64 = problem.residuals(&params).iter().map(|r| r * r).sum();
        return Ok(FitReport {
            stderr: problem.standard_errors(layout, &params, rss),
            r2: problem.r2(rss),
            params,
            rss,
            iterations: 1,
            converged: true,
            gradient_inf: 0.0,
        });
    }

    let start = match init {
        Some(p) => p,
        None => init_guess(x, y, kind)?,
    };
    let v0 = layout.encode(&start);
    let outcome = levenberg_marquardt(
        |v: &[f64]| problem.residuals(&layout.decode(v)),
        v0,
        MAX_ITERATIONS,
    );
    let params = layout.decode(&outcome.params);
    Ok(FitReport {
        stderr: problem.standard_errors(layout, &params, outcome.rss),
        r2: problem.r2(outcome.rss),
        params,
        rss: outcome.rss,
        iterations: outcome.iterations,
        converged: outcome.converged,
        gradient_inf: outcome.gradient_inf,
    })
}

/// Fits the counts column of a scan table.
pub fn fit(
    data: &ScanTable,
    kind: ModelKind,
    init: Option<ModelParams>,
    opts: &FitOptions,
) -> Result<FitReport> {
    let y = data
        .counts()
        .ok_or_else(|| Error::invalid("table has no counts column"))?;
    fit_xy(&data.xs(), &y, kind, init, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid(from: f64, to: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| from + (to - from) * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn theta_model_touches_zero_for_perfect_match() {
        // sin^2(4 theta) = 2/3
        let theta = (2.0f64 / 3.0).sqrt().asin() / 4.0;
        let p = ThetaParams { scale: 3.0, e_over_a: 1.0 };
        assert!(theta_value(&p, theta).abs() < 1e-14);
    }

    #[test]
    fn fringe_model_at_zero_phase() {
        let p = FringeParams { scale: 100.0, v4: 0.62, v2: 0.39, phase: 0.0 };
        assert!((fringe_value(&p, 0.0) - 201.0).abs() < 1e-12);
    }

    #[test]
    fn dip_without_visibility_is_flat() {
        let p = DipParams { baseline: 42.0, visibility: 0.0, center: 3.0, width: 10.0 };
        for x in [-100.0, 0.0, 3.0, 55.0] {
            assert_eq!(dip_value(&p, x), 42.0);
        }
    }

    #[test]
    fn fwhm_conversion() {
        let p = DipParams::from_fwhm(1.0, 0.5, 0.0, 196.0);
        assert!((p.fwhm() - 196.0).abs() < 1e-12);
        let half = dip_value(&p, 98.0);
        assert!((half - 0.75).abs() < 1e-12);
    }

    #[test]
    fn flat_data_is_rejected() {
        let x = grid(0.0, 1.0, 10);
        let y = vec![5.0; 10];
        for kind in [ModelKind::Dip, ModelKind::Theta, ModelKind::Fringe] {
            assert!(matches!(init_guess(&x, &y, kind), Err(Error::FlatData)));
            assert!(matches!(fit_xy(&x, &y, kind, None, &FitOptions::default()), Err(Error::FlatData)));
        }
    }

    #[test]
    fn underdetermined_is_rejected() {
        let x = [0.0, 1.0];
        let y = [1.0, 2.0];
        let r = fit_xy(&x, &y, ModelKind::Fringe, None, &FitOptions::default());
        assert!(matches!(r, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn fringe_linear_solution_is_final() {
        let truth = FringeParams { scale: 100.0, v4: 0.62, v2: 0.39, phase: 0.0 };
        let x: Vec<f64> = (0..36).map(|i| 2.0 * PI * i as f64 / 36.0).collect();
        let y: Vec<f64> = x.iter().map(|&p| fringe_value(&truth, p)).collect();
        let guess = init_guess(&x, &y, ModelKind::Fringe).unwrap();
        let report = fit_xy(&x, &y, ModelKind::Fringe, None, &FitOptions::default()).unwrap();
        assert_eq!(guess, report.params);
        assert!(report.rss < 1e-18);
    }

    #[test]
    fn free_phase_recovers_offset() {
        let truth = FringeParams { scale: 50.0, v4: 0.7, v2: 0.2, phase: 0.05 };
        let x: Vec<f64> = (0..72).map(|i| 2.0 * PI * i as f64 / 72.0).collect();
        let y: Vec<f64> = x.iter().map(|&p| fringe_value(&truth, p)).collect();
        let opts = FitOptions { weighted: false, free_phase: true };
        let r = fit_xy(&x, &y, ModelKind::Fringe, None, &opts).unwrap();
        assert!(r.converged);
        let ModelParams::Fringe(p) = r.params else { panic!() };
        assert!((p.phase - 0.05).abs() < 1e-8);
        assert!((p.v4 - 0.7).abs() < 1e-8);
    }

    #[test]
    fn dip_guess_is_close() {
        let truth = DipParams::from_fwhm(1000.0, 0.88, 0.0, 196.0);
        let x = grid(-600.0, 600.0, 61);
        let y: Vec<f64> = x.iter().map(|&d| dip_value(&truth, d)).collect();
        let ModelParams::Dip(g) = init_guess(&x, &y, ModelKind::Dip).unwrap() else { panic!() };
        assert!((g.baseline / truth.baseline - 1.0).abs() < 0.2);
        assert!((g.visibility / truth.visibility - 1.0).abs() < 0.2);
        assert!((g.width / truth.width - 1.0).abs() < 0.2);
    }

    #[test]
    fn weighted_fit_recovers_noiseless_dip() {
        let truth = DipParams::from_fwhm(1000.0, 0.88, 12.0, 196.0);
        let x = grid(-600.0, 600.0, 61);
        let y: Vec<f64> = x.iter().map(|&d| dip_value(&truth, d)).collect();
        let opts = FitOptions { weighted: true, free_phase: false };
        let r = fit_xy(&x, &y, ModelKind::Dip, None, &opts).unwrap();
        assert!(r.converged);
        let ModelParams::Dip(p) = r.params else { panic!() };
        assert!((p.visibility - 0.88).abs() < 1e-9);
        assert!((p.center - 12.0).abs() < 1e-7);
    }

    #[test]
    fn init_kind_mismatch_rejected() {
        let x = grid(0.0, 1.0, 10);
        let y: Vec<f64> = x.iter().map(|v| v * v).collect();
        let init = ModelParams::Theta(ThetaParams { scale: 1.0, e_over_a: 0.5 });
        assert!(fit_xy(&x, &y, ModelKind::Dip, Some(init), &FitOptions::default()).is_err());
    }

    #[test]
    fn model_names_parse() {
        assert_eq!("dip".parse::<ModelKind>().unwrap(), ModelKind::Dip);
        assert!("gauss".parse::<ModelKind>().is_err());
    }
}
