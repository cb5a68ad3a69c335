//! Python bindings for `fourphoton`.
//!
//! Sources are given as an optional list of Schmidt weights (`None` is the
//! ideal single-mode source). Angles are radians, delays µm. Library errors
//! surface as `ValueError`.

use fourphoton::fit::{self, FitOptions, FitReport, ModelKind};
use fourphoton::fock::{self, FockState};
use fourphoton::optics::{self, Circuit, DetectionPattern};
use fourphoton::scan::{self, ScanConfig, ScanRow, ScanTable};
use fourphoton::source::{self, DelayModel, SchmidtSpec, SourceSpec, DEFAULT_COHERENCE_LENGTH_UM};
use fourphoton::C64;
use nalgebra::DMatrix;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn err(e: fourphoton::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn source_spec(lambdas: Option<Vec<f64>>) -> SourceSpec {
    match lambdas {
        None => SourceSpec::Ideal {},
        Some(l) => SourceSpec::Schmidt { lambdas: l },
    }
}

/// One optical element acting on two channels.
#[pyclass(name = "Element", frozen, from_py_object)]
#[derive(Clone)]
struct PyElement(optics::Element);

#[pymethods]
impl PyElement {
    #[staticmethod]
    fn beam_splitter(transmissivity: f64) -> Self {
        PyElement(optics::Element::beam_splitter(transmissivity))
    }

    #[staticmethod]
    fn half_wave_plate(theta: f64) -> Self {
        PyElement(optics::Element::half_wave_plate(theta))
    }

    #[staticmethod]
    fn phase_shifter(phi: f64) -> Self {
        PyElement(optics::Element::phase_shifter(phi))
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.0)
    }
}

/// A photon-number state over (channel, internal mode) pairs.
#[pyclass(name = "Ket", frozen)]
struct PyKet(fock::Ket);

#[pymethods]
impl PyKet {
    /// Basis state with the given per-channel photon counts.
    #[staticmethod]
    fn basis(counts: Vec<u32>) -> Self {
        PyKet(fock::Ket::basis(FockState::from_channel_counts(&counts)))
    }

    /// Two photon pairs, `|2_H, 2_V>` for `None` or a Schmidt state.
    #[staticmethod]
    #[pyo3(signature = (lambdas=None))]
    fn two_pairs(lambdas: Option<Vec<f64>>) -> PyResult<Self> {
        Ok(PyKet(source_spec(lambdas).build().map_err(err)?.ket))
    }

    /// Two pairs with the H photons delayed by `delta_um`.
    #[staticmethod]
    #[pyo3(signature = (delta_um, lambdas=None, coherence_length_um=DEFAULT_COHERENCE_LENGTH_UM))]
    fn delayed_pairs(delta_um: f64, lambdas: Option<Vec<f64>>, coherence_length_um: f64) -> PyResult<Self> {
        let src = source_spec(lambdas).build().map_err(err)?;
        let d = DelayModel::new(delta_um, coherence_length_um).map_err(err)?;
        Ok(PyKet(source::apply_delay(&src, &d).map_err(err)?.ket))
    }

    fn photon_number(&self) -> u32 {
        self.0.photon_number()
    }

    fn norm_sqr(&self) -> f64 {
        self.0.norm_sqr()
    }

    /// Amplitude of the single-internal-mode state with these channel counts.
    fn amplitude(&self, counts: Vec<u32>) -> C64 {
        self.0.amplitude(&FockState::from_channel_counts(&counts))
    }

    /// `[([(channel, internal, count), ...], amplitude), ...]` in canonical order.
    fn terms(&self) -> Vec<(Vec<(usize, usize, u32)>, C64)> {
        self.0
            .terms()
            .map(|(s, a)| {
                let occ = s
                    .occupations()
                    .iter()
                    .map(|(m, n)| (m.external, m.internal, *n))
                    .collect();
                (occ, *a)
            })
            .collect()
    }

    fn run(&self, elements: Vec<PyElement>) -> PyResult<PyKet> {
        let c = Circuit::new(2, elements.into_iter().map(|e| e.0).collect()).map_err(err)?;
        Ok(PyKet(optics::run_circuit(&self.0, &c).map_err(err)?))
    }

    fn detect_prob(&self, counts: Vec<u32>) -> PyResult<f64> {
        optics::detect_prob(&self.0, &DetectionPattern::new(counts)).map_err(err)
    }

    /// `<C^2dag D^2dag D^2 C^2>` for channels 0 and 1.
    fn moment(&self) -> PyResult<f64> {
        optics::normally_ordered_moment(&self.0, (0, 1)).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("Ket(n={}, terms={})", self.0.photon_number(), self.0.len())
    }
}

#[pyfunction]
fn theta_star() -> f64 {
    optics::theta_star()
}

#[pyfunction]
fn hwp_transmissivity(theta: f64) -> f64 {
    optics::hwp_transmissivity(theta)
}

#[pyfunction]
fn e_over_a(lambdas: Vec<f64>) -> PyResult<f64> {
    Ok(source::e_over_a(&SchmidtSpec::new(lambdas).map_err(err)?))
}

/// Permanent of a square complex matrix given as a list of rows.
#[pyfunction]
fn permanent(rows: Vec<Vec<C64>>) -> PyResult<C64> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err("matrix must be square"));
    }
    let m = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
    fock::permanent(&m).map_err(err)
}

/// `<output| U |input>` for channel-count states under a unitary.
#[pyfunction]
fn transition_amplitude(input: Vec<u32>, output: Vec<u32>, unitary: Vec<Vec<C64>>) -> PyResult<C64> {
    let n = unitary.len();
    if unitary.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err("matrix must be square"));
    }
    let u = fock::ModeTransform::new(DMatrix::from_fn(n, n, |i, j| unitary[i][j]), "python").map_err(err)?;
    fock::transition_amplitude(
        &FockState::from_channel_counts(&input),
        &FockState::from_channel_counts(&output),
        &u,
    )
    .map_err(err)
}

fn rows(t: ScanTable) -> Vec<(f64, f64)> {
    t.rows.into_iter().map(|r| (r.x, r.probability)).collect()
}

#[pyfunction]
#[pyo3(signature = (from_um, to_um, steps, lambdas=None, coherence_length_um=DEFAULT_COHERENCE_LENGTH_UM))]
fn hom_dip_scan(from_um: f64, to_um: f64, steps: usize, lambdas: Option<Vec<f64>>, coherence_length_um: f64) -> PyResult<Vec<(f64, f64)>> {
    let mut cfg = ScanConfig::hom_dip(source_spec(lambdas), from_um, to_um, steps);
    cfg.delay.coherence_length_um = coherence_length_um;
    Ok(rows(scan::hom_dip_scan(&cfg).map_err(err)?))
}

#[pyfunction]
#[pyo3(signature = (from_rad, to_rad, steps, lambdas=None))]
fn theta_scan(from_rad: f64, to_rad: f64, steps: usize, lambdas: Option<Vec<f64>>) -> PyResult<Vec<(f64, f64)>> {
    let cfg = ScanConfig::theta(source_spec(lambdas), from_rad, to_rad, steps);
    Ok(rows(scan::theta_scan(&cfg).map_err(err)?))
}

#[pyfunction]
#[pyo3(signature = (theta1, from_rad, to_rad, steps, lambdas=None))]
fn fringe_scan(theta1: f64, from_rad: f64, to_rad: f64, steps: usize, lambdas: Option<Vec<f64>>) -> PyResult<Vec<(f64, f64)>> {
    let cfg = ScanConfig::fringe(source_spec(lambdas), theta1, from_rad, to_rad, steps);
    Ok(rows(scan::fringe_scan(&cfg).map_err(err)?))
}

/// Adds seeded Poisson counts to `(x, probability)` rows.
#[pyfunction]
fn poissonize(rows: Vec<(f64, f64)>, mean_counts_at_max: f64, seed: u64) -> PyResult<Vec<(f64, f64, u64)>> {
    let table = ScanTable::new(
        "python",
        rows.into_iter().map(|(x, p)| ScanRow { x, probability: p, counts: None }).collect(),
    )
    .map_err(err)?;
    let noisy = scan::poissonize(&table, mean_counts_at_max, seed).map_err(err)?;
    Ok(noisy
        .rows
        .into_iter()
        .map(|r| (r.x, r.probability, r.counts.unwrap_or(0)))
        .collect())
}

fn report_dict<'py>(py: Python<'py>, r: &FitReport) -> PyResult<Bound<'py, PyDict>> {
    let params = PyDict::new(py);
    let stderr = PyDict::new(py);
    for ((name, v), se) in r.params.named().into_iter().zip(&r.stderr) {
        params.set_item(name, v)?;
        stderr.set_item(name, se)?;
    }
    let d = PyDict::new(py);
    d.set_item("params", params)?;
    d.set_item("stderr", stderr)?;
    d.set_item("rss", r.rss)?;
    d.set_item("r2", r.r2)?;
    d.set_item("iterations", r.iterations)?;
    d.set_item("converged", r.converged)?;
    Ok(d)
}

/// Fits `model` ("dip", "theta" or "fringe") to `(x, y)`.
#[pyfunction]
#[pyo3(signature = (x, y, model, weighted=false, free_phase=false))]
fn fit_xy<'py>(py: Python<'py>, x: Vec<f64>, y: Vec<f64>, model: &str, weighted: bool, free_phase: bool) -> PyResult<Bound<'py, PyDict>> {
    let kind: ModelKind = model.parse().map_err(err)?;
    let r = fit::fit_xy(&x, &y, kind, None, &FitOptions { weighted, free_phase }).map_err(err)?;
    report_dict(py, &r)
}

#[pyfunction]
#[pyo3(signature = (lambdas=None, tolerance=0.02))]
fn balance_theta1<'py>(py: Python<'py>, lambdas: Option<Vec<f64>>, tolerance: f64) -> PyResult<Bound<'py, PyDict>> {
    let spec = source_spec(lambdas).schmidt_spec().map_err(err)?;
    let b = fit::balance_theta1(&spec, tolerance).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("theta1", b.theta1)?;
    d.set_item("v2", b.v2)?;
    d.set_item("v4", b.v4)?;
    d.set_item("balanced", b.balanced)?;
    d.set_item("fit", report_dict(py, &b.report)?)?;
    Ok(d)
}

/// The built-in check table as `(criterion, name, measured, expected, passed)`.
#[pyfunction]
fn run_checks() -> PyResult<Vec<(u8, String, f64, f64, bool)>> {
    let checks = fourphoton::report::run_checks(&Default::default()).map_err(err)?;
    Ok(checks
        .into_iter()
        .map(|c| {
            let ok = c.passed();
            (c.criterion, c.name, c.measured, c.expected, ok)
        })
        .collect())
}

#[pymodule]
#[pyo3(name = "fourphoton")]
fn fourphoton_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyElement>()?;
    m.add_class::<PyKet>()?;
    m.add_function(wrap_pyfunction!(theta_star, m)?)?;
    m.add_function(wrap_pyfunction!(hwp_transmissivity, m)?)?;
    m.add_function(wrap_pyfunction!(e_over_a, m)?)?;
    m.add_function(wrap_pyfunction!(permanent, m)?)?;
    m.add_function(wrap_pyfunction!(transition_amplitude, m)?)?;
    m.add_function(wrap_pyfunction!(hom_dip_scan, m)?)?;
    m.add_function(wrap_pyfunction!(theta_scan, m)?)?;
    m.add_function(wrap_pyfunction!(fringe_scan, m)?)?;
    m.add_function(wrap_pyfunction!(poissonize, m)?)?;
    m.add_function(wrap_pyfunction!(fit_xy, m)?)?;
    m.add_function(wrap_pyfunction!(balance_theta1, m)?)?;
    m.add_function(wrap_pyfunction!(run_checks, m)?)?;
    Ok(())
}
