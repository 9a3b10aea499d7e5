//! Python bindings: the main state/plan types plus the closed-form curves
//! and the simulate/reconstruct pipeline.

use misalign_core::misalignment::{
    self, ghz_plan, pauli_triad, standard_pauli_plan, GhzParity,
};
use misalign_core::quantum::{self, BlochVector, CVector, PureState};
use misalign_core::tomography::{self, MleOptions};
use misalign_core::witness;
use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Density matrix of one or more qubits.
#[pyclass(name = "DensityMatrix", skip_from_py_object)]
#[derive(Clone)]
struct PyDensityMatrix {
    inner: quantum::DensityMatrix,
}

#[pymethods]
impl PyDensityMatrix {
    /// Single-qubit state from Bloch coordinates.
    #[staticmethod]
    fn from_bloch(x: f64, y: f64, z: f64) -> PyResult<Self> {
        Ok(Self { inner: quantum::state_from_bloch(&BlochVector::new(x, y, z)).map_err(err)? })
    }

    #[staticmethod]
    fn maximally_mixed(n_qubits: usize) -> Self {
        Self { inner: quantum::DensityMatrix::maximally_mixed(n_qubits) }
    }

    /// Pure-state projector from an amplitude vector.
    #[staticmethod]
    fn from_amplitudes(amplitudes: Vec<Complex64>) -> PyResult<Self> {
        let psi = PureState::normalized(CVector::from_vec(amplitudes)).map_err(err)?;
        Ok(Self { inner: psi.to_density() })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn n_qubits(&self) -> usize {
        self.inner.n_qubits()
    }

    fn purity(&self) -> f64 {
        self.inner.purity()
    }

    /// Matrix entries as a nested list of complex numbers.
    fn entries(&self) -> Vec<Vec<Complex64>> {
        let d = self.inner.dim();
        (0..d).map(|i| (0..d).map(|j| self.inner.matrix()[(i, j)]).collect()).collect()
    }

    /// Bloch vector (single qubit only).
    fn bloch(&self) -> PyResult<(f64, f64, f64)> {
        let v = quantum::bloch_from_state(&self.inner).map_err(err)?;
        Ok((v.x, v.y, v.z))
    }

    fn tensor(&self, other: &PyDensityMatrix) -> Self {
        Self { inner: self.inner.tensor(&other.inner) }
    }

    /// Reduced state on the given parties (0-based, party 0 leftmost).
    fn partial_trace(&self, keep: Vec<usize>) -> PyResult<Self> {
        Ok(Self { inner: self.inner.partial_trace(&keep).map_err(err)? })
    }

    fn trace_distance(&self, other: &PyDensityMatrix) -> f64 {
        self.inner.trace_distance_to(&other.inner)
    }

    fn __repr__(&self) -> String {
        format!("DensityMatrix(dim={})", self.inner.dim())
    }
}

/// Intended and actual measurement directions.
#[pyclass(name = "MeasurementPlan", skip_from_py_object)]
#[derive(Clone)]
struct PyMeasurementPlan {
    inner: misalignment::MeasurementPlan,
}

#[pymethods]
impl PyMeasurementPlan {
    /// Ideal Pauli x/y/z plan on every party.
    #[staticmethod]
    fn standard_pauli(n_parties: usize) -> Self {
        Self { inner: standard_pauli_plan(n_parties) }
    }

    /// Pauli plan whose actual axes are opened away from the diagonal.
    #[staticmethod]
    fn open_triad(n_parties: usize, eps: f64) -> PyResult<Self> {
        let actual = vec![misalignment::tomography_open_triad(eps).to_vec(); n_parties];
        Ok(Self {
            inner: misalignment::MeasurementPlan::new_local(vec![pauli_triad(); n_parties], actual)
                .map_err(err)?,
        })
    }

    /// Pauli plan whose actual axes are closed towards the diagonal.
    #[staticmethod]
    fn closed_triad(n_parties: usize, eps: f64) -> PyResult<Self> {
        let actual = vec![misalignment::witness_closed_triad(eps).to_vec(); n_parties];
        Ok(Self {
            inner: misalignment::MeasurementPlan::new_local(vec![pauli_triad(); n_parties], actual)
                .map_err(err)?,
        })
    }

    /// GHZ-witness plan with the paired ("even") or alternating ("odd")
    /// in-plane deviation.
    #[staticmethod]
    fn ghz(n: usize, eps: f64, parity: &str) -> PyResult<Self> {
        let parity = match parity {
            "even" => GhzParity::Even,
            "odd" => GhzParity::Odd,
            other => return Err(PyValueError::new_err(format!("unknown parity {other:?}"))),
        };
        Ok(Self { inner: ghz_plan(n, eps, parity).map_err(err)? })
    }

    #[getter]
    fn n_parties(&self) -> usize {
        self.inner.n_parties()
    }

    fn max_angular_deviation(&self) -> f64 {
        self.inner.max_angular_deviation()
    }

    fn to_json(&self) -> String {
        self.inner.to_json().to_string()
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(err)?;
        Ok(Self { inner: misalignment::MeasurementPlan::from_json(&value).map_err(err)? })
    }

    fn __repr__(&self) -> String {
        format!(
            "MeasurementPlan(n_parties={}, max_deviation={:.6})",
            self.inner.n_parties(),
            self.inner.max_angular_deviation()
        )
    }
}

/// Conditional outcome probabilities from a simulated experiment.
#[pyclass(name = "OutcomeStatistics", skip_from_py_object)]
#[derive(Clone)]
struct PyOutcomeStatistics {
    inner: tomography::OutcomeStatistics,
}

#[pymethods]
impl PyOutcomeStatistics {
    fn probability(&self, setting: Vec<usize>, outcome: usize) -> f64 {
        self.inner.probability(&setting, outcome)
    }

    fn to_json(&self) -> String {
        self.inner.to_json().to_string()
    }
}

/// Result of a state reconstruction.
#[pyclass(name = "Reconstruction")]
struct PyReconstruction {
    #[pyo3(get)]
    method: String,
    #[pyo3(get)]
    converged: bool,
    #[pyo3(get)]
    iterations: usize,
    #[pyo3(get)]
    final_residual: f64,
    #[pyo3(get)]
    linear_inversion_physical: bool,
    rho: quantum::DensityMatrix,
}

#[pymethods]
impl PyReconstruction {
    fn state(&self) -> PyDensityMatrix {
        PyDensityMatrix { inner: self.rho.clone() }
    }
}

#[pyfunction]
fn simulate_statistics(
    tau: &PyDensityMatrix,
    plan: &PyMeasurementPlan,
) -> PyResult<PyOutcomeStatistics> {
    Ok(PyOutcomeStatistics {
        inner: tomography::simulate_statistics(&tau.inner, &plan.inner).map_err(err)?,
    })
}

/// Linear inversion when physical, maximum likelihood otherwise.
#[pyfunction]
#[pyo3(signature = (stats, intended, mle_tol = 1e-9))]
fn reconstruct(
    stats: &PyOutcomeStatistics,
    intended: &PyMeasurementPlan,
    mle_tol: f64,
) -> PyResult<PyReconstruction> {
    let opts = MleOptions { tol: mle_tol, ..Default::default() };
    let rec = tomography::reconstruct(&stats.inner, &intended.inner, &opts).map_err(err)?;
    Ok(PyReconstruction {
        method: match rec.method {
            tomography::ReconstructionMethod::LinearInversion => "linear-inversion".into(),
            tomography::ReconstructionMethod::Mle => "mle".into(),
        },
        converged: rec.converged,
        iterations: rec.iterations,
        final_residual: rec.final_residual,
        linear_inversion_physical: rec.linear_inversion_physical,
        rho: rec.rho,
    })
}

#[pyfunction]
fn fidelity(a: &PyDensityMatrix, b: &PyDensityMatrix) -> PyResult<f64> {
    quantum::fidelity(&a.inner, &b.inner).map_err(err)
}

#[pyfunction]
fn concurrence(amplitudes: Vec<Complex64>) -> PyResult<f64> {
    let psi = PureState::normalized(CVector::from_vec(amplitudes)).map_err(err)?;
    quantum::concurrence(&psi).map_err(err)
}

#[pyfunction]
fn worst_case_fidelity_single(eps: f64) -> f64 {
    tomography::worst_case_fidelity_single(eps)
}

#[pyfunction]
fn worst_case_fidelity_product(n: usize, eps: f64) -> f64 {
    tomography::worst_case_fidelity_product(n, eps)
}

#[pyfunction]
fn lambda_ball_radius(eps: f64) -> f64 {
    tomography::lambda_ball_radius(eps)
}

#[pyfunction]
fn singlet_correction(eps: f64) -> f64 {
    witness::singlet_correction_closed_form(eps)
}

#[pyfunction]
fn ghz_correction(n: usize, eps: f64) -> PyResult<f64> {
    witness::ghz_correction_closed_form(n, eps).map_err(err)
}

/// Full single-qubit worst-case pipeline at deviation `eps`: simulate the
/// diagonal eigenstate under the opened triad, invert, and return
/// `(pipeline fidelity, closed form)`.
#[pyfunction]
fn single_qubit_pipeline(eps: f64) -> PyResult<(f64, f64)> {
    let r = 1.0 / 3f64.sqrt();
    let s = BlochVector::new(r, r, r);
    let tau = PureState::bloch_eigenstate(&s, true).to_density();
    let plan = misalignment::MeasurementPlan::new_local(
        vec![pauli_triad()],
        vec![misalignment::tomography_open_triad(eps).to_vec()],
    )
    .map_err(err)?;
    let stats = tomography::simulate_statistics(&tau, &plan).map_err(err)?;
    let rec = tomography::linear_inversion(&stats, &standard_pauli_plan(1)).map_err(err)?;
    let f = quantum::fidelity(&tau, &rec.rho).map_err(err)?;
    Ok((f, tomography::worst_case_fidelity_single(eps)))
}

#[pymodule]
fn misalign_tomo_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDensityMatrix>()?;
    m.add_class::<PyMeasurementPlan>()?;
    m.add_class::<PyOutcomeStatistics>()?;
    m.add_class::<PyReconstruction>()?;
    m.add_function(wrap_pyfunction!(simulate_statistics, m)?)?;
    m.add_function(wrap_pyfunction!(reconstruct, m)?)?;
    m.add_function(wrap_pyfunction!(fidelity, m)?)?;
    m.add_function(wrap_pyfunction!(concurrence, m)?)?;
    m.add_function(wrap_pyfunction!(worst_case_fidelity_single, m)?)?;
    m.add_function(wrap_pyfunction!(worst_case_fidelity_product, m)?)?;
    m.add_function(wrap_pyfunction!(lambda_ball_radius, m)?)?;
    m.add_function(wrap_pyfunction!(singlet_correction, m)?)?;
    m.add_function(wrap_pyfunction!(ghz_correction, m)?)?;
    m.add_function(wrap_pyfunction!(single_qubit_pipeline, m)?)?;
    Ok(())
}
