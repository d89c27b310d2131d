//! Python bindings for `betaedge`.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use betaedge::ensemble::{sample_quadratic_de, ModelSpec};
use betaedge::lab::{run_experiment, ExperimentConfig};
use betaedge::local_equilibrium::{scaling_constants, solve_local_minimizer};
use betaedge::minimizer::minimize_h;
use betaedge::rng::stream_rng;
use betaedge::sao::{sample_tw_beta, SaoConfig};
use betaedge::{SpectralMeasure, TridiagonalSym};

fn err(e: betaedge::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Polynomial potential `V(s) = Σ c_k s^k`, coefficients in ascending order.
#[pyclass(name = "Potential", frozen)]
#[derive(Clone)]
struct PyPotential(betaedge::Potential);

#[pymethods]
impl PyPotential {
    #[new]
    fn new(coeffs: Vec<f64>) -> PyResult<Self> {
        betaedge::Potential::new(coeffs).map(PyPotential).map_err(err)
    }

    /// `V(s) = s²/4`.
    #[staticmethod]
    fn hermite() -> Self {
        PyPotential(betaedge::Potential::hermite())
    }

    #[getter]
    fn coeffs(&self) -> Vec<f64> {
        self.0.coeffs().to_vec()
    }

    #[getter]
    fn degree(&self) -> usize {
        self.0.degree()
    }

    fn __call__(&self, s: f64) -> f64 {
        self.0.eval(s)
    }

    fn is_uniformly_convex(&self) -> bool {
        self.0.is_uniformly_convex()
    }

    /// Average of `V(a + 2b cos θ)` over the circle.
    fn w_value(&self, a: f64, b: f64) -> f64 {
        self.0.w_value(a, b)
    }

    /// `W` and its partial derivatives up to second order.
    fn w_partials<'py>(&self, py: Python<'py>, a: f64, b: f64) -> PyResult<Bound<'py, PyDict>> {
        let d = self.0.w_partials(a, b);
        let out = PyDict::new(py);
        for (k, v) in [("w", d.w), ("w1", d.w1), ("w2", d.w2), ("w11", d.w11), ("w12", d.w12), ("w22", d.w22)] {
            out.set_item(k, v)?;
        }
        Ok(out)
    }

    fn __repr__(&self) -> String {
        format!("Potential({:?})", self.0.coeffs())
    }
}

/// Symmetric tridiagonal matrix.
#[pyclass(name = "Tridiagonal", frozen)]
#[derive(Clone)]
struct PyTridiagonal(TridiagonalSym);

#[pymethods]
impl PyTridiagonal {
    #[new]
    fn new(diag: Vec<f64>, offdiag: Vec<f64>) -> PyResult<Self> {
        TridiagonalSym::new(diag, offdiag).map(PyTridiagonal).map_err(err)
    }

    /// Jacobi matrix with the given spectral measure at `e_1`.
    #[staticmethod]
    fn from_measure(lambdas: Vec<f64>, weights: Vec<f64>) -> PyResult<Self> {
        let mu = SpectralMeasure::new(lambdas, weights).map_err(err)?;
        TridiagonalSym::jacobi_from_measure(&mu).map(PyTridiagonal).map_err(err)
    }

    #[getter]
    fn diag(&self) -> Vec<f64> {
        self.0.diag().to_vec()
    }

    #[getter]
    fn offdiag(&self) -> Vec<f64> {
        self.0.offdiag().to_vec()
    }

    fn __len__(&self) -> usize {
        self.0.n()
    }

    /// Ascending.
    fn eigenvalues(&self) -> Vec<f64> {
        self.0.eigenvalues()
    }

    fn eigen_max(&self) -> f64 {
        self.0.eigen_max()
    }

    /// `(lambdas, weights)` of the spectral measure at `e_1`.
    fn spectral_measure(&self) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let mu = self.0.spectral_measure().map_err(err)?;
        Ok((mu.lambdas().to_vec(), mu.weights().to_vec()))
    }

    fn __repr__(&self) -> String {
        format!("Tridiagonal(n={})", self.0.n())
    }
}

/// Tridiagonal β-ensemble of size `n` in the external potential `V`.
#[pyclass(name = "Model", frozen)]
struct PyModel(ModelSpec);

#[pymethods]
impl PyModel {
    #[new]
    fn new(potential: &PyPotential, beta: f64, n: usize) -> PyResult<Self> {
        ModelSpec::new(potential.0.clone(), beta, n).map(PyModel).map_err(err)
    }

    fn log_density(&self, t: &PyTridiagonal) -> PyResult<f64> {
        self.0.log_density(&t.0).map(|d| d.value).map_err(err)
    }

    /// Gradients with respect to the diagonal and off-diagonal entries.
    fn grad_log_density(&self, t: &PyTridiagonal) -> PyResult<(Vec<f64>, Vec<f64>)> {
        self.0.grad_log_density(&t.0).map_err(err)
    }

    /// Exact sample for quadratic potentials.
    fn sample(&self, seed: u64, stream: u64) -> PyResult<PyTridiagonal> {
        let mut rng = stream_rng(seed, stream);
        sample_quadratic_de(&self.0.v, self.0.n, self.0.beta, &mut rng)
            .map(PyTridiagonal)
            .map_err(err)
    }
}

/// `(a, b)` of the local equilibrium at bulk position `x`.
#[pyfunction]
fn local_minimizer(potential: &PyPotential, x: f64) -> PyResult<(f64, f64)> {
    let m = solve_local_minimizer(&potential.0, x).map_err(err)?;
    Ok((m.a, m.b))
}

/// Edge, `τ`, `γ`, `ϑ` and the equilibrium entries at the edge.
#[pyfunction]
fn edge_constants<'py>(py: Python<'py>, potential: &PyPotential) -> PyResult<Bound<'py, PyDict>> {
    let c = scaling_constants(&potential.0).map_err(err)?;
    let out = PyDict::new(py);
    for (k, v) in [
        ("a0", c.a0),
        ("b0", c.b0),
        ("edge", c.edge),
        ("tau", c.tau),
        ("gamma", c.gamma),
        ("vartheta", c.vartheta),
    ] {
        out.set_item(k, v)?;
    }
    Ok(out)
}

/// Minimizer of the `n`-dimensional Hamiltonian (`beta=inf` gives the
/// Fekete problem).
#[pyfunction]
#[pyo3(signature = (potential, n, beta=f64::INFINITY))]
fn minimizer(potential: &PyPotential, n: usize, beta: f64) -> PyResult<PyTridiagonal> {
    minimize_h(&potential.0, n, beta).map(|s| PyTridiagonal(s.t)).map_err(err)
}

/// Samples of `-Λ₀` of the discretized stochastic Airy operator.
#[pyfunction]
#[pyo3(signature = (beta, count, seed, h=0.05, length=12.0))]
fn sao_samples(py: Python<'_>, beta: f64, count: usize, seed: u64, h: f64, length: f64) -> PyResult<Vec<f64>> {
    let cfg = SaoConfig {
        beta,
        k: 0,
        h,
        length,
        seed,
        num_eigs: 1,
    };
    py.allow_threads(|| sample_tw_beta(&cfg, count)).map(|b| b.values).map_err(err)
}

/// Run an experiment given as TOML text; returns the summary as JSON.
#[pyfunction]
fn run_config(py: Python<'_>, text: &str) -> PyResult<String> {
    let exp = ExperimentConfig::parse(text).and_then(|c| c.validate()).map_err(err)?;
    let report = py.allow_threads(|| run_experiment(&exp)).map_err(err)?;
    serde_json::to_string(&report).map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pymodule]
fn betaedge_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPotential>()?;
    m.add_class::<PyTridiagonal>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(local_minimizer, m)?)?;
    m.add_function(wrap_pyfunction!(edge_constants, m)?)?;
    m.add_function(wrap_pyfunction!(minimizer, m)?)?;
    m.add_function(wrap_pyfunction!(sao_samples, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    Ok(())
}
