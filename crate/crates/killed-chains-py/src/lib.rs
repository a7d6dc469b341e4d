use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use killed_chains::geometry::best_john_alpha;
use killed_chains::io::DomainSpec;
use killed_chains::kernels::{dirichlet_kernel, doob_transform, neumann_kernel};
use killed_chains::quasistationary::{eigenvalue_path_bound, simulate_killed, survival};
use killed_chains::zoo::{closed_form_beta0, generate, FamilySpec};
use killed_chains::{perron_pair, Error, SolverOptions};

create_exception!(killed_chains_py, SolverError, PyException);
create_exception!(killed_chains_py, PeriodicError, PyException);
create_exception!(killed_chains_py, DependencyError, PyException);

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Solver(_) => SolverError::new_err(e.to_string()),
        Error::Periodic { .. } => PeriodicError::new_err(e.to_string()),
        Error::Dependency(_) => DependencyError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// A finite domain of a weighted graph, with its boundary distances.
#[pyclass(name = "Domain", module = "killed_chains_py", frozen)]
struct PyDomain {
    inner: killed_chains::Domain,
    family: Option<FamilySpec>,
}

#[pymethods]
impl PyDomain {
    /// Build a domain from a zoo family, e.g. `Domain.family("cone45", 8)`.
    #[staticmethod]
    #[pyo3(signature = (name, n=8, d=None, l=None))]
    fn family(name: &str, n: usize, d: Option<usize>, l: Option<f64>) -> PyResult<Self> {
        let spec = FamilySpec::from_name(name, n, d, l).map_err(to_py)?;
        let inst = generate(&spec).map_err(to_py)?;
        Ok(PyDomain { inner: inst.domain, family: Some(spec) })
    }

    /// Load a domain-spec JSON file.
    #[staticmethod]
    fn from_spec(path: std::path::PathBuf) -> PyResult<Self> {
        let loaded = DomainSpec::read(&path).and_then(|s| s.build()).map_err(to_py)?;
        Ok(PyDomain { inner: loaded.domain, family: loaded.family })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        let name = self.family.as_ref().map_or("explicit", |f| f.name());
        format!("Domain({name}, states={})", self.inner.len())
    }

    #[getter]
    fn center(&self) -> usize {
        self.inner.center()
    }

    #[getter]
    fn members(&self) -> Vec<usize> {
        self.inner.members().to_vec()
    }

    /// Graph distance from each state to the boundary.
    #[getter]
    fn deltas(&self) -> Vec<u32> {
        self.inner.deltas().to_vec()
    }

    #[getter]
    fn coords(&self) -> Option<Vec<Vec<i64>>> {
        (0..self.inner.len()).map(|i| self.inner.coord(i).map(<[i64]>::to_vec)).collect()
    }

    /// Local index of the state at lattice coordinates `c`.
    fn index_of(&self, c: Vec<i64>) -> Option<usize> {
        self.inner.local_at(&c)
    }

    /// Closed-form Perron value, when the family has one.
    fn closed_form_beta0(&self) -> Option<f64> {
        self.family.as_ref().and_then(closed_form_beta0)
    }

    fn john_alpha(&self, center: Option<usize>) -> PyResult<f64> {
        best_john_alpha(&self.inner, center.unwrap_or(self.inner.center())).map_err(to_py)
    }

    /// `1 / C_w` from the straight-path decomposition.
    #[pyo3(signature = (exponent=None))]
    fn path_bound(&self, exponent: Option<f64>) -> PyResult<f64> {
        Ok(eigenvalue_path_bound(&self.inner, exponent).map_err(to_py)?.lower_bound)
    }

    fn to_json(&self) -> PyResult<String> {
        let spec = match &self.family {
            Some(f) => DomainSpec::generator(f.clone()),
            None => DomainSpec::explicit(&self.inner),
        };
        serde_json::to_string(&spec).map_err(|e| PyValueError::new_err(e.to_string()))
    }
}

#[pyclass(name = "Kernel", module = "killed_chains_py", frozen)]
struct PyKernel {
    inner: killed_chains::KernelMatrix,
}

#[pymethods]
impl PyKernel {
    /// The killed kernel of `domain`.
    #[staticmethod]
    fn dirichlet(domain: &PyDomain) -> PyResult<Self> {
        Ok(PyKernel { inner: dirichlet_kernel(&domain.inner).map_err(to_py)? })
    }

    /// The reflected kernel of `domain`.
    #[staticmethod]
    fn neumann(domain: &PyDomain) -> PyResult<Self> {
        Ok(PyKernel { inner: neumann_kernel(&domain.inner).map_err(to_py)? })
    }

    #[pyo3(signature = (holding=0.5))]
    fn lazy(&self, holding: f64) -> PyResult<Self> {
        Ok(PyKernel { inner: self.inner.lazy(holding).map_err(to_py)? })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Kernel({:?}, states={}, nnz={})", self.inner.kind(), self.inner.len(), self.inner.nnz())
    }

    #[getter]
    fn measure(&self) -> Vec<f64> {
        self.inner.measure().to_vec()
    }

    #[getter]
    fn period(&self) -> usize {
        self.inner.period()
    }

    fn row_sums(&self) -> Vec<f64> {
        (0..self.inner.len()).map(|i| self.inner.row_sum(i)).collect()
    }

    fn to_dense(&self) -> Vec<Vec<f64>> {
        self.inner.to_dense()
    }

    /// `K f`.
    fn apply(&self, f: Vec<f64>) -> PyResult<Vec<f64>> {
        self.check_len(f.len())?;
        Ok(self.inner.apply(&f))
    }

    /// `nu K`.
    fn apply_left(&self, nu: Vec<f64>) -> PyResult<Vec<f64>> {
        self.check_len(nu.len())?;
        Ok(self.inner.apply_left(&nu))
    }

    /// Solve for the Perron pair.
    #[pyo3(signature = (dense_threshold=None, tol=None))]
    fn perron_pair(&self, dense_threshold: Option<usize>, tol: Option<f64>) -> PyResult<PySpectralPair> {
        let mut opts = SolverOptions::default();
        if let Some(d) = dense_threshold {
            opts.dense_threshold = d;
        }
        if let Some(t) = tol {
            opts.tol = t;
        }
        Ok(PySpectralPair { inner: perron_pair(&self.inner, &opts).map_err(to_py)? })
    }

    /// The Doob transform `K_phi` built from `pair`.
    fn doob(&self, pair: &PySpectralPair) -> PyResult<Self> {
        Ok(PyKernel { inner: doob_transform(&self.inner, &pair.inner).map_err(to_py)? })
    }

    /// `[P_x(tau > s) for s in 0..=t]`.
    fn survival(&self, x: usize, t: usize) -> PyResult<Vec<f64>> {
        Ok(survival(&self.inner, x, t).map_err(to_py)?.values)
    }

    #[pyo3(signature = (x, t, trials=100_000, seed=0))]
    fn simulate<'py>(&self, py: Python<'py>, x: usize, t: usize, trials: u64, seed: u64) -> PyResult<Bound<'py, PyDict>> {
        let r = py.detach(|| simulate_killed(&self.inner, x, t, trials, seed)).map_err(to_py)?;
        let d = PyDict::new(py);
        d.set_item("survivors", r.survivors)?;
        d.set_item("survival", r.survival)?;
        d.set_item("std_error", r.std_error)?;
        d.set_item("occupancy", r.occupancy)?;
        Ok(d)
    }
}

impl PyKernel {
    fn check_len(&self, n: usize) -> PyResult<()> {
        if n == self.inner.len() {
            Ok(())
        } else {
            Err(PyValueError::new_err(format!("expected {} entries, got {n}", self.inner.len())))
        }
    }
}

#[pyclass(name = "SpectralPair", module = "killed_chains_py", frozen)]
struct PySpectralPair {
    inner: killed_chains::SpectralPair,
}

#[pymethods]
impl PySpectralPair {
    #[getter]
    fn beta0(&self) -> f64 {
        self.inner.beta0
    }

    #[getter]
    fn beta1(&self) -> Option<f64> {
        self.inner.beta1
    }

    #[getter]
    fn beta_min(&self) -> f64 {
        self.inner.beta_min
    }

    #[getter]
    fn phi0(&self) -> Vec<f64> {
        self.inner.phi0.clone()
    }

    #[getter]
    fn pi_phi0(&self) -> Vec<f64> {
        self.inner.pi_phi0.clone()
    }

    #[getter]
    fn period(&self) -> usize {
        self.inner.period
    }

    #[getter]
    fn residual(&self) -> f64 {
        self.inner.residual
    }

    fn second_ratio(&self) -> f64 {
        self.inner.second_ratio()
    }

    fn __repr__(&self) -> String {
        format!("SpectralPair(beta0={}, states={})", self.inner.beta0, self.inner.phi0.len())
    }
}

#[pymodule]
fn killed_chains_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDomain>()?;
    m.add_class::<PyKernel>()?;
    m.add_class::<PySpectralPair>()?;
    m.add("SolverError", m.py().get_type::<SolverError>())?;
    m.add("PeriodicError", m.py().get_type::<PeriodicError>())?;
    m.add("DependencyError", m.py().get_type::<DependencyError>())?;
    Ok(())
}
