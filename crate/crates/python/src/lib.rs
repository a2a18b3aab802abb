//! Python bindings: potentials, coupling tensors, samplers, single-replica
//! simulation and the experiment harness. Arrays cross as plain lists.

use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use kpzlat::fields::{qv_estimate as qv, TestFunction};
use kpzlat::gibbs::{sample_sites as sample, MeasureParams};
use kpzlat::harness::{self, ExperimentConfig, Kind};
use kpzlat::lattice::{dt_max, simulate as run_lattice, SimConfig};
use kpzlat::seed::{seed_stream as stream, Label};
use kpzlat::tensors::CouplingTensors;
use kpzlat::{Error, PotentialKind, PotentialSpec};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Config(_) | Error::InvalidArgument(_) | Error::FrameConditions { .. } => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// A built-in single-site potential.
#[pyclass(name = "Potential", frozen, from_py_object)]
#[derive(Clone)]
struct PyPotential {
    spec: PotentialSpec,
}

impl PyPotential {
    fn build(kind: PotentialKind, gamma_v: f64) -> PyResult<Self> {
        Ok(Self {
            spec: PotentialSpec::builtin(kind, gamma_v).map_err(py_err)?,
        })
    }

    fn density(&self, lam: Option<Vec<f64>>) -> PyResult<Vec<f64>> {
        let lam = lam.unwrap_or_else(|| vec![0.0; self.spec.dim()]);
        if lam.len() != self.spec.dim() {
            return Err(PyValueError::new_err(format!("density needs {} entries", self.spec.dim())));
        }
        Ok(lam)
    }
}

#[pymethods]
impl PyPotential {
    #[staticmethod]
    #[pyo3(signature = (d, gamma_v = 1.0))]
    fn quadratic(d: usize, gamma_v: f64) -> PyResult<Self> {
        Self::build(PotentialKind::Quadratic { d }, gamma_v)
    }

    #[staticmethod]
    #[pyo3(signature = (gamma_v = 1.0))]
    fn toda(gamma_v: f64) -> PyResult<Self> {
        Self::build(PotentialKind::Toda, gamma_v)
    }

    #[staticmethod]
    #[pyo3(signature = (alpha, gamma_v = 1.0))]
    fn fpu_alpha(alpha: f64, gamma_v: f64) -> PyResult<Self> {
        Self::build(PotentialKind::FpuAlpha { alpha }, gamma_v)
    }

    #[staticmethod]
    #[pyo3(signature = (d, c3, c4, gamma_v = 1.0))]
    fn diagonal(d: usize, c3: f64, c4: f64, gamma_v: f64) -> PyResult<Self> {
        Self::build(PotentialKind::Diagonal { d, c3, c4 }, gamma_v)
    }

    #[staticmethod]
    #[pyo3(signature = (p, scale = 1.0, gamma_v = 1.0))]
    fn family(p: f64, scale: f64, gamma_v: f64) -> PyResult<Self> {
        Self::build(PotentialKind::Family { p, scale }, gamma_v)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.spec.dim()
    }

    #[getter]
    fn name(&self) -> String {
        self.spec.name().to_owned()
    }

    fn value(&self, u: Vec<f64>) -> PyResult<f64> {
        if u.len() != self.spec.dim() {
            return Err(PyValueError::new_err("point has the wrong dimension"));
        }
        Ok(self.spec.value(&u))
    }

    fn gradient(&self, u: Vec<f64>) -> PyResult<Vec<f64>> {
        if u.len() != self.spec.dim() {
            return Err(PyValueError::new_err("point has the wrong dimension"));
        }
        let mut out = vec![0.0; u.len()];
        self.spec.gradient(&u, &mut out);
        Ok(out)
    }

    fn __repr__(&self) -> String {
        format!("Potential({})", self.spec.name())
    }
}

/// Child seed for a label path of strings and non-negative integers.
#[pyfunction]
fn seed_stream(root: u64, labels: Vec<Bound<'_, PyAny>>) -> PyResult<u64> {
    let mut path = Vec::with_capacity(labels.len());
    for l in labels {
        if let Ok(s) = l.extract::<String>() {
            path.push(Label::Text(s));
        } else if let Ok(i) = l.extract::<u64>() {
            path.push(Label::Index(i));
        } else {
            return Err(PyValueError::new_err("labels must be strings or non-negative integers"));
        }
    }
    Ok(stream(root, &path))
}

/// `gamma`, `delta`, `Lambda`, `Xi` (row-major flattened), the constraint
/// residual, and `eta`, `eta_prime` when the frame conditions hold.
#[pyfunction]
#[pyo3(signature = (potential, lam = None))]
fn coupling_tensors<'py>(py: Python<'py>, potential: &PyPotential, lam: Option<Vec<f64>>) -> PyResult<Bound<'py, PyDict>> {
    let lam = potential.density(lam)?;
    let t = CouplingTensors::compute(&potential.spec, &lam).map_err(py_err)?;
    let out = PyDict::new(py);
    out.set_item("d", t.dim())?;
    out.set_item("gamma", t.gamma.as_slice().to_vec())?;
    out.set_item("delta", t.delta.as_slice().to_vec())?;
    out.set_item("lambda_mat", t.lambda_mat.as_slice().to_vec())?;
    out.set_item("xi", t.xi.as_slice().to_vec())?;
    out.set_item("constraint_residual", t.constraint_residual)?;
    out.set_item("eta", t.frame.map(|f| f.eta))?;
    out.set_item("eta_prime", t.frame.map(|f| f.eta_prime))?;
    Ok(out)
}

/// `m` draws from the single-site measure, one list per site.
#[pyfunction]
#[pyo3(signature = (potential, beta, m, seed, lam = None))]
fn sample_sites(potential: &PyPotential, beta: f64, m: usize, seed: u64, lam: Option<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
    let lam = potential.density(lam)?;
    let params = MeasureParams::new(&potential.spec, beta, &lam).map_err(py_err)?;
    let batch = sample(&params, m, seed).map_err(py_err)?;
    Ok(batch.iter().map(<[f64]>::to_vec).collect())
}

/// One stationary lattice replica. Returns recording times, site-major states
/// and the conservation drift at each time.
#[pyfunction]
#[pyo3(signature = (potential, n, t_end, record_times, seed, replica = 0, dt = None, beta = None, lam = None))]
#[allow(clippy::too_many_arguments)]
fn simulate<'py>(
    py: Python<'py>,
    potential: &PyPotential,
    n: usize,
    t_end: f64,
    record_times: Vec<f64>,
    seed: u64,
    replica: u64,
    dt: Option<f64>,
    beta: Option<f64>,
    lam: Option<Vec<f64>>,
) -> PyResult<Bound<'py, PyDict>> {
    let mut cfg = SimConfig {
        potential: potential.spec.clone(),
        n,
        beta,
        lambda: potential.density(lam)?,
        t_end,
        dt: 1.0,
        record_times,
        seed,
        replica,
    };
    cfg.dt = match dt {
        Some(h) => h,
        None => dt_max(&cfg.measure().map_err(py_err)?, 1000, kpzlat::seed!(seed, "dt")).map_err(py_err)?,
    };
    let tr = py.detach(|| run_lattice(&cfg)).map_err(py_err)?;
    let out = PyDict::new(py);
    out.set_item("dt", cfg.dt)?;
    out.set_item("times", tr.records.iter().map(|r| r.t).collect::<Vec<_>>())?;
    out.set_item("states", tr.records.iter().map(|r| r.state.clone()).collect::<Vec<_>>())?;
    out.set_item("conservation_drift", tr.records.iter().map(|r| r.conservation_drift).collect::<Vec<_>>())?;
    Ok(out)
}

/// Quadratic variation `<M>_t` of the martingale field for a named test function.
#[pyfunction]
fn qv_estimate(n: usize, test_function: &str, f_n: f64, t: f64) -> PyResult<f64> {
    let phi = TestFunction::from_name(test_function).map_err(py_err)?;
    Ok(qv(n, &phi, f_n, t))
}

/// Runs a harness experiment and returns the output directory and files.
#[pyfunction]
#[pyo3(signature = (kind, config = None, overrides = Vec::new()))]
fn run_experiment<'py>(py: Python<'py>, kind: &str, config: Option<PathBuf>, overrides: Vec<String>) -> PyResult<Bound<'py, PyDict>> {
    let kind: Kind = kind.parse().map_err(py_err)?;
    let cfg = ExperimentConfig::load(config.as_deref(), &overrides)
        .and_then(|c| c.with_kind(kind))
        .map_err(py_err)?;
    let run = py.detach(|| harness::run(&cfg)).map_err(py_err)?;
    let out = PyDict::new(py);
    out.set_item("dir", run.dir)?;
    out.set_item("files", run.files)?;
    out.set_item("manifest", run.manifest)?;
    Ok(out)
}

#[pymodule]
fn kpzlat_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPotential>()?;
    m.add_function(wrap_pyfunction!(seed_stream, m)?)?;
    m.add_function(wrap_pyfunction!(coupling_tensors, m)?)?;
    m.add_function(wrap_pyfunction!(sample_sites, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(qv_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
