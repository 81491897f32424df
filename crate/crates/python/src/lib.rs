//! Python module `stt_py`: tasks, synthesis, certification, oracle checks,
//! closed-loop simulation and the LP solver.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use stt_core::certify::{self as cert, CertificateReport, LipschitzMethod};
use stt_core::config::TaskDocument;
use stt_core::error::Error;
use stt_core::lp::{Bound as VarBound, Constraint, LinearProgram, LpStatus};
use stt_core::oracle::{check_stt, OracleOptions};
use stt_core::plants::builtin_plant;
use stt_core::sampler::build_net;
use stt_core::sim::{evaluate_tras, simulate as run_sim, SimOptions};
use stt_core::sop::{Budget, SopInstance, Strategy};
use stt_core::tube::BasisSpec;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io(e) => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

/// A task document: geometry plus synthesis, controller and simulation settings.
#[pyclass(name = "Task", frozen)]
struct PyTask {
    doc: TaskDocument,
}

#[pymethods]
impl PyTask {
    /// Path to a task file, or the name of a bundled task.
    #[staticmethod]
    fn load(spec: &str) -> PyResult<Self> {
        TaskDocument::resolve(spec).map(|doc| Self { doc }).map_err(py_err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        TaskDocument::from_json(text).map(|doc| Self { doc }).map_err(py_err)
    }

    fn to_json(&self) -> PyResult<String> {
        self.doc.to_json().map_err(py_err)
    }

    #[getter]
    fn name(&self) -> Option<String> {
        self.doc.name.clone()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.doc.task.dim()
    }

    #[getter]
    fn horizon(&self) -> f64 {
        self.doc.task.horizon
    }

    #[getter]
    fn epsilon(&self) -> f64 {
        self.doc.synthesis.epsilon
    }

    fn __repr__(&self) -> String {
        format!("Task({:?}, dim={}, horizon={})", self.doc.name.as_deref().unwrap_or("?"), self.dim(), self.horizon())
    }
}

/// Polynomial tube: lower and upper curve per output dimension.
#[pyclass(name = "Tube", frozen)]
struct PyTube {
    tube: stt_core::tube::Tube,
}

#[pymethods]
impl PyTube {
    #[new]
    fn new(lower: Vec<Vec<f64>>, upper: Vec<Vec<f64>>, horizon: f64) -> PyResult<Self> {
        stt_core::tube::Tube::from_coeffs(lower, upper, horizon).map(|tube| Self { tube }).map_err(py_err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        stt_core::tube::Tube::from_json(text).map(|tube| Self { tube }).map_err(py_err)
    }

    fn to_json(&self) -> PyResult<String> {
        self.tube.to_json().map_err(py_err)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.tube.dim()
    }

    #[getter]
    fn horizon(&self) -> f64 {
        self.tube.horizon
    }

    #[getter]
    fn lower(&self) -> Vec<Vec<f64>> {
        self.tube.lower.iter().map(|c| c.coeffs.clone()).collect()
    }

    #[getter]
    fn upper(&self) -> Vec<Vec<f64>> {
        self.tube.upper.iter().map(|c| c.coeffs.clone()).collect()
    }

    /// `(lower, upper)` bounds at time `t`.
    fn bounds(&self, t: f64) -> (Vec<f64>, Vec<f64>) {
        let b = self.tube.bounds_at(t);
        (b.lower, b.upper)
    }

    /// Analytic `(L_L, L_U)` over the horizon.
    fn lipschitz(&self) -> (f64, f64) {
        self.tube.analytic_lipschitz()
    }
}

#[pyclass(name = "Synthesis", frozen, get_all)]
struct PySynthesis {
    tube: Py<PyTube>,
    eta_star: f64,
    eta_per_dim: Vec<f64>,
    optimal: bool,
    samples: usize,
    lp_solves: usize,
    epsilon: f64,
}

#[pyclass(name = "Certificate", frozen, get_all)]
struct PyCertificate {
    eta_star: f64,
    l_lower: f64,
    l_upper: f64,
    l: f64,
    epsilon: f64,
    margin: f64,
    passed: bool,
    certificate_pass: bool,
    oracle_violations: usize,
}

impl From<CertificateReport> for PyCertificate {
    fn from(r: CertificateReport) -> Self {
        Self {
            eta_star: r.eta_star,
            l_lower: r.l_lower,
            l_upper: r.l_upper,
            l: r.l,
            epsilon: r.epsilon,
            margin: r.margin,
            passed: r.pass,
            certificate_pass: r.certificate_pass,
            oracle_violations: r.oracle_violations,
        }
    }
}

/// Builds the net, solves the sampled program and returns the tube.
#[pyfunction]
#[pyo3(signature = (task, epsilon=None, degree=None, strategy=None, max_lp_solves=None))]
fn synthesize(
    py: Python<'_>,
    task: &PyTask,
    epsilon: Option<f64>,
    degree: Option<usize>,
    strategy: Option<&str>,
    max_lp_solves: Option<usize>,
) -> PyResult<PySynthesis> {
    let s = &task.doc.synthesis;
    let epsilon = epsilon.unwrap_or(s.epsilon);
    let degree = degree.unwrap_or(s.degree);
    let strategy: Strategy = match strategy {
        Some(name) => name.parse().map_err(py_err)?,
        None => s.strategy,
    };
    let budget = Budget { max_lp_solves: max_lp_solves.unwrap_or(s.max_lp_solves) };
    let t = &task.doc.task;
    let (res, samples) = py
        .detach(|| {
            let net = build_net(t, epsilon)?;
            let inst = SopInstance::assemble(t, &net, BasisSpec::monomial(degree))?;
            inst.synthesize(strategy, budget).map(|r| (r, net.len()))
        })
        .map_err(py_err)?;
    Ok(PySynthesis {
        tube: Py::new(py, PyTube { tube: res.tube })?,
        eta_star: res.eta_star,
        eta_per_dim: res.eta_per_dim,
        optimal: res.optimal,
        samples,
        lp_solves: res.stats.lp_solves,
        epsilon,
    })
}

/// Lipschitz bound, margin check and brute-force oracle.
#[pyfunction]
#[pyo3(signature = (tube, eta_star, task, epsilon, method="analytic", seed=0))]
fn certify(
    py: Python<'_>,
    tube: &PyTube,
    eta_star: f64,
    task: &PyTask,
    epsilon: f64,
    method: &str,
    seed: u64,
) -> PyResult<PyCertificate> {
    let method: LipschitzMethod = method.parse().map_err(py_err)?;
    let t = &task.doc.task;
    let out = py
        .detach(|| cert::certify_pipeline(&tube.tube, eta_star, t, epsilon, method, seed, &OracleOptions::for_task(t)))
        .map_err(py_err)?;
    Ok(out.report.into())
}

/// `eta_star + L * epsilon`.
#[pyfunction]
fn certificate_margin(eta_star: f64, l: f64, epsilon: f64) -> f64 {
    cert::check_certificate(eta_star, l, epsilon).margin
}

#[pyfunction]
fn combine_lipschitz(l_lower: f64, l_upper: f64) -> f64 {
    cert::combine_lipschitz(l_lower, l_upper)
}

/// Violation messages from the dense-grid oracle; empty when the tube is valid.
#[pyfunction]
fn verify(py: Python<'_>, tube: &PyTube, task: &PyTask) -> Vec<String> {
    let t = &task.doc.task;
    let report = py.detach(|| check_stt(&tube.tube, t, &OracleOptions::for_task(t)));
    report.violations.iter().map(|v| format!("{v:?}")).collect()
}

/// Closed-loop runs; returns one `(seed, passed)` pair per seed.
#[pyfunction]
#[pyo3(signature = (tube, task, seeds=None, plant=None, disturbance=None, dt=None))]
fn simulate(
    py: Python<'_>,
    tube: &PyTube,
    task: &PyTask,
    seeds: Option<usize>,
    plant: Option<&str>,
    disturbance: Option<f64>,
    dt: Option<f64>,
) -> PyResult<Vec<(u64, bool)>> {
    let doc = &task.doc;
    let name = plant.map(str::to_string).or_else(|| doc.plant.clone()).ok_or_else(|| PyValueError::new_err("no plant given"))?;
    let plant = builtin_plant(&name).map_err(py_err)?;
    if plant.outputs != doc.task.dim() || tube.tube.dim() != doc.task.dim() {
        return Err(PyValueError::new_err("plant, tube and task dimensions differ"));
    }
    let x0 = plant.rest_state(&doc.initial_output());
    let stack = doc.controller.build(&tube.tube, &plant, &x0).map_err(py_err)?;
    let seeds = seeds.unwrap_or(doc.simulation.seeds) as u64;
    let dt = dt.unwrap_or(doc.simulation.dt);
    let disturbance = disturbance.unwrap_or(doc.simulation.disturbance);
    py.detach(|| {
        (0..seeds)
            .map(|seed| {
                let opts = SimOptions { dt, disturbance, seed, horizon: doc.task.horizon };
                let log = run_sim(&plant, &stack, &x0, &opts)?;
                Ok((seed, evaluate_tras(&log, &doc.task).pass()))
            })
            .collect::<Result<Vec<_>, Error>>()
    })
    .map_err(py_err)
}

/// `min c.x` subject to `a_ub x <= b_ub`, `a_eq x = b_eq` and optional
/// `(lower, upper)` bounds (`None` for unbounded sides). Returns
/// `(status, x, objective)` with status `optimal`, `infeasible` or `unbounded`.
#[pyfunction]
#[pyo3(signature = (c, a_ub=vec![], b_ub=vec![], a_eq=vec![], b_eq=vec![], bounds=None))]
fn solve_lp(
    c: Vec<f64>,
    a_ub: Vec<Vec<f64>>,
    b_ub: Vec<f64>,
    a_eq: Vec<Vec<f64>>,
    b_eq: Vec<f64>,
    bounds: Option<Vec<(Option<f64>, Option<f64>)>>,
) -> PyResult<(String, Vec<f64>, f64)> {
    if a_ub.len() != b_ub.len() || a_eq.len() != b_eq.len() {
        return Err(PyValueError::new_err("row and right-hand side counts differ"));
    }
    let rows = |a: Vec<Vec<f64>>, b: Vec<f64>| a.into_iter().zip(b).map(|(r, v)| Constraint::new(r, v)).collect();
    let lp = LinearProgram {
        objective: c,
        inequalities: rows(a_ub, b_ub),
        equalities: rows(a_eq, b_eq),
        bounds: bounds
            .unwrap_or_default()
            .into_iter()
            .map(|(lo, hi)| VarBound::new(lo.unwrap_or(f64::NEG_INFINITY), hi.unwrap_or(f64::INFINITY)))
            .collect(),
    };
    let sol = lp.solve().map_err(|e| PyValueError::new_err(e.to_string()))?;
    let status = match sol.status {
        LpStatus::Optimal => "optimal",
        LpStatus::Infeasible => "infeasible",
        LpStatus::Unbounded => "unbounded",
    };
    Ok((status.to_string(), sol.x, sol.objective_value))
}

#[pymodule]
fn stt_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTask>()?;
    m.add_class::<PyTube>()?;
    m.add_class::<PySynthesis>()?;
    m.add_class::<PyCertificate>()?;
    m.add_function(wrap_pyfunction!(synthesize, m)?)?;
    m.add_function(wrap_pyfunction!(certify, m)?)?;
    m.add_function(wrap_pyfunction!(certificate_margin, m)?)?;
    m.add_function(wrap_pyfunction!(combine_lipschitz, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(solve_lp, m)?)?;
    Ok(())
}
