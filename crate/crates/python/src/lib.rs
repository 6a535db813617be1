//! Python bindings. Node indices are 0-based; densities and phases are plain lists.

use graph_nls::dynamics::rhs as flow_rhs;
use graph_nls::energy::{fisher_gradient as core_fisher_gradient, fisher_information as core_fisher_information};
use graph_nls::stability::{gpe_spectrum_closed_form, hamiltonian_matrix};
use graph_nls::{
    hamiltonian as core_hamiltonian, Density, GroundStateOptions, IntegratorConfig, Interaction, Method,
    PotentialSpec, SpectrumReport, SystemState, Thresholds, WeightMode,
};
use nalgebra::DMatrix;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: graph_nls::Error) -> PyErr {
    use graph_nls::Error as E;
    match e {
        E::NewtonDivergence { .. } | E::StepLeftSimplex(_) | E::MaxIterations { .. } | E::Eigen(_) => {
            PyRuntimeError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// Connected weighted graph.
#[pyclass(name = "Graph", module = "graph_nls", frozen)]
struct PyGraph(graph_nls::Graph);

#[pymethods]
impl PyGraph {
    /// `edges` holds `(a, b, weight)` triples.
    #[new]
    fn new(n: usize, edges: Vec<(usize, usize, f64)>) -> PyResult<Self> {
        graph_nls::Graph::new(n, edges).map(PyGraph).map_err(to_py)
    }

    #[staticmethod]
    fn path(n: usize) -> PyResult<Self> {
        graph_nls::Graph::path(n).map(PyGraph).map_err(to_py)
    }

    #[staticmethod]
    fn cycle(n: usize) -> PyResult<Self> {
        graph_nls::Graph::cycle(n).map(PyGraph).map_err(to_py)
    }

    #[staticmethod]
    fn complete(n: usize) -> PyResult<Self> {
        graph_nls::Graph::complete(n).map(PyGraph).map_err(to_py)
    }

    /// Equally spaced nodes on `[x_min, x_max]` with weight `1/dx^2`.
    #[staticmethod]
    fn lattice(n: usize, x_min: f64, x_max: f64) -> PyResult<Self> {
        graph_nls::Graph::path_lattice(n, x_min, x_max, WeightMode::Continuum)
            .map(PyGraph)
            .map_err(to_py)
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.n()
    }

    #[getter]
    fn edges(&self) -> Vec<(usize, usize, f64)> {
        self.0.edges().iter().map(|e| (e.a, e.b, e.weight)).collect()
    }

    fn laplacian(&self) -> Vec<Vec<f64>> {
        rows(&self.0.laplacian())
    }

    fn __repr__(&self) -> String {
        format!("Graph(n={}, edges={})", self.0.n(), self.0.num_edges())
    }
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// External potential `v`, interaction matrix `w` and Planck constant `h`.
#[pyclass(name = "Potentials", module = "graph_nls", frozen)]
struct PyPotentials(PotentialSpec);

#[pymethods]
impl PyPotentials {
    #[new]
    #[pyo3(signature = (v, w = None, h = 1.0))]
    fn new(v: Vec<f64>, w: Option<Vec<Vec<f64>>>, h: f64) -> PyResult<Self> {
        let n = v.len();
        let interaction = match w {
            None => Interaction::Zero,
            Some(rows) => {
                if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                    return Err(PyValueError::new_err(format!("w must be {n} x {n}")));
                }
                Interaction::Dense(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
            }
        };
        PotentialSpec::new(v, interaction, h).map(PyPotentials).map_err(to_py)
    }

    /// `v = 0`, `w = alpha I`.
    #[staticmethod]
    #[pyo3(signature = (n, alpha, h = 1.0))]
    fn gpe(n: usize, alpha: f64, h: f64) -> PyResult<Self> {
        PotentialSpec::new(vec![0.0; n], Interaction::Diagonal(alpha), h)
            .map(PyPotentials)
            .map_err(to_py)
    }

    #[getter]
    fn v(&self) -> Vec<f64> {
        self.0.v.clone()
    }

    #[getter]
    fn h(&self) -> f64 {
        self.0.h
    }

    fn __repr__(&self) -> String {
        format!("Potentials(n={}, h={})", self.0.v.len(), self.0.h)
    }
}

#[pyfunction]
fn fisher_information(graph: &PyGraph, rho: Vec<f64>) -> PyResult<f64> {
    core_fisher_information(&graph.0, &rho).map_err(to_py)
}

#[pyfunction]
fn fisher_gradient(graph: &PyGraph, rho: Vec<f64>) -> PyResult<Vec<f64>> {
    core_fisher_gradient(&graph.0, &rho).map_err(to_py)
}

#[pyfunction]
fn hamiltonian(graph: &PyGraph, potentials: &PyPotentials, rho: Vec<f64>, s: Vec<f64>) -> PyResult<f64> {
    core_hamiltonian(&graph.0, &potentials.0, &rho, &s).map_err(to_py)
}

/// Time derivatives `(drho/dt, dS/dt)`.
#[pyfunction]
fn rhs(graph: &PyGraph, potentials: &PyPotentials, rho: Vec<f64>, s: Vec<f64>) -> PyResult<(Vec<f64>, Vec<f64>)> {
    flow_rhs(&graph.0, &potentials.0, &rho, &s).map_err(to_py)
}

/// Integrates the flow and returns the recorded snapshots as a dict of lists.
#[pyfunction]
#[pyo3(signature = (graph, potentials, rho, s, dt = 1e-3, t_final = 10.0, method = "implicit_midpoint", output_every = 100))]
#[allow(clippy::too_many_arguments)]
fn simulate<'py>(
    py: Python<'py>,
    graph: &PyGraph,
    potentials: &PyPotentials,
    rho: Vec<f64>,
    s: Vec<f64>,
    dt: f64,
    t_final: f64,
    method: &str,
    output_every: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let method = match method {
        "implicit_midpoint" => Method::ImplicitMidpoint,
        "rk4" => Method::Rk4,
        other => return Err(PyValueError::new_err(format!("unknown method {other:?}"))),
    };
    let mut cfg = IntegratorConfig::new(method, dt, t_final);
    cfg.output_every = output_every;
    let initial = SystemState::new(Density::new(rho).map_err(to_py)?, s, 0.0).map_err(to_py)?;
    let traj = py
        .detach(|| graph_nls::simulate(&graph.0, &potentials.0, &initial, &cfg))
        .map_err(|fail| to_py(fail.error))?;

    let snaps = &traj.snapshots;
    let out = PyDict::new(py);
    out.set_item("t", snaps.iter().map(|x| x.state.t).collect::<Vec<_>>())?;
    out.set_item("rho", snaps.iter().map(|x| x.state.rho.as_slice().to_vec()).collect::<Vec<_>>())?;
    out.set_item("s", snaps.iter().map(|x| x.state.s.clone()).collect::<Vec<_>>())?;
    out.set_item("mass", snaps.iter().map(|x| x.diagnostics.mass).collect::<Vec<_>>())?;
    out.set_item("energy", snaps.iter().map(|x| x.diagnostics.energy).collect::<Vec<_>>())?;
    out.set_item("min_rho", snaps.iter().map(|x| x.diagnostics.min_rho).collect::<Vec<_>>())?;
    out.set_item("norm_resid", snaps.iter().map(|x| x.diagnostics.norm_resid).collect::<Vec<_>>())?;
    out.set_item("halvings", traj.halvings.len())?;
    Ok(out)
}

/// Minimizes the ground-state energy over the simplex.
#[pyfunction]
#[pyo3(signature = (graph, potentials, tol = 1e-10, max_iter = 1_000_000))]
fn ground_state<'py>(
    py: Python<'py>,
    graph: &PyGraph,
    potentials: &PyPotentials,
    tol: f64,
    max_iter: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let opts = GroundStateOptions {
        tol,
        max_iter,
        ..Default::default()
    };
    let res = py
        .detach(|| graph_nls::solve_ground_state(&graph.0, &potentials.0, &opts))
        .map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("rho", res.rho)?;
    out.set_item("nu", res.nu)?;
    out.set_item("energy", res.energy)?;
    out.set_item("kkt_residual", res.kkt_residual)?;
    out.set_item("iterations", res.iterations)?;
    out.set_item("certified_minimum", res.certified_minimum)?;
    Ok(out)
}

/// Linearized spectrum around a stationary density.
#[pyfunction]
fn spectrum<'py>(
    py: Python<'py>,
    graph: &PyGraph,
    potentials: &PyPotentials,
    rho_ground: Vec<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let h2 = hamiltonian_matrix(&graph.0, &potentials.0, &rho_ground).map_err(to_py)?;
    let report = graph_nls::spectrum(&h2, &Thresholds::default()).map_err(to_py)?;
    report_dict(py, report)
}

/// Closed-form spectrum for `v = 0`, `w = alpha I` around the uniform density.
#[pyfunction]
#[pyo3(signature = (graph, alpha, h = 1.0))]
fn gpe_spectrum<'py>(py: Python<'py>, graph: &PyGraph, alpha: f64, h: f64) -> PyResult<Bound<'py, PyDict>> {
    report_dict(py, gpe_spectrum_closed_form(&graph.0, alpha, h, &Thresholds::default()))
}

fn report_dict(py: Python<'_>, report: SpectrumReport) -> PyResult<Bound<'_, PyDict>> {
    let out = PyDict::new(py);
    out.set_item("eigenvalues", report.eigenvalues)?;
    out.set_item("classification", report.classification.as_str())?;
    out.set_item("bifurcation_modes", report.bifurcation_modes)?;
    Ok(out)
}

#[pymodule]
#[pyo3(name = "graph_nls")]
fn graph_nls_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGraph>()?;
    m.add_class::<PyPotentials>()?;
    m.add_function(wrap_pyfunction!(fisher_information, m)?)?;
    m.add_function(wrap_pyfunction!(fisher_gradient, m)?)?;
    m.add_function(wrap_pyfunction!(hamiltonian, m)?)?;
    m.add_function(wrap_pyfunction!(rhs, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(ground_state, m)?)?;
    m.add_function(wrap_pyfunction!(spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(gpe_spectrum, m)?)?;
    Ok(())
}
