//! Python bindings: models, contact loops, the loop algebra, certificates and the run commands.

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyModule;
use serde::Serialize;

use contact_kinetics::fieldcalc::Point;
use contact_kinetics::loopalg::{self, ContactLoop};
use contact_kinetics::models::{self, ModelManifold};
use contact_kinetics_cli::{RunConfig, ReportBundle};

create_exception!(contact_kinetics_py, ContactError, PyException);

fn err(e: contact_kinetics::Error) -> PyErr {
    ContactError::new_err(e.to_string())
}

fn point(v: &[f64]) -> PyResult<Point> {
    match v.len() {
        3 => Ok(Point::new(v[0], v[1], v[2], 0.0)),
        4 => Ok(Point::new(v[0], v[1], v[2], v[3])),
        n => Err(PyValueError::new_err(format!("a point has 3 or 4 coordinates, got {n}"))),
    }
}

fn to_py<'py>(py: Python<'py>, v: &impl Serialize) -> PyResult<Bound<'py, PyAny>> {
    let s = serde_json::to_string(v).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (s,))
}

fn report<'py>(py: Python<'py>, r: &ReportBundle) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (r.to_json(),))
}

fn run_config(smoke: bool) -> RunConfig {
    if smoke {
        RunConfig::smoke()
    } else {
        RunConfig::default()
    }
}

/// A model contact manifold: `s1xd2`, `s1xs2`, `annulus` or `s3`.
#[pyclass(frozen, name = "Model")]
struct PyModel(ModelManifold);

#[pymethods]
impl PyModel {
    #[new]
    fn new(name: &str) -> PyResult<Self> {
        models::model_by_name(name).map(Self).map_err(err)
    }

    #[getter]
    fn name(&self) -> String {
        self.0.name().to_string()
    }

    #[getter]
    fn form(&self) -> String {
        self.0.alpha().label().to_string()
    }

    #[getter]
    fn coords(&self) -> Vec<String> {
        self.0.domain().coord_names().to_vec()
    }

    fn knots(&self) -> Vec<String> {
        self.0.knots().iter().map(|k| k.name().to_string()).collect()
    }

    fn regions(&self) -> Vec<String> {
        self.0.regions().iter().map(|r| r.name.clone()).collect()
    }

    /// Minimum of `alpha ^ d alpha` over the certification grid.
    fn contact_margin(&self) -> f64 {
        self.0.alpha().certificate().min_margin
    }

    fn sample(&self, n: usize, seed: u64) -> Vec<Vec<f64>> {
        self.0.domain().sample(n, seed).iter().map(|p| p.iter().copied().collect()).collect()
    }

    fn __repr__(&self) -> String {
        format!("Model({:?}, form={:?})", self.0.name(), self.0.alpha().label())
    }
}

/// A 2pi-periodic loop of contactomorphisms with its Hamiltonian.
#[pyclass(frozen, from_py_object, name = "ContactLoop")]
#[derive(Clone)]
struct PyLoop(ContactLoop);

#[pymethods]
impl PyLoop {
    #[getter]
    fn label(&self) -> String {
        self.0.label().to_string()
    }

    #[getter]
    fn smooth(&self) -> bool {
        self.0.is_smooth()
    }

    fn flow(&self, py: Python<'_>, p: Vec<f64>, t: f64) -> PyResult<Vec<f64>> {
        let p = point(&p)?;
        let q = py.detach(|| self.0.flow(&p, t)).map_err(err)?;
        Ok(q.iter().copied().collect())
    }

    fn inverse(&self, py: Python<'_>, q: Vec<f64>, t: f64) -> PyResult<Vec<f64>> {
        let q = point(&q)?;
        let p = py.detach(|| self.0.inverse(&q, t)).map_err(err)?;
        Ok(p.iter().copied().collect())
    }

    fn hamiltonian(&self, py: Python<'_>, p: Vec<f64>, t: f64) -> PyResult<f64> {
        let p = point(&p)?;
        py.detach(|| self.0.ham_at(&p, t)).map_err(err)
    }

    /// `f_t(p)` with `phi_t^* alpha = e^{f_t} alpha`.
    fn log_factor(&self, py: Python<'_>, p: Vec<f64>, t: f64) -> PyResult<f64> {
        let p = point(&p)?;
        py.detach(|| self.0.log_factor(&p, t)).map_err(err)
    }

    fn compose(&self, other: &PyLoop) -> PyResult<PyLoop> {
        loopalg::compose_loops(&self.0, &other.0).map(PyLoop).map_err(err)
    }

    fn repeat(&self, k: usize) -> PyResult<PyLoop> {
        loopalg::self_concatenate(&self.0, k).map(PyLoop).map_err(err)
    }

    /// Largest relative gap between the Hamiltonian law and the flow-extraction oracle.
    fn oracle_discrepancy(&self, py: Python<'_>, points: Vec<Vec<f64>>, times: Vec<f64>) -> PyResult<f64> {
        let pts = points.iter().map(|p| point(p)).collect::<PyResult<Vec<_>>>()?;
        py.detach(|| loopalg::oracle_discrepancy(&self.0, &pts, &times)).map(|r| r.0).map_err(err)
    }

    /// Grid minimum of the Hamiltonian on a named region (or the whole model when `region` is None).
    #[pyo3(signature = (model, n, times, region=None))]
    fn certify_positivity<'py>(
        &self,
        py: Python<'py>,
        model: &PyModel,
        n: usize,
        times: usize,
        region: Option<&str>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let grid = match region {
            Some(r) => model.0.region_grid(r, n, false).map_err(err)?,
            None => model.0.grid(n),
        };
        let c = py.detach(|| loopalg::certify_positivity(&self.0, &grid, times)).map_err(err)?;
        to_py(py, &c)
    }

    fn __repr__(&self) -> String {
        format!("ContactLoop({:?})", self.0.label())
    }
}

fn s1s2() -> PyResult<ModelManifold> {
    models::model_s1s2().map_err(err)
}

#[pyfunction]
fn concatenate(loops: Vec<PyLoop>) -> PyResult<PyLoop> {
    let ls: Vec<ContactLoop> = loops.into_iter().map(|l| l.0).collect();
    loopalg::concatenate_loops(&ls).map(PyLoop).map_err(err)
}

#[pyfunction]
fn rho() -> PyResult<PyLoop> {
    models::loop_rho(s1s2()?.alpha()).map(PyLoop).map_err(err)
}

#[pyfunction]
fn zeta() -> PyResult<PyLoop> {
    models::loop_zeta(s1s2()?.alpha()).map(PyLoop).map_err(err)
}

#[pyfunction]
fn hopf() -> PyResult<PyLoop> {
    let m = models::model_s3().map_err(err)?;
    models::loop_hopf(m.alpha()).map(PyLoop).map_err(err)
}

fn beta_loop(alpha: &contact_kinetics::contact::ContactForm) -> contact_kinetics::Result<ContactLoop> {
    let r = models::loop_rho(alpha)?;
    let psi = models::default_displacement(alpha)?;
    models::loop_beta(&r, &psi)
}

#[pyfunction]
fn beta() -> PyResult<PyLoop> {
    beta_loop(s1s2()?.alpha()).map(PyLoop).map_err(err)
}

#[pyfunction]
fn delta(k: usize) -> PyResult<PyLoop> {
    let m = s1s2()?;
    let b = beta_loop(m.alpha()).map_err(err)?;
    let z = models::loop_zeta(m.alpha()).map_err(err)?;
    models::loop_delta(k, &b, &z).map(PyLoop).map_err(err)
}

/// `verify MODEL` report as a dict.
#[pyfunction]
#[pyo3(signature = (model, smoke=true))]
fn verify<'py>(py: Python<'py>, model: &str, smoke: bool) -> PyResult<Bound<'py, PyAny>> {
    let cfg = run_config(smoke);
    let r = py
        .detach(|| contact_kinetics_cli::cmd_verify(model, &cfg))
        .map_err(|e| ContactError::new_err(e.to_string()))?;
    report(py, &r)
}

/// `loops` report as a dict.
#[pyfunction]
#[pyo3(signature = (smoke=true))]
fn loops<'py>(py: Python<'py>, smoke: bool) -> PyResult<Bound<'py, PyAny>> {
    let cfg = run_config(smoke);
    let r = py
        .detach(|| contact_kinetics_cli::cmd_loops(&cfg))
        .map_err(|e| ContactError::new_err(e.to_string()))?;
    report(py, &r)
}

/// `lutz SOURCE` report as a dict, with the chart table under `"chart_table"`.
#[pyfunction]
#[pyo3(signature = (source, smoke=true))]
fn lutz<'py>(py: Python<'py>, source: &str, smoke: bool) -> PyResult<Bound<'py, PyAny>> {
    let cfg = run_config(smoke);
    let (r, art) = py
        .detach(|| contact_kinetics_cli::cmd_lutz(source, &cfg))
        .map_err(|e| ContactError::new_err(e.to_string()))?;
    let d = report(py, &r)?;
    d.set_item("chart_table", art.chart_table)?;
    Ok(d)
}

#[pymodule]
fn contact_kinetics_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("ContactError", m.py().get_type::<ContactError>())?;
    m.add_class::<PyModel>()?;
    m.add_class::<PyLoop>()?;
    m.add_function(wrap_pyfunction!(concatenate, m)?)?;
    m.add_function(wrap_pyfunction!(rho, m)?)?;
    m.add_function(wrap_pyfunction!(zeta, m)?)?;
    m.add_function(wrap_pyfunction!(hopf, m)?)?;
    m.add_function(wrap_pyfunction!(beta, m)?)?;
    m.add_function(wrap_pyfunction!(delta, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(loops, m)?)?;
    m.add_function(wrap_pyfunction!(lutz, m)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn points_take_three_or_four_coordinates() {
        assert_eq!(point(&[1.0, 2.0, 3.0]).unwrap(), Point::new(1.0, 2.0, 3.0, 0.0));
        assert_eq!(point(&[1.0, 2.0, 3.0, 4.0]).unwrap()[3], 4.0);
        Python::initialize();
        assert!(point(&[1.0]).is_err());
    }
}
