//! Python module `snlp`.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use snlp_core::gen_scale::{self, LevelWeights};
use snlp_core::kv::KvMap;
use snlp_core::mc_oracle::McConfig;
use snlp_core::omega_scale::{self, OmegaOptions, WeightFunction};
use snlp_core::permanental_loops as pl;
use snlp_core::{laws, Error, InversionParams, Jumps, Method};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Input(_)
        | Error::InvalidModel(_)
        | Error::Ordering(_)
        | Error::Domain(_)
        | Error::DegenerateInterval(_)
        | Error::OffGrid { .. } => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

#[pyclass(name = "LevyModel", frozen, from_py_object)]
#[derive(Clone)]
struct PyLevyModel {
    inner: snlp_core::LevyModel,
}

#[pymethods]
impl PyLevyModel {
    /// Gaussian coefficient, drift, and optional exponential downward jumps.
    #[new]
    #[pyo3(signature = (sigma=1.0, gamma=0.0, jump_rate=0.0, jump_mean=1.0))]
    fn new(sigma: f64, gamma: f64, jump_rate: f64, jump_mean: f64) -> PyResult<Self> {
        let jumps = if jump_rate == 0.0 {
            Jumps::None
        } else {
            Jumps::CompoundPoissonExp { rate: jump_rate, mean_jump: jump_mean }
        };
        Ok(Self { inner: snlp_core::LevyModel::new(sigma, gamma, jumps).map_err(to_py)? })
    }

    #[staticmethod]
    fn brownian() -> Self {
        Self { inner: snlp_core::LevyModel::brownian() }
    }

    #[staticmethod]
    fn linear_brownian(mu: f64) -> PyResult<Self> {
        Ok(Self { inner: snlp_core::LevyModel::linear_brownian(mu).map_err(to_py)? })
    }

    #[getter]
    fn sigma(&self) -> f64 {
        self.inner.sigma()
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.inner.gamma()
    }

    fn laplace_exponent(&self, theta: f64) -> PyResult<f64> {
        snlp_core::laplace_exponent(&self.inner, theta).map_err(to_py)
    }

    /// Right inverse Φ(q).
    fn phi(&self, q: f64) -> PyResult<f64> {
        Ok(snlp_core::phi_inverse(&self.inner, q, 1e-12).map_err(to_py)?.phi)
    }

    fn __repr__(&self) -> String {
        format!("LevyModel({})", self.inner.to_kv_json())
    }
}

#[pyclass(name = "ScaleContext", frozen)]
struct PyScaleContext {
    inner: snlp_core::ScaleContext,
}

#[pymethods]
impl PyScaleContext {
    /// `method` is "closed" or "inversion".
    #[new]
    #[pyo3(signature = (model, q, method="closed", nodes=30))]
    fn new(model: &PyLevyModel, q: f64, method: &str, nodes: usize) -> PyResult<Self> {
        let inner = match method {
            "closed" => snlp_core::ScaleContext::new(model.inner, q),
            "inversion" => snlp_core::ScaleContext::with_method(
                model.inner,
                q,
                Method::NumericInversion(InversionParams { nodes }),
            ),
            other => return Err(PyValueError::new_err(format!("unknown method '{other}'"))),
        };
        Ok(Self { inner: inner.map_err(to_py)? })
    }

    #[getter]
    fn q(&self) -> f64 {
        self.inner.q()
    }

    #[getter]
    fn phi(&self) -> f64 {
        self.inner.phi()
    }

    fn w(&self, x: f64) -> PyResult<f64> {
        self.inner.w(x).map_err(to_py)
    }

    fn z(&self, x: f64) -> PyResult<f64> {
        self.inner.z(x).map_err(to_py)
    }

    fn w_dq(&self, x: f64) -> PyResult<f64> {
        self.inner.w_dq(x).map_err(to_py)
    }

    /// `e^{−Φx} W(x)`.
    fn scaled_w(&self, x: f64) -> PyResult<f64> {
        self.inner.scaled_w(x).map_err(to_py)
    }

    /// Rows `(x, W, Z, dW/dq)`.
    fn tabulate(&self, xs: Vec<f64>) -> PyResult<Vec<(f64, f64, f64, f64)>> {
        let rows = snlp_core::scale_fn::tabulate(&self.inner, &xs).map_err(to_py)?;
        Ok(rows.into_iter().map(|r| (r.x, r.w, r.z, r.dwdq)).collect())
    }

    /// Generalized `W(x, y)` by `route` = "linear", "recursive" or "det".
    #[pyo3(signature = (levels, weights, x, y, route="linear"))]
    fn gen_w(&self, levels: Vec<f64>, weights: Vec<f64>, x: f64, y: f64, route: &str) -> PyResult<f64> {
        let lw = LevelWeights::new(levels, weights).map_err(to_py)?;
        let ctx = &self.inner;
        match route {
            "linear" => gen_scale::gen_w(&lw, ctx, x, y),
            "recursive" => gen_scale::gen_w_recursive(&lw, ctx, x, y),
            "det" => gen_scale::gen_w_det(&lw, ctx, x, y),
            other => return Err(PyValueError::new_err(format!("unknown route '{other}'"))),
        }
        .map_err(to_py)
    }

    /// Generalized `Z(x, c)` by `route` = "linear", "recursive" or "det".
    #[pyo3(signature = (levels, weights, x, c, route="linear"))]
    fn gen_z(&self, levels: Vec<f64>, weights: Vec<f64>, x: f64, c: f64, route: &str) -> PyResult<f64> {
        let lw = LevelWeights::new(levels, weights).map_err(to_py)?;
        let ctx = &self.inner;
        match route {
            "linear" => gen_scale::gen_z(&lw, ctx, x, c),
            "recursive" => gen_scale::gen_z_recursive(&lw, ctx, x, c),
            "det" => gen_scale::gen_z_det(&lw, ctx, x, c),
            other => return Err(PyValueError::new_err(format!("unknown route '{other}'"))),
        }
        .map_err(to_py)
    }

    /// Potential density `g(x, y)` on `(c, b)`.
    fn potential_density(&self, b: f64, c: f64, x: f64, y: f64) -> PyResult<f64> {
        pl::PotentialKernel::new(&self.inner, c, b).and_then(|k| k.g(x, y)).map_err(to_py)
    }

    /// `det(I + ΛG)^{−1/2}`.
    fn permanental_laplace(&self, b: f64, c: f64, levels: Vec<f64>, weights: Vec<f64>) -> PyResult<f64> {
        let lw = LevelWeights::new(levels, weights).map_err(to_py)?;
        pl::PotentialKernel::new(&self.inner, c, b).and_then(|k| pl::permanental_laplace(&k, &lw)).map_err(to_py)
    }

    /// `(det route, scale route)` of the loop-soup functional.
    fn loop_soup(&self, b: f64, c: f64, levels: Vec<f64>, weights: Vec<f64>) -> PyResult<(f64, f64)> {
        let lw = LevelWeights::new(levels, weights).map_err(to_py)?;
        let r = pl::PotentialKernel::new(&self.inner, c, b)
            .and_then(|k| pl::loop_soup_functional(&k, &lw))
            .map_err(to_py)?;
        Ok((r.det_route, r.scale_route))
    }
}

#[pyclass(name = "OmegaGrid", frozen)]
struct PyOmegaGrid {
    inner: omega_scale::OmegaGrid,
}

#[pymethods]
impl PyOmegaGrid {
    fn mesh(&self) -> Vec<f64> {
        self.inner.mesh().to_vec()
    }

    fn w(&self, x: f64, y: f64) -> PyResult<f64> {
        self.inner.w(x, y).map_err(to_py)
    }

    fn z(&self, x: f64) -> PyResult<f64> {
        self.inner.z(x).map_err(to_py)
    }

    /// `(up, down)` exit transforms from `x`.
    fn exit_laws(&self, x: f64) -> PyResult<(f64, f64)> {
        let e = omega_scale::omega_exit_laws(&self.inner, x).map_err(to_py)?;
        Ok((e.up, e.down))
    }
}

/// Solve the ω-scale equations on `[c, b]` for a constant weight `value`,
/// or a step weight given by `levels` and `heights`.
#[pyfunction]
#[pyo3(signature = (model, c, b, h, value=None, levels=None, heights=None, q0=0.0))]
#[allow(clippy::too_many_arguments)]
fn solve_omega(
    py: Python<'_>,
    model: &PyLevyModel,
    c: f64,
    b: f64,
    h: f64,
    value: Option<f64>,
    levels: Option<Vec<f64>>,
    heights: Option<Vec<f64>>,
    q0: f64,
) -> PyResult<PyOmegaGrid> {
    let omega = match (value, levels, heights) {
        (Some(v), None, None) => WeightFunction::constant(v),
        (None, Some(l), Some(hs)) => WeightFunction::step(l, hs),
        _ => return Err(PyValueError::new_err("give either value, or levels and heights")),
    }
    .map_err(to_py)?;
    let ctx = snlp_core::ScaleContext::new(model.inner, q0).map_err(to_py)?;
    let grid =
        py.detach(|| omega_scale::solve_omega(&ctx, &omega, c, b, h, &OmegaOptions::default())).map_err(to_py)?;
    Ok(PyOmegaGrid { inner: grid })
}

fn kv_from_dict(params: &Bound<'_, PyDict>) -> PyResult<KvMap> {
    let mut map = KvMap::new();
    for (k, v) in params.iter() {
        let key: String = k.extract()?;
        let val = if let Ok(x) = v.extract::<f64>() {
            x.to_string()
        } else if let Ok(xs) = v.extract::<Vec<f64>>() {
            xs.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
        } else {
            v.extract::<String>()?
        };
        map.insert(key, val);
    }
    Ok(map)
}

/// Ids of the registered laws.
#[pyfunction]
fn law_ids() -> Vec<&'static str> {
    laws::LAWS.iter().map(|l| l.id).collect()
}

/// Evaluate a law by id; returns its named outputs.
#[pyfunction]
#[pyo3(signature = (id, params, model=None))]
fn law<'py>(
    py: Python<'py>,
    id: &str,
    params: &Bound<'py, PyDict>,
    model: Option<&PyLevyModel>,
) -> PyResult<Bound<'py, PyDict>> {
    let m = model.map(|m| m.inner).unwrap_or_else(snlp_core::LevyModel::brownian);
    let out = laws::evaluate(id, &m, &kv_from_dict(params)?).map_err(to_py)?;
    let d = PyDict::new(py);
    for (k, v) in out.outputs {
        d.set_item(k, v)?;
    }
    Ok(d)
}

/// Compare a law with the Monte Carlo oracle; one dict per compared quantity.
#[pyfunction]
#[pyo3(signature = (id, params, model=None, paths=100_000, dt=1e-4, seed=20_240_601))]
fn mc_verify<'py>(
    py: Python<'py>,
    id: &str,
    params: &Bound<'py, PyDict>,
    model: Option<&PyLevyModel>,
    paths: usize,
    dt: f64,
    seed: u64,
) -> PyResult<Bound<'py, PyList>> {
    let m = model.map(|m| m.inner).unwrap_or_else(snlp_core::LevyModel::brownian);
    let map = kv_from_dict(params)?;
    let cfg = McConfig { n_paths: paths, dt, seed, ..McConfig::default() };
    let rows = py.detach(|| laws::mc_compare(id, &m, &map, &cfg)).map_err(to_py)?;
    let out = PyList::empty(py);
    for r in rows {
        let d = PyDict::new(py);
        d.set_item("quantity", r.quantity)?;
        d.set_item("analytic", r.analytic)?;
        d.set_item("mc_mean", r.estimate.mean)?;
        d.set_item("mc_stderr", r.estimate.stderr)?;
        d.set_item("z_score", r.z_score())?;
        out.append(d)?;
    }
    Ok(out)
}

#[pymodule]
fn snlp(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyLevyModel>()?;
    m.add_class::<PyScaleContext>()?;
    m.add_class::<PyOmegaGrid>()?;
    m.add_function(wrap_pyfunction!(solve_omega, m)?)?;
    m.add_function(wrap_pyfunction!(law_ids, m)?)?;
    m.add_function(wrap_pyfunction!(law, m)?)?;
    m.add_function(wrap_pyfunction!(mc_verify, m)?)?;
    Ok(())
}
