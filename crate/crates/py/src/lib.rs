//! Python bindings: paths, payoffs, decompositions and the worked examples.
//!
//! Arrays cross the boundary as nested lists; factor indices are 0-based on the
//! Python side except in permutation strings, which keep the CLI syntax.

use std::collections::HashMap;

use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;

use pnl_attrib::applications::{self, OptionSpec};
use pnl_attrib::cli::parse_payoff;
use pnl_attrib::simulate::parse_model_config;
use pnl_attrib::{
    asu_decompose, asu_two_perm, counterexamples, iasu_closed_form, interaction_matrix, io, ioat_closed_form,
    isu_closed_form, oat_decompose, su_decompose, AttribError, Decomposition as CoreDecomposition, Permutation,
    SharedPayoff,
};

fn to_py(err: AttribError) -> PyErr {
    match err {
        AttribError::Io(e) => PyOSError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

#[pyclass(name = "Path", frozen)]
struct PyPath(pnl_attrib::Path);

#[pymethods]
impl PyPath {
    /// `values[i]` and `jumps[i]` hold factor `i`; `jumps[i][l-1]` flags step `l`.
    #[new]
    #[pyo3(signature = (times, values, jumps=None))]
    fn new(times: Vec<f64>, values: Vec<Vec<f64>>, jumps: Option<Vec<Vec<bool>>>) -> PyResult<Self> {
        let p = match jumps {
            Some(j) => pnl_attrib::Path::new(times, values, j),
            None => pnl_attrib::Path::continuous(times, values),
        };
        p.map(PyPath).map_err(to_py)
    }

    #[staticmethod]
    fn read_csv(file: &str) -> PyResult<Self> {
        io::read_path_file(file.as_ref()).map(PyPath).map_err(to_py)
    }

    fn write_csv(&self, file: &str) -> PyResult<()> {
        io::write_path_file(&self.0, file.as_ref()).map_err(to_py)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    #[getter]
    fn steps(&self) -> usize {
        self.0.steps()
    }

    #[getter]
    fn times(&self) -> Vec<f64> {
        self.0.times().to_vec()
    }

    fn values(&self, factor: usize) -> PyResult<Vec<f64>> {
        self.check(factor)?;
        Ok(self.0.factor_series(factor))
    }

    fn jumps(&self, factor: usize) -> PyResult<Vec<bool>> {
        self.check(factor)?;
        Ok((1..=self.0.steps()).map(|l| self.0.is_jump(factor, l)).collect())
    }

    fn covariation(&self, i: usize, j: usize) -> PyResult<f64> {
        self.0.covariation(i, j, self.0.steps()).map_err(to_py)
    }

    fn __len__(&self) -> usize {
        self.0.times().len()
    }

    fn __repr__(&self) -> String {
        format!("Path(dim={}, steps={}, horizon={})", self.0.dim(), self.0.steps(), self.0.horizon())
    }
}

impl PyPath {
    fn check(&self, factor: usize) -> PyResult<()> {
        if factor >= self.0.dim() {
            return Err(PyValueError::new_err(format!("factor {factor} out of range for dim {}", self.0.dim())));
        }
        Ok(())
    }
}

/// A payoff built from the CLI spec syntax, e.g. `product2` or `linear:1,2`.
#[pyclass(name = "Payoff", frozen)]
struct PyPayoff {
    spec: String,
    inner: SharedPayoff,
}

#[pymethods]
impl PyPayoff {
    #[new]
    fn new(spec: &str, dim: usize) -> PyResult<Self> {
        Ok(Self {
            spec: spec.to_string(),
            inner: parse_payoff(spec, dim).map_err(to_py)?,
        })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn value(&self, x: Vec<f64>) -> PyResult<f64> {
        self.check(&x)?;
        Ok(self.inner.value(&x))
    }

    fn gradient(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.check(&x)?;
        let mut g = vec![0.0; x.len()];
        self.inner.gradient(&x, &mut g);
        Ok(g)
    }

    fn hessian(&self, x: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
        self.check(&x)?;
        let d = x.len();
        let mut h = vec![0.0; d * d];
        self.inner.hessian(&x, &mut h);
        Ok(h.chunks(d).map(<[f64]>::to_vec).collect())
    }

    fn __repr__(&self) -> String {
        format!("Payoff({:?}, dim={})", self.spec, self.inner.dim())
    }
}

impl PyPayoff {
    fn check(&self, x: &[f64]) -> PyResult<()> {
        if x.len() != self.inner.dim() {
            return Err(PyValueError::new_err(format!("expected {} coordinates, got {}", self.inner.dim(), x.len())));
        }
        Ok(())
    }
}

#[pyclass(name = "Decomposition", frozen)]
struct PyDecomposition(CoreDecomposition);

#[pymethods]
impl PyDecomposition {
    #[getter]
    fn method(&self) -> String {
        self.0.method.to_string()
    }

    #[getter]
    fn times(&self) -> Vec<f64> {
        self.0.times.clone()
    }

    /// `contributions[i][l]` is factor `i` at grid time `l`.
    #[getter]
    fn contributions(&self) -> Vec<Vec<f64>> {
        self.0.contributions.clone()
    }

    #[getter]
    fn total(&self) -> Vec<f64> {
        self.0.total.clone()
    }

    #[getter]
    fn residual(&self) -> Vec<f64> {
        self.0.residual.clone()
    }

    #[getter]
    fn additivity_gap(&self) -> Option<Vec<f64>> {
        self.0.additivity_gap.clone()
    }

    #[getter]
    fn labels(&self) -> Vec<String> {
        self.0.labels.clone()
    }

    /// Contribution of each factor over `(start, end]`.
    fn window(&self, start: f64, end: f64) -> Vec<f64> {
        self.0.window(start, end)
    }

    fn max_relative_additivity_error(&self) -> f64 {
        self.0.max_relative_additivity_error()
    }

    fn write_csv(&self, file: &str) -> PyResult<()> {
        let f = std::fs::File::create(file).map_err(|e| PyOSError::new_err(e.to_string()))?;
        io::write_decomposition(&self.0, f).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("Decomposition(method={}, dim={}, points={})", self.0.method, self.0.dim(), self.0.times.len())
    }
}

/// Runs one method: su, oat, asu, asu2, isu, ioat or iasu.
#[pyfunction]
#[pyo3(signature = (method, payoff, path, perm=None))]
fn decompose(py: Python<'_>, method: &str, payoff: &PyPayoff, path: &PyPath, perm: Option<&str>) -> PyResult<PyDecomposition> {
    let d = path.0.dim();
    let needs_perm = matches!(method, "su" | "isu");
    if needs_perm != perm.is_some() {
        return Err(PyValueError::new_err(format!(
            "perm is {} for method {method}",
            if needs_perm { "required" } else { "not accepted" }
        )));
    }
    let perm = perm.map(|p| Permutation::parse_for_dim(p, d)).transpose().map_err(to_py)?;
    let f = payoff.inner.as_ref();
    let p = &path.0;
    let out = py.detach(|| match (method, &perm) {
        ("su", Some(perm)) => su_decompose(f, p, perm),
        ("isu", Some(perm)) => isu_closed_form(f, p, perm),
        ("oat", _) => oat_decompose(f, p),
        ("asu", _) => asu_decompose(f, p),
        ("asu2", _) => asu_two_perm(f, p),
        ("ioat", _) => ioat_closed_form(f, p),
        ("iasu", _) => iasu_closed_form(f, p),
        _ => Err(AttribError::InvalidParameter(format!("unknown method {method:?}"))),
    });
    out.map(PyDecomposition).map_err(to_py)
}

/// Cumulative interaction series as `{(i, j): [I_ij(t_0), ...]}` for `i <= j`.
#[pyfunction]
fn interactions(payoff: &PyPayoff, path: &PyPath) -> PyResult<HashMap<(usize, usize), Vec<f64>>> {
    let m = interaction_matrix(payoff.inner.as_ref(), &path.0).map_err(to_py)?;
    let d = m.dim();
    Ok((0..d)
        .flat_map(|i| (i..d).map(move |j| (i, j)))
        .map(|(i, j)| ((i, j), m.series(i, j).to_vec()))
        .collect())
}

/// Simulates a path from a `key = value` model configuration.
#[pyfunction]
fn simulate(config: &str) -> PyResult<PyPath> {
    let spec = parse_model_config(config).map_err(to_py)?;
    pnl_attrib::simulate::simulate(&spec).map(PyPath).map_err(to_py)
}

/// `(price, delta, gamma, theta)` of a European call at stock `x`, time `t`.
#[pyfunction]
#[pyo3(signature = (x, t, strike=100.0, rate=0.02, vol=0.2, maturity=1.0))]
fn bs_greeks(x: f64, t: f64, strike: f64, rate: f64, vol: f64, maturity: f64) -> PyResult<(f64, f64, f64, f64)> {
    let spec = OptionSpec {
        strike,
        rate,
        vol,
        maturity,
        ..OptionSpec::default()
    };
    applications::bs_greeks(x, t, &spec).map_err(to_py)
}

/// Level-`lambda` quantile of `exp(N(a, b²))`.
#[pyfunction]
fn lognormal_quantile(a: f64, b: f64, lambda: f64) -> PyResult<f64> {
    applications::lognormal_quantile(a, b, lambda).map_err(to_py)
}

/// Exact first-factor sum for the divergent jump example, rounded once.
#[pyfunction]
fn harmonic_divergence(py: Python<'_>, n: usize) -> f64 {
    py.detach(|| counterexamples::harmonic_divergence(n))
}

/// `{right_sum, left_sum, gap, terminal}` for one Brownian path.
#[pyfunction]
#[pyo3(signature = (n, horizon=1.0, seed=0))]
fn stability_gap(n: usize, horizon: f64, seed: u64) -> PyResult<HashMap<&'static str, f64>> {
    let s = counterexamples::stability_gap(n, horizon, seed).map_err(to_py)?;
    Ok(HashMap::from([
        ("right_sum", s.right_sum),
        ("left_sum", s.left_sum),
        ("gap", s.gap),
        ("terminal", s.terminal),
    ]))
}

#[pymodule]
fn pnl_attrib_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("SPEC_VERSION", io::SPEC_VERSION)?;
    m.add_class::<PyPath>()?;
    m.add_class::<PyPayoff>()?;
    m.add_class::<PyDecomposition>()?;
    m.add_function(wrap_pyfunction!(decompose, m)?)?;
    m.add_function(wrap_pyfunction!(interactions, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(bs_greeks, m)?)?;
    m.add_function(wrap_pyfunction!(lognormal_quantile, m)?)?;
    m.add_function(wrap_pyfunction!(harmonic_divergence, m)?)?;
    m.add_function(wrap_pyfunction!(stability_gap, m)?)?;
    Ok(())
}
