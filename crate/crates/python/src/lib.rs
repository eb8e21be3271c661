//! Python bindings. Rationals cross the boundary as exact strings such as
//! `"539/6400"`; inputs also accept `int` and `fractions.Fraction`.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList, PyString, PyTuple};

use dtderand::fourier::{a_fourier, l2_distance as exact_l2, SparsePoly};
use dtderand::global_derand::{derandomize_with, Mode};
use dtderand::influence::{influence as exact_influence, influence_paper as paper_influence};
use dtderand::instance_opt::{self as opt, ErrorMetric, FindResult, MetricKind};
use dtderand::oracle::{self, GenSpec};
use dtderand::rational::{fraction_string, parse_rational};
use dtderand::tree::{parse_assignment, parse_document};
use dtderand::{Rational, Restriction, Tree};

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn text(v: &Rational) -> String {
    fraction_string(v)
}

/// `str`, `int` or anything with integer `numerator` and `denominator`.
fn rational(obj: &Bound<'_, PyAny>) -> PyResult<Rational> {
    if let Ok(s) = obj.cast::<PyString>() {
        return parse_rational(&s.to_cow()?).map_err(err);
    }
    if let (Ok(n), Ok(d)) = (obj.getattr("numerator"), obj.getattr("denominator")) {
        return parse_rational(&format!("{}/{}", n.str()?, d.str()?)).map_err(err);
    }
    Err(PyValueError::new_err(
        "expected a rational as str, int or Fraction",
    ))
}

/// A bit string such as `"0110"` or a sequence of 0/1 integers.
fn bits(obj: &Bound<'_, PyAny>) -> PyResult<Vec<bool>> {
    if let Ok(s) = obj.cast::<PyString>() {
        return parse_assignment(&s.to_cow()?).map_err(err);
    }
    let xs: Vec<u8> = obj.extract()?;
    xs.into_iter()
        .map(|b| match b {
            0 => Ok(false),
            1 => Ok(true),
            _ => Err(PyValueError::new_err("bits must be 0 or 1")),
        })
        .collect()
}

/// An immutable randomized decision tree.
#[pyclass(name = "Tree", frozen, skip_from_py_object, module = "dtderand_py")]
#[derive(Clone)]
struct PyTree {
    tree: Tree,
    /// Variable universe: the `n=` header if present, else the largest index.
    n: u32,
}

impl PyTree {
    fn wrap(tree: Tree, n: Option<u32>) -> Self {
        let n = n.unwrap_or(0).max(tree.stats().num_vars);
        Self { tree, n }
    }
}

#[pymethods]
impl PyTree {
    /// Parses the tree text format, e.g. `"(x1 0.25 ($ 0 1))"`.
    #[new]
    fn new(text: &str) -> PyResult<Self> {
        let doc = parse_document(text).map_err(err)?;
        Ok(Self::wrap(doc.tree, doc.universe))
    }

    fn __str__(&self) -> String {
        self.tree.to_string()
    }

    fn __repr__(&self) -> String {
        format!("Tree({:?})", self.tree.to_string())
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.tree == other.tree
    }

    #[getter]
    fn num_vars(&self) -> u32 {
        self.n
    }

    #[getter]
    fn is_deterministic(&self) -> bool {
        self.tree.is_deterministic()
    }

    /// `{"q", "m", "size", "num_vars"}`.
    fn stats<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let s = self.tree.stats();
        let d = PyDict::new(py);
        d.set_item("q", s.q)?;
        d.set_item("m", s.m)?;
        d.set_item("size", s.size)?;
        d.set_item("num_vars", self.n)?;
        Ok(d)
    }

    /// The mean function at `x`.
    fn mu(&self, x: &Bound<'_, PyAny>) -> PyResult<String> {
        Ok(text(&self.tree.mu_eval(&bits(x)?).map_err(err)?))
    }

    fn mean(&self) -> String {
        text(&self.tree.mean())
    }

    fn reduce(&self) -> Self {
        Self::wrap(self.tree.reduce(), Some(self.n))
    }

    /// Fixes variables, e.g. `restrict("x1=0,x3=1")`.
    fn restrict(&self, pi: &str) -> PyResult<Self> {
        let pi = Restriction::parse(pi).map_err(err)?;
        Ok(Self::wrap(self.tree.restrict(&pi), Some(self.n)))
    }

    /// Fourier coefficients as `[(vars, coefficient)]`, constant term first.
    fn fourier<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyList>> {
        let p = a_fourier(&self.tree);
        let list = PyList::empty(py);
        for (m, c) in p.terms() {
            list.append(PyTuple::new(
                py,
                [
                    PyTuple::new(py, m.vars())?.into_any(),
                    text(c).into_pyobject(py)?.into_any(),
                ],
            )?)?;
        }
        Ok(list)
    }
}

fn load_metric(kind: &str, source: &Bound<'_, PyAny>, n: Option<u32>) -> PyResult<ErrorMetric> {
    let kind: MetricKind = kind.parse().map_err(err)?;
    if let Ok(t) = source.cast::<PyTree>() {
        let t = t.get();
        return ErrorMetric::new(kind, &t.tree, n.unwrap_or(t.n)).map_err(err);
    }
    let s: String = source.extract()?;
    if kind != MetricKind::PolyAbs {
        return Err(PyValueError::new_err(
            "only the poly metric takes a polynomial source",
        ));
    }
    let p = SparsePoly::parse(&s).map_err(err)?;
    let n = n.unwrap_or(0).max(p.num_vars());
    Ok(ErrorMetric::poly_abs(p, n))
}

fn find_dict<'py>(py: Python<'py>, res: &FindResult, n: u32) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("tree", PyTree::wrap(res.tree.clone(), Some(n)))?;
    d.set_item("error", text(&res.error))?;
    d.set_item("budget", res.budget)?;
    d.set_item("query_complexity", res.query_complexity)?;
    d.set_item("nodes_explored", res.nodes_explored)?;
    Ok(d)
}

/// Exact `E_x[(mu_r(x) - mu_d(x))^2]`.
#[pyfunction]
fn l2_distance(r: &PyTree, d: &PyTree) -> String {
    text(&exact_l2(&r.tree, &d.tree))
}

/// Deterministic tree within `eps` (or `4 eps` with `raw=True`) of `r` in
/// squared L2 distance.
#[pyfunction]
#[pyo3(signature = (r, eps, raw = false))]
fn derandomize<'py>(
    py: Python<'py>,
    r: &PyTree,
    eps: &Bound<'py, PyAny>,
    raw: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let eps = rational(eps)?;
    let mode = if raw { Mode::Raw } else { Mode::Adjusted };
    let rep = py
        .detach(|| derandomize_with(&r.tree, &eps, mode))
        .map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("tree", PyTree::wrap(rep.tree.clone(), Some(r.n)))?;
    d.set_item("error", text(&rep.error))?;
    d.set_item("guarantee", text(&rep.guarantee))?;
    d.set_item("candidates", rep.candidates)?;
    d.set_item("query_complexity", rep.query_complexity)?;
    d.set_item("query_bound", rep.query_bound)?;
    Ok(d)
}

/// Best tree of depth at most `budget` under `metric` ("l2", "bayes" or
/// "poly"); `source` is a `Tree`, or polynomial text for "poly".
#[pyfunction]
#[pyo3(signature = (metric, source, budget, restrict = None, n = None))]
fn find<'py>(
    py: Python<'py>,
    metric: &str,
    source: &Bound<'py, PyAny>,
    budget: usize,
    restrict: Option<&str>,
    n: Option<u32>,
) -> PyResult<Bound<'py, PyDict>> {
    let m = load_metric(metric, source, n)?;
    let pi = Restriction::parse(restrict.unwrap_or("")).map_err(err)?;
    let res = opt::find(&m, budget, &pi);
    find_dict(py, &res, m.num_vars())
}

/// Least-budget tree whose error is at most `eps`.
#[pyfunction]
#[pyo3(signature = (metric, source, eps, n = None))]
fn instance_opt<'py>(
    py: Python<'py>,
    metric: &str,
    source: &Bound<'py, PyAny>,
    eps: &Bound<'py, PyAny>,
    n: Option<u32>,
) -> PyResult<Bound<'py, PyDict>> {
    let m = load_metric(metric, source, n)?;
    let res = opt::instance_opt(&m, &rational(eps)?).map_err(err)?;
    find_dict(py, &res, m.num_vars())
}

/// Exact deterministic tree for the function a bounded-error `r` computes.
#[pyfunction]
#[pyo3(signature = (r, budget_cap = None))]
fn nisan<'py>(
    py: Python<'py>,
    r: &PyTree,
    budget_cap: Option<usize>,
) -> PyResult<Bound<'py, PyDict>> {
    let out = opt::nisan(&r.tree, r.n, budget_cap).map_err(err)?;
    let exact = opt::verify_exact(&r.tree, &out.result.tree, r.n).map_err(err)?;
    let d = find_dict(py, &out.result, r.n)?;
    d.set_item("eps_r", text(&out.eps_r))?;
    d.set_item("exact", exact)?;
    d.set_item("potentially_unsound", out.potentially_unsound)?;
    Ok(d)
}

#[pyfunction]
fn influence(r: &PyTree, var: u32) -> PyResult<String> {
    Ok(text(&exact_influence(&r.tree, var).map_err(err)?))
}

/// The path-counting surrogate; an upper bound on the influence.
#[pyfunction]
fn influence_paper(r: &PyTree, var: u32) -> PyResult<String> {
    Ok(text(&paper_influence(&r.tree.reduce(), var).map_err(err)?))
}

#[pyfunction]
fn osss_check<'py>(py: Python<'py>, r: &PyTree) -> PyResult<Bound<'py, PyDict>> {
    let rep = dtderand::influence::osss_check(&r.tree.reduce()).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("variance", text(&rep.variance))?;
    d.set_item("rhs", text(&rep.osss_rhs))?;
    d.set_item("total", text(&rep.total))?;
    d.set_item("q", rep.q)?;
    d.set_item("holds", rep.holds)?;
    d.set_item("total_within_q", rep.total_within_q)?;
    d.set_item("witness", rep.witness.as_ref().map(|(v, _)| *v))?;
    Ok(d)
}

#[pyfunction]
fn online_eval<'py>(
    py: Python<'py>,
    r: &PyTree,
    eps: &Bound<'py, PyAny>,
    delta: &Bound<'py, PyAny>,
    x: &Bound<'py, PyAny>,
) -> PyResult<Bound<'py, PyDict>> {
    let out = dtderand::online::online_eval(&r.tree, &rational(eps)?, &rational(delta)?, &bits(x)?)
        .map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("output", text(&out.output))?;
    d.set_item("queried", out.queried.clone())?;
    d.set_item("early_exit", out.early_exit)?;
    Ok(d)
}

#[pyfunction]
#[pyo3(signature = (n, q, m, seed, leaf_den = 8))]
fn gen_random(n: u32, q: usize, m: usize, seed: u64, leaf_den: u32) -> PyResult<PyTree> {
    let spec = GenSpec {
        leaf_den,
        ..GenSpec::new(n, q, m, seed)
    };
    Ok(PyTree::wrap(
        oracle::gen_random_rdt(&spec).map_err(err)?,
        Some(n),
    ))
}

#[pyfunction]
fn index_rdt(n: u32) -> PyResult<PyTree> {
    Ok(PyTree::wrap(oracle::index_rdt(n).map_err(err)?, Some(n)))
}

#[pyfunction]
fn parity_blocks_rdt(n: u32, q: u32) -> PyResult<PyTree> {
    Ok(PyTree::wrap(
        oracle::parity_blocks_rdt(n, q).map_err(err)?,
        Some(n),
    ))
}

#[pyfunction]
fn noisy_rdt(f: &PyTree, flip: &Bound<'_, PyAny>) -> PyResult<PyTree> {
    Ok(PyTree::wrap(
        oracle::noisy_rdt(&f.tree, &rational(flip)?).map_err(err)?,
        Some(f.n),
    ))
}

/// Squared L2 distance by enumerating inputs and coins.
#[pyfunction]
fn brute_l2(r: &PyTree, d: &PyTree) -> PyResult<String> {
    Ok(text(
        &oracle::brute_l2(&r.tree, &d.tree, r.n.max(d.n)).map_err(err)?,
    ))
}

#[pymodule]
fn dtderand_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTree>()?;
    m.add_function(wrap_pyfunction!(l2_distance, m)?)?;
    m.add_function(wrap_pyfunction!(derandomize, m)?)?;
    m.add_function(wrap_pyfunction!(find, m)?)?;
    m.add_function(wrap_pyfunction!(instance_opt, m)?)?;
    m.add_function(wrap_pyfunction!(nisan, m)?)?;
    m.add_function(wrap_pyfunction!(influence, m)?)?;
    m.add_function(wrap_pyfunction!(influence_paper, m)?)?;
    m.add_function(wrap_pyfunction!(osss_check, m)?)?;
    m.add_function(wrap_pyfunction!(online_eval, m)?)?;
    m.add_function(wrap_pyfunction!(gen_random, m)?)?;
    m.add_function(wrap_pyfunction!(index_rdt, m)?)?;
    m.add_function(wrap_pyfunction!(parity_blocks_rdt, m)?)?;
    m.add_function(wrap_pyfunction!(noisy_rdt, m)?)?;
    m.add_function(wrap_pyfunction!(brute_l2, m)?)?;
    Ok(())
}
