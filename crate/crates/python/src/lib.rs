//! Python bindings: thresholds and constants, transfer operators, the
//! boundary-law solver, the induced tree-indexed Markov chain and the
//! fuzzy gradient chain.

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use treegibbs::check::BoundCheck;
use treegibbs::constants::{r_star, ModelConstants};
use treegibbs::gibbs::{dlr_oracle_check, verify_theorem_bounds, MarkovChainGibbs, TreeSampler};
use treegibbs::gradient::{build_fuzzy_chain, delocalization_stat, sample_branch, FuzzyChain};
use treegibbs::potentials::{log_threshold, sos_threshold, TransferOperator};
use treegibbs::seqspace::{GroupSpace, SeqFn};
use treegibbs::solver::{BoundaryLawSolution, LocalizationProblem, Tolerances};

create_exception!(treegibbs_py, TreeGibbsError, PyException);

fn err(e: treegibbs::Error) -> PyErr {
    TreeGibbsError::new_err(format!("{}: {e}", e.code()))
}

fn checks_to_py<'py>(py: Python<'py>, checks: &[BoundCheck]) -> PyResult<Bound<'py, PyList>> {
    let list = PyList::empty(py);
    for c in checks {
        let d = PyDict::new(py);
        d.set_item("name", &c.name)?;
        d.set_item("measured", c.measured)?;
        d.set_item("relation", c.relation)?;
        d.set_item("bound", c.bound)?;
        d.set_item("pass", c.pass)?;
        list.append(d)?;
    }
    Ok(list)
}

fn space(radius: Option<usize>, modulus: Option<usize>) -> PyResult<GroupSpace> {
    match (radius, modulus) {
        (Some(_), Some(_)) => Err(TreeGibbsError::new_err("InvalidInput: give radius or modulus, not both")),
        (None, Some(q)) => GroupSpace::cyclic(q).map_err(err),
        (r, None) => GroupSpace::window(r.unwrap_or(60)).map_err(err),
    }
}

/// Strong-coupling threshold `β` for `model` in {"sos", "log"}.
#[pyfunction]
fn threshold(model: &str, d: u32, n: u32) -> PyResult<f64> {
    if d < 2 || n < 1 {
        return Err(TreeGibbsError::new_err("InvalidInput: need d >= 2 and n >= 1"));
    }
    match model {
        "sos" => Ok(sos_threshold(d, n)),
        "log" => Ok(log_threshold(d, n)),
        other => Err(TreeGibbsError::new_err(format!("InvalidInput: unknown model {other:?}"))),
    }
}

/// The model constants for degree `d` and `|A| = n` as a dict.
#[pyfunction]
fn constants(py: Python<'_>, d: u32, n: u32) -> PyResult<Bound<'_, PyDict>> {
    let c = ModelConstants::new(d, n).map_err(err)?;
    let out = PyDict::new(py);
    for (k, v) in [
        ("lambda", c.lambda),
        ("mu", c.mu),
        ("rho", c.rho),
        ("eta", c.eta),
        ("theta", c.theta),
        ("r_star", r_star(d, n)),
        ("c1", c.c1),
        ("c2", c.c2),
        ("c3", c.c3),
        ("c4", c.c4),
        ("c5", c.c5),
        ("c6", c.c6),
        ("c7", c.c7),
    ] {
        out.set_item(k, v)?;
    }
    Ok(out)
}

#[pyclass(name = "TransferOperator", frozen)]
struct PyOperator {
    inner: TransferOperator,
}

#[pymethods]
impl PyOperator {
    #[staticmethod]
    #[pyo3(signature = (beta, radius=None, modulus=None))]
    fn sos(beta: f64, radius: Option<usize>, modulus: Option<usize>) -> PyResult<Self> {
        Ok(PyOperator { inner: TransferOperator::sos(beta, space(radius, modulus)?).map_err(err)? })
    }

    #[staticmethod]
    #[pyo3(signature = (beta, radius=None, modulus=None))]
    fn log(beta: f64, radius: Option<usize>, modulus: Option<usize>) -> PyResult<Self> {
        Ok(PyOperator { inner: TransferOperator::log(beta, space(radius, modulus)?).map_err(err)? })
    }

    #[staticmethod]
    #[pyo3(signature = (beta, p, radius=None, modulus=None))]
    fn psos(beta: f64, p: f64, radius: Option<usize>, modulus: Option<usize>) -> PyResult<Self> {
        Ok(PyOperator { inner: TransferOperator::psos(beta, p, space(radius, modulus)?).map_err(err)? })
    }

    /// Table in index order: `-L..=L` on a window, `0..q` on `Z_q`.
    #[staticmethod]
    #[pyo3(signature = (table, cyclic=false))]
    fn custom(table: Vec<f64>, cyclic: bool) -> PyResult<Self> {
        let sp = if cyclic {
            GroupSpace::cyclic(table.len()).map_err(err)?
        } else {
            if table.len().is_multiple_of(2) {
                return Err(TreeGibbsError::new_err("InvalidInput: window tables have odd length"));
            }
            GroupSpace::window(table.len() / 2).map_err(err)?
        };
        let f = SeqFn::new(sp, table).map_err(err)?;
        Ok(PyOperator { inner: TransferOperator::custom(f).map_err(err)? })
    }

    #[staticmethod]
    #[pyo3(signature = (radius=None, modulus=None))]
    fn identity(radius: Option<usize>, modulus: Option<usize>) -> PyResult<Self> {
        Ok(PyOperator { inner: TransferOperator::identity(space(radius, modulus)?) })
    }

    fn elements(&self) -> Vec<i64> {
        self.inner.space().elements().collect()
    }

    fn values(&self) -> Vec<f64> {
        self.inner.table().values().to_vec()
    }

    fn __call__(&self, i: i64) -> f64 {
        self.inner.evaluate(i)
    }

    /// `‖Q − 1_0‖_{(d+1)/2}` on the space.
    fn deviation_norm(&self, d: u32) -> PyResult<f64> {
        Ok(self.inner.deviation_norm(d).map_err(err)?.epsilon)
    }

    fn __repr__(&self) -> String {
        format!("TransferOperator({:?}, {})", self.inner.kind(), self.inner.space())
    }
}

#[pyclass(name = "BoundaryLawSolution", frozen)]
struct PySolution {
    inner: BoundaryLawSolution,
    operator: TransferOperator,
}

#[pymethods]
impl PySolution {
    #[getter]
    fn d(&self) -> u32 {
        self.inner.d
    }

    #[getter]
    fn localization(&self) -> Vec<i64> {
        self.inner.localization.clone()
    }

    #[getter]
    fn elements(&self) -> Vec<i64> {
        self.inner.space().elements().collect()
    }

    #[getter]
    fn xbar(&self) -> Vec<f64> {
        self.inner.xbar.values().to_vec()
    }

    /// `x = x̄^d`, the boundary law itself.
    #[getter]
    fn boundary_law(&self) -> Vec<f64> {
        self.inner.boundary_law().into_values()
    }

    #[getter]
    fn epsilon(&self) -> f64 {
        self.inner.epsilon.epsilon
    }

    #[getter]
    fn residual(&self) -> f64 {
        self.inner.residual
    }

    #[getter]
    fn certificate<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyList>> {
        checks_to_py(py, &self.inner.certificate)
    }

    #[getter]
    fn certified(&self) -> bool {
        self.inner.certificate.iter().all(|c| c.pass)
    }

    fn chain(&self) -> PyResult<PyChain> {
        let inner = MarkovChainGibbs::from_boundary_law(&self.inner, &self.operator).map_err(err)?;
        Ok(PyChain { inner, epsilon: self.inner.epsilon.epsilon })
    }
}

/// Solves `x = Q∗x^d` localized on `localization`.
#[pyfunction]
#[pyo3(signature = (operator, d, localization, inner_tol=None, outer_tol=None, tail_tol=None))]
fn solve(
    operator: &PyOperator,
    d: u32,
    localization: Vec<i64>,
    inner_tol: Option<f64>,
    outer_tol: Option<f64>,
    tail_tol: Option<f64>,
) -> PyResult<PySolution> {
    let mut tol = Tolerances::default();
    tol.inner = inner_tol.unwrap_or(tol.inner);
    tol.outer = outer_tol.unwrap_or(tol.outer);
    tol.tail = tail_tol.unwrap_or(tol.tail);
    let problem = LocalizationProblem::new(d, operator.inner.clone(), &localization, tol).map_err(err)?;
    let inner = problem.solve_uncertified().map_err(err)?;
    Ok(PySolution { inner, operator: operator.inner.clone() })
}

#[pyclass(name = "MarkovChain", frozen)]
struct PyChain {
    inner: MarkovChainGibbs,
    epsilon: f64,
}

#[pymethods]
impl PyChain {
    #[getter]
    fn elements(&self) -> Vec<i64> {
        self.inner.space().elements().collect()
    }

    #[getter]
    fn pi(&self) -> Vec<f64> {
        self.inner.pi().values().to_vec()
    }

    #[getter]
    fn delta(&self) -> Vec<f64> {
        self.inner.delta().values().to_vec()
    }

    /// Rows of `P`.
    #[getter]
    fn transition(&self) -> Vec<Vec<f64>> {
        let n = self.inner.space().size();
        (0..n).map(|i| self.inner.row(i).to_vec()).collect()
    }

    fn p(&self, i: i64, j: i64) -> PyResult<f64> {
        let sp = self.inner.space();
        let idx = |e: i64| sp.index_of(e).ok_or_else(|| err(treegibbs::Error::NotASubset(e)));
        Ok(self.inner.p(idx(i)?, idx(j)?))
    }

    /// Existence-theorem report for set `a`; defaults to the chain's own set.
    #[pyo3(signature = (a=None))]
    fn theorem_report<'py>(&self, py: Python<'py>, a: Option<Vec<i64>>) -> PyResult<Bound<'py, PyDict>> {
        let a = a.unwrap_or_else(|| self.inner.localization().to_vec());
        let report = verify_theorem_bounds(&self.inner, &a, self.epsilon).map_err(err)?;
        let out = PyDict::new(py);
        out.set_item("epsilon", report.epsilon)?;
        out.set_item("pass", report.pass)?;
        out.set_item("checks", checks_to_py(py, &report.checks)?)?;
        Ok(out)
    }

    #[pyo3(signature = (max_configurations=100_000, seed=0))]
    fn dlr_violation(&self, max_configurations: usize, seed: u64) -> PyResult<f64> {
        Ok(dlr_oracle_check(&self.inner, max_configurations, seed).map_err(err)?.max_violation)
    }

    /// `count` trees of depth `depth` as lists of states in breadth-first order.
    fn sample_trees(&self, py: Python<'_>, depth: usize, count: usize, seed: u64) -> PyResult<Vec<Vec<i64>>> {
        let sampler = TreeSampler::new(&self.inner).map_err(err)?;
        let sp = self.inner.space();
        let trees = py.detach(|| sampler.sample_trees(depth, count, seed));
        Ok(trees.iter().map(|t| t.states.iter().map(|&s| sp.element(s)).collect()).collect())
    }

    fn to_json(&self) -> String {
        self.inner.to_json().to_string()
    }
}

#[pyclass(name = "FuzzyChain", frozen)]
struct PyFuzzyChain {
    inner: FuzzyChain,
}

#[pymethods]
impl PyFuzzyChain {
    #[new]
    fn new(base: &PyOperator, q: usize, d: u32, localization: Vec<i64>) -> PyResult<Self> {
        let inner = build_fuzzy_chain(&base.inner, q, d, &localization, Tolerances::default()).map_err(err)?;
        Ok(PyFuzzyChain { inner })
    }

    #[getter]
    fn pi(&self) -> Vec<f64> {
        self.inner.chain().pi().values().to_vec()
    }

    /// `‖Q_q − 1_0‖_{(d+1)/2}` against the required bound.
    #[getter]
    fn hypothesis(&self) -> (f64, f64, bool) {
        let c = self.inner.hypothesis();
        (c.measured, c.bound, c.pass)
    }

    fn pair_limit(&self, abar: i64, c: i64) -> f64 {
        self.inner.pair_limit_formula(abar, c)
    }

    /// `(fuzzy_states, increments, w)` of one branch of length `n`.
    fn sample_branch(&self, n: usize, seed: u64) -> PyResult<(Vec<i64>, Vec<i64>, Vec<i64>)> {
        let p = sample_branch(&self.inner, n, seed).map_err(err)?;
        Ok((p.fuzzy_states, p.increments, p.w))
    }

    /// `[(n, estimate, standard_error)]` for `P(W_n = k)`.
    fn delocalization(
        &self,
        py: Python<'_>,
        n_grid: Vec<usize>,
        k: i64,
        samples: usize,
        seed: u64,
    ) -> PyResult<Vec<(usize, f64, f64)>> {
        let stat = py.detach(|| delocalization_stat(&self.inner, &n_grid, k, samples, seed)).map_err(err)?;
        Ok(stat.points.iter().map(|p| (p.n, p.estimate, p.standard_error)).collect())
    }
}

#[pymodule]
fn treegibbs_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("TreeGibbsError", m.py().get_type::<TreeGibbsError>())?;
    m.add_function(wrap_pyfunction!(threshold, m)?)?;
    m.add_function(wrap_pyfunction!(constants, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_class::<PyOperator>()?;
    m.add_class::<PySolution>()?;
    m.add_class::<PyChain>()?;
    m.add_class::<PyFuzzyChain>()?;
    Ok(())
}
