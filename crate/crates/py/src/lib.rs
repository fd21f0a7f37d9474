//! Python bindings. Structured results come back as JSON strings
//! (`json.loads` on the Python side) with the same schema as the CLI reports.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use vdclab::counting::{self, BoxZ};
use vdclab::expsum::{self, FourierOptions};
use vdclab::harness::{self, ExperimentConfig};
use vdclab::variety::{DimensionOptions, Instance as CoreInstance};
use vdclab::vdc::{self, AuditOptions, PlanOptions};

fn err(e: vdclab::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn json<T: serde::Serialize>(v: &T) -> PyResult<String> {
    serde_json::to_string(v).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn budget(b: Option<u64>) -> u64 {
    b.unwrap_or(vdclab::DEFAULT_BUDGET)
}

/// Exact polynomial over ℤ in `n` variables `x1..xn`.
#[pyclass(frozen)]
struct Poly {
    inner: vdclab::poly::IntPoly,
}

#[pymethods]
impl Poly {
    #[new]
    fn new(n: usize, src: &str) -> PyResult<Self> {
        vdclab::poly::IntPoly::parse(n, src).map(|inner| Poly { inner }).map_err(err)
    }

    #[getter]
    fn n_vars(&self) -> usize {
        self.inner.n_vars()
    }

    fn degree(&self) -> Option<u32> {
        self.inner.degree()
    }

    fn is_homogeneous(&self) -> bool {
        self.inner.is_homogeneous()
    }

    fn leading_form(&self) -> PyResult<Poly> {
        self.inner.leading_form().map(|inner| Poly { inner }).map_err(err)
    }

    /// Exact value at an integer point, as a decimal string.
    fn eval(&self, x: Vec<i64>) -> PyResult<String> {
        self.inner.eval_i64(&x).map(|v| v.to_string()).map_err(err)
    }

    /// `f(x + p·y) − f(x)`.
    fn difference(&self, p: i64, y: Vec<i64>) -> PyResult<Poly> {
        self.inner.difference(p, &y).map(|inner| Poly { inner }).map_err(err)
    }

    fn to_json(&self) -> PyResult<String> {
        json(&self.inner)
    }

    fn __str__(&self) -> String {
        self.inner.to_string()
    }

    fn __repr__(&self) -> String {
        format!("Poly({}, {:?})", self.inner.n_vars(), self.inner.to_string())
    }
}

/// `f_1 = … = f_r = 0` in affine `n`-space.
#[pyclass(frozen)]
struct Instance {
    inner: CoreInstance,
}

#[pymethods]
impl Instance {
    #[new]
    fn new(n: usize, polys: Vec<String>) -> PyResult<Self> {
        let refs: Vec<&str> = polys.iter().map(String::as_str).collect();
        CoreInstance::parse(n, &refs).map(|inner| Instance { inner }).map_err(err)
    }

    #[staticmethod]
    fn from_json(s: &str) -> PyResult<Self> {
        CoreInstance::from_json(s).map(|inner| Instance { inner }).map_err(err)
    }

    /// `Σ c_i x_i^d = 0`.
    #[staticmethod]
    fn diagonal(coeffs: Vec<i64>, d: u32) -> PyResult<Self> {
        CoreInstance::diagonal(&coeffs, d).map(|inner| Instance { inner }).map_err(err)
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn r(&self) -> usize {
        self.inner.r()
    }

    fn polys(&self) -> Vec<Poly> {
        self.inner.polys().iter().map(|p| Poly { inner: p.clone() }).collect()
    }

    fn digest(&self) -> String {
        self.inner.digest()
    }

    fn to_json(&self) -> PyResult<String> {
        json(&self.inner)
    }

    fn __str__(&self) -> String {
        self.inner.to_string()
    }
}

#[pyfunction]
fn is_prime(n: u64) -> bool {
    vdclab::ff::is_prime(n)
}

#[pyfunction]
fn next_prime(n: u64) -> u64 {
    vdclab::ff::next_prime(n)
}

/// `#{x ∈ box : f(x) = 0}`; the box is given by center and half-widths.
#[pyfunction]
#[pyo3(signature = (inst, center, half, budget=None))]
fn count_box(inst: &Instance, center: Vec<i64>, half: Vec<i64>, budget: Option<u64>) -> PyResult<u64> {
    let bx = BoxZ::new(center, half).map_err(err)?;
    counting::count_box(&inst.inner, &bx, self::budget(budget)).map_err(err)
}

/// `#{x ∈ box : f(x) ≡ 0 mod m}`.
#[pyfunction]
#[pyo3(signature = (inst, center, half, m, budget=None))]
fn count_box_mod(inst: &Instance, center: Vec<i64>, half: Vec<i64>, m: u64, budget: Option<u64>) -> PyResult<u64> {
    let bx = BoxZ::new(center, half).map_err(err)?;
    counting::count_box_mod(&inst.inner, &bx, m, self::budget(budget)).map_err(err)
}

/// Exact decomposition audit on the symmetric box of half-width `b`.
#[pyfunction]
#[pyo3(signature = (inst, b, p, q, census=false, budget=None))]
fn audit(inst: &Instance, b: u64, p: u64, q: u64, census: bool, budget: Option<u64>) -> PyResult<String> {
    let opts = AuditOptions {
        census,
        budget: self::budget(budget),
        ..AuditOptions::default()
    };
    json(&vdc::audit(&inst.inner, b, p, q, &opts).map_err(err)?)
}

#[pyfunction]
fn plan_exponents(n: usize, r: usize) -> (f64, f64) {
    vdc::plan_exponents(n, r)
}

#[pyfunction]
fn thm1_exponent(n: usize, r: usize) -> f64 {
    vdc::thm1_exponent(n, r)
}

#[pyfunction]
#[pyo3(signature = (n, r, b, inst=None, relaxed=false, exact_identity=false))]
fn select_primes(n: usize, r: usize, b: u64, inst: Option<&Instance>, relaxed: bool, exact_identity: bool) -> PyResult<String> {
    let opts = PlanOptions {
        relaxed,
        exact_identity,
        ..PlanOptions::default()
    };
    json(&vdc::select_primes(n, r, b, inst.map(|i| &i.inner), &opts).map_err(err)?)
}

/// Both sides of `N(X, box, q) = q^{-n} Σ_a S₁(a) S₂(a)`.
#[pyfunction]
#[pyo3(signature = (inst, center, half, q, seed=0))]
fn fourier_check(inst: &Instance, center: Vec<i64>, half: Vec<i64>, q: u64, seed: u64) -> PyResult<String> {
    let bx = BoxZ::new(center, half).map_err(err)?;
    let opts = FourierOptions {
        seed,
        ..FourierOptions::default()
    };
    json(&expsum::fourier_inversion_check(&inst.inner, &bx, q, &opts).map_err(err)?)
}

/// `#X(F_q) − q^{n−r}` against the Deligne-type bound.
#[pyfunction]
#[pyo3(signature = (inst, q, budget=None))]
fn hooley_residual(inst: &Instance, q: u64, budget: Option<u64>) -> PyResult<String> {
    let res = counting::hooley_deligne_residual(&inst.inner, q, &DimensionOptions::default(), self::budget(budget)).map_err(err)?;
    json(&res)
}

/// Runs a CLI config; returns the report JSON (nothing is written to disk).
#[pyfunction]
#[pyo3(signature = (path, seed=None, budget=None))]
fn run_config(path: &str, seed: Option<u64>, budget: Option<u64>) -> PyResult<String> {
    let mut cfg = ExperimentConfig::load(path).map_err(err)?;
    if seed.is_some() {
        cfg.seed = seed;
    }
    if budget.is_some() {
        cfg.budget = budget;
    }
    Ok(harness::run(&cfg).map_err(err)?.report.to_json())
}

#[pymodule]
fn pyvdclab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Poly>()?;
    m.add_class::<Instance>()?;
    m.add_function(wrap_pyfunction!(is_prime, m)?)?;
    m.add_function(wrap_pyfunction!(next_prime, m)?)?;
    m.add_function(wrap_pyfunction!(count_box, m)?)?;
    m.add_function(wrap_pyfunction!(count_box_mod, m)?)?;
    m.add_function(wrap_pyfunction!(audit, m)?)?;
    m.add_function(wrap_pyfunction!(plan_exponents, m)?)?;
    m.add_function(wrap_pyfunction!(thm1_exponent, m)?)?;
    m.add_function(wrap_pyfunction!(select_primes, m)?)?;
    m.add_function(wrap_pyfunction!(fourier_check, m)?)?;
    m.add_function(wrap_pyfunction!(hooley_residual, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    m.add("__version__", vdclab::harness::VERSION)?;
    Ok(())
}
