//! Python bindings. Reports come back as plain dicts (via their JSON form);
//! wave packets as a `GridFunction` class.

use std::sync::{Arc, Mutex};

use hypflow_core::airy;
use hypflow_core::branching::{compute_branch, estimate_c0, growth_rate, BranchOptions, RateInputs};
use hypflow_core::classifier::{classify as classify_core, Classification, ClassifyOptions, Regime};
use hypflow_core::linalg::c;
use hypflow_core::pde_sim::{
    run_instability_experiment, witness_direction, ExperimentOptions, ExperimentSetup, HadamardParams,
};
use hypflow_core::registry::{self, ExampleInstance, ExampleParams};
use hypflow_core::semiclassical::{self as sc, Cutoff, SymbolSampler, WavePacketSpec};
use hypflow_core::symbolic_flow::{
    flow_setup, integrate_symbolic_flow, verify_lower_bound, verify_upper_bound, FlowConfig,
};
use hypflow_core::{HypError, C64};
use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(hypflow, ConfigError, PyValueError, "Invalid input or violated parameter gate.");
create_exception!(hypflow, NumericalError, PyRuntimeError, "Numerical failure.");

fn err(e: HypError) -> PyErr {
    if e.is_config() {
        ConfigError::new_err(e.to_string())
    } else {
        NumericalError::new_err(e.to_string())
    }
}

fn to_py<'py, T: serde::Serialize>(py: Python<'py>, v: &T) -> PyResult<Bound<'py, PyAny>> {
    let s = serde_json::to_string(v).map_err(|e| NumericalError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (s,))
}

fn params(kw: Option<&Bound<'_, PyDict>>) -> PyResult<ExampleParams> {
    let Some(kw) = kw else { return Ok(ExampleParams::default()) };
    let mut p = ExampleParams::default();
    for (k, v) in kw.iter() {
        let key: String = k.extract()?;
        let val: f64 = v.extract()?;
        match key.as_str() {
            "alpha" => p.alpha = Some(val),
            "c" => p.c = Some(val),
            "F2" | "f2" => p.f2 = Some(val),
            "a" => p.a = Some(val),
            "sign" => p.sign = Some(val),
            "miss" => p.miss = Some(val),
            _ => return Err(ConfigError::new_err(format!("unknown example parameter '{key}'"))),
        }
    }
    Ok(p)
}

fn instance_and_class(example: &str, state: Option<&str>, kw: Option<&Bound<'_, PyDict>>) -> PyResult<(ExampleInstance, Classification)> {
    let inst = registry::build(example, state, &params(kw)?).map_err(err)?;
    let cl = classify_core(inst.family.as_ref(), &inst.region, &ClassifyOptions::default()).map_err(err)?;
    Ok((inst, cl))
}

/// (γ⁻, γ⁺) at the witness of a transition or elliptic verdict.
fn rates(inst: &ExampleInstance, cl: &Classification, delta: f64) -> Result<(f64, f64), HypError> {
    let w = cl.witness.as_ref().ok_or_else(|| HypError::InvalidInput("classification has no witness".into()))?;
    match cl.regime {
        Regime::Elliptic => {
            let c0 = estimate_c0(inst.family.as_ref(), &w.x, &w.xi, delta, 16)?;
            growth_rate(cl, &RateInputs { f0: None, c0, offset: 0.0 })
        }
        _ => {
            let b = compute_branch(inst.family.as_ref(), &w.x, &w.xi, Some(w.lambda.re), &BranchOptions::default())?;
            growth_rate(cl, &RateInputs { f0: Some(b.f0), ..Default::default() })
        }
    }
}

/// Names and states of the built-in examples.
#[pyfunction]
fn list_examples<'py>(py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &registry::registry())
}

/// Classify an example's linearization; parameters go in as keywords (alpha, c, F2, a, sign, miss).
#[pyfunction]
#[pyo3(signature = (example, state=None, **kw))]
fn classify<'py>(py: Python<'py>, example: &str, state: Option<&str>, kw: Option<&Bound<'py, PyDict>>) -> PyResult<Bound<'py, PyAny>> {
    let (inst, cl) = instance_and_class(example, state, kw)?;
    let d = to_py(py, &cl)?;
    d.set_item("expected", to_py(py, &inst.expected)?)?;
    Ok(d)
}

/// Branching data and growth rates at the classification witness.
#[pyfunction]
#[pyo3(signature = (example, state=None, delta=0.5, **kw))]
fn branch<'py>(py: Python<'py>, example: &str, state: Option<&str>, delta: f64, kw: Option<&Bound<'py, PyDict>>) -> PyResult<Bound<'py, PyAny>> {
    let (inst, cl) = instance_and_class(example, state, kw)?;
    let out = PyDict::new(py);
    out.set_item("regime", cl.regime.label())?;
    out.set_item("ell", cl.ell)?;
    out.set_item("h", cl.h)?;
    if let Some(w) = &cl.witness {
        out.set_item("lambda", w.lambda)?;
        if matches!(cl.regime, Regime::NonSemisimpleTransition | Regime::SemisimpleTransition) {
            let b = compute_branch(inst.family.as_ref(), &w.x, &w.xi, Some(w.lambda.re), &BranchOptions::default()).map_err(err)?;
            out.set_item("branch", to_py(py, &b)?)?;
        }
    }
    if cl.ell.is_some() {
        let (gm, gp) = py.detach(|| rates(&inst, &cl, delta)).map_err(err)?;
        out.set_item("gamma_minus", gm)?;
        out.set_item("gamma_plus", gp)?;
    }
    Ok(out.into_any())
}

/// Integrate the symbolic flow at the witness and check the envelopes.
#[pyfunction]
#[pyo3(signature = (example, eps, state=None, t_star=3.0, samples=40, gamma_minus=None, gamma_plus=None, **kw))]
#[allow(clippy::too_many_arguments)]
fn flow<'py>(
    py: Python<'py>,
    example: &str,
    eps: f64,
    state: Option<&str>,
    t_star: f64,
    samples: usize,
    gamma_minus: Option<f64>,
    gamma_plus: Option<f64>,
    kw: Option<&Bound<'py, PyDict>>,
) -> PyResult<Bound<'py, PyAny>> {
    let (inst, cl) = instance_and_class(example, state, kw)?;
    let samples = samples.max(1);
    let (res, up, lo) = py
        .detach(|| -> Result<_, HypError> {
            let fs = flow_setup(inst.family.clone(), &cl, eps, (gamma_minus, gamma_plus))?;
            let fc = FlowConfig::new(eps, fs.ell, t_star)?;
            let tm = fc.t_max();
            let ts: Vec<f64> = (0..=samples).map(|i| tm * i as f64 / samples as f64).collect();
            let res = integrate_symbolic_flow(&|t| fs.sampler.eval(t), &fc, 0.0, tm, &ts)?;
            let up = verify_upper_bound(&res, &fs.envelope, eps, fs.zeta);
            let lo = verify_lower_bound(&[(res.last().clone(), fs.ebar.clone())], &fs.envelope, 0.0, tm, eps, fs.zeta);
            Ok((res, up, lo))
        })
        .map_err(err)?;
    let out = PyDict::new(py);
    out.set_item("times", res.times.clone())?;
    out.set_item("frobenius_norms", res.s.iter().map(|s| s.norm()).collect::<Vec<_>>())?;
    out.set_item("liouville_residual", res.liouville_residual)?;
    out.set_item("steps", res.steps)?;
    out.set_item("upper", to_py(py, &up)?)?;
    out.set_item("lower", to_py(py, &lo)?)?;
    Ok(out.into_any())
}

/// Ai(z) and Ai′(z).
#[pyfunction]
fn airy_ai(z: C64) -> PyResult<(C64, C64)> {
    let v = airy::airy_ai(z).map_err(err)?;
    Ok((v.ai, v.aip))
}

/// Wronskian of the Airy pair used by the model flow at τ.
#[pyfunction]
fn wronskian(tau: f64) -> PyResult<C64> {
    airy::wronskian(tau).map_err(err)
}

#[pyfunction]
fn wronskian_exact() -> C64 {
    airy::wronskian_exact()
}

/// Samples of a vector-valued function on a periodic grid.
#[pyclass(name = "GridFunction", module = "hypflow", skip_from_py_object)]
#[derive(Clone)]
struct PyGrid {
    inner: sc::GridFunction,
}

#[pymethods]
impl PyGrid {
    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }
    #[getter]
    fn lo(&self) -> f64 {
        self.inner.lo
    }
    #[getter]
    fn length(&self) -> f64 {
        self.inner.length
    }
    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn xs(&self) -> Vec<f64> {
        self.inner.xs()
    }
    /// One list of complex samples per component.
    fn components(&self) -> Vec<Vec<C64>> {
        self.inner.comps.clone()
    }
    fn l2_norm(&self) -> f64 {
        self.inner.l2_norm()
    }
    fn sup_norm(&self) -> f64 {
        self.inner.sup_norm()
    }
    fn __sub__(&self, other: &PyGrid) -> PyResult<PyGrid> {
        Ok(PyGrid { inner: self.inner.sub(&other.inner).map_err(err)? })
    }
    fn to_bytes(&self) -> PyResult<Vec<u8>> {
        let mut b = vec![];
        self.inner.write_binary(&mut b).map_err(err)?;
        Ok(b)
    }
    #[staticmethod]
    fn from_bytes(b: Vec<u8>) -> PyResult<PyGrid> {
        Ok(PyGrid { inner: sc::GridFunction::read_binary(b.as_slice()).map_err(err)? })
    }
    fn __repr__(&self) -> String {
        format!("GridFunction(n={}, dim={}, lo={}, length={})", self.inner.n, self.inner.dim(), self.inner.lo, self.inner.length)
    }
}

/// ε^K Re(e^{iyξ₀/ε^h} θ(y) ē) on [−length/2, length/2) with n nodes (power of two).
#[pyfunction]
#[pyo3(signature = (eps, h, ebar, n, length=16.0, k=0.0, xi0=1.0, radius=1.0, cutoff="plateau"))]
#[allow(clippy::too_many_arguments)]
fn build_wavepacket(eps: f64, h: f64, ebar: Vec<C64>, n: usize, length: f64, k: f64, xi0: f64, radius: f64, cutoff: &str) -> PyResult<PyGrid> {
    let cutoff = match cutoff {
        "plateau" => Cutoff::Plateau,
        "bump" => Cutoff::Bump,
        other => return Err(ConfigError::new_err(format!("unknown cutoff '{other}'"))),
    };
    let spec = WavePacketSpec { k, xi0, center: 0.0, cutoff, radius, ebar, eps, h, q_inverse: None };
    Ok(PyGrid { inner: sc::build_wavepacket(&spec, -length / 2.0, length, n).map_err(err)? })
}

/// Python symbol ξ ↦ a(ξ) as a Fourier multiplier; the first Python error is kept.
fn py_multiplier(f: Py<PyAny>, slot: Arc<Mutex<Option<PyErr>>>) -> SymbolSampler {
    SymbolSampler::multiplier(move |xi| {
        Python::attach(|py| match f.call1(py, (xi,)).and_then(|v| v.extract::<C64>(py)) {
            Ok(v) => v,
            Err(e) => {
                slot.lock().unwrap().get_or_insert(e);
                c(f64::NAN)
            }
        })
    })
}

fn take(slot: &Arc<Mutex<Option<PyErr>>>) -> PyResult<()> {
    match slot.lock().unwrap().take() {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

/// op_ε(a)u for a multiplier a(ξ) given as a Python callable.
#[pyfunction]
fn op_eps_multiplier(symbol: Py<PyAny>, u: &PyGrid, eps: f64, h: f64) -> PyResult<PyGrid> {
    let slot = Arc::new(Mutex::new(None));
    let a = py_multiplier(symbol, slot.clone());
    let out = sc::op_eps_apply(&a, &u.inner, eps, h).map_err(err)?;
    take(&slot)?;
    Ok(PyGrid { inner: out })
}

/// ‖op_ε(a)op_ε(b)u − op_ε(ab)u‖/‖u‖ for multipliers a, b.
#[pyfunction]
fn composition_residual(a: Py<PyAny>, b: Py<PyAny>, u: &PyGrid, eps: f64, h: f64) -> PyResult<f64> {
    let slot = Arc::new(Mutex::new(None));
    let (sa, sb) = (py_multiplier(a, slot.clone()), py_multiplier(b, slot.clone()));
    let r = sc::composition_residual(&sa, &sb, eps, h, &u.inner).map_err(err)?;
    take(&slot)?;
    Ok(r)
}

#[pyfunction]
fn eps_sobolev_norm(u: &PyGrid, s: f64, eps: f64, h: f64) -> f64 {
    sc::eps_sobolev_norm(&u.inner, s, eps, h)
}

/// Hadamard instability experiment over an ε ladder. Examples without a
/// transition (controls) need explicit `h` and `gamma_minus`.
#[pyfunction]
#[pyo3(signature = (example, eps_ladder, state=None, K=3.0, alpha=1.0, m=1.25, delta=0.5, t_star=9.0, h=None, gamma_minus=None, length=4.0, xi0=1.0, dt_scale=1.0, **kw))]
#[allow(non_snake_case, clippy::too_many_arguments)]
fn simulate<'py>(
    py: Python<'py>,
    example: &str,
    eps_ladder: Vec<f64>,
    state: Option<&str>,
    K: f64,
    alpha: f64,
    m: f64,
    delta: f64,
    t_star: f64,
    h: Option<f64>,
    gamma_minus: Option<f64>,
    length: f64,
    xi0: f64,
    dt_scale: f64,
    kw: Option<&Bound<'py, PyDict>>,
) -> PyResult<Bound<'py, PyAny>> {
    let (inst, cl) = instance_and_class(example, state, kw)?;
    let (sys, phi) = match (&inst.system, &inst.reference) {
        (Some(s), Some(p)) => (s.clone(), p.clone()),
        _ => return Err(ConfigError::new_err(format!("example '{example}' has no evolution equations"))),
    };
    let report = py
        .detach(|| -> Result<_, HypError> {
            let none = || HypError::InvalidInput(format!("a {} verdict needs explicit h and gamma_minus", cl.regime.label()));
            let h = h.or(cl.h).ok_or_else(none)?;
            let gm = match gamma_minus {
                Some(g) => g,
                None if cl.ell.is_some() => rates(&inst, &cl, delta)?.0,
                None => return Err(none()),
            };
            let params = HadamardParams::new(K, alpha, m, delta, t_star, h, gm)?;
            let (x0, sign, ebar) = match &cl.witness {
                Some(w) if cl.ell.is_some() => (w.x[0], w.xi[0].signum(), witness_direction(inst.family.as_ref(), w)?),
                _ => {
                    let mut e = vec![0.0; inst.family.dim()];
                    e[0] = 1.0;
                    (0.0, 1.0, e)
                }
            };
            let setup = ExperimentSetup { x0, xi0: xi0 * sign, ebar, h, gamma_minus: gm, length, cutoff: Cutoff::Plateau };
            let opts = ExperimentOptions { dt_scale, ..Default::default() };
            run_instability_experiment(&sys, &phi, &setup, &params, &eps_ladder, &opts)
        })
        .map_err(err)?;
    to_py(py, &report)
}

#[pymodule]
fn hypflow(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", hypflow_core::VERSION)?;
    m.add("ConfigError", m.py().get_type::<ConfigError>())?;
    m.add("NumericalError", m.py().get_type::<NumericalError>())?;
    m.add_class::<PyGrid>()?;
    m.add_function(wrap_pyfunction!(list_examples, m)?)?;
    m.add_function(wrap_pyfunction!(classify, m)?)?;
    m.add_function(wrap_pyfunction!(branch, m)?)?;
    m.add_function(wrap_pyfunction!(flow, m)?)?;
    m.add_function(wrap_pyfunction!(airy_ai, m)?)?;
    m.add_function(wrap_pyfunction!(wronskian, m)?)?;
    m.add_function(wrap_pyfunction!(wronskian_exact, m)?)?;
    m.add_function(wrap_pyfunction!(build_wavepacket, m)?)?;
    m.add_function(wrap_pyfunction!(op_eps_multiplier, m)?)?;
    m.add_function(wrap_pyfunction!(composition_residual, m)?)?;
    m.add_function(wrap_pyfunction!(eps_sobolev_norm, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    Ok(())
}
