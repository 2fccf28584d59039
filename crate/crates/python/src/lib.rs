//! Python bindings: thin wrappers returning plain dicts, lists and floats.

use std::collections::BTreeMap;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use atomtwin::compiler::{compile, parse_text, to_text, AbstractGate, Layout};
use atomtwin::experiments::{self, Backend, GraphSpec, H2Problem, UnitarySpec};
use atomtwin::noise::{self, NoiseParams};
use atomtwin::qsim::{self, SiteCoord};
use atomtwin::{hardware, pulse};

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn backend(ideal: bool) -> Backend {
    if ideal {
        Backend::ideal()
    } else {
        Backend::noisy(NoiseParams::default())
    }
}

/// GHZ preparation and parity analysis; returns fidelity terms.
#[pyfunction]
#[pyo3(signature = (n, shots=2000, seed=1, ideal=true))]
fn ghz<'py>(py: Python<'py>, n: usize, shots: u64, seed: u64, ideal: bool) -> PyResult<Bound<'py, PyDict>> {
    let r = experiments::ghz_experiment(n, shots, 4 * n + 4, &backend(ideal), seed).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("fidelity", r.result.fidelity)?;
    d.set_item("p_all0", r.result.p_all0)?;
    d.set_item("p_all1", r.result.p_all1)?;
    d.set_item("c_n", r.result.c_n)?;
    d.set_item("parities", r.scan.parities)?;
    d.set_item("counts", r.histogram.counts)?;
    Ok(d)
}

/// Register distribution of phase estimation on Z^k (or H2 when `z_power` is None).
#[pyfunction]
#[pyo3(signature = (z_power=None, bits=3, shots=2000, seed=1, ideal=true))]
fn qpe(z_power: Option<f64>, bits: usize, shots: u64, seed: u64, ideal: bool) -> PyResult<BTreeMap<String, f64>> {
    let spec = match z_power {
        Some(k) => UnitarySpec::ZPower(k),
        None => UnitarySpec::H2(H2Problem::reference()),
    };
    let r = experiments::qpe_run(&spec, bits, shots, &backend(ideal), seed).map_err(err)?;
    Ok(r.dist.to_map())
}

#[pyfunction]
fn h2_energy(bits: &str) -> PyResult<f64> {
    experiments::h2_energy(bits, &H2Problem::reference()).map_err(err)
}

/// Ideal QAOA approximation ratio; angles in half turns.
#[pyfunction]
fn qaoa_ratio(graph: &str, betas: Vec<f64>, gammas: Vec<f64>) -> PyResult<f64> {
    let g = GraphSpec::named(graph).ok_or_else(|| err(format!("unknown graph {graph}")))?;
    let r = experiments::qaoa_run(&g, &betas, &gammas, 1000, &Backend::ideal(), 0).map_err(err)?;
    Ok(r.ratio)
}

/// Tunes the C_Z pulse; frequencies in Hz (divided by 2 pi).
#[pyfunction]
fn tune_cz<'py>(py: Python<'py>, omega_hz: f64, blockade_hz: f64) -> PyResult<Bound<'py, PyDict>> {
    let two_pi = 2.0 * std::f64::consts::PI;
    let g = py
        .detach(|| pulse::tune_cz(two_pi * omega_hz, two_pi * blockade_hz))
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    let bell = pulse::bell_test_tuned(&g, 64).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("delta_over_omega", g.pulse.delta / g.pulse.omega_r)?;
    d.set_item("tau_omega_over_2pi", g.pulse.tau * g.pulse.omega_r / two_pi)?;
    d.set_item("xi", g.pulse.xi)?;
    d.set_item("phase_error", g.phases.phase_error())?;
    d.set_item("bell_fidelity", bell.fidelity)?;
    Ok(d)
}

/// Compiles a list of (name, qubits..., angles...) tuples onto the given
/// sites and returns the native text form.
#[pyfunction]
fn compile_program(gates: Vec<(String, Vec<usize>, Vec<f64>)>, sites: Vec<(usize, usize)>) -> PyResult<String> {
    let mut prog = Vec::new();
    for (name, q, a) in gates {
        let g = match (name.as_str(), q.as_slice(), a.as_slice()) {
            ("h", [q], []) => AbstractGate::H(*q),
            ("x", [q], []) => AbstractGate::X(*q),
            ("rz", [q], [t]) => AbstractGate::Rz(*q, *t),
            ("rphi", [q], [phi, theta]) => AbstractGate::Rphi { q: *q, phi: *phi, theta: *theta },
            ("cnot", [c, t], []) => AbstractGate::Cnot { control: *c, target: *t },
            ("cz", [a, b], []) => AbstractGate::Cz(*a, *b),
            ("zz", [a, b], [g]) => AbstractGate::Zz { a: *a, b: *b, gamma: *g },
            ("qft_inverse", reg, []) => AbstractGate::QftInverse(reg.to_vec()),
            _ => return Err(err(format!("bad gate {name} {q:?} {a:?}"))),
        };
        prog.push(g);
    }
    let layout = Layout::new(sites.into_iter().map(|(r, c)| SiteCoord::new(r, c)).collect()).map_err(err)?;
    Ok(to_text(&compile(&prog, &layout).map_err(err)?))
}

/// Exact output distribution of a native circuit in text form.
#[pyfunction]
fn simulate_text(text: &str) -> PyResult<BTreeMap<String, f64>> {
    let c = parse_text(text).map_err(err)?;
    Ok(qsim::probabilities(&qsim::run_ideal(&c).map_err(err)?).to_map())
}

#[pyfunction]
fn spam_correct(raw: f64, n_qubits: u32, per_qubit: f64) -> PyResult<f64> {
    Ok(noise::spam_correct(raw, n_qubits, per_qubit).map_err(err)?.corrected)
}

#[pyfunction]
fn hungarian(cost: Vec<Vec<f64>>) -> PyResult<(Vec<usize>, f64)> {
    let a = hardware::hungarian(&cost).map_err(err)?;
    Ok((a.rows, a.total))
}

#[pyfunction]
fn trap_profile<'py>(py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
    let p = hardware::trap_profile(&hardware::TrapArrayConfig::default()).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("it_ratio", p.it_ratio)?;
    d.set_item("itz_ratio", p.itz_ratio)?;
    d.set_item("f_vib_radial", p.f_vib_radial)?;
    d.set_item("f_vib_axial", p.f_vib_axial)?;
    Ok(d)
}

#[pymodule]
fn pyatomtwin(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(ghz, m)?)?;
    m.add_function(wrap_pyfunction!(qpe, m)?)?;
    m.add_function(wrap_pyfunction!(h2_energy, m)?)?;
    m.add_function(wrap_pyfunction!(qaoa_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(tune_cz, m)?)?;
    m.add_function(wrap_pyfunction!(compile_program, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_text, m)?)?;
    m.add_function(wrap_pyfunction!(spam_correct, m)?)?;
    m.add_function(wrap_pyfunction!(hungarian, m)?)?;
    m.add_function(wrap_pyfunction!(trap_profile, m)?)?;
    Ok(())
}
