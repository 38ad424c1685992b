//! Python bindings. Scenarios travel as scenario-file JSON; reports come back
//! as JSON strings.

use std::collections::BTreeMap;

use protocheck::car::check_any;
use protocheck::scenarios::{build, Built};
use protocheck::update::apply_rule;
use protocheck::{
    compare, parse_scenario, Error, Observation, ObservationAlphabet, Protocol, Rational, Scenario, ScenarioFile,
    SolverOptions, UpdateRule,
};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::NoConvergence { .. } => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn to_json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("report serializes")
}

fn protocol(s: &Scenario) -> PyResult<&Protocol> {
    s.protocol.as_ref().ok_or_else(|| PyValueError::new_err("scenario has no kernel"))
}

/// Scenario-file JSON for a built-in scenario; parameters are `"p/q"` strings.
#[pyfunction]
#[pyo3(signature = (name, params=None))]
fn build_scenario(name: &str, params: Option<BTreeMap<String, String>>) -> PyResult<String> {
    let params = params
        .unwrap_or_default()
        .into_iter()
        .map(|(k, v)| Ok((k, v.parse::<Rational>().map_err(Error::from)?)))
        .collect::<Result<BTreeMap<_, _>, Error>>()
        .map_err(py_err)?;
    let file = match build(name, &params).map_err(py_err)? {
        Built::Protocol(p) => ScenarioFile::from_protocol(&p),
        Built::Update { prior, name, observation } => {
            let alphabet = ObservationAlphabet::new(vec![(name, observation)]).map_err(py_err)?;
            ScenarioFile::from_prior(&prior, &alphabet)
        }
    };
    Ok(file.to_json())
}

/// Updates the scenario's prior on observation `obs` (the only one if omitted).
#[pyfunction]
#[pyo3(signature = (scenario, obs=None, rule=None, tol=1e-9))]
fn update(scenario: &str, obs: Option<&str>, rule: Option<&str>, tol: f64) -> PyResult<String> {
    let s = parse_scenario(scenario).map_err(py_err)?;
    let o = match obs {
        Some(name) => s.alphabet.index_of(name).map_err(py_err)?,
        None if s.alphabet.len() == 1 => 0,
        None => return Err(PyValueError::new_err("several observations; pass obs")),
    };
    let observation = &s.alphabet.items()[o];
    let rule = match rule {
        Some(r) => r.parse::<UpdateRule>().map_err(PyValueError::new_err)?,
        None => match observation {
            Observation::Event(_) => UpdateRule::NaiveConditioning,
            Observation::Jeffrey(_) => UpdateRule::JeffreyConditioning,
            Observation::Constraint(_) => UpdateRule::Mre,
        },
    };
    let opts = SolverOptions { tol, ..SolverOptions::default() };
    Ok(to_json(&apply_rule(rule, &s.prior, observation, &opts).map_err(py_err)?))
}

/// CAR reports for every observation that can occur.
#[pyfunction]
fn check_car(scenario: &str) -> PyResult<String> {
    let s = parse_scenario(scenario).map_err(py_err)?;
    let p = protocol(&s)?;
    let reports = (0..p.alphabet().len())
        .filter(|&o| !p.marginal_observations()[o].is_zero())
        .map(|o| check_any(p, o))
        .collect::<Result<Vec<_>, _>>()
        .map_err(py_err)?;
    Ok(to_json(&reports))
}

/// Naive-versus-sophisticated comparison for every observation that can occur.
#[pyfunction]
#[pyo3(signature = (scenario, tol=1e-9))]
fn audit(scenario: &str, tol: f64) -> PyResult<String> {
    let s = parse_scenario(scenario).map_err(py_err)?;
    let p = protocol(&s)?;
    let opts = SolverOptions { tol, ..SolverOptions::default() };
    let reports = (0..p.alphabet().len())
        .filter(|&o| !p.marginal_observations()[o].is_zero())
        .map(|o| {
            let rule = match p.alphabet().items()[o] {
                Observation::Event(_) => UpdateRule::NaiveConditioning,
                Observation::Jeffrey(_) => UpdateRule::JeffreyConditioning,
                Observation::Constraint(_) => UpdateRule::Mre,
            };
            compare(p, o, rule, &opts)
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(py_err)?;
    Ok(to_json(&reports))
}

/// `(world, observation)` index pairs of `n` sampled runs.
#[pyfunction]
fn sample_runs(scenario: &str, seed: u64, n: usize) -> PyResult<Vec<(usize, usize)>> {
    let s = parse_scenario(scenario).map_err(py_err)?;
    Ok(protocol(&s)?.sample_runs(seed, n).into_iter().map(|r| (r.world, r.observation)).collect())
}

#[pymodule]
fn protocheck_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(build_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(update, m)?)?;
    m.add_function(wrap_pyfunction!(check_car, m)?)?;
    m.add_function(wrap_pyfunction!(audit, m)?)?;
    m.add_function(wrap_pyfunction!(sample_runs, m)?)?;
    Ok(())
}
