//! Python module `hanfkit_py`: thin wrappers over the core crate. Structures
//! are passed in the line format (`universe N`, `rel E 2`, `E 0 1`, ...);
//! assignments are dicts from variable name to int, number variables keep
//! their `%` prefix.

use std::collections::BTreeMap;

use pyo3::exceptions::{PyMemoryError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use hanfkit::error::Error;
use hanfkit::evalsem::{Assignment, Evaluator};
use hanfkit::formula::{
    infer_signature, metrics as formula_metrics, parse_with, print, Expr, PredicateCollection,
    Signature,
};
use hanfkit::hnf::{simplify, to_hnf};
use hanfkit::modelcheck::{hanf_tuple as core_hanf_tuple, model_check as core_model_check};
use hanfkit::richness::{
    find_gap as core_find_gap, large_gaps_witness as core_witness, smallest_q,
};
use hanfkit::structures::Structure;
use hanfkit::typecat::CatalogStore;
use hanfkit::BigInt;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::ResourceCap(m) => PyMemoryError::new_err(format!("resource cap exceeded: {m}")),
        Error::Oracle(m) => PyRuntimeError::new_err(format!("oracle failure: {m}")),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn signature(text: &str, sig: Option<&str>) -> PyResult<Signature> {
    match sig {
        Some(s) => Signature::parse(s),
        None => infer_signature(text),
    }
    .map_err(py_err)
}

fn formula(text: &str, sig: &Signature, preds: &PredicateCollection) -> PyResult<Expr> {
    let store = CatalogStore::global();
    parse_with(text, sig, preds, &store.resolver(sig)).map_err(py_err)
}

/// Parses formula and structure over the union of their signatures.
fn pair(text: &str, structure: &str, preds: &PredicateCollection) -> PyResult<(Expr, Structure)> {
    let base = signature(text, None)?;
    let s = Structure::parse(structure, Some(&base)).map_err(py_err)?;
    let phi = formula(text, s.sig(), preds)?;
    Ok((phi, s))
}

fn assignment(values: Option<BTreeMap<String, i64>>, s: &Structure) -> PyResult<Assignment> {
    let mut a = Assignment::new();
    for (var, v) in values.unwrap_or_default() {
        if let Some(nv) = var.strip_prefix('%') {
            a = a.set_num(nv, v);
        } else {
            let e = usize::try_from(v).ok().filter(|&e| e < s.size());
            let e = e.ok_or_else(|| {
                PyValueError::new_err(format!("{var}={v} is outside the universe"))
            })?;
            a = a.set(&var, e);
        }
    }
    Ok(a)
}

/// (size, nqr, br, bw, free structure vars, free number vars).
#[pyfunction]
#[pyo3(signature = (text, sig=None))]
pub fn metrics(
    text: &str,
    sig: Option<&str>,
) -> PyResult<(usize, usize, usize, usize, Vec<String>, Vec<String>)> {
    let preds = PredicateCollection::new();
    let s = signature(text, sig)?;
    let m = formula_metrics(&formula(text, &s, &preds)?);
    Ok((
        m.size,
        m.nqr,
        m.br,
        m.bw,
        m.free_struct.into_iter().collect(),
        m.free_num.into_iter().collect(),
    ))
}

/// Direct evaluation of a formula.
#[pyfunction]
#[pyo3(signature = (text, structure, assign=None))]
pub fn evaluate(
    text: &str,
    structure: &str,
    assign: Option<BTreeMap<String, i64>>,
) -> PyResult<bool> {
    let preds = PredicateCollection::new();
    let (phi, s) = pair(text, structure, &preds)?;
    let a = assignment(assign, &s)?;
    Evaluator::new(&s, &preds).holds(&phi, &a).map_err(py_err)
}

/// Hanf normal form as s-expression text.
#[pyfunction]
#[pyo3(signature = (text, degree=2, simplified=false, sig=None))]
pub fn hnf(text: &str, degree: usize, simplified: bool, sig: Option<&str>) -> PyResult<String> {
    let preds = PredicateCollection::new();
    let s = signature(text, sig)?;
    let phi = formula(text, &s, &preds)?;
    let h = to_hnf(&phi, degree, &s, &preds).map_err(py_err)?;
    Ok(print(&if simplified {
        simplify(&h.expr, &preds)
    } else {
        h.expr
    }))
}

/// Model check through the compiled normal form.
#[pyfunction]
#[pyo3(signature = (text, structure, assign=None))]
pub fn model_check(
    text: &str,
    structure: &str,
    assign: Option<BTreeMap<String, i64>>,
) -> PyResult<bool> {
    let preds = PredicateCollection::new();
    let (phi, s) = pair(text, structure, &preds)?;
    let a = assignment(assign, &s)?;
    core_model_check(&phi, &s, &a, &preds).map_err(py_err)
}

/// Nonzero entries of the Hanf tuple as {type id: count}.
#[pyfunction]
pub fn hanf_tuple(structure: &str, r: usize, d: usize) -> PyResult<BTreeMap<String, u64>> {
    let s = Structure::parse(structure, None).map_err(py_err)?;
    let t = core_hanf_tuple(&s, r, d).map_err(py_err)?;
    Ok(t.nonzero()
        .into_iter()
        .map(|(id, c)| (id.to_string(), c))
        .collect())
}

/// (x, q, verified) for the large-gaps construction; q defaults to the smallest admissible value.
#[pyfunction]
#[pyo3(signature = (j, s, b, q=None))]
pub fn large_gaps_witness(
    j: usize,
    s: usize,
    b: u64,
    q: Option<u64>,
) -> PyResult<(Vec<i128>, u64, bool)> {
    let q = match q {
        Some(q) => q,
        None => smallest_q(j, s, b).map_err(py_err)?,
    };
    let w = core_witness(j, s, b, q).map_err(py_err)?;
    let ok = w.verified();
    Ok((w.x, w.q, ok))
}

/// Smallest large gap of a unary built-in predicate inside [0, window].
#[pyfunction]
#[pyo3(signature = (predicate, window, k=2))]
pub fn find_gap(predicate: &str, window: u64, k: u64) -> PyResult<Option<u64>> {
    let preds = PredicateCollection::new();
    if preds.arity(predicate) != Some(1) {
        return Err(PyValueError::new_err(format!(
            "{predicate} is not a unary predicate"
        )));
    }
    core_find_gap(&|v| preds.holds(predicate, &[BigInt::from(v)]), window, k).map_err(py_err)
}

#[pymodule]
fn hanfkit_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(metrics, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(hnf, m)?)?;
    m.add_function(wrap_pyfunction!(model_check, m)?)?;
    m.add_function(wrap_pyfunction!(hanf_tuple, m)?)?;
    m.add_function(wrap_pyfunction!(large_gaps_witness, m)?)?;
    m.add_function(wrap_pyfunction!(find_gap, m)?)?;
    Ok(())
}
