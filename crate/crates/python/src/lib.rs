//! Python bindings for `rna-channel`.
//!
//! Configurations cross the boundary as the same `key = value` text the
//! CLI reads, so Python scripts and config files stay interchangeable.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyBytes, PyDict};
use rand::SeedableRng;

use rna_channel::config::{preset_runs, render_csv, row_values, ExperimentConfig, Preset, CSV_COLUMNS};
use rna_channel::{self as core, Composition, ErrorCounts, ErrorRates, KineticParams, NucleotideString};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn counts_dict<'py>(py: Python<'py>, e: &ErrorCounts) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("insertions", e.insertions)?;
    d.set_item("deletions", e.deletions)?;
    d.set_item("substitutions", e.substitutions)?;
    d.set_item("per_letter_deletions", e.per_letter_deletions.to_vec())?;
    Ok(d)
}

/// Encode bytes as an A/C/G/U string.
#[pyfunction]
fn encode(data: &[u8]) -> String {
    core::encode_bytes(data).to_string()
}

/// Decode an A/C/G/U string. Raises ValueError on framing errors.
#[pyfunction]
fn decode<'py>(py: Python<'py>, sequence: &str) -> PyResult<Bound<'py, PyBytes>> {
    let s: NucleotideString = sequence.parse().map_err(value_err)?;
    let bytes = core::decode_bytes(&s).map_err(value_err)?;
    Ok(PyBytes::new(py, &bytes))
}

#[pyfunction]
fn erasure_bound(p_d: f64) -> PyResult<f64> {
    core::erasure_bound(p_d).map_err(value_err)
}

/// Least-squares line through `(times, values)`; returns `(slope, intercept, r_squared)`.
#[pyfunction]
fn fit_linear(times: Vec<f64>, values: Vec<f64>) -> PyResult<(f64, f64, f64)> {
    if times.len() != values.len() {
        return Err(PyValueError::new_err("times and values differ in length"));
    }
    let pts: Vec<_> = times.into_iter().zip(values).collect();
    let f = core::fit_linear(&pts).map_err(value_err)?;
    Ok((f.slope, f.intercept, f.r_squared))
}

/// `(mean, variance)` of the replication time of a strand with composition
/// `(n_A, n_C, n_G, n_U)`. `var_time` defaults to the squared means.
#[pyfunction]
#[pyo3(signature = (composition, mean_time, var_time=None))]
fn replication_time_stats(
    composition: [u64; 4],
    mean_time: [f64; 4],
    var_time: Option<[f64; 4]>,
) -> PyResult<(f64, f64)> {
    let k = match var_time {
        Some(v) => KineticParams::new(mean_time, v),
        None => KineticParams::from_means(mean_time),
    }
    .map_err(value_err)?;
    let s = core::replication_time_stats(&Composition(composition), &k);
    Ok((s.mean, s.variance))
}

/// One noisy copy of `sequence`; returns `(copy, error_counts)`.
#[pyfunction]
#[pyo3(signature = (sequence, p_ins, p_del, p_sub, seed=0))]
fn mutate_sequence<'py>(
    py: Python<'py>,
    sequence: &str,
    p_ins: f64,
    p_del: f64,
    p_sub: f64,
    seed: u64,
) -> PyResult<(String, Bound<'py, PyDict>)> {
    let s: NucleotideString = sequence.parse().map_err(value_err)?;
    let rates = ErrorRates::new(p_ins, p_del, p_sub).map_err(value_err)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let (out, counts) = core::mutate_sequence(&s, &rates, &mut rng);
    Ok((out.to_string(), counts_dict(py, &counts)?))
}

/// Parses configuration text and returns it normalised with every key.
#[pyfunction]
fn normalize_config(text: &str) -> PyResult<String> {
    Ok(ExperimentConfig::parse(text).map_err(value_err)?.to_text())
}

/// Configuration texts for a figure preset, as `[(name, text), ...]`.
#[pyfunction]
#[pyo3(signature = (preset, scale=1.0))]
fn preset_configs(preset: &str, scale: f64) -> PyResult<Vec<(String, String)>> {
    let p: Preset = preset.parse().map_err(PyValueError::new_err)?;
    Ok(preset_runs(p, scale).map_err(value_err)?.into_iter().map(|r| (r.name, r.config.to_text())).collect())
}

/// Runs an experiment. Returns a dict with `columns`, `rows` (one list of
/// floats per checkpoint, same order as the CSV output) and `csv`.
#[pyfunction]
#[pyo3(signature = (config_text, threads=None))]
fn run_experiment<'py>(py: Python<'py>, config_text: &str, threads: Option<usize>) -> PyResult<Bound<'py, PyDict>> {
    let cfg = ExperimentConfig::parse(config_text).map_err(value_err)?;
    let exp = py.detach(|| core::run_experiment(&cfg.sim, threads)).map_err(value_err)?;
    let rows: Vec<[f64; 19]> = exp.aggregate.iter().map(row_values).collect();
    let d = PyDict::new(py);
    d.set_item("columns", CSV_COLUMNS.to_vec())?;
    d.set_item("rows", rows)?;
    d.set_item("csv", render_csv(&cfg, &exp.aggregate))?;
    Ok(d)
}

/// Sends `message` through the replication channel described by
/// `config_text` (sequence representation) and reports what one randomly
/// chosen strand decodes to.
#[pyfunction]
fn corrupt_message<'py>(py: Python<'py>, message: &[u8], config_text: &str) -> PyResult<Bound<'py, PyDict>> {
    let cfg = ExperimentConfig::parse(config_text).map_err(value_err)?;
    let r = core::corrupt_message_demo(message, &cfg.sim).map_err(value_err)?;
    let d = PyDict::new(py);
    d.set_item("sent", r.sent.to_string())?;
    d.set_item("received", r.received.to_string())?;
    d.set_item("generation", r.generation)?;
    d.set_item("errors", counts_dict(py, &r.errors)?)?;
    match &r.decoded {
        Ok(bytes) => {
            d.set_item("decoded", PyBytes::new(py, bytes))?;
            d.set_item("framing_error", py.None())?;
        }
        Err(e) => {
            d.set_item("decoded", py.None())?;
            d.set_item("framing_error", e.to_string())?;
        }
    }
    d.set_item("mismatched_positions", r.mismatched_positions.clone())?;
    d.set_item("corrupted_bytes", r.corrupted_bytes.clone())?;
    Ok(d)
}

#[pymodule]
#[pyo3(name = "rna_channel")]
fn rna_channel_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(encode, m)?)?;
    m.add_function(wrap_pyfunction!(decode, m)?)?;
    m.add_function(wrap_pyfunction!(erasure_bound, m)?)?;
    m.add_function(wrap_pyfunction!(fit_linear, m)?)?;
    m.add_function(wrap_pyfunction!(replication_time_stats, m)?)?;
    m.add_function(wrap_pyfunction!(mutate_sequence, m)?)?;
    m.add_function(wrap_pyfunction!(normalize_config, m)?)?;
    m.add_function(wrap_pyfunction!(preset_configs, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(corrupt_message, m)?)?;
    Ok(())
}
