//! Python module `qsdse`: design spaces, searches, Pareto fronts and the
//! optimisation passes.

use std::collections::BTreeMap;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use qsdse_core::model::{self, Configuration, CostTable, NetworkSpec};
use qsdse_core::optim::{self, FoldableParams, Histogram, QuantMode, QuantParams, TensorLifetime};
use qsdse_core::pareto::{self, Objectives, ParetoPoint};
use qsdse_core::search::{self, Algorithm, SearchParams};
use qsdse_core::synth::{self, CostProfile, Preset};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

#[pyclass(name = "DesignSpace", module = "qsdse", frozen)]
struct PyDesignSpace {
    inner: model::DesignSpace,
}

#[pymethods]
impl PyDesignSpace {
    /// Builds a space from `network.json` and `costs.json` contents.
    #[staticmethod]
    fn from_json(network_json: &str, costs_json: &str) -> PyResult<Self> {
        let net: NetworkSpec = serde_json::from_str(network_json).map_err(value_err)?;
        let table: CostTable = serde_json::from_str(costs_json).map_err(value_err)?;
        let inner = model::DesignSpace::build(&net, &table).map_err(value_err)?;
        Ok(PyDesignSpace { inner })
    }

    /// Synthetic preset space: squeezenet_like, resnet_like, mobilenet_like or chain.
    #[staticmethod]
    #[pyo3(signature = (name, seed = 0, depth = 8))]
    fn preset(name: &str, seed: u64, depth: usize) -> PyResult<Self> {
        let preset = Preset::from_name(name, depth).map_err(value_err)?;
        Ok(PyDesignSpace { inner: synth::preset_space(preset, seed) })
    }

    #[getter]
    fn depth(&self) -> usize {
        self.inner.depth()
    }

    #[getter]
    fn vertex_count(&self) -> usize {
        self.inner.vertex_count()
    }

    #[getter]
    fn edge_count(&self) -> usize {
        self.inner.edge_count()
    }

    #[getter]
    fn space_size(&self) -> f64 {
        self.inner.space_size()
    }

    #[getter]
    fn is_chain(&self) -> bool {
        self.inner.is_chain()
    }

    fn layer_ids(&self) -> Vec<String> {
        self.inner.layers().iter().map(|l| l.id.clone()).collect()
    }

    fn impl_ids(&self, layer: &str) -> PyResult<Vec<String>> {
        let i = self.inner.layer_index(layer).ok_or_else(|| value_err(format!("unknown layer {layer}")))?;
        Ok(self.inner.impls(i).iter().map(|m| m.id.clone()).collect())
    }

    /// Returns `(latency_ms, memory_bytes)` of a full configuration.
    fn evaluate(&self, config: BTreeMap<String, String>) -> PyResult<(f64, u64)> {
        let m = self.inner.evaluate(&Configuration { assignment: config }).map_err(value_err)?;
        Ok((m.latency_ms, m.memory_bytes))
    }

    #[pyo3(signature = (algorithm, episodes = 1000, seed = 0, alpha = 0.05, gamma = 0.9, replay_batch = 32))]
    fn search(
        &self,
        algorithm: &str,
        episodes: usize,
        seed: u64,
        alpha: f64,
        gamma: f64,
        replay_batch: usize,
    ) -> PyResult<PySearchReport> {
        let alg: Algorithm = algorithm.parse().map_err(value_err)?;
        let params = SearchParams {
            total_episodes: episodes,
            alpha,
            gamma,
            replay_batch,
            seed,
            ..SearchParams::default()
        };
        let inner = search::run(alg, &self.inner, &params, search::DEFAULT_BRUTE_CAP).map_err(runtime_err)?;
        Ok(PySearchReport { inner })
    }

    fn __repr__(&self) -> String {
        format!(
            "DesignSpace(network={:?}, depth={}, vertices={}, size={:.3e})",
            self.inner.network().name,
            self.inner.depth(),
            self.inner.vertex_count(),
            self.inner.space_size()
        )
    }
}

#[pyclass(name = "SearchReport", module = "qsdse", frozen)]
struct PySearchReport {
    inner: search::SearchReport,
}

#[pymethods]
impl PySearchReport {
    #[getter]
    fn algorithm(&self) -> &str {
        &self.inner.algorithm
    }

    #[getter]
    fn best_latency_ms(&self) -> f64 {
        self.inner.best_latency_ms
    }

    #[getter]
    fn best_config(&self) -> BTreeMap<String, String> {
        self.inner.best_config.assignment.clone()
    }

    #[getter]
    fn considered_states(&self) -> u64 {
        self.inner.considered_states
    }

    #[getter]
    fn learning_curve(&self) -> Vec<Option<f64>> {
        self.inner.learning_curve.clone()
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(runtime_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "SearchReport(algorithm={:?}, best_latency_ms={}, considered_states={})",
            self.inner.algorithm, self.inner.best_latency_ms, self.inner.considered_states
        )
    }
}

/// `(network_json, costs_json)` for a preset and seed.
#[pyfunction]
#[pyo3(signature = (preset, seed = 0, depth = 8))]
fn generate(preset: &str, seed: u64, depth: usize) -> PyResult<(String, String)> {
    let p = Preset::from_name(preset, depth).map_err(value_err)?;
    let net = synth::gen_network(p);
    let profile = CostProfile { seed, ..CostProfile::for_preset(p) };
    let table = synth::gen_cost_table(&net, &profile).map_err(value_err)?;
    Ok((
        serde_json::to_string(&net).map_err(runtime_err)?,
        serde_json::to_string(&table).map_err(runtime_err)?,
    ))
}

#[pyfunction]
fn bellman_update(q: f64, alpha: f64, gamma: f64, reward: f64, max_next: f64) -> f64 {
    search::bellman_update(q, alpha, gamma, reward, max_next)
}

/// `[(epsilon, episodes), ...]`
#[pyfunction]
fn epsilon_schedule(total_episodes: usize) -> PyResult<Vec<(f64, usize)>> {
    Ok(search::epsilon_schedule(total_episodes).map_err(value_err)?.blocks)
}

fn bare_point(latency_ms: f64, second: f64, memory: bool) -> ParetoPoint {
    ParetoPoint {
        config: Configuration::default(),
        latency_ms,
        accuracy_pct: if memory { 0.0 } else { second },
        memory_bytes: if memory { second as u64 } else { 0 },
        label: None,
        speedup_vs_ref: None,
    }
}

/// Indices of the non-dominated `(latency, accuracy)` or `(latency, memory)`
/// points, ordered by latency.
#[pyfunction]
#[pyo3(signature = (points, objective = "latency_accuracy"))]
fn pareto_front(points: Vec<(f64, f64)>, objective: &str) -> PyResult<Vec<usize>> {
    let (obj, memory) = match objective {
        "latency_accuracy" => (Objectives::LatencyAccuracy, false),
        "latency_memory" => (Objectives::LatencyMemory, true),
        o => return Err(value_err(format!("unknown objective {o:?}"))),
    };
    let mut pts: Vec<ParetoPoint> = points.iter().map(|&(l, s)| bare_point(l, s, memory)).collect();
    for (i, p) in pts.iter_mut().enumerate() {
        p.config.assignment.insert("index".into(), i.to_string());
    }
    let front = pareto::pareto_front(&pts, obj).map_err(value_err)?;
    Ok(front.iter().map(|p| p.config.assignment["index"].parse().expect("index set above")).collect())
}

#[derive(Clone)]
struct Indexed(usize, f64);

impl pareto::HasLatency for Indexed {
    fn latency(&self) -> f64 {
        self.1
    }
}

/// Indices of latencies within `(1 + slack)` of the fastest.
#[pyfunction]
#[pyo3(signature = (latencies, slack = 0.25))]
fn filter_candidates(latencies: Vec<f64>, slack: f64) -> PyResult<Vec<usize>> {
    let items: Vec<Indexed> = latencies.into_iter().enumerate().map(|(i, l)| Indexed(i, l)).collect();
    let kept = pareto::filter_candidates(&items, slack).map_err(value_err)?;
    Ok(kept.iter().map(|x| x.0).collect())
}

fn parse_mode(mode: &str) -> PyResult<QuantMode> {
    match mode {
        "symmetric" => Ok(QuantMode::Symmetric),
        "asymmetric" => Ok(QuantMode::Asymmetric),
        m => Err(value_err(format!("unknown mode {m:?}"))),
    }
}

/// `(scale, offset)`
#[pyfunction]
#[pyo3(signature = (min, max, mode = "symmetric"))]
fn quant_params_minmax(min: f64, max: f64, mode: &str) -> PyResult<(f64, i32)> {
    let p = optim::quant_params_minmax(min, max, parse_mode(mode)?).map_err(value_err)?;
    Ok((p.scale, p.offset))
}

/// Symmetric scale chosen by KL calibration of a histogram over `[lo, hi]`.
#[pyfunction]
#[pyo3(signature = (counts, lo, hi, levels = 256))]
fn kl_calibrate(counts: Vec<f64>, lo: f64, hi: f64, levels: usize) -> PyResult<f64> {
    let h = Histogram::new(lo, hi, counts).map_err(value_err)?;
    Ok(optim::kl_calibrate(&h, levels).map_err(value_err)?.scale)
}

#[pyfunction]
#[pyo3(signature = (values, scale, offset = 0, mode = "symmetric"))]
fn quantize_roundtrip(values: Vec<f64>, scale: f64, offset: i32, mode: &str) -> PyResult<f64> {
    if !(scale > 0.0) {
        return Err(value_err("scale must be positive"));
    }
    let p = QuantParams { scale, offset, mode: parse_mode(mode)?, bit_width: 8 };
    Ok(optim::quantize_roundtrip(&values, &p))
}

/// Lifetimes are `(tensor, producer, last_consumer, size_bytes)`; returns
/// `(offsets, footprint_bytes)`.
#[pyfunction]
fn plan_memory_pool(lifetimes: Vec<(String, usize, usize, u64)>) -> PyResult<(BTreeMap<String, u64>, u64)> {
    let lts: Vec<TensorLifetime> = lifetimes
        .into_iter()
        .map(|(tensor, producer, last_consumer, size_bytes)| TensorLifetime { tensor, producer, last_consumer, size_bytes })
        .collect();
    let plan = optim::plan_memory_pool(&lts).map_err(value_err)?;
    Ok((plan.offsets, plan.footprint_bytes))
}

/// Folds bnorm/scale layers; returns `(network_json, params_json)`.
#[pyfunction]
fn fuse_static(network_json: &str, params_json: &str) -> PyResult<(String, String)> {
    let net: NetworkSpec = serde_json::from_str(network_json).map_err(value_err)?;
    let params: FoldableParams = serde_json::from_str(params_json).map_err(value_err)?;
    let r = optim::fuse_static(&net, &params).map_err(value_err)?;
    Ok((
        serde_json::to_string(&r.network).map_err(runtime_err)?,
        serde_json::to_string(&r.params).map_err(runtime_err)?,
    ))
}

#[pymodule]
fn qsdse(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDesignSpace>()?;
    m.add_class::<PySearchReport>()?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(bellman_update, m)?)?;
    m.add_function(wrap_pyfunction!(epsilon_schedule, m)?)?;
    m.add_function(wrap_pyfunction!(pareto_front, m)?)?;
    m.add_function(wrap_pyfunction!(filter_candidates, m)?)?;
    m.add_function(wrap_pyfunction!(quant_params_minmax, m)?)?;
    m.add_function(wrap_pyfunction!(kl_calibrate, m)?)?;
    m.add_function(wrap_pyfunction!(quantize_roundtrip, m)?)?;
    m.add_function(wrap_pyfunction!(plan_memory_pool, m)?)?;
    m.add_function(wrap_pyfunction!(fuse_static, m)?)?;
    Ok(())
}
