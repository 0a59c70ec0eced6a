//! Accuracy of learnt solutions, the latency-slack candidate filter, and
//! latency/accuracy and latency/memory Pareto fronts with the labelled
//! reference points.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::{Configuration, DataType, DesignSpace, Layout, ModelError, FUSED_PASSTHROUGH};
use crate::search::{self, SearchError, SearchParams, Solution};

#[derive(Debug, Error)]
pub enum ParetoError {
    #[error("empty input")]
    EmptyInput,
    #[error("no measured accuracy for configuration {0}")]
    UnknownConfiguration(String),
    #[error("no reference implementation for layer {0}")]
    MissingReferenceImpl(String),
    #[error("invalid slack {0}; must be finite and >= 0")]
    InvalidSlack(f64),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Search(#[from] SearchError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccuracyMode {
    Additive,
    Table,
}

/// Maps a configuration to top-1 accuracy, either from per-implementation
/// degradation deltas (`additive`) or from measured values keyed by
/// configuration fingerprint (`table`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyModel {
    pub mode: AccuracyMode,
    pub base_top1_pct: f64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub table: BTreeMap<String, f64>,
}

impl AccuracyModel {
    pub fn additive(base_top1_pct: f64) -> Self {
        AccuracyModel { mode: AccuracyMode::Additive, base_top1_pct, table: BTreeMap::new() }
    }

    pub fn measured(base_top1_pct: f64, table: BTreeMap<String, f64>) -> Self {
        AccuracyModel { mode: AccuracyMode::Table, base_top1_pct, table }
    }
}

/// Canonical hash of a configuration: SHA-256 over `layer=impl` lines in
/// depth order.
pub fn fingerprint(space: &DesignSpace, config: &Configuration) -> String {
    let mut h = Sha256::new();
    for l in space.layers() {
        h.update(l.id.as_bytes());
        h.update(b"=");
        h.update(config.get(&l.id).unwrap_or("").as_bytes());
        h.update(b"\n");
    }
    h.finalize().iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

pub fn accuracy_of(space: &DesignSpace, config: &Configuration, model: &AccuracyModel) -> Result<f64, ParetoError> {
    let acc = match model.mode {
        AccuracyMode::Additive => {
            let idx = space.config_indices(config)?;
            let loss: f64 = idx
                .iter()
                .enumerate()
                .map(|(l, &k)| space.impls(l)[k].accuracy_delta_pp)
                .sum();
            model.base_top1_pct - loss
        }
        AccuracyMode::Table => {
            let key = fingerprint(space, config);
            *model.table.get(&key).ok_or(ParetoError::UnknownConfiguration(key))?
        }
    };
    Ok(acc.clamp(0.0, 100.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PointLabel {
    #[serde(rename = "Ref-FP32")]
    RefFp32,
    #[serde(rename = "Opt-FP32")]
    OptFp32,
    #[serde(rename = "INT8")]
    Int8,
    #[serde(rename = "searched")]
    Searched,
}

impl fmt::Display for PointLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PointLabel::RefFp32 => "Ref-FP32",
            PointLabel::OptFp32 => "Opt-FP32",
            PointLabel::Int8 => "INT8",
            PointLabel::Searched => "searched",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    pub config: Configuration,
    pub latency_ms: f64,
    pub accuracy_pct: f64,
    pub memory_bytes: u64,
    #[serde(default)]
    pub label: Option<PointLabel>,
    /// Reference latency divided by this point's latency.
    #[serde(default)]
    pub speedup_vs_ref: Option<f64>,
}

impl ParetoPoint {
    pub fn evaluate(
        space: &DesignSpace,
        config: &Configuration,
        model: &AccuracyModel,
        label: Option<PointLabel>,
    ) -> Result<ParetoPoint, ParetoError> {
        let m = space.evaluate(config)?;
        Ok(ParetoPoint {
            config: config.clone(),
            latency_ms: m.latency_ms,
            accuracy_pct: accuracy_of(space, config, model)?,
            memory_bytes: m.memory_bytes,
            label,
            speedup_vs_ref: None,
        })
    }
}

pub trait HasLatency {
    fn latency(&self) -> f64;
}

impl HasLatency for ParetoPoint {
    fn latency(&self) -> f64 {
        self.latency_ms
    }
}

impl HasLatency for Solution {
    fn latency(&self) -> f64 {
        self.latency_ms
    }
}

/// Keeps solutions at most `slack` (fractional) slower than the fastest one.
pub fn filter_candidates<T: HasLatency + Clone>(solutions: &[T], slack: f64) -> Result<Vec<T>, ParetoError> {
    if !(slack.is_finite() && slack >= 0.0) {
        return Err(ParetoError::InvalidSlack(slack));
    }
    let fastest = solutions
        .iter()
        .map(HasLatency::latency)
        .reduce(f64::min)
        .ok_or(ParetoError::EmptyInput)?;
    let threshold = (1.0 + slack) * fastest;
    Ok(solutions.iter().filter(|s| s.latency() <= threshold).cloned().collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objectives {
    /// Minimise latency, maximise accuracy.
    LatencyAccuracy,
    /// Minimise latency, minimise memory.
    LatencyMemory,
}

impl Objectives {
    /// Second objective oriented so that larger is better.
    fn score(&self, p: &ParetoPoint) -> f64 {
        match self {
            Objectives::LatencyAccuracy => p.accuracy_pct,
            Objectives::LatencyMemory => -(p.memory_bytes as f64),
        }
    }
}

/// Non-dominated points sorted by latency. A point is dominated when another
/// is at least as good in both objectives and strictly better in one, so
/// identical points are all retained.
pub fn pareto_front(points: &[ParetoPoint], objectives: Objectives) -> Result<Vec<ParetoPoint>, ParetoError> {
    if points.is_empty() {
        return Err(ParetoError::EmptyInput);
    }
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        points[a]
            .latency_ms
            .total_cmp(&points[b].latency_ms)
            .then_with(|| objectives.score(&points[b]).total_cmp(&objectives.score(&points[a])))
    });
    let mut front = Vec::new();
    // best score so far, and the latency at which it was first reached
    let mut best: Option<(f64, f64)> = None;
    for i in order {
        let p = &points[i];
        let s = objectives.score(p);
        let dominated = match best {
            None => false,
            Some((bs, lat)) => bs > s || (bs == s && lat < p.latency_ms),
        };
        if !dominated {
            front.push(p.clone());
        }
        if best.is_none_or(|(bs, _)| s > bs) {
            best = Some((s, p.latency_ms));
        }
    }
    Ok(front)
}

/// Optional post-filters on accuracy drop (percentage points below the
/// reference) and total memory.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Constraints {
    pub max_accuracy_drop: Option<f64>,
    pub max_memory: Option<u64>,
}

impl Constraints {
    pub fn admits(&self, p: &ParetoPoint, reference_accuracy: f64) -> bool {
        self.max_accuracy_drop.is_none_or(|d| p.accuracy_pct >= reference_accuracy - d)
            && self.max_memory.is_none_or(|m| p.memory_bytes <= m)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InterestingPoints {
    pub reference: ParetoPoint,
    pub opt_fp32: ParetoPoint,
    pub int8: Option<ParetoPoint>,
    pub searched: Vec<ParetoPoint>,
    pub warnings: Vec<String>,
}

impl InterestingPoints {
    pub fn all(&self) -> Vec<ParetoPoint> {
        let mut v = vec![self.reference.clone(), self.opt_fp32.clone()];
        v.extend(self.int8.clone());
        v.extend(self.searched.iter().cloned());
        v
    }
}

/// Reference deployment: per layer, the FP32/NCHW implementation from the
/// table's reference library, preferring the `gemm` algorithm.
pub fn reference_config(space: &DesignSpace) -> Result<Configuration, ParetoError> {
    let lib = space.table().reference_library.clone();
    space
        .layers()
        .iter()
        .map(|l| {
            let pick = lib.as_ref().and_then(|lib| {
                l.impls
                    .iter()
                    .filter(|i| {
                        &i.library == lib
                            && i.data_type == DataType::Fp32
                            && i.layout == Layout::Nchw
                            && i.algorithm != FUSED_PASSTHROUGH
                            && i.fuses_next.is_none()
                    })
                    .min_by_key(|i| (i.algorithm != "gemm", i.id.clone()))
            });
            pick.map(|i| (l.id.clone(), i.id.clone()))
                .ok_or_else(|| ParetoError::MissingReferenceImpl(l.id.clone()))
        })
        .collect()
}

/// Latency-optimal configuration: exact on chains (shortest path), brute
/// force on small DAGs, Q-learning otherwise.
pub fn optimise_latency(space: &DesignSpace, params: &SearchParams, brute_cap: u128) -> Result<Configuration, SearchError> {
    let report = if space.is_chain() {
        search::run_dijkstra(space)?
    } else if space.space_size_exact().is_some_and(|n| n <= brute_cap) {
        search::run_brute_force(space, brute_cap)?
    } else {
        search::run_rl(space, params)?
    };
    Ok(report.best_config)
}

/// Ref-FP32, Opt-FP32 and INT8 points plus the searched solutions, all with
/// speedups relative to Ref-FP32.
pub fn interesting_points(
    space: &DesignSpace,
    searched: &[Solution],
    model: &AccuracyModel,
    params: &SearchParams,
    brute_cap: u128,
) -> Result<InterestingPoints, ParetoError> {
    let mut warnings = Vec::new();
    let ref_config = reference_config(space)?;
    let reference = ParetoPoint::evaluate(space, &ref_config, model, Some(PointLabel::RefFp32))?;

    let fp32 = space.restrict(|i| i.data_type == DataType::Fp32)?;
    let mut opt_config = optimise_latency(&fp32, params, brute_cap)?;
    if space.evaluate(&opt_config)?.latency_ms > reference.latency_ms {
        opt_config = ref_config.clone();
    }
    let opt_fp32 = ParetoPoint::evaluate(space, &opt_config, model, Some(PointLabel::OptFp32))?;

    let int8 = match space.restrict(|i| i.data_type == DataType::Int8) {
        Err(e) => {
            warnings.push(format!("INT8 point omitted: {e}"));
            None
        }
        Ok(sub) => match optimise_latency(&sub, params, brute_cap) {
            Ok(c) => Some(ParetoPoint::evaluate(space, &c, model, Some(PointLabel::Int8))?),
            Err(e) => {
                warnings.push(format!("INT8 point omitted: {e}"));
                None
            }
        },
    };
    for w in &warnings {
        log::warn!("{w}");
    }

    let searched = searched
        .iter()
        .map(|s| ParetoPoint::evaluate(space, &s.config, model, Some(PointLabel::Searched)))
        .collect::<Result<Vec<_>, _>>()?;

    let mut out = InterestingPoints { reference, opt_fp32, int8, searched, warnings };
    let ref_latency = out.reference.latency_ms;
    let set = |p: &mut ParetoPoint| p.speedup_vs_ref = Some(ref_latency / p.latency_ms);
    set(&mut out.reference);
    set(&mut out.opt_fp32);
    if let Some(p) = out.int8.as_mut() {
        set(p);
    }
    out.searched.iter_mut().for_each(set);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontRow {
    pub label: String,
    pub latency_ms: f64,
    pub accuracy_pct: f64,
    pub memory_bytes: u64,
    pub speedup_vs_ref: Option<f64>,
}

impl From<&ParetoPoint> for FrontRow {
    fn from(p: &ParetoPoint) -> Self {
        FrontRow {
            label: p.label.unwrap_or(PointLabel::Searched).to_string(),
            latency_ms: p.latency_ms,
            accuracy_pct: p.accuracy_pct,
            memory_bytes: p.memory_bytes,
            speedup_vs_ref: p.speedup_vs_ref,
        }
    }
}

pub fn front_csv(points: &[ParetoPoint]) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for p in points {
        w.serialize(FrontRow::from(p))?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Static log2-scaled scatter plot of all points with the front drawn as a
/// polyline.
pub fn scatter_svg(all: &[ParetoPoint], front: &[ParetoPoint], objectives: Objectives) -> String {
    let (w, h, pad) = (640.0, 480.0, 56.0);
    let y_of = |p: &ParetoPoint| match objectives {
        Objectives::LatencyAccuracy => p.accuracy_pct,
        Objectives::LatencyMemory => (p.memory_bytes.max(1) as f64).log2(),
    };
    let x_of = |p: &ParetoPoint| p.latency_ms.max(1e-9).log2();
    let xs: Vec<f64> = all.iter().map(x_of).collect();
    let ys: Vec<f64> = all.iter().map(y_of).collect();
    let span = |v: &[f64]| {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if lo.is_finite() && hi > lo { (lo, hi) } else { (lo.min(0.0), lo.max(0.0) + 1.0) }
    };
    let (x0, x1) = span(&xs);
    let (y0, y1) = span(&ys);
    let px = |x: f64| pad + (x - x0) / (x1 - x0) * (w - 2.0 * pad);
    let py = |y: f64| h - pad - (y - y0) / (y1 - y0) * (h - 2.0 * pad);
    let y_label = match objectives {
        Objectives::LatencyAccuracy => "accuracy (%)",
        Objectives::LatencyMemory => "log2 memory (bytes)",
    };
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\">log2 latency (ms)</text>\n\
         <text x=\"14\" y=\"{}\" font-size=\"12\" transform=\"rotate(-90 14 {})\" text-anchor=\"middle\">{y_label}</text>\n",
        w / 2.0,
        h - 16.0,
        h / 2.0,
        h / 2.0
    );
    for p in all {
        let (color, r) = match p.label {
            Some(PointLabel::RefFp32) => ("#d62728", 5.0),
            Some(PointLabel::OptFp32) => ("#2ca02c", 5.0),
            Some(PointLabel::Int8) => ("#9467bd", 5.0),
            _ => ("#1f77b4", 2.5),
        };
        let _ = writeln!(
            s,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"{r}\" fill=\"{color}\"/>",
            px(x_of(p)),
            py(y_of(p))
        );
    }
    let pts: Vec<String> = front.iter().map(|p| format!("{:.2},{:.2}", px(x_of(p)), py(y_of(p)))).collect();
    let _ = writeln!(s, "<polyline points=\"{}\" fill=\"none\" stroke=\"black\"/>", pts.join(" "));
    s.push_str("</svg>\n");
    s
}
