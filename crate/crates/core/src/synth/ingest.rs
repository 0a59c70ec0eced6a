use std::collections::BTreeMap;
use std::io::Read;

use serde::{Deserialize, Serialize};

use super::{impl_id, CostProfile, SynthError};
use crate::model::{Core, CostTable, DataType, ImplDescriptor, Layout};

/// Benchmark runs of one implementation on one layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub layer_id: String,
    pub library: String,
    pub algorithm: String,
    #[serde(default)]
    pub algorithm_config: String,
    pub data_type: DataType,
    pub layout: Layout,
    pub core: Core,
    pub memory_bytes: u64,
    pub warm_up_count: usize,
    pub runs: Vec<f64>,
}

impl MeasurementRecord {
    pub fn impl_id(&self) -> String {
        impl_id(&self.library, &self.algorithm, &self.algorithm_config, self.data_type, self.layout, self.core)
    }
}

const FIXED_COLUMNS: usize = 9;

fn parse<T: serde::de::DeserializeOwned>(s: &str, line: usize, col: &str) -> Result<T, SynthError> {
    serde_json::from_value(serde_json::Value::String(s.trim().to_string())).map_err(|e| SynthError::InvalidRecord {
        line,
        detail: format!("{col}: {e}"),
    })
}

/// Reads records with header `layer_id, library, algorithm,
/// algorithm_config, data_type, layout, core, memory_bytes, warm_up_count,
/// run1..runN`. Rows may have different numbers of runs.
pub fn read_measurements_csv<R: Read>(reader: R) -> Result<Vec<MeasurementRecord>, SynthError> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        let line = i + 2;
        if row.len() < FIXED_COLUMNS {
            return Err(SynthError::InvalidRecord { line, detail: format!("expected at least {FIXED_COLUMNS} columns") });
        }
        let num = |col: usize, name: &str| -> Result<u64, SynthError> {
            row[col].parse().map_err(|e| SynthError::InvalidRecord { line, detail: format!("{name}: {e}") })
        };
        let runs = row
            .iter()
            .skip(FIXED_COLUMNS)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<f64>().map_err(|e| SynthError::InvalidRecord { line, detail: format!("run: {e}") }))
            .collect::<Result<Vec<_>, _>>()?;
        out.push(MeasurementRecord {
            layer_id: row[0].to_string(),
            library: row[1].to_string(),
            algorithm: row[2].to_string(),
            algorithm_config: row[3].to_string(),
            data_type: parse(&row[4], line, "data_type")?,
            layout: parse(&row[5], line, "layout")?,
            core: parse(&row[6], line, "core")?,
            memory_bytes: num(7, "memory_bytes")?,
            warm_up_count: num(8, "warm_up_count")? as usize,
            runs,
        });
    }
    Ok(out)
}

/// Builds a cost table from measurements: leading warm-up runs are dropped,
/// duplicate (layer, implementation) records are pooled and the mean latency
/// is stored. Conversion costs come from the profile's attribute rules.
pub fn ingest_measurements(
    network_name: &str,
    records: &[MeasurementRecord],
    profile: &CostProfile,
) -> Result<CostTable, SynthError> {
    // (layer, impl id) -> (first record, memory, pooled runs)
    let mut groups: BTreeMap<(String, String), (&MeasurementRecord, Vec<f64>)> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        let id = r.impl_id();
        if let Some(bad) = r.runs.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(SynthError::InvalidRecord { line: i + 2, detail: format!("run latency {bad}") });
        }
        let kept = r.runs.get(r.warm_up_count..).unwrap_or_default();
        if kept.is_empty() {
            return Err(SynthError::NoRunsAfterWarmup { layer: r.layer_id.clone(), impl_id: id });
        }
        let entry = groups.entry((r.layer_id.clone(), id.clone())).or_insert_with(|| (r, Vec::new()));
        if entry.0.memory_bytes != r.memory_bytes {
            return Err(SynthError::ConflictingDuplicates {
                layer: r.layer_id.clone(),
                impl_id: id,
                a: entry.0.memory_bytes,
                b: r.memory_bytes,
            });
        }
        entry.1.extend_from_slice(kept);
    }
    let mut table = CostTable::new(network_name);
    table.reference_library = Some(profile.reference_library.clone());
    table.conversions = profile.conversion_rules();
    for ((layer, id), (r, runs)) in groups {
        let mean = runs.iter().sum::<f64>() / runs.len() as f64;
        table.add_impl(
            &layer,
            ImplDescriptor {
                id,
                library: r.library.clone(),
                algorithm: r.algorithm.clone(),
                algorithm_config: r.algorithm_config.clone(),
                data_type: r.data_type,
                layout: r.layout,
                core: r.core,
                latency_ms: mean,
                memory_bytes: r.memory_bytes,
                accuracy_delta_pp: 0.0,
                fuses_next: None,
            },
        );
    }
    Ok(table)
}
