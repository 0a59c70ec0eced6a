use std::collections::BTreeMap;
use std::fmt;

use serde::de::{self, Deserializer};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

use super::network::LayerKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum DataType {
    Fp32,
    Fp16,
    Int8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Layout {
    Nchw,
    Nhwc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Core {
    Cpu,
    Gpu,
    Fpga,
}

impl fmt::Display for DataType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DataType::Fp32 => "FP32",
            DataType::Fp16 => "FP16",
            DataType::Int8 => "INT8",
        })
    }
}

impl fmt::Display for Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Layout::Nchw => "NCHW",
            Layout::Nhwc => "NHWC",
        })
    }
}

impl fmt::Display for Core {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Core::Cpu => "CPU",
            Core::Gpu => "GPU",
            Core::Fpga => "FPGA",
        })
    }
}

/// One way of executing a layer: library, algorithm, numeric format, layout
/// and processor, together with its measured cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImplDescriptor {
    pub id: String,
    pub library: String,
    pub algorithm: String,
    #[serde(default)]
    pub algorithm_config: String,
    pub data_type: DataType,
    pub layout: Layout,
    pub core: Core,
    pub latency_ms: f64,
    pub memory_bytes: u64,
    #[serde(default)]
    pub accuracy_delta_pp: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fuses_next: Option<LayerKind>,
}

impl ImplDescriptor {
    pub fn new(id: impl Into<String>, data_type: DataType, layout: Layout, latency_ms: f64) -> Self {
        ImplDescriptor {
            id: id.into(),
            library: "generic".into(),
            algorithm: "gemm".into(),
            algorithm_config: String::new(),
            data_type,
            layout,
            core: Core::Cpu,
            latency_ms,
            memory_bytes: 0,
            accuracy_delta_pp: 0.0,
            fuses_next: None,
        }
    }

    pub fn attrs(&self) -> (DataType, Layout, Core) {
        (self.data_type, self.layout, self.core)
    }

    pub fn same_attrs(&self, other: &ImplDescriptor) -> bool {
        self.attrs() == other.attrs()
    }
}

/// Partial attribute pattern; `None` fields match anything.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttrMatch {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_type: Option<DataType>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layout: Option<Layout>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub core: Option<Core>,
}

impl AttrMatch {
    pub fn any() -> Self {
        AttrMatch::default()
    }

    pub fn exact(data_type: DataType, layout: Layout, core: Core) -> Self {
        AttrMatch { data_type: Some(data_type), layout: Some(layout), core: Some(core) }
    }

    pub fn matches(&self, imp: &ImplDescriptor) -> bool {
        self.data_type.is_none_or(|d| d == imp.data_type)
            && self.layout.is_none_or(|l| l == imp.layout)
            && self.core.is_none_or(|c| c == imp.core)
    }

    pub fn is_fully_specified(&self) -> bool {
        self.data_type.is_some() && self.layout.is_some() && self.core.is_some()
    }
}

/// Cost of crossing an edge between two implementations.
///
/// `Forbidden` is kept as its own variant so that it can never be summed into
/// a finite latency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EdgeCost {
    Penalty(f64),
    Forbidden,
}

impl EdgeCost {
    pub const FREE: EdgeCost = EdgeCost::Penalty(0.0);

    pub fn is_forbidden(&self) -> bool {
        matches!(self, EdgeCost::Forbidden)
    }

    pub fn penalty(&self) -> Option<f64> {
        match self {
            EdgeCost::Penalty(p) => Some(*p),
            EdgeCost::Forbidden => None,
        }
    }

    pub fn is_free(&self) -> bool {
        matches!(self, EdgeCost::Penalty(p) if *p == 0.0)
    }
}

impl Default for EdgeCost {
    fn default() -> Self {
        EdgeCost::FREE
    }
}

impl fmt::Display for EdgeCost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EdgeCost::Penalty(p) => write!(f, "{p}"),
            EdgeCost::Forbidden => f.write_str("forbidden"),
        }
    }
}

impl Serialize for EdgeCost {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            EdgeCost::Penalty(p) => s.serialize_f64(*p),
            EdgeCost::Forbidden => s.serialize_str("forbidden"),
        }
    }
}

impl<'de> Deserialize<'de> for EdgeCost {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Ms(f64),
            Tag(String),
        }
        match Raw::deserialize(d)? {
            Raw::Ms(p) if p.is_finite() && p >= 0.0 => Ok(EdgeCost::Penalty(p)),
            Raw::Ms(p) => Err(de::Error::custom(format!("invalid penalty {p}"))),
            Raw::Tag(t) if t.eq_ignore_ascii_case("forbidden") => Ok(EdgeCost::Forbidden),
            Raw::Tag(t) => Err(de::Error::custom(format!("expected number or \"forbidden\", got {t:?}"))),
        }
    }
}

/// Directional conversion cost between attribute patterns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConversionRule {
    pub from: AttrMatch,
    pub to: AttrMatch,
    pub penalty_ms: EdgeCost,
    /// Scratch memory needed by the conversion.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub memory_bytes: u64,
}

fn is_zero(v: &u64) -> bool {
    *v == 0
}

impl ConversionRule {
    pub fn new(from: AttrMatch, to: AttrMatch, penalty_ms: EdgeCost) -> Self {
        ConversionRule { from, to, penalty_ms, memory_bytes: 0 }
    }

    pub fn matches(&self, a: &ImplDescriptor, b: &ImplDescriptor) -> bool {
        self.from.matches(a) && self.to.matches(b)
    }
}

/// Measured penalty for one specific implementation pair on one edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeOverride {
    pub from_layer: String,
    pub to_layer: String,
    pub from_impl: String,
    pub to_impl: String,
    pub penalty_ms: EdgeCost,
}

/// Look-up table of per-layer implementation costs plus conversion penalties.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostTable {
    pub network_name: String,
    pub entries: BTreeMap<String, Vec<ImplDescriptor>>,
    #[serde(default)]
    pub conversions: Vec<ConversionRule>,
    #[serde(default)]
    pub edge_overrides: Vec<EdgeOverride>,
    /// Applied to attribute mismatches that no rule covers.
    #[serde(default)]
    pub default_mismatch_ms: EdgeCost,
    /// Library whose FP32/NCHW implementations form the reference deployment.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_library: Option<String>,
}

impl CostTable {
    pub fn new(network_name: impl Into<String>) -> Self {
        CostTable {
            network_name: network_name.into(),
            entries: BTreeMap::new(),
            conversions: Vec::new(),
            edge_overrides: Vec::new(),
            default_mismatch_ms: EdgeCost::FREE,
            reference_library: None,
        }
    }

    pub fn impls(&self, layer: &str) -> &[ImplDescriptor] {
        self.entries.get(layer).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn add_impl(&mut self, layer: &str, imp: ImplDescriptor) {
        self.entries.entry(layer.to_string()).or_default().push(imp);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edge_cost_json_forms() {
        let rule: ConversionRule = serde_json::from_str(
            r#"{"from":{"data_type":"FP32"},"to":{"data_type":"INT8"},"penalty_ms":"forbidden"}"#,
        )
        .unwrap();
        assert!(rule.penalty_ms.is_forbidden());
        assert_eq!(rule.memory_bytes, 0);
        let s = serde_json::to_string(&rule).unwrap();
        assert!(s.contains("\"forbidden\""));

        let c: EdgeCost = serde_json::from_str("2.5").unwrap();
        assert_eq!(c, EdgeCost::Penalty(2.5));
        assert!(serde_json::from_str::<EdgeCost>("-1.0").is_err());
        assert!(serde_json::from_str::<EdgeCost>("\"cheap\"").is_err());
    }

    #[test]
    fn attr_match_wildcards() {
        let a = ImplDescriptor::new("a", DataType::Fp32, Layout::Nchw, 1.0);
        assert!(AttrMatch::any().matches(&a));
        let m = AttrMatch { data_type: Some(DataType::Int8), ..AttrMatch::any() };
        assert!(!m.matches(&a));
        assert!(AttrMatch::exact(DataType::Fp32, Layout::Nchw, Core::Cpu).matches(&a));
    }

    #[test]
    fn table_defaults_when_fields_missing() {
        let t: CostTable = serde_json::from_str(
            r#"{"network_name":"n","entries":{"l":[{"id":"x","library":"lib","algorithm":"gemm",
                "data_type":"FP32","layout":"NHWC","core":"CPU","latency_ms":1.5,"memory_bytes":64}]}}"#,
        )
        .unwrap();
        assert_eq!(t.default_mismatch_ms, EdgeCost::FREE);
        assert!(t.conversions.is_empty());
        assert_eq!(t.impls("l")[0].layout, Layout::Nhwc);
        assert_eq!(t.impls("missing").len(), 0);
    }
}
