use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Convolution,
    DepthwiseConvolution,
    FullyConnected,
    Pooling,
    Activation,
    Bnorm,
    Scale,
    Elementwise,
    Concat,
    Reshape,
    Flatten,
    Softmax,
    Input,
    Output,
}

impl LayerKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            LayerKind::Convolution => "convolution",
            LayerKind::DepthwiseConvolution => "depthwise_convolution",
            LayerKind::FullyConnected => "fully_connected",
            LayerKind::Pooling => "pooling",
            LayerKind::Activation => "activation",
            LayerKind::Bnorm => "bnorm",
            LayerKind::Scale => "scale",
            LayerKind::Elementwise => "elementwise",
            LayerKind::Concat => "concat",
            LayerKind::Reshape => "reshape",
            LayerKind::Flatten => "flatten",
            LayerKind::Softmax => "softmax",
            LayerKind::Input => "input",
            LayerKind::Output => "output",
        }
    }
}

impl fmt::Display for LayerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One layer of the network being deployed.
///
/// `output_size` and `params_size` are element counts; byte sizes depend on
/// the data type chosen by the implementation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub id: String,
    pub kind: LayerKind,
    pub depth: usize,
    pub predecessors: Vec<String>,
    pub output_size: u64,
    pub params_size: u64,
    /// Spatial kernel size for convolutions; drives which algorithm variants apply.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel_size: Option<u32>,
}

impl LayerSpec {
    pub fn new(id: impl Into<String>, kind: LayerKind, depth: usize) -> Self {
        LayerSpec {
            id: id.into(),
            kind,
            depth,
            predecessors: Vec::new(),
            output_size: 0,
            params_size: 0,
            kernel_size: None,
        }
    }

    pub fn after(mut self, preds: &[&str]) -> Self {
        self.predecessors = preds.iter().map(|p| p.to_string()).collect();
        self
    }

    pub fn sizes(mut self, output_size: u64, params_size: u64) -> Self {
        self.output_size = output_size;
        self.params_size = params_size;
        self
    }

    pub fn kernel(mut self, k: u32) -> Self {
        self.kernel_size = Some(k);
        self
    }
}

/// A single rule breach reported by [`NetworkSpec::validate`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Violation {
    DuplicateId(String),
    DuplicateDepth(usize),
    DepthOutOfRange { layer: String, depth: usize },
    ForwardReference { layer: String, predecessor: String },
    UnknownPredecessor { layer: String, predecessor: String },
    InputWithPredecessors(String),
    MissingPredecessors(String),
}

impl Violation {
    pub fn layer(&self) -> Option<&str> {
        match self {
            Violation::DuplicateDepth(_) => None,
            Violation::DuplicateId(l)
            | Violation::InputWithPredecessors(l)
            | Violation::MissingPredecessors(l) => Some(l),
            Violation::DepthOutOfRange { layer, .. }
            | Violation::ForwardReference { layer, .. }
            | Violation::UnknownPredecessor { layer, .. } => Some(layer),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateId(id) => write!(f, "duplicate id at {id}"),
            Violation::DuplicateDepth(d) => write!(f, "duplicate depth {d}"),
            Violation::DepthOutOfRange { layer, depth } => {
                write!(f, "depth {depth} out of range at {layer}")
            }
            Violation::ForwardReference { layer, .. } => write!(f, "cycle/forward-ref at {layer}"),
            Violation::UnknownPredecessor { layer, predecessor } => {
                write!(f, "unknown predecessor {predecessor} at {layer}")
            }
            Violation::InputWithPredecessors(id) => write!(f, "input with predecessors at {id}"),
            Violation::MissingPredecessors(id) => write!(f, "missing predecessors at {id}"),
        }
    }
}

/// Layer graph in file form; `predecessors` may be omitted to mean "the previous layer".
#[derive(Deserialize)]
struct RawNetwork {
    name: String,
    layers: Vec<RawLayer>,
}

#[derive(Deserialize)]
struct RawLayer {
    id: String,
    kind: LayerKind,
    depth: usize,
    #[serde(default)]
    predecessors: Option<Vec<String>>,
    #[serde(default)]
    output_size: u64,
    #[serde(default)]
    params_size: u64,
    #[serde(default)]
    kernel_size: Option<u32>,
}

impl From<RawNetwork> for NetworkSpec {
    fn from(raw: RawNetwork) -> Self {
        let mut layers: Vec<LayerSpec> = Vec::with_capacity(raw.layers.len());
        for l in raw.layers {
            let predecessors = match l.predecessors {
                Some(p) => p,
                None if l.kind == LayerKind::Input => Vec::new(),
                None => layers.last().map(|prev| vec![prev.id.clone()]).unwrap_or_default(),
            };
            layers.push(LayerSpec {
                id: l.id,
                kind: l.kind,
                depth: l.depth,
                predecessors,
                output_size: l.output_size,
                params_size: l.params_size,
                kernel_size: l.kernel_size,
            });
        }
        NetworkSpec { name: raw.name, layers }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "RawNetwork")]
pub struct NetworkSpec {
    pub name: String,
    pub layers: Vec<LayerSpec>,
}

impl NetworkSpec {
    pub fn new(name: impl Into<String>, layers: Vec<LayerSpec>) -> Self {
        NetworkSpec { name: name.into(), layers }
    }

    /// Builds a pure chain where every layer after the first consumes its predecessor.
    pub fn chain(name: impl Into<String>, layers: Vec<(String, LayerKind)>) -> Self {
        let mut out: Vec<LayerSpec> = Vec::with_capacity(layers.len());
        for (depth, (id, kind)) in layers.into_iter().enumerate() {
            let mut spec = LayerSpec::new(id, kind, depth);
            if let Some(prev) = out.last() {
                spec.predecessors = vec![prev.id.clone()];
            }
            out.push(spec);
        }
        NetworkSpec::new(name, out)
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn layer(&self, id: &str) -> Option<&LayerSpec> {
        self.layers.iter().find(|l| l.id == id)
    }

    /// Layers ordered by their depth index.
    pub fn sorted(&self) -> Vec<&LayerSpec> {
        let mut v: Vec<&LayerSpec> = self.layers.iter().collect();
        v.sort_by_key(|l| l.depth);
        v
    }

    /// Consumers of every layer id, in depth order.
    pub fn consumers(&self) -> BTreeMap<String, Vec<String>> {
        let mut map: BTreeMap<String, Vec<String>> =
            self.layers.iter().map(|l| (l.id.clone(), Vec::new())).collect();
        for l in self.sorted() {
            for p in &l.predecessors {
                if let Some(c) = map.get_mut(p) {
                    c.push(l.id.clone());
                }
            }
        }
        map
    }

    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let n = self.layers.len();
        let mut ids: HashMap<&str, usize> = HashMap::new();
        for l in &self.layers {
            if ids.insert(&l.id, l.depth).is_some() {
                out.push(Violation::DuplicateId(l.id.clone()));
            }
        }
        let mut seen_depths = HashSet::new();
        for l in &self.layers {
            if l.depth >= n {
                out.push(Violation::DepthOutOfRange { layer: l.id.clone(), depth: l.depth });
            }
            if !seen_depths.insert(l.depth) {
                out.push(Violation::DuplicateDepth(l.depth));
            }
        }
        for l in &self.layers {
            if l.kind == LayerKind::Input {
                if !l.predecessors.is_empty() {
                    out.push(Violation::InputWithPredecessors(l.id.clone()));
                }
            } else if l.predecessors.is_empty() {
                out.push(Violation::MissingPredecessors(l.id.clone()));
            }
            for p in &l.predecessors {
                match ids.get(p.as_str()) {
                    None => out.push(Violation::UnknownPredecessor {
                        layer: l.id.clone(),
                        predecessor: p.clone(),
                    }),
                    Some(&pd) if pd >= l.depth => out.push(Violation::ForwardReference {
                        layer: l.id.clone(),
                        predecessor: p.clone(),
                    }),
                    Some(_) => {}
                }
            }
        }
        out
    }

    /// True iff every layer after the first has exactly one predecessor: the
    /// layer immediately before it in depth order.
    pub fn is_chain(&self) -> bool {
        let sorted = self.sorted();
        sorted.iter().enumerate().all(|(i, l)| {
            if i == 0 {
                l.predecessors.is_empty()
            } else {
                l.predecessors.len() == 1 && l.predecessors[0] == sorted[i - 1].id
            }
        })
    }
}
