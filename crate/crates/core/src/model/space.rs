use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::cost::{CostTable, EdgeCost, EdgeOverride, ImplDescriptor};
use super::network::{LayerKind, NetworkSpec};
use super::ModelError;

/// Algorithm name carried by the zero-cost implementations that stand in for
/// a layer absorbed by runtime fusion.
pub const FUSED_PASSTHROUGH: &str = "fused_passthrough";

/// Total assignment of one implementation id to every layer id.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Configuration {
    pub assignment: BTreeMap<String, String>,
}

impl Configuration {
    pub fn get(&self, layer: &str) -> Option<&str> {
        self.assignment.get(layer).map(String::as_str)
    }
}

impl<K: Into<String>, V: Into<String>> FromIterator<(K, V)> for Configuration {
    fn from_iter<T: IntoIterator<Item = (K, V)>>(iter: T) -> Self {
        Configuration {
            assignment: iter.into_iter().map(|(k, v)| (k.into(), v.into())).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub latency_ms: f64,
    pub memory_bytes: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Incompatibility {
    pub from_layer: String,
    pub to_layer: String,
    pub from_impl: String,
    pub to_impl: String,
    pub cost: EdgeCost,
}

/// A layer of the design space with its implementations sorted by id, so
/// that index order and id order coincide.
#[derive(Debug, Clone)]
pub struct LayerSlot {
    pub id: String,
    pub kind: LayerKind,
    pub impls: Vec<ImplDescriptor>,
}

#[derive(Debug, Clone, Copy)]
struct Resolved {
    cost: EdgeCost,
    memory_bytes: u64,
}

#[derive(Debug, Clone)]
struct EdgeSlot {
    from: usize,
    to: usize,
    width: usize,
    // row-major [from impl][to impl]
    costs: Vec<Resolved>,
}

/// Weighted layered graph: one vertex per (layer, implementation), one edge
/// per implementation pair across each data dependency.
#[derive(Debug, Clone)]
pub struct DesignSpace {
    network: NetworkSpec,
    table: CostTable,
    layers: Vec<LayerSlot>,
    index: HashMap<String, usize>,
    edges: Vec<EdgeSlot>,
    incoming: Vec<Vec<usize>>,
    chain: bool,
}

impl DesignSpace {
    /// Binds a cost table to a network, expanding runtime-fusion variants.
    pub fn build(network: &NetworkSpec, table: &CostTable) -> Result<DesignSpace, ModelError> {
        let violations = network.validate();
        if !violations.is_empty() {
            return Err(ModelError::InvalidNetwork(violations));
        }
        if table.network_name != network.name {
            log::warn!(
                "cost table is for network {:?}, binding it to {:?}",
                table.network_name,
                network.name
            );
        }
        let mut net = network.clone();
        net.layers.sort_by_key(|l| l.depth);

        for l in &net.layers {
            let impls = table.impls(&l.id);
            if impls.is_empty() {
                return Err(ModelError::MissingImplementations(l.id.clone()));
            }
            let mut seen = std::collections::HashSet::new();
            for imp in impls {
                if !seen.insert(imp.id.as_str()) {
                    return Err(ModelError::DuplicateImpl { layer: l.id.clone(), impl_id: imp.id.clone() });
                }
                check_impl(&l.id, imp)?;
            }
        }
        for (i, rule) in table.conversions.iter().enumerate() {
            if rule.from == rule.to && rule.from.is_fully_specified() && !rule.penalty_ms.is_free() {
                return Err(ModelError::NonZeroIdentityRule(i));
            }
        }

        let mut table = table.clone();
        table.entries.retain(|k, _| net.layer(k).is_some());
        expand_fusion(&net, &mut table)?;

        let layers: Vec<LayerSlot> = net
            .layers
            .iter()
            .map(|l| {
                let mut impls = table.impls(&l.id).to_vec();
                impls.sort_by(|a, b| a.id.cmp(&b.id));
                LayerSlot { id: l.id.clone(), kind: l.kind, impls }
            })
            .collect();
        let index: HashMap<String, usize> =
            layers.iter().enumerate().map(|(i, l)| (l.id.clone(), i)).collect();

        let overrides = index_overrides(&table.edge_overrides, &layers, &index, &net)?;

        let mut edges = Vec::new();
        let mut incoming = vec![Vec::new(); layers.len()];
        for (to, l) in net.layers.iter().enumerate() {
            for p in &l.predecessors {
                let from = index[p];
                let a_impls = &layers[from].impls;
                let b_impls = &layers[to].impls;
                let mut costs = Vec::with_capacity(a_impls.len() * b_impls.len());
                for a in a_impls {
                    for b in b_impls {
                        let ov = overrides.get(&(from, to, a.id.as_str(), b.id.as_str())).copied();
                        costs.push(resolve(&table, ov, a, b));
                    }
                }
                incoming[to].push(edges.len());
                edges.push(EdgeSlot { from, to, width: b_impls.len(), costs });
            }
        }

        let chain = net.is_chain();
        Ok(DesignSpace { network: net, table, layers, index, edges, incoming, chain })
    }

    pub fn network(&self) -> &NetworkSpec {
        &self.network
    }

    /// The cost table after fusion expansion.
    pub fn table(&self) -> &CostTable {
        &self.table
    }

    pub fn layers(&self) -> &[LayerSlot] {
        &self.layers
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn layer_index(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn impls(&self, layer: usize) -> &[ImplDescriptor] {
        &self.layers[layer].impls
    }

    pub fn impl_count(&self, layer: usize) -> usize {
        self.layers[layer].impls.len()
    }

    pub fn impl_index(&self, layer: usize, impl_id: &str) -> Option<usize> {
        self.layers[layer].impls.binary_search_by(|i| i.id.as_str().cmp(impl_id)).ok()
    }

    pub fn is_chain(&self) -> bool {
        self.chain
    }

    /// Number of vertices (implementations over all layers).
    pub fn vertex_count(&self) -> usize {
        self.layers.iter().map(|l| l.impls.len()).sum()
    }

    /// Number of implementation pairs across all data dependencies.
    pub fn edge_count(&self) -> usize {
        self.edges.iter().map(|e| e.costs.len()).sum()
    }

    /// Number of data dependencies between layers.
    pub fn dependency_count(&self) -> usize {
        self.edges.len()
    }

    pub fn space_size(&self) -> f64 {
        self.layers.iter().map(|l| l.impls.len() as f64).product()
    }

    /// Exact number of configurations, or `None` when it overflows `u128`.
    pub fn space_size_exact(&self) -> Option<u128> {
        self.layers.iter().try_fold(1u128, |acc, l| acc.checked_mul(l.impls.len() as u128))
    }

    /// Dependencies `(from layer, to layer)` in consumer order.
    pub fn dependencies(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().map(|e| (e.from, e.to))
    }

    /// Indices of dependencies whose consumer is `layer`.
    pub fn incoming(&self, layer: usize) -> &[usize] {
        &self.incoming[layer]
    }

    pub fn dependency(&self, edge: usize) -> (usize, usize) {
        (self.edges[edge].from, self.edges[edge].to)
    }

    /// Index of the dependency `from -> to`, if any.
    pub fn dependency_between(&self, from: usize, to: usize) -> Option<usize> {
        self.incoming[to].iter().copied().find(|&e| self.edges[e].from == from)
    }

    /// Edge cost by dependency index and implementation indices.
    pub fn edge_cost_at(&self, edge: usize, from_impl: usize, to_impl: usize) -> EdgeCost {
        let e = &self.edges[edge];
        e.costs[from_impl * e.width + to_impl].cost
    }

    fn conversion_memory_at(&self, edge: usize, from_impl: usize, to_impl: usize) -> u64 {
        let e = &self.edges[edge];
        e.costs[from_impl * e.width + to_impl].memory_bytes
    }

    /// Penalty for moving from `from_impl` on `from_layer` to `to_impl` on
    /// `to_layer`; per-edge overrides win over attribute rules.
    pub fn edge_cost(
        &self,
        from_layer: &str,
        to_layer: &str,
        from_impl: &str,
        to_impl: &str,
    ) -> Result<EdgeCost, ModelError> {
        let f = self.layer_index(from_layer).ok_or_else(|| ModelError::UnknownLayer(from_layer.into()))?;
        let t = self.layer_index(to_layer).ok_or_else(|| ModelError::UnknownLayer(to_layer.into()))?;
        let edge = self.dependency_between(f, t).ok_or_else(|| ModelError::UnknownEdge {
            from: from_layer.into(),
            to: to_layer.into(),
        })?;
        let a = self.impl_index(f, from_impl).ok_or_else(|| ModelError::UnknownImpl {
            layer: from_layer.into(),
            impl_id: from_impl.into(),
        })?;
        let b = self.impl_index(t, to_impl).ok_or_else(|| ModelError::UnknownImpl {
            layer: to_layer.into(),
            impl_id: to_impl.into(),
        })?;
        Ok(self.edge_cost_at(edge, a, b))
    }

    /// Converts an id-based configuration to per-layer implementation indices.
    pub fn config_indices(&self, config: &Configuration) -> Result<Vec<usize>, ModelError> {
        for layer in config.assignment.keys() {
            if !self.index.contains_key(layer) {
                return Err(ModelError::UnknownLayer(layer.clone()));
            }
        }
        self.layers
            .iter()
            .enumerate()
            .map(|(i, l)| {
                let id = config
                    .get(&l.id)
                    .ok_or_else(|| ModelError::IncompleteConfiguration(l.id.clone()))?;
                self.impl_index(i, id).ok_or_else(|| ModelError::UnknownImpl {
                    layer: l.id.clone(),
                    impl_id: id.to_string(),
                })
            })
            .collect()
    }

    pub fn configuration(&self, indices: &[usize]) -> Configuration {
        self.layers
            .iter()
            .zip(indices)
            .map(|(l, &k)| (l.id.clone(), l.impls[k].id.clone()))
            .collect()
    }

    pub fn evaluate(&self, config: &Configuration) -> Result<Metrics, ModelError> {
        let idx = self.config_indices(config)?;
        self.evaluate_indices(&idx)
    }

    /// Sum of implementation latencies (layer order) plus edge penalties
    /// (dependency order). The summation order is fixed so that equal
    /// configurations always produce bit-identical latencies.
    pub fn evaluate_indices(&self, idx: &[usize]) -> Result<Metrics, ModelError> {
        if idx.len() != self.layers.len() {
            let missing = self.layers.get(idx.len()).map(|l| l.id.clone()).unwrap_or_default();
            return Err(ModelError::IncompleteConfiguration(missing));
        }
        let mut latency = 0.0;
        let mut memory = 0u64;
        for (l, &k) in self.layers.iter().zip(idx) {
            let imp = &l.impls[k];
            latency += imp.latency_ms;
            memory += imp.memory_bytes;
        }
        for (e, slot) in self.edges.iter().enumerate() {
            let (a, b) = (idx[slot.from], idx[slot.to]);
            match self.edge_cost_at(e, a, b) {
                EdgeCost::Penalty(p) => latency += p,
                EdgeCost::Forbidden => {
                    return Err(ModelError::ForbiddenConfiguration {
                        from_layer: self.layers[slot.from].id.clone(),
                        to_layer: self.layers[slot.to].id.clone(),
                        from_impl: self.layers[slot.from].impls[a].id.clone(),
                        to_impl: self.layers[slot.to].impls[b].id.clone(),
                    })
                }
            }
            memory += self.conversion_memory_at(e, a, b);
        }
        Ok(Metrics { latency_ms: latency, memory_bytes: memory, accuracy_pct: None })
    }

    /// Edges of `config` with a non-zero or forbidden conversion cost.
    pub fn check_incompatibilities(&self, config: &Configuration) -> Result<Vec<Incompatibility>, ModelError> {
        let idx = self.config_indices(config)?;
        Ok(self.incompatibilities_indices(&idx))
    }

    pub fn incompatibilities_indices(&self, idx: &[usize]) -> Vec<Incompatibility> {
        self.edges
            .iter()
            .enumerate()
            .filter_map(|(e, slot)| {
                let (a, b) = (idx[slot.from], idx[slot.to]);
                let cost = self.edge_cost_at(e, a, b);
                (!cost.is_free()).then(|| Incompatibility {
                    from_layer: self.layers[slot.from].id.clone(),
                    to_layer: self.layers[slot.to].id.clone(),
                    from_impl: self.layers[slot.from].impls[a].id.clone(),
                    to_impl: self.layers[slot.to].impls[b].id.clone(),
                    cost,
                })
            })
            .collect()
    }

    /// Sub-space keeping only the implementations accepted by `keep`.
    pub fn restrict<F>(&self, keep: F) -> Result<DesignSpace, ModelError>
    where
        F: Fn(&ImplDescriptor) -> bool,
    {
        let kept: Vec<Vec<usize>> = self
            .layers
            .iter()
            .map(|l| (0..l.impls.len()).filter(|&k| keep(&l.impls[k])).collect())
            .collect();
        if let Some(i) = kept.iter().position(Vec::is_empty) {
            return Err(ModelError::MissingImplementations(self.layers[i].id.clone()));
        }
        let layers: Vec<LayerSlot> = self
            .layers
            .iter()
            .zip(&kept)
            .map(|(l, ks)| LayerSlot {
                id: l.id.clone(),
                kind: l.kind,
                impls: ks.iter().map(|&k| l.impls[k].clone()).collect(),
            })
            .collect();
        let edges = self
            .edges
            .iter()
            .map(|e| {
                let mut costs = Vec::with_capacity(kept[e.from].len() * kept[e.to].len());
                for &a in &kept[e.from] {
                    for &b in &kept[e.to] {
                        costs.push(e.costs[a * e.width + b]);
                    }
                }
                EdgeSlot { from: e.from, to: e.to, width: kept[e.to].len(), costs }
            })
            .collect();
        let mut table = self.table.clone();
        for l in &layers {
            table.entries.insert(l.id.clone(), l.impls.clone());
        }
        Ok(DesignSpace {
            network: self.network.clone(),
            table,
            layers,
            index: self.index.clone(),
            edges,
            incoming: self.incoming.clone(),
            chain: self.chain,
        })
    }
}

fn check_impl(layer: &str, imp: &ImplDescriptor) -> Result<(), ModelError> {
    let bad = |reason: &str| ModelError::InvalidImpl {
        layer: layer.to_string(),
        impl_id: imp.id.clone(),
        reason: reason.to_string(),
    };
    if !(imp.latency_ms.is_finite() && imp.latency_ms >= 0.0) {
        return Err(bad("latency_ms must be finite and >= 0"));
    }
    if !(imp.accuracy_delta_pp.is_finite() && imp.accuracy_delta_pp >= 0.0) {
        return Err(bad("accuracy_delta_pp must be finite and >= 0"));
    }
    Ok(())
}

fn resolve(table: &CostTable, ov: Option<EdgeCost>, a: &ImplDescriptor, b: &ImplDescriptor) -> Resolved {
    if let Some(cost) = ov {
        return Resolved { cost, memory_bytes: 0 };
    }
    if let Some(rule) = table.conversions.iter().find(|r| r.matches(a, b)) {
        return Resolved { cost: rule.penalty_ms, memory_bytes: rule.memory_bytes };
    }
    let cost = if a.same_attrs(b) { EdgeCost::FREE } else { table.default_mismatch_ms };
    Resolved { cost, memory_bytes: 0 }
}

type OverrideKey<'a> = (usize, usize, &'a str, &'a str);

fn index_overrides<'a>(
    overrides: &'a [EdgeOverride],
    layers: &[LayerSlot],
    index: &HashMap<String, usize>,
    net: &NetworkSpec,
) -> Result<HashMap<OverrideKey<'a>, EdgeCost>, ModelError> {
    let mut map = HashMap::new();
    for o in overrides {
        let f = *index.get(&o.from_layer).ok_or_else(|| ModelError::UnknownLayer(o.from_layer.clone()))?;
        let t = *index.get(&o.to_layer).ok_or_else(|| ModelError::UnknownLayer(o.to_layer.clone()))?;
        if !net.layers[t].predecessors.contains(&o.from_layer) {
            return Err(ModelError::UnknownEdge { from: o.from_layer.clone(), to: o.to_layer.clone() });
        }
        for (layer, id) in [(f, &o.from_impl), (t, &o.to_impl)] {
            if !layers[layer].impls.iter().any(|i| &i.id == id) {
                return Err(ModelError::UnknownImpl { layer: layers[layer].id.clone(), impl_id: id.clone() });
            }
        }
        // first occurrence wins
        map.entry((f, t, o.from_impl.as_str(), o.to_impl.as_str())).or_insert(o.penalty_ms);
    }
    Ok(map)
}

/// For every implementation with `fuses_next`, adds a zero-cost passthrough on
/// the consuming layer that is only reachable from that implementation.
fn expand_fusion(net: &NetworkSpec, table: &mut CostTable) -> Result<(), ModelError> {
    let consumers = net.consumers();
    let mut generated: Vec<EdgeOverride> = Vec::new();
    for l in &net.layers {
        let fusing: Vec<ImplDescriptor> =
            table.impls(&l.id).iter().filter(|i| i.fuses_next.is_some()).cloned().collect();
        if fusing.is_empty() {
            continue;
        }
        let next = &consumers[&l.id];
        for v in &fusing {
            let expected = v.fuses_next.expect("filtered above");
            let target = match next.as_slice() {
                [one] => net.layer(one).expect("consumer exists"),
                [] => {
                    return Err(ModelError::FusionTargetMismatch {
                        layer: l.id.clone(),
                        expected,
                        found: "no consumer".into(),
                    })
                }
                many => {
                    return Err(ModelError::FusionTargetMismatch {
                        layer: l.id.clone(),
                        expected,
                        found: format!("{} consumers", many.len()),
                    })
                }
            };
            if target.kind != expected {
                return Err(ModelError::FusionTargetMismatch {
                    layer: l.id.clone(),
                    expected,
                    found: target.kind.to_string(),
                });
            }
            let pass_id = format!("fused:{}", v.id);
            if !table.impls(&target.id).iter().any(|i| i.id == pass_id) {
                let passthrough = ImplDescriptor {
                    id: pass_id.clone(),
                    library: v.library.clone(),
                    algorithm: FUSED_PASSTHROUGH.into(),
                    algorithm_config: v.id.clone(),
                    data_type: v.data_type,
                    layout: v.layout,
                    core: v.core,
                    latency_ms: 0.0,
                    memory_bytes: 0,
                    accuracy_delta_pp: 0.0,
                    fuses_next: None,
                };
                table.add_impl(&target.id, passthrough);
            }
        }
        for v in &fusing {
            let pass_id = format!("fused:{}", v.id);
            let target = &next[0];
            for u in table.impls(&l.id) {
                for w in table.impls(target) {
                    let cost = if u.id == v.id && w.id == pass_id {
                        EdgeCost::FREE
                    } else if u.id == v.id || w.id == pass_id {
                        EdgeCost::Forbidden
                    } else {
                        continue;
                    };
                    generated.push(EdgeOverride {
                        from_layer: l.id.clone(),
                        to_layer: target.clone(),
                        from_impl: u.id.clone(),
                        to_impl: w.id.clone(),
                        penalty_ms: cost,
                    });
                }
            }
        }
    }
    if !generated.is_empty() {
        generated.append(&mut table.edge_overrides);
        table.edge_overrides = generated;
    }
    Ok(())
}
