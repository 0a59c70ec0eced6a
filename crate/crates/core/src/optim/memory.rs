use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::OptimError;
use crate::model::{LayerKind, NetworkSpec};

/// Live range of one activation tensor, inclusive at both ends.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorLifetime {
    pub tensor: String,
    pub producer: usize,
    pub last_consumer: usize,
    pub size_bytes: u64,
}

impl TensorLifetime {
    pub fn overlaps(&self, other: &TensorLifetime) -> bool {
        self.producer <= other.last_consumer && other.producer <= self.last_consumer
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolPlan {
    pub offsets: BTreeMap<String, u64>,
    pub footprint_bytes: u64,
    /// Layers writing their output over their input.
    pub inplace_set: BTreeSet<String>,
    /// In-place layer id -> tensor whose storage it reuses.
    #[serde(default)]
    pub aliases: BTreeMap<String, String>,
    /// Sum of all activation sizes with neither in-place nor pooling.
    pub naive_bytes: u64,
}

fn inplace_capable(kind: LayerKind) -> bool {
    matches!(kind, LayerKind::Activation | LayerKind::Reshape | LayerKind::Flatten)
}

/// Activation, reshape and flatten layers whose single input tensor has no
/// other consumer.
pub fn plan_inplace(net: &NetworkSpec) -> BTreeSet<String> {
    let consumers = net.consumers();
    net.layers
        .iter()
        .filter(|l| inplace_capable(l.kind))
        .filter(|l| match l.predecessors.as_slice() {
            [p] => consumers.get(p).is_some_and(|c| c.len() == 1),
            _ => false,
        })
        .map(|l| l.id.clone())
        .collect()
}

/// One lifetime per allocated tensor. Layers in `inplace` share the tensor of
/// their input, extending its lifetime to their own last consumer. Outputs
/// nobody consumes live only at their producer.
pub fn tensor_lifetimes(
    net: &NetworkSpec,
    bytes_per_element: u64,
    inplace: &BTreeSet<String>,
) -> Result<Vec<TensorLifetime>, OptimError> {
    let violations = net.validate();
    if !violations.is_empty() {
        return Err(OptimError::InvalidNetwork(violations));
    }
    let mut root: BTreeMap<&str, &str> = BTreeMap::new();
    let mut groups: BTreeMap<&str, TensorLifetime> = BTreeMap::new();
    for l in net.sorted() {
        let r = if inplace.contains(&l.id) {
            let [p] = l.predecessors.as_slice() else {
                return Err(OptimError::InvalidLifetime(l.id.clone()));
            };
            root[p.as_str()]
        } else {
            l.id.as_str()
        };
        root.insert(&l.id, r);
        let size = l.output_size * bytes_per_element;
        let g = groups.entry(r).or_insert_with(|| TensorLifetime {
            tensor: r.to_string(),
            producer: l.depth,
            last_consumer: l.depth,
            size_bytes: 0,
        });
        g.size_bytes = g.size_bytes.max(size);
        g.last_consumer = g.last_consumer.max(l.depth);
        for p in &l.predecessors {
            let g = groups.get_mut(root[p.as_str()]).expect("predecessor seen first");
            g.last_consumer = g.last_consumer.max(l.depth);
        }
    }
    let mut out: Vec<TensorLifetime> = groups.into_values().collect();
    out.sort_by_key(|t| t.producer);
    Ok(out)
}

/// Greedy first-fit by decreasing size: each tensor takes the lowest offset
/// that does not intersect any already placed tensor with an overlapping
/// lifetime.
pub fn plan_memory_pool(lifetimes: &[TensorLifetime]) -> Result<PoolPlan, OptimError> {
    if let Some(t) = lifetimes.iter().find(|t| t.producer > t.last_consumer) {
        return Err(OptimError::InvalidLifetime(t.tensor.clone()));
    }
    let mut order: Vec<usize> = (0..lifetimes.len()).collect();
    order.sort_by(|&a, &b| {
        let (x, y) = (&lifetimes[a], &lifetimes[b]);
        y.size_bytes
            .cmp(&x.size_bytes)
            .then(x.producer.cmp(&y.producer))
            .then_with(|| x.tensor.cmp(&y.tensor))
    });
    let mut placed: Vec<(usize, u64)> = Vec::with_capacity(lifetimes.len());
    let mut plan = PoolPlan::default();
    for i in order {
        let t = &lifetimes[i];
        let mut busy: Vec<(u64, u64)> = placed
            .iter()
            .filter(|&&(j, _)| lifetimes[j].overlaps(t))
            .map(|&(j, off)| (off, off + lifetimes[j].size_bytes))
            .collect();
        busy.sort_unstable();
        let mut offset = 0u64;
        for (start, end) in busy {
            if offset + t.size_bytes <= start {
                break;
            }
            offset = offset.max(end);
        }
        placed.push((i, offset));
        plan.offsets.insert(t.tensor.clone(), offset);
        plan.footprint_bytes = plan.footprint_bytes.max(offset + t.size_bytes);
        plan.naive_bytes += t.size_bytes;
    }
    Ok(plan)
}

/// Activation memory plan for a whole network, optionally with in-place
/// layers.
pub fn plan_network_memory(net: &NetworkSpec, bytes_per_element: u64, inplace: bool) -> Result<PoolPlan, OptimError> {
    let set = if inplace { plan_inplace(net) } else { BTreeSet::new() };
    let lifetimes = tensor_lifetimes(net, bytes_per_element, &set)?;
    let mut plan = plan_memory_pool(&lifetimes)?;
    plan.naive_bytes = net.layers.iter().map(|l| l.output_size * bytes_per_element).sum();
    for l in net.sorted() {
        if set.contains(&l.id) {
            let p = &l.predecessors[0];
            let target = plan.aliases.get(p).cloned().unwrap_or_else(|| p.clone());
            plan.aliases.insert(l.id.clone(), target);
        }
    }
    plan.inplace_set = set;
    Ok(plan)
}
