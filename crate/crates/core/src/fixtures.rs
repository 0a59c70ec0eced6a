//! Small hand-built design spaces and a seeded random chain generator, shared
//! by unit tests, integration tests and the CLI.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{
    AttrMatch, ConversionRule, CostTable, DataType, DesignSpace, EdgeCost, EdgeOverride,
    ImplDescriptor, LayerKind, Layout, NetworkSpec,
};

fn imp(id: &str, layout: Layout, latency: f64) -> ImplDescriptor {
    ImplDescriptor::new(id, DataType::Fp32, layout, latency)
}

fn chain_net(name: &str, ids: &[&str]) -> NetworkSpec {
    NetworkSpec::chain(
        name,
        ids.iter()
            .enumerate()
            .map(|(i, id)| (id.to_string(), if i == 0 { LayerKind::Input } else { LayerKind::Convolution }))
            .collect(),
    )
}

/// Three layers with two implementations each. Layer `L2`'s fastest
/// implementation `b` needs a layout conversion (2 ms each way), so greedy
/// per-layer selection lands on 12 ms while the optimum is 9 ms (all `a`).
pub fn detour() -> (NetworkSpec, CostTable) {
    let net = chain_net("detour", &["L1", "L2", "L3"]);
    let mut t = CostTable::new("detour");
    for (layer, a, b) in [("L1", 2.0, 3.0), ("L2", 5.0, 4.0), ("L3", 2.0, 3.0)] {
        t.add_impl(layer, imp("a", Layout::Nchw, a));
        t.add_impl(layer, imp("b", Layout::Nhwc, b));
    }
    let nchw = AttrMatch { layout: Some(Layout::Nchw), ..AttrMatch::any() };
    let nhwc = AttrMatch { layout: Some(Layout::Nhwc), ..AttrMatch::any() };
    t.conversions.push(ConversionRule::new(nchw, nhwc, EdgeCost::Penalty(2.0)));
    t.conversions.push(ConversionRule::new(nhwc, nchw, EdgeCost::Penalty(2.0)));
    (net, t)
}

pub fn detour_space() -> DesignSpace {
    let (n, t) = detour();
    DesignSpace::build(&n, &t).expect("fixture is valid")
}

/// Two layers where the penalty-aware greedy choice still misses the optimum:
/// greedy takes `a` (2.0) then `b` (3.0 + 6.0) = 11 ms; the optimum `b,b` is 5.5 ms.
pub fn trap() -> (NetworkSpec, CostTable) {
    let net = chain_net("trap", &["L1", "L2"]);
    let mut t = CostTable::new("trap");
    t.add_impl("L1", imp("a", Layout::Nchw, 2.0));
    t.add_impl("L1", imp("b", Layout::Nchw, 2.5));
    t.add_impl("L2", imp("a", Layout::Nchw, 10.0));
    t.add_impl("L2", imp("b", Layout::Nchw, 3.0));
    t.edge_overrides.push(EdgeOverride {
        from_layer: "L1".into(),
        to_layer: "L2".into(),
        from_impl: "a".into(),
        to_impl: "b".into(),
        penalty_ms: EdgeCost::Penalty(6.0),
    });
    (net, t)
}

pub fn trap_space() -> DesignSpace {
    let (n, t) = trap();
    DesignSpace::build(&n, &t).expect("fixture is valid")
}

/// Three layers where the locally cheapest pair is forbidden.
pub fn forbidden_trap_space() -> DesignSpace {
    let net = chain_net("forbidden", &["L1", "L2", "L3"]);
    let mut t = CostTable::new("forbidden");
    for l in ["L1", "L2", "L3"] {
        t.add_impl(l, imp("a", Layout::Nchw, 1.0));
        t.add_impl(l, imp("b", Layout::Nhwc, 4.0));
    }
    t.edge_overrides.push(EdgeOverride {
        from_layer: "L1".into(),
        to_layer: "L2".into(),
        from_impl: "a".into(),
        to_impl: "a".into(),
        penalty_ms: EdgeCost::Forbidden,
    });
    DesignSpace::build(&net, &t).expect("fixture is valid")
}

/// Chain of `depth` layers with `branch` identical implementations each.
pub fn uniform_chain(depth: usize, branch: usize, latency: f64) -> DesignSpace {
    let ids: Vec<String> = (0..depth).map(|d| format!("L{d:03}")).collect();
    let refs: Vec<&str> = ids.iter().map(String::as_str).collect();
    let net = chain_net("uniform", &refs);
    let mut t = CostTable::new("uniform");
    for id in &ids {
        for k in 0..branch {
            t.add_impl(id, imp(&format!("i{k:02}"), Layout::Nchw, latency));
        }
    }
    DesignSpace::build(&net, &t).expect("fixture is valid")
}

/// Shape of the random chain spaces produced by [`random_chain_space`].
#[derive(Debug, Clone, Copy)]
pub struct RandomSpaceSpec {
    pub min_depth: usize,
    pub max_depth: usize,
    pub min_branch: usize,
    pub max_branch: usize,
    /// Probability that an implementation pair is forbidden.
    pub forbidden_prob: f64,
    /// Probability that a (non-forbidden) pair converts for free.
    pub free_prob: f64,
}

impl Default for RandomSpaceSpec {
    fn default() -> Self {
        RandomSpaceSpec {
            min_depth: 2,
            max_depth: 8,
            min_branch: 1,
            max_branch: 5,
            forbidden_prob: 0.05,
            free_prob: 0.4,
        }
    }
}

impl RandomSpaceSpec {
    pub fn fixed(depth: usize, branch: usize) -> Self {
        RandomSpaceSpec {
            min_depth: depth,
            max_depth: depth,
            min_branch: branch,
            max_branch: branch,
            ..Default::default()
        }
    }
}

/// Seeded random chain. Latencies lie on a 1/8 ms grid (0-10 ms) and
/// penalties on the same grid (0-3 ms), so every path sum is exact in
/// floating point. One random path is kept free of forbidden pairs, which
/// guarantees feasibility.
pub fn random_chain_space(seed: u64, spec: RandomSpaceSpec) -> DesignSpace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let depth = rng.random_range(spec.min_depth..=spec.max_depth);
    let ids: Vec<String> = (0..depth).map(|d| format!("L{d:03}")).collect();
    let refs: Vec<&str> = ids.iter().map(String::as_str).collect();
    let net = chain_net(&format!("random-{seed}"), &refs);
    let mut t = CostTable::new(net.name.clone());
    let branches: Vec<usize> =
        (0..depth).map(|_| rng.random_range(spec.min_branch..=spec.max_branch)).collect();
    for (id, &b) in ids.iter().zip(&branches) {
        for k in 0..b {
            let latency = rng.random_range(0..=80) as f64 / 8.0;
            t.add_impl(id, imp(&format!("i{k:02}"), Layout::Nchw, latency));
        }
    }
    let witness: Vec<usize> = branches.iter().map(|&b| rng.random_range(0..b)).collect();
    for d in 1..depth {
        for a in 0..branches[d - 1] {
            for b in 0..branches[d] {
                let on_witness = witness[d - 1] == a && witness[d] == b;
                let roll: f64 = rng.random();
                let cost = if roll < spec.forbidden_prob && !on_witness {
                    EdgeCost::Forbidden
                } else if roll < spec.forbidden_prob + spec.free_prob {
                    continue;
                } else {
                    EdgeCost::Penalty(rng.random_range(1..=24) as f64 / 8.0)
                };
                t.edge_overrides.push(EdgeOverride {
                    from_layer: ids[d - 1].clone(),
                    to_layer: ids[d].clone(),
                    from_impl: format!("i{a:02}"),
                    to_impl: format!("i{b:02}"),
                    penalty_ms: cost,
                });
            }
        }
    }
    DesignSpace::build(&net, &t).expect("generated space is valid")
}
