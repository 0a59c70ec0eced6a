use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

use super::{finish, Algorithm, SearchError, SearchReport};
use crate::model::{DesignSpace, EdgeCost};

#[derive(Debug, Clone, Copy)]
struct Entry {
    priority: f64,
    vertex: usize,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl Ord for Entry {
    // min-heap on (priority, vertex)
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .priority
            .total_cmp(&self.priority)
            .then_with(|| other.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Best-first search from a virtual source (edges into the first layer cost
/// the implementation latency) to the last layer. Moving to a vertex costs
/// its latency plus the conversion penalty. Vertices are closed on first pop
/// and never reopened.
///
/// The considered-state count is the number of (layer, implementation)
/// vertices evaluated as neighbours of an expanded vertex.
fn shortest_path(
    space: &DesignSpace,
    algorithm: Algorithm,
    heuristic: &[f64],
) -> Result<SearchReport, SearchError> {
    if !space.is_chain() {
        return Err(SearchError::NotAChain);
    }
    let started = Instant::now();
    let depth = space.depth();
    let mut offsets = Vec::with_capacity(depth + 1);
    offsets.push(0);
    for l in 0..depth {
        offsets.push(offsets[l] + space.impl_count(l));
    }
    let n = offsets[depth];
    let mut layer_of = vec![0usize; n];
    for l in 0..depth {
        layer_of[offsets[l]..offsets[l + 1]].fill(l);
    }

    let mut dist = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let mut heap = BinaryHeap::new();
    let mut considered = 0u64;

    for (k, imp) in space.impls(0).iter().enumerate() {
        considered += 1;
        dist[k] = imp.latency_ms;
        heap.push(Entry { priority: imp.latency_ms + heuristic[0], vertex: k });
    }

    while let Some(Entry { vertex, .. }) = heap.pop() {
        if closed[vertex] {
            continue;
        }
        closed[vertex] = true;
        let layer = layer_of[vertex];
        if layer + 1 == depth {
            let mut path = vec![0usize; depth];
            let mut v = vertex;
            for l in (0..depth).rev() {
                path[l] = v - offsets[l];
                v = parent[v];
            }
            return finish(space, algorithm, &path, considered, started);
        }
        let edge = space.dependency_between(layer, layer + 1).expect("chain edge");
        let from = vertex - offsets[layer];
        for (k, imp) in space.impls(layer + 1).iter().enumerate() {
            let penalty = match space.edge_cost_at(edge, from, k) {
                EdgeCost::Penalty(p) => p,
                EdgeCost::Forbidden => continue,
            };
            considered += 1;
            let w = offsets[layer + 1] + k;
            if closed[w] {
                continue;
            }
            let g = dist[vertex] + penalty + imp.latency_ms;
            if g < dist[w] {
                dist[w] = g;
                parent[w] = vertex;
                heap.push(Entry { priority: g + heuristic[layer + 1], vertex: w });
            }
        }
    }
    Err(SearchError::NoFeasiblePath)
}

/// Exact shortest path over the layered graph.
pub fn run_dijkstra(space: &DesignSpace) -> Result<SearchReport, SearchError> {
    shortest_path(space, Algorithm::Dijkstra, &vec![0.0; space.depth()])
}

/// A* whose heuristic for a vertex at depth `d` is the cheapest implementation
/// latency two layers ahead (`d + 2`), or zero near the end of the network.
/// The heuristic can be inconsistent, so the result is feasible but not
/// guaranteed optimal.
pub fn run_astar(space: &DesignSpace) -> Result<SearchReport, SearchError> {
    let depth = space.depth();
    let heuristic: Vec<f64> = (0..depth)
        .map(|d| {
            if d + 2 < depth {
                space.impls(d + 2).iter().map(|i| i.latency_ms).fold(f64::INFINITY, f64::min)
            } else {
                0.0
            }
        })
        .collect();
    shortest_path(space, Algorithm::Astar, &heuristic)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::search::{run_brute_force, DEFAULT_BRUTE_CAP};

    #[test]
    fn fixtures_reach_the_optimum() {
        let detour = fixtures::detour_space();
        let dj = run_dijkstra(&detour).unwrap();
        let astar = run_astar(&detour).unwrap();
        assert_eq!(dj.best_latency_ms, 9.0);
        assert_eq!(astar.best_latency_ms, 9.0);
        assert!(astar.considered_states <= dj.considered_states);
        assert_eq!(run_dijkstra(&fixtures::trap_space()).unwrap().best_latency_ms, 5.5);
    }

    #[test]
    fn single_path_considers_every_vertex_once() {
        let s = fixtures::uniform_chain(6, 1, 1.25);
        let r = run_dijkstra(&s).unwrap();
        assert_eq!(r.best_latency_ms, 7.5);
        assert_eq!(r.considered_states, s.vertex_count() as u64);
    }

    #[test]
    fn zero_latency_space() {
        let s = fixtures::uniform_chain(4, 3, 0.0);
        assert_eq!(run_astar(&s).unwrap().best_latency_ms, 0.0);
    }

    #[test]
    fn forbidden_edges_are_skipped() {
        let s = fixtures::forbidden_trap_space();
        let dj = run_dijkstra(&s).unwrap();
        let bf = run_brute_force(&s, DEFAULT_BRUTE_CAP).unwrap();
        assert_eq!(dj.best_latency_ms, bf.best_latency_ms);
    }

    #[test]
    fn all_forbidden_has_no_path() {
        let (net, mut t) = fixtures::trap();
        for a in ["a", "b"] {
            for b in ["a", "b"] {
                t.edge_overrides.insert(
                    0,
                    crate::model::EdgeOverride {
                        from_layer: "L1".into(),
                        to_layer: "L2".into(),
                        from_impl: a.into(),
                        to_impl: b.into(),
                        penalty_ms: EdgeCost::Forbidden,
                    },
                );
            }
        }
        let s = DesignSpace::build(&net, &t).unwrap();
        assert!(matches!(run_dijkstra(&s), Err(SearchError::NoFeasiblePath)));
        assert!(matches!(run_astar(&s), Err(SearchError::NoFeasiblePath)));
    }

    #[test]
    fn matches_brute_force_on_random_chains() {
        for seed in 0..40 {
            let s = fixtures::random_chain_space(seed, fixtures::RandomSpaceSpec::default());
            let bf = run_brute_force(&s, DEFAULT_BRUTE_CAP).unwrap();
            let dj = run_dijkstra(&s).unwrap();
            assert_eq!(dj.best_latency_ms, bf.best_latency_ms, "seed {seed}");
            let astar = run_astar(&s).unwrap();
            assert!(astar.best_latency_ms >= dj.best_latency_ms);
        }
    }
}
