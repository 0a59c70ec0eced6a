use std::collections::HashSet;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{finish, Algorithm, SearchError, SearchReport, Solution};
use crate::model::{DesignSpace, EdgeCost};

/// Default limit on the number of configurations enumerated by brute force.
pub const DEFAULT_BRUTE_CAP: u128 = 10_000_000;

/// Uniform sampling of one implementation per layer, `episodes` times.
pub fn run_random(space: &DesignSpace, episodes: usize, seed: u64) -> Result<SearchReport, SearchError> {
    if episodes == 0 {
        return Err(SearchError::InvalidParams("random search needs at least one episode".into()));
    }
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let depth = space.depth();
    let mut config = vec![0usize; depth];
    let mut curve = Vec::with_capacity(episodes);
    let mut best: Option<(Vec<usize>, f64)> = None;
    let mut seen = HashSet::new();
    let mut solutions = Vec::new();
    for _ in 0..episodes {
        for (layer, slot) in config.iter_mut().enumerate() {
            *slot = rng.random_range(0..space.impl_count(layer));
        }
        match space.evaluate_indices(&config) {
            Ok(m) => {
                let l = m.latency_ms;
                if best.as_ref().is_none_or(|(_, b)| l < *b) {
                    best = Some((config.clone(), l));
                }
                if seen.insert(config.clone()) {
                    solutions.push(Solution { config: space.configuration(&config), latency_ms: l });
                }
                curve.push(Some(l));
            }
            Err(crate::model::ModelError::ForbiddenConfiguration { .. }) => curve.push(None),
            Err(e) => return Err(e.into()),
        }
    }
    let (best_idx, _) = best.ok_or(SearchError::NoFeasiblePath)?;
    let mut report = finish(space, Algorithm::Random, &best_idx, (episodes * depth) as u64, started)?;
    report.learning_curve = curve;
    report.seed = Some(seed);
    report.solutions = solutions;
    Ok(report)
}

/// One forward greedy pass. DS picks the fastest implementation per layer;
/// DS+ adds the conversion penalty from the previously chosen implementation
/// and never takes a forbidden edge.
pub fn run_direct(space: &DesignSpace, include_penalty: bool) -> Result<SearchReport, SearchError> {
    if !space.is_chain() {
        return Err(SearchError::NotAChain);
    }
    let started = Instant::now();
    let algorithm = if include_penalty { Algorithm::DsPlus } else { Algorithm::Ds };
    let mut chosen: Vec<usize> = Vec::with_capacity(space.depth());
    let mut considered = 0u64;
    for layer in 0..space.depth() {
        let mut best: Option<(usize, f64)> = None;
        for (k, imp) in space.impls(layer).iter().enumerate() {
            considered += 1;
            let mut cost = imp.latency_ms;
            if include_penalty && layer > 0 {
                let edge = space.dependency_between(layer - 1, layer).expect("chain edge");
                match space.edge_cost_at(edge, chosen[layer - 1], k) {
                    EdgeCost::Penalty(p) => cost += p,
                    EdgeCost::Forbidden => continue,
                }
            }
            if best.is_none_or(|(_, b)| cost < b) {
                best = Some((k, cost));
            }
        }
        let (k, _) = best.ok_or(SearchError::NoFeasiblePath)?;
        chosen.push(k);
    }
    match finish(space, algorithm, &chosen, considered, started) {
        Err(SearchError::Model(crate::model::ModelError::ForbiddenConfiguration { .. })) => {
            Err(SearchError::NoFeasiblePath)
        }
        other => other,
    }
}

/// Exhaustive enumeration; the ground truth for every other search.
pub fn run_brute_force(space: &DesignSpace, cap: u128) -> Result<SearchReport, SearchError> {
    let size = space.space_size_exact();
    match size {
        Some(n) if n <= cap => {}
        _ => {
            return Err(SearchError::SpaceTooLarge {
                size: format!("{:.3e}", space.space_size()),
                cap,
            })
        }
    }
    let started = Instant::now();
    let depth = space.depth();
    let counts: Vec<usize> = (0..depth).map(|l| space.impl_count(l)).collect();
    let mut config = vec![0usize; depth];
    let mut best: Option<(Vec<usize>, f64)> = None;
    let mut enumerated = 0u64;
    loop {
        enumerated += 1;
        if let Ok(m) = space.evaluate_indices(&config) {
            if best.as_ref().is_none_or(|(_, b)| m.latency_ms < *b) {
                best = Some((config.clone(), m.latency_ms));
            }
        }
        // odometer, last layer fastest
        let mut pos = depth;
        loop {
            if pos == 0 {
                let (best_idx, _) = best.ok_or(SearchError::NoFeasiblePath)?;
                return finish(space, Algorithm::Brute, &best_idx, enumerated * depth as u64, started);
            }
            pos -= 1;
            config[pos] += 1;
            if config[pos] < counts[pos] {
                break;
            }
            config[pos] = 0;
        }
    }
}
