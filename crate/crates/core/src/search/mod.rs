//! Search algorithms over a [`DesignSpace`]: tabular Q-learning and the
//! baselines it is compared against. Every algorithm returns a
//! [`SearchReport`] whose latency is recomputed with
//! [`DesignSpace::evaluate_indices`], so reports are directly comparable.

mod baseline;
mod graph;
mod qlearning;

use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Configuration, DesignSpace, ModelError};

pub use baseline::{run_brute_force, run_direct, run_random, DEFAULT_BRUTE_CAP};
pub use graph::{run_astar, run_dijkstra};
pub use qlearning::{
    bellman_update, epsilon_schedule, run_rl, select_action, EpsilonSchedule, QState, QTable,
    ReplayBuffer, Transition,
};

#[derive(Debug, Error)]
pub enum SearchError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("algorithm requires a chain network")]
    NotAChain,
    #[error("no feasible configuration found")]
    NoFeasiblePath,
    #[error("design space of {size} configurations exceeds the brute-force cap {cap}")]
    SpaceTooLarge { size: String, cap: u128 },
    #[error("at least 20 episodes are required, got {0}")]
    TooFewEpisodes(usize),
    #[error("cannot select an action from an empty row")]
    EmptyRow,
    #[error("unknown Q-table state {0}")]
    UnknownState(String),
    #[error("invalid search parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Rl,
    Random,
    Ds,
    DsPlus,
    Dijkstra,
    Astar,
    Brute,
}

impl Algorithm {
    pub const ALL: [Algorithm; 7] = [
        Algorithm::Rl,
        Algorithm::Random,
        Algorithm::Ds,
        Algorithm::DsPlus,
        Algorithm::Dijkstra,
        Algorithm::Astar,
        Algorithm::Brute,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Rl => "rl",
            Algorithm::Random => "random",
            Algorithm::Ds => "ds",
            Algorithm::DsPlus => "ds+",
            Algorithm::Dijkstra => "dijkstra",
            Algorithm::Astar => "astar",
            Algorithm::Brute => "brute",
        }
    }

    /// Whether the algorithm walks the layered graph and therefore needs a chain.
    pub fn requires_chain(&self) -> bool {
        matches!(self, Algorithm::Ds | Algorithm::DsPlus | Algorithm::Dijkstra | Algorithm::Astar)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Algorithm::ALL
            .iter()
            .copied()
            .find(|a| a.name().eq_ignore_ascii_case(s))
            .or_else(|| (s.eq_ignore_ascii_case("a*")).then_some(Algorithm::Astar))
            .ok_or_else(|| {
                let names: Vec<&str> = Algorithm::ALL.iter().map(|a| a.name()).collect();
                format!("unknown algorithm {s:?}; expected one of {}", names.join(", "))
            })
    }
}

/// Q-learning parameters. Defaults: learning rate
/// 0.05, discount 0.9, replay capacity 128.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchParams {
    pub total_episodes: usize,
    pub alpha: f64,
    pub gamma: f64,
    pub replay_batch: usize,
    pub replay_capacity: usize,
    pub seed: u64,
}

impl Default for SearchParams {
    fn default() -> Self {
        SearchParams {
            total_episodes: 1000,
            alpha: 0.05,
            gamma: 0.9,
            replay_batch: 32,
            replay_capacity: 128,
            seed: 0,
        }
    }
}

impl SearchParams {
    pub fn with_episodes(mut self, episodes: usize) -> Self {
        self.total_episodes = episodes;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// A feasible configuration visited during a search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub config: Configuration,
    pub latency_ms: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchReport {
    pub algorithm: String,
    pub best_config: Configuration,
    pub best_latency_ms: f64,
    /// Number of (layer, implementation) evaluations performed.
    pub considered_states: u64,
    /// Per-episode latency; `None` marks an infeasible episode.
    #[serde(default)]
    pub learning_curve: Vec<Option<f64>>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(skip)]
    pub wall_time: Duration,
    /// Distinct feasible configurations in order of first visit.
    #[serde(skip)]
    pub solutions: Vec<Solution>,
}

impl SearchReport {
    /// Best latency seen up to each episode; infeasible prefixes are `None`.
    pub fn running_best(&self) -> Vec<Option<f64>> {
        let mut best: Option<f64> = None;
        self.learning_curve
            .iter()
            .map(|l| {
                if let Some(v) = l {
                    best = Some(best.map_or(*v, |b: f64| b.min(*v)));
                }
                best
            })
            .collect()
    }

    /// Learning curve as `episode,latency_ms` CSV; infeasible episodes leave the latency empty.
    pub fn learning_curve_csv(&self) -> String {
        let mut out = String::from("episode,latency_ms\n");
        for (i, l) in self.learning_curve.iter().enumerate() {
            match l {
                Some(v) => out.push_str(&format!("{},{}\n", i + 1, v)),
                None => out.push_str(&format!("{},\n", i + 1)),
            }
        }
        out
    }
}

/// Runs `algorithm` with the given parameters (episodes and seed only matter
/// for the sampling algorithms).
pub fn run(
    algorithm: Algorithm,
    space: &DesignSpace,
    params: &SearchParams,
    brute_cap: u128,
) -> Result<SearchReport, SearchError> {
    match algorithm {
        Algorithm::Rl => run_rl(space, params),
        Algorithm::Random => run_random(space, params.total_episodes, params.seed),
        Algorithm::Ds => run_direct(space, false),
        Algorithm::DsPlus => run_direct(space, true),
        Algorithm::Dijkstra => run_dijkstra(space),
        Algorithm::Astar => run_astar(space),
        Algorithm::Brute => run_brute_force(space, brute_cap),
    }
}

fn finish(
    space: &DesignSpace,
    algorithm: Algorithm,
    best: &[usize],
    considered_states: u64,
    started: std::time::Instant,
) -> Result<SearchReport, SearchError> {
    let metrics = space.evaluate_indices(best)?;
    let best_config = space.configuration(best);
    Ok(SearchReport {
        algorithm: algorithm.name().to_string(),
        best_config: best_config.clone(),
        best_latency_ms: metrics.latency_ms,
        considered_states,
        learning_curve: Vec::new(),
        seed: None,
        wall_time: started.elapsed(),
        solutions: vec![Solution { config: best_config, latency_ms: metrics.latency_ms }],
    })
}
