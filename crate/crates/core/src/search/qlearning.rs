use std::collections::{HashSet, VecDeque};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Algorithm, SearchError, SearchParams, SearchReport, Solution};
use crate::model::{DesignSpace, EdgeCost};

/// Agent position: before the first layer, or having chosen implementation
/// `impl_index` for the layer at `depth`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QState {
    Start,
    Layer { depth: usize, impl_index: usize },
}

/// Tabular action-value function. The actions of a state are the
/// implementations of the next layer, indexed in id order; the last layer's
/// states have no actions.
#[derive(Debug, Clone)]
pub struct QTable {
    pub alpha: f64,
    pub gamma: f64,
    offsets: Vec<usize>,
    rows: Vec<Vec<f64>>,
}

impl QTable {
    pub fn new(space: &DesignSpace, alpha: f64, gamma: f64) -> Self {
        let d = space.depth();
        let mut offsets = Vec::with_capacity(d);
        let mut rows = vec![vec![0.0; space.impl_count(0)]];
        for layer in 0..d {
            offsets.push(rows.len());
            let actions = if layer + 1 < d { space.impl_count(layer + 1) } else { 0 };
            for _ in 0..space.impl_count(layer) {
                rows.push(vec![0.0; actions]);
            }
        }
        QTable { alpha, gamma, offsets, rows }
    }

    fn slot(&self, state: QState) -> Result<usize, SearchError> {
        match state {
            QState::Start => Ok(0),
            QState::Layer { depth, impl_index } => {
                let base = *self
                    .offsets
                    .get(depth)
                    .ok_or_else(|| SearchError::UnknownState(format!("{state:?}")))?;
                let end = self.offsets.get(depth + 1).copied().unwrap_or(self.rows.len());
                if base + impl_index < end {
                    Ok(base + impl_index)
                } else {
                    Err(SearchError::UnknownState(format!("{state:?}")))
                }
            }
        }
    }

    pub fn row(&self, state: QState) -> Result<&[f64], SearchError> {
        Ok(&self.rows[self.slot(state)?])
    }

    pub fn value(&self, state: QState, action: usize) -> Result<f64, SearchError> {
        self.row(state)?
            .get(action)
            .copied()
            .ok_or_else(|| SearchError::UnknownState(format!("{state:?} action {action}")))
    }

    pub fn set(&mut self, state: QState, action: usize, value: f64) -> Result<(), SearchError> {
        let slot = self.slot(state)?;
        let cell = self.rows[slot]
            .get_mut(action)
            .ok_or_else(|| SearchError::UnknownState(format!("{state:?} action {action}")))?;
        *cell = value;
        Ok(())
    }

    /// Applies one Bellman update and returns the new value.
    pub fn update(&mut self, t: &Transition) -> Result<f64, SearchError> {
        let max_next = if t.terminal {
            0.0
        } else {
            let next = self.row(t.next_state)?;
            next.iter().copied().fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v)))).unwrap_or(0.0)
        };
        let current = self.value(t.state, t.action)?;
        let updated = bellman_update(current, self.alpha, self.gamma, t.reward, max_next);
        self.set(t.state, t.action, updated)?;
        Ok(updated)
    }
}

/// `Q(s,a) <- Q(s,a)(1 - alpha) + alpha (r + gamma max_a' Q(s',a'))`.
pub fn bellman_update(q: f64, alpha: f64, gamma: f64, reward: f64, max_next: f64) -> f64 {
    q * (1.0 - alpha) + alpha * (reward + gamma * max_next)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub state: QState,
    pub action: usize,
    /// Negated layer latency (ms), never positive.
    pub reward: f64,
    pub next_state: QState,
    pub terminal: bool,
}

/// Bounded experience store, most recent first.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<Transition>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        ReplayBuffer { capacity, items: VecDeque::with_capacity(capacity) }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, t: Transition) {
        if self.capacity == 0 {
            return;
        }
        if self.items.len() == self.capacity {
            self.items.pop_back();
        }
        self.items.push_front(t);
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }

    /// Uniform sample without replacement of up to `batch` transitions.
    pub fn sample<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Vec<Transition> {
        let n = batch.min(self.items.len());
        rand::seq::index::sample(rng, self.items.len(), n).into_iter().map(|i| self.items[i]).collect()
    }
}

/// Exploration schedule as `(epsilon, episode count)` blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonSchedule {
    pub blocks: Vec<(f64, usize)>,
}

impl EpsilonSchedule {
    pub fn total(&self) -> usize {
        self.blocks.iter().map(|b| b.1).sum()
    }

    /// Epsilon for every episode in order.
    pub fn episodes(&self) -> impl Iterator<Item = f64> + '_ {
        self.blocks.iter().flat_map(|&(e, n)| std::iter::repeat_n(e, n))
    }
}

const DECAY_STEPS: [f64; 9] = [0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1];

/// Half of the episodes fully exploring, 5% at each of 0.9 … 0.1, and the
/// remainder at 0 (pure exploitation). Counts are floored; the final block
/// absorbs the rounding remainder.
pub fn epsilon_schedule(total_episodes: usize) -> Result<EpsilonSchedule, SearchError> {
    if total_episodes < 20 {
        return Err(SearchError::TooFewEpisodes(total_episodes));
    }
    let explore = total_episodes * 50 / 100;
    let step = total_episodes * 5 / 100;
    let mut blocks = vec![(1.0, explore)];
    blocks.extend(DECAY_STEPS.iter().map(|&e| (e, step)));
    blocks.push((0.0, total_episodes - explore - 9 * step));
    Ok(EpsilonSchedule { blocks })
}

/// Epsilon-greedy choice over a row of Q-values. Greedy ties go to the
/// lowest index, which is also the lowest implementation id.
pub fn select_action<R: Rng + ?Sized>(row: &[f64], epsilon: f64, rng: &mut R) -> Result<usize, SearchError> {
    if row.is_empty() {
        return Err(SearchError::EmptyRow);
    }
    let draw: f64 = rng.random();
    if draw < epsilon {
        return Ok(rng.random_range(0..row.len()));
    }
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    Ok(best)
}

/// Upper bound on any feasible episode latency.
fn latency_bound(space: &DesignSpace) -> f64 {
    let impls: f64 = (0..space.depth())
        .map(|l| space.impls(l).iter().map(|i| i.latency_ms).fold(0.0, f64::max))
        .sum();
    let penalties: f64 = (0..space.dependency_count())
        .map(|e| {
            let (f, t) = space.dependency(e);
            let mut worst: f64 = 0.0;
            for a in 0..space.impl_count(f) {
                for b in 0..space.impl_count(t) {
                    if let EdgeCost::Penalty(p) = space.edge_cost_at(e, a, b) {
                        worst = worst.max(p);
                    }
                }
            }
            worst
        })
        .sum();
    impls + penalties
}

/// Q-learning search with epsilon-greedy sampling, per-layer shaped rewards
/// and experience replay.
///
/// Each episode picks one implementation per layer in depth order. A layer's
/// reward is its negated latency plus the penalties of its incoming edges.
/// When an incoming edge is forbidden, the consuming layer is instead charged
/// twice the worst feasible episode latency seen so far (or twice a static
/// bound before any feasible episode).
pub fn run_rl(space: &DesignSpace, params: &SearchParams) -> Result<SearchReport, SearchError> {
    if !(0.0..=1.0).contains(&params.alpha) || !(0.0..=1.0).contains(&params.gamma) {
        return Err(SearchError::InvalidParams("alpha and gamma must lie in [0, 1]".into()));
    }
    let schedule = epsilon_schedule(params.total_episodes)?;
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut q = QTable::new(space, params.alpha, params.gamma);
    let mut buffer = ReplayBuffer::new(params.replay_capacity);
    let depth = space.depth();
    let bound = latency_bound(space);

    let mut actions = vec![0usize; depth];
    let mut costs = vec![0.0f64; depth];
    let mut forbidden = vec![false; depth];
    let mut curve = Vec::with_capacity(params.total_episodes);
    let mut worst_finite: Option<f64> = None;
    let mut best: Option<(Vec<usize>, f64)> = None;
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    let mut solutions = Vec::new();

    for epsilon in schedule.episodes() {
        let mut state = QState::Start;
        for (layer, slot) in actions.iter_mut().enumerate() {
            let a = select_action(q.row(state)?, epsilon, &mut rng)?;
            *slot = a;
            state = QState::Layer { depth: layer, impl_index: a };
        }

        for layer in 0..depth {
            let mut cost = space.impls(layer)[actions[layer]].latency_ms;
            forbidden[layer] = false;
            for &e in space.incoming(layer) {
                let (from, _) = space.dependency(e);
                match space.edge_cost_at(e, actions[from], actions[layer]) {
                    EdgeCost::Penalty(p) => cost += p,
                    EdgeCost::Forbidden => forbidden[layer] = true,
                }
            }
            costs[layer] = cost;
        }

        let latency = if forbidden.iter().any(|&f| f) {
            None
        } else {
            let l = space.evaluate_indices(&actions)?.latency_ms;
            worst_finite = Some(worst_finite.map_or(l, |w| w.max(l)));
            if best.as_ref().is_none_or(|(_, b)| l < *b) {
                best = Some((actions.clone(), l));
            }
            if seen.insert(actions.clone()) {
                solutions.push(Solution { config: space.configuration(&actions), latency_ms: l });
            }
            Some(l)
        };
        curve.push(latency);

        let mut surrogate = 2.0 * worst_finite.unwrap_or(bound);
        if surrogate <= 0.0 {
            surrogate = 1.0;
        }
        let mut state = QState::Start;
        for layer in 0..depth {
            let next_state = QState::Layer { depth: layer, impl_index: actions[layer] };
            let reward = if forbidden[layer] { -surrogate } else { -costs[layer] };
            let t = Transition {
                state,
                action: actions[layer],
                reward,
                next_state,
                terminal: layer + 1 == depth,
            };
            q.update(&t)?;
            buffer.push(t);
            state = next_state;
        }
        for t in buffer.sample(params.replay_batch, &mut rng) {
            q.update(&t)?;
        }
    }

    let (best_idx, _) = best.ok_or(SearchError::NoFeasiblePath)?;
    let mut report = super::finish(
        space,
        Algorithm::Rl,
        &best_idx,
        (params.total_episodes * depth) as u64,
        started,
    )?;
    report.learning_curve = curve;
    report.seed = Some(params.seed);
    report.solutions = solutions;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn schedule_for_500_episodes() {
        let s = epsilon_schedule(500).unwrap();
        let mut expected = vec![(1.0, 250)];
        expected.extend(DECAY_STEPS.iter().map(|&e| (e, 25)));
        expected.push((0.0, 25));
        assert_eq!(s.blocks, expected);
        assert_eq!(s.total(), 500);
    }

    #[test]
    fn schedule_small_and_scaled() {
        let s = epsilon_schedule(20).unwrap();
        assert_eq!(s.blocks[0], (1.0, 10));
        assert!(s.blocks[1..].iter().all(|b| b.1 == 1));
        assert_eq!(s.blocks.len(), 11);

        let s = epsilon_schedule(1000).unwrap();
        assert_eq!(s.blocks[0], (1.0, 500));
        assert!(s.blocks[1..].iter().all(|b| b.1 == 50));

        // remainder of the floors lands in the exploitation block
        let s = epsilon_schedule(33).unwrap();
        assert_eq!(s.blocks[0], (1.0, 16));
        assert_eq!(s.blocks[1].1, 1);
        assert_eq!(s.blocks[10], (0.0, 33 - 16 - 9));
        assert!(s.blocks.windows(2).all(|w| w[0].0 >= w[1].0));

        assert!(matches!(epsilon_schedule(19), Err(SearchError::TooFewEpisodes(19))));
    }

    #[test]
    fn bellman_hand_values() {
        let first = bellman_update(0.0, 0.05, 0.9, -1.0, 0.0);
        assert_eq!(first, -0.05);
        let second = bellman_update(first, 0.05, 0.9, -1.0, first);
        assert_eq!(second, 0.95 * -0.05 + 0.05 * (-1.0 + 0.9 * -0.05));
        assert!((second - -0.09975).abs() < 1e-15);
        assert_eq!(bellman_update(-0.3, 0.0, 0.9, -1.0, -7.0), -0.3);
    }

    #[test]
    fn table_update_uses_next_row_max_and_terminal() {
        let space = fixtures::detour_space();
        let mut q = QTable::new(&space, 0.05, 0.9);
        assert!(q.rows.iter().flatten().all(|&v| v == 0.0));
        let s1 = QState::Layer { depth: 0, impl_index: 0 };
        let s2 = QState::Layer { depth: 1, impl_index: 1 };
        q.set(s2, 0, -0.05).unwrap();
        q.set(s2, 1, -0.2).unwrap();
        let t = Transition { state: s1, action: 1, reward: -1.0, next_state: s2, terminal: false };
        q.set(s1, 1, -0.05).unwrap();
        assert_eq!(q.update(&t).unwrap(), 0.95 * -0.05 + 0.05 * (-1.0 + 0.9 * -0.05));

        let last = QState::Layer { depth: 2, impl_index: 0 };
        assert!(q.row(last).unwrap().is_empty());
        let t = Transition { state: s2, action: 0, reward: -2.0, next_state: last, terminal: true };
        assert_eq!(q.update(&t).unwrap(), -0.05 * 0.95 + 0.05 * -2.0);

        let bad = QState::Layer { depth: 5, impl_index: 0 };
        assert!(matches!(q.row(bad), Err(SearchError::UnknownState(_))));
        assert!(q.row(QState::Layer { depth: 1, impl_index: 2 }).is_err());
    }

    #[test]
    fn greedy_and_random_selection() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(select_action(&[-1.0, -2.0], 0.0, &mut rng).unwrap(), 0);
        assert_eq!(select_action(&[-3.0, -2.0], 0.0, &mut rng).unwrap(), 1);
        assert_eq!(select_action(&[-1.0, -1.0], 0.0, &mut rng).unwrap(), 0);
        assert!(matches!(select_action(&[], 0.5, &mut rng), Err(SearchError::EmptyRow)));

        let picks = |seed| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            (0..64).map(|_| select_action(&[0.0; 5], 1.0, &mut r).unwrap()).collect::<Vec<_>>()
        };
        assert_eq!(picks(9), picks(9));
        let p = picks(9);
        assert!((0..5).all(|k| p.contains(&k)));
    }

    #[test]
    fn replay_buffer_is_bounded_and_recent_first() {
        let mut b = ReplayBuffer::new(128);
        for i in 0..300 {
            b.push(Transition {
                state: QState::Start,
                action: i,
                reward: -1.0,
                next_state: QState::Start,
                terminal: true,
            });
            assert!(b.len() <= 128);
        }
        assert_eq!(b.len(), 128);
        assert_eq!(b.iter().next().unwrap().action, 299);
        assert_eq!(b.iter().last().unwrap().action, 172);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = b.sample(32, &mut rng);
        assert_eq!(s.len(), 32);
        let distinct: HashSet<usize> = s.iter().map(|t| t.action).collect();
        assert_eq!(distinct.len(), 32);
        assert_eq!(b.sample(500, &mut rng).len(), 128);
    }

    #[test]
    fn rl_finds_detour_optimum() {
        let space = fixtures::detour_space();
        let r = run_rl(&space, &SearchParams::default().with_episodes(200).with_seed(7)).unwrap();
        assert_eq!(r.best_latency_ms, 9.0);
        assert_eq!(r.considered_states, 200 * 3);
        assert_eq!(r.learning_curve.len(), 200);
        let rb = r.running_best();
        assert!(rb.windows(2).all(|w| w[1] <= w[0] || w[0].is_none()));
    }

    #[test]
    fn rl_single_config_curve_is_constant() {
        let space = fixtures::uniform_chain(4, 1, 1.5);
        let r = run_rl(&space, &SearchParams::default().with_episodes(40)).unwrap();
        assert!(r.learning_curve.iter().all(|l| *l == Some(6.0)));
        assert_eq!(r.solutions.len(), 1);
    }

    #[test]
    fn rl_rewards_are_never_positive_and_forbidden_never_best() {
        let space = fixtures::forbidden_trap_space();
        let r = run_rl(&space, &SearchParams::default().with_episodes(100).with_seed(2)).unwrap();
        assert!(space.evaluate(&r.best_config).is_ok());
        assert!(r.learning_curve.iter().any(Option::is_none));
    }

    #[test]
    fn rl_is_deterministic() {
        let space = fixtures::random_chain_space(11, fixtures::RandomSpaceSpec::default());
        let p = SearchParams::default().with_episodes(300).with_seed(5);
        let a = serde_json::to_string(&run_rl(&space, &p).unwrap()).unwrap();
        let b = serde_json::to_string(&run_rl(&space, &p).unwrap()).unwrap();
        assert_eq!(a, b);
    }
}
