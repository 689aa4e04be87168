//! Reference solvers: a Dijkstra distance field and exact tabular value
//! iteration. Both are independent of the A* search and of the networks.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::{Action, Cell, GridMap};

/// Shortest move count from every cell to the goal (`None` for obstacles and
/// unreachable cells). Moves are symmetric, so one reverse search suffices.
pub fn distance_field(map: &GridMap) -> Vec<Option<usize>> {
    let mut dist: Vec<Option<usize>> = vec![None; map.cells()];
    let mut heap = BinaryHeap::new();
    let goal = map.index(map.goal());
    dist[goal] = Some(0);
    heap.push(Reverse((0usize, goal)));
    while let Some(Reverse((d, idx))) = heap.pop() {
        if dist[idx].is_some_and(|best| d > best) {
            continue;
        }
        for (_, next) in map.neighbors(map.cell_at(idx)) {
            let ni = map.index(next);
            let nd = d + 1;
            if dist[ni].is_none_or(|best| nd < best) {
                dist[ni] = Some(nd);
                heap.push(Reverse((nd, ni)));
            }
        }
    }
    dist
}

/// Reward function R(s, a, s').
#[derive(Debug, Clone, PartialEq)]
pub enum RewardModel {
    /// `value` on any transition into the goal; the goal is terminal.
    GoalEntry(f64),
    /// R(s, a, s') = R(s), row-major over the map.
    State(Vec<f64>),
}

/// Transition rule for tabular value iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Dynamics {
    /// Obstacles and borders block moves; the agent stays in place. Obstacle
    /// cells are not states and keep value 0. Matches rollout dynamics.
    #[default]
    Blocking,
    /// Every cell is a state (obstacles are expressed through the reward),
    /// and moves off the map enter an absorbing exterior of value 0. This is
    /// the MDP a zero-padded convolution computes.
    OpenBorder,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValueGrid {
    pub height: usize,
    pub width: usize,
    pub values: Vec<f64>,
    pub iterations: usize,
}

impl ValueGrid {
    pub fn at(&self, (r, c): Cell) -> f64 {
        self.values[r * self.width + c]
    }

    /// Greedy action under Blocking dynamics; lowest action index on ties.
    pub fn greedy_action(
        &self,
        map: &GridMap,
        reward: &RewardModel,
        gamma: f64,
        cell: Cell,
    ) -> Action {
        let mut best = (f64::NEG_INFINITY, Action::N);
        for a in Action::ALL {
            let next = map.step(cell, a);
            let q = reward_of(map, reward, cell, next) + gamma * self.at(next);
            if q > best.0 {
                best = (q, a);
            }
        }
        best.1
    }
}

fn reward_of(map: &GridMap, reward: &RewardModel, s: Cell, next: Cell) -> f64 {
    match reward {
        RewardModel::GoalEntry(v) => {
            if next == map.goal() && s != map.goal() {
                *v
            } else {
                0.0
            }
        }
        RewardModel::State(r) => r[map.index(s)],
    }
}

/// V_{k+1}(s) = max_a [R(s, a, s') + gamma V_k(s')] from V_0 = 0 under
/// [`Dynamics::Blocking`].
pub fn tabular_vi(
    map: &GridMap,
    reward: &RewardModel,
    gamma: f64,
    max_iters: usize,
    tol: f64,
) -> ValueGrid {
    tabular_vi_with(map, reward, Dynamics::Blocking, gamma, max_iters, tol)
}

/// Runs until the largest per-sweep change drops below `tol` or `max_iters`
/// sweeps are done (`tol = 0` gives exactly `max_iters` sweeps).
pub fn tabular_vi_with(
    map: &GridMap,
    reward: &RewardModel,
    dynamics: Dynamics,
    gamma: f64,
    max_iters: usize,
    tol: f64,
) -> ValueGrid {
    if let RewardModel::State(r) = reward {
        assert_eq!(r.len(), map.cells(), "state reward must cover the map");
    }
    let goal_terminal = matches!(reward, RewardModel::GoalEntry(_));
    let mut v = vec![0.0; map.cells()];
    let mut next_v = v.clone();
    let mut iterations = 0;
    while iterations < max_iters {
        let mut delta: f64 = 0.0;
        for idx in 0..map.cells() {
            let s = map.cell_at(idx);
            let is_state = match dynamics {
                Dynamics::Blocking => !map.is_obstacle(s),
                Dynamics::OpenBorder => true,
            };
            if !is_state || (goal_terminal && s == map.goal()) {
                next_v[idx] = 0.0;
                continue;
            }
            let mut best = f64::NEG_INFINITY;
            for a in Action::ALL {
                let q = match dynamics {
                    Dynamics::Blocking => {
                        let s2 = map.step(s, a);
                        reward_of(map, reward, s, s2) + gamma * v[map.index(s2)]
                    }
                    Dynamics::OpenBorder => match map.offset(s, a) {
                        Some(s2) => reward_of(map, reward, s, s2) + gamma * v[map.index(s2)],
                        None => match reward {
                            RewardModel::State(r) => r[idx],
                            RewardModel::GoalEntry(_) => 0.0,
                        },
                    },
                };
                best = best.max(q);
            }
            delta = delta.max((best - v[idx]).abs());
            next_v[idx] = best;
        }
        std::mem::swap(&mut v, &mut next_v);
        iterations += 1;
        if delta < tol {
            break;
        }
    }
    ValueGrid {
        height: map.height(),
        width: map.width(),
        values: v,
        iterations,
    }
}
