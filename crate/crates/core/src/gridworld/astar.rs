use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::{Action, Cell, GridError, GridMap};

/// A shortest path from a start cell to the map's goal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShortestPath {
    /// Visited cells, start first, goal last.
    pub cells: Vec<Cell>,
    pub actions: Vec<Action>,
}

impl ShortestPath {
    /// Number of moves; every move costs 1.
    pub fn length(&self) -> usize {
        self.actions.len()
    }
}

/// Chebyshev distance: exact move count on an empty map with unit-cost diagonals.
pub fn chebyshev((r0, c0): Cell, (r1, c1): Cell) -> usize {
    r0.abs_diff(r1).max(c0.abs_diff(c1))
}

/// A* from `start` to the goal with unit move costs and the Chebyshev
/// heuristic. The open list is ordered by (f, h, row, col) and neighbors are
/// expanded in N..NW order, so the returned path is fully deterministic.
pub fn astar_shortest(map: &GridMap, start: Cell) -> Result<ShortestPath, GridError> {
    if !map.is_free(start) {
        return Err(GridError::InvalidSample(format!(
            "start {start:?} is not a free cell"
        )));
    }
    let goal = map.goal();
    let n = map.cells();
    let mut g = vec![usize::MAX; n];
    let mut parent: Vec<Option<(usize, Action)>> = vec![None; n];
    let mut closed = vec![false; n];
    let mut open = BinaryHeap::new();

    let s = map.index(start);
    g[s] = 0;
    let h0 = chebyshev(start, goal);
    open.push(Reverse((h0, h0, start.0, start.1)));

    while let Some(Reverse((_, _, r, c))) = open.pop() {
        let cur = map.index((r, c));
        if closed[cur] {
            continue;
        }
        closed[cur] = true;
        if (r, c) == goal {
            return Ok(reconstruct(map, &parent, start, goal));
        }
        for (action, next) in map.neighbors((r, c)) {
            let ni = map.index(next);
            if closed[ni] {
                continue;
            }
            let tentative = g[cur] + 1;
            if tentative < g[ni] {
                g[ni] = tentative;
                parent[ni] = Some((cur, action));
                let h = chebyshev(next, goal);
                open.push(Reverse((tentative + h, h, next.0, next.1)));
            }
        }
    }
    Err(GridError::Unreachable { start, goal })
}

fn reconstruct(
    map: &GridMap,
    parent: &[Option<(usize, Action)>],
    start: Cell,
    goal: Cell,
) -> ShortestPath {
    let mut cells = vec![goal];
    let mut actions = Vec::new();
    let mut cur = map.index(goal);
    while let Some((prev, action)) = parent[cur] {
        actions.push(action);
        cells.push(map.cell_at(prev));
        cur = prev;
        if map.cell_at(cur) == start {
            break;
        }
    }
    cells.reverse();
    actions.reverse();
    ShortestPath { cells, actions }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridworld::oracle::distance_field;
    use crate::gridworld::{generate_map, DensityRange};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn diagonal_neighbor_is_one_step() {
        let map = GridMap::empty(8, 8, (3, 3)).unwrap();
        let p = astar_shortest(&map, (4, 4)).unwrap();
        assert_eq!(p.length(), 1);
        assert_eq!(p.actions, vec![Action::NW]);
        assert_eq!(p.cells, vec![(4, 4), (3, 3)]);
    }

    #[test]
    fn empty_map_corner_to_corner_is_chebyshev() {
        let map = GridMap::empty(8, 8, (7, 7)).unwrap();
        let p = astar_shortest(&map, (0, 0)).unwrap();
        assert_eq!(p.length(), 7);
        assert!(p.actions.iter().all(|&a| a == Action::SE));
    }

    #[test]
    fn goal_due_east() {
        let map = GridMap::empty(5, 5, (2, 4)).unwrap();
        assert_eq!(
            astar_shortest(&map, (2, 3)).unwrap().actions,
            vec![Action::E]
        );
        // NE, E and SE all start a 3-move path; the lowest row wins the tie
        let p = astar_shortest(&map, (2, 1)).unwrap();
        assert_eq!(p.length(), 3);
        assert_eq!(p.actions[0], Action::NE);
    }

    #[test]
    fn walled_off_goal_is_unreachable() {
        // goal in the top-left corner boxed in by three obstacles
        let mut obstacles = vec![false; 25];
        for idx in [1, 5, 6] {
            obstacles[idx] = true;
        }
        let map = GridMap::new(5, 5, obstacles, (0, 0)).unwrap();
        assert!(matches!(
            astar_shortest(&map, (4, 4)),
            Err(GridError::Unreachable { .. })
        ));
    }

    #[test]
    fn obstacle_start_is_rejected() {
        let mut obstacles = vec![false; 16];
        obstacles[0] = true;
        let map = GridMap::new(4, 4, obstacles, (3, 3)).unwrap();
        assert!(matches!(
            astar_shortest(&map, (0, 0)),
            Err(GridError::InvalidSample(_))
        ));
    }

    #[test]
    fn paths_are_valid_walks() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let map = generate_map(12, 12, DensityRange::default(), &mut rng).unwrap();
            let free: Vec<_> = map.free_cells().collect();
            let start = free[rng.gen_range(0..free.len())];
            if let Ok(p) = astar_shortest(&map, start) {
                let mut cur = start;
                for (&a, &next) in p.actions.iter().zip(&p.cells[1..]) {
                    assert_eq!(map.step(cur, a), next);
                    cur = next;
                }
                assert_eq!(cur, map.goal());
            }
        }
    }

    #[test]
    fn tied_first_moves_are_stable() {
        let mut obstacles = vec![false; 25];
        obstacles[12] = true; // centre blocks the straight line
        let map = GridMap::new(5, 5, obstacles, (2, 4)).unwrap();
        let a = astar_shortest(&map, (2, 0)).unwrap();
        for _ in 0..10 {
            assert_eq!(astar_shortest(&map, (2, 0)).unwrap(), a);
        }
    }

    #[test]
    fn agrees_with_dijkstra_on_random_maps() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..500 {
            let map = generate_map(16, 16, DensityRange::default(), &mut rng).unwrap();
            let dist = distance_field(&map);
            let free: Vec<_> = map.free_cells().collect();
            let start = free[rng.gen_range(0..free.len())];
            match astar_shortest(&map, start) {
                Ok(p) => assert_eq!(Some(p.length()), dist[map.index(start)]),
                Err(_) => assert_eq!(dist[map.index(start)], None),
            }
        }
    }
}
