use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Action, Cell, GridError};

/// Occupancy grid with a goal cell.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GridMap {
    height: usize,
    width: usize,
    obstacles: Vec<bool>,
    goal: Cell,
}

impl GridMap {
    pub fn new(
        height: usize,
        width: usize,
        obstacles: Vec<bool>,
        goal: Cell,
    ) -> Result<Self, GridError> {
        if height == 0 || width == 0 {
            return Err(GridError::InvalidMap("map must be non-empty".into()));
        }
        if obstacles.len() != height * width {
            return Err(GridError::InvalidMap(format!(
                "{} obstacle flags for a {height}x{width} map",
                obstacles.len()
            )));
        }
        let map = Self {
            height,
            width,
            obstacles,
            goal,
        };
        if !map.in_bounds(goal) {
            return Err(GridError::InvalidMap(format!(
                "goal {goal:?} out of bounds"
            )));
        }
        if map.is_obstacle(goal) {
            return Err(GridError::InvalidMap(format!(
                "goal {goal:?} is an obstacle"
            )));
        }
        if map.free_count() < 2 {
            return Err(GridError::InvalidMap("need a free non-goal cell".into()));
        }
        Ok(map)
    }

    /// Obstacle-free map.
    pub fn empty(height: usize, width: usize, goal: Cell) -> Result<Self, GridError> {
        Self::new(height, width, vec![false; height * width], goal)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn goal(&self) -> Cell {
        self.goal
    }

    pub fn obstacles(&self) -> &[bool] {
        &self.obstacles
    }

    pub fn with_goal(&self, goal: Cell) -> Result<Self, GridError> {
        Self::new(self.height, self.width, self.obstacles.clone(), goal)
    }

    pub fn cells(&self) -> usize {
        self.height * self.width
    }

    pub fn index(&self, (r, c): Cell) -> usize {
        r * self.width + c
    }

    pub fn cell_at(&self, idx: usize) -> Cell {
        (idx / self.width, idx % self.width)
    }

    pub fn in_bounds(&self, (r, c): Cell) -> bool {
        r < self.height && c < self.width
    }

    pub fn is_obstacle(&self, cell: Cell) -> bool {
        self.obstacles[self.index(cell)]
    }

    pub fn is_free(&self, cell: Cell) -> bool {
        self.in_bounds(cell) && !self.is_obstacle(cell)
    }

    pub fn free_count(&self) -> usize {
        self.obstacles.iter().filter(|&&o| !o).count()
    }

    pub fn obstacle_count(&self) -> usize {
        self.cells() - self.free_count()
    }

    pub fn free_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.cells())
            .filter(|&i| !self.obstacles[i])
            .map(|i| self.cell_at(i))
    }

    /// Cell reached by `action`, if it is on the map (obstacles not checked).
    pub fn offset(&self, (r, c): Cell, action: Action) -> Option<Cell> {
        let (dr, dc) = action.offset();
        let nr = r.checked_add_signed(dr)?;
        let nc = c.checked_add_signed(dc)?;
        self.in_bounds((nr, nc)).then_some((nr, nc))
    }

    /// Deterministic transition: blocked or off-map moves leave the agent in place.
    pub fn step(&self, cell: Cell, action: Action) -> Cell {
        match self.offset(cell, action) {
            Some(next) if !self.is_obstacle(next) => next,
            _ => cell,
        }
    }

    /// Free neighbors in N..NW order. Diagonal moves are allowed past
    /// blocked orthogonal neighbors.
    pub fn neighbors(&self, cell: Cell) -> impl Iterator<Item = (Action, Cell)> + '_ {
        Action::ALL.into_iter().filter_map(move |a| {
            let next = self.offset(cell, a)?;
            (!self.is_obstacle(next)).then_some((a, next))
        })
    }
}

/// Closed interval of obstacle densities a map's density is drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityRange {
    pub min: f64,
    pub max: f64,
}

impl DensityRange {
    pub const MAX_DENSITY: f64 = 0.5;

    pub fn new(min: f64, max: f64) -> Result<Self, GridError> {
        if !(min.is_finite() && max.is_finite())
            || min < 0.0
            || max > Self::MAX_DENSITY
            || min > max
        {
            return Err(GridError::Generation(format!(
                "density range [{min}, {max}] must lie within [0, {}]",
                Self::MAX_DENSITY
            )));
        }
        Ok(Self { min, max })
    }

    pub fn fixed(rho: f64) -> Result<Self, GridError> {
        Self::new(rho, rho)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.min == self.max {
            self.min
        } else {
            rng.gen_range(self.min..=self.max)
        }
    }
}

impl Default for DensityRange {
    fn default() -> Self {
        Self { min: 0.1, max: 0.3 }
    }
}

pub const MIN_SIDE: usize = 4;

/// Random map with `round(rho * m * n)` obstacles at uniformly chosen cells and
/// a goal on a uniformly chosen free cell.
pub fn generate_map<R: Rng + ?Sized>(
    height: usize,
    width: usize,
    density: DensityRange,
    rng: &mut R,
) -> Result<GridMap, GridError> {
    if height < MIN_SIDE || width < MIN_SIDE {
        return Err(GridError::Generation(format!(
            "map {height}x{width} is smaller than {MIN_SIDE}x{MIN_SIDE}"
        )));
    }
    if height > u16::MAX as usize || width > u16::MAX as usize {
        return Err(GridError::Generation(format!(
            "map {height}x{width} too large"
        )));
    }
    DensityRange::new(density.min, density.max)?;
    let cells = height * width;
    let rho = density.sample(rng);
    let count = (rho * cells as f64).round() as usize;
    if count + 2 > cells {
        return Err(GridError::Generation(format!(
            "{count} obstacles leave fewer than 2 free cells on {height}x{width}"
        )));
    }
    let mut order: Vec<usize> = (0..cells).collect();
    let (chosen, _) = order.partial_shuffle(rng, count);
    let mut obstacles = vec![false; cells];
    for &i in chosen.iter() {
        obstacles[i] = true;
    }
    let free: Vec<usize> = (0..cells).filter(|&i| !obstacles[i]).collect();
    let g = free[rng.gen_range(0..free.len())];
    GridMap::new(height, width, obstacles, (g / width, g % width))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_density_is_obstacle_free() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let map = generate_map(8, 8, DensityRange::fixed(0.0).unwrap(), &mut rng).unwrap();
        assert_eq!(map.obstacle_count(), 0);
        assert!(map.is_free(map.goal()));
    }

    #[test]
    fn quarter_density_on_8x8_is_16_obstacles() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let map = generate_map(8, 8, DensityRange::fixed(0.25).unwrap(), &mut rng).unwrap();
            assert_eq!(map.obstacle_count(), 16);
            assert!(!map.is_obstacle(map.goal()));
        }
    }

    #[test]
    fn same_seed_same_maps() {
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(77);
            (0..1000)
                .map(|_| generate_map(16, 16, DensityRange::default(), &mut rng).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn density_outside_half_is_rejected() {
        assert!(DensityRange::fixed(0.9).is_err());
        assert!(DensityRange::new(0.3, 0.1).is_err());
        assert!(DensityRange::new(-0.1, 0.1).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(generate_map(3, 8, DensityRange::default(), &mut rng).is_err());
    }

    #[test]
    fn blocked_moves_stay_in_place() {
        let mut obstacles = vec![false; 16];
        obstacles[1] = true; // (0, 1)
        let map = GridMap::new(4, 4, obstacles, (3, 3)).unwrap();
        assert_eq!(map.step((0, 0), Action::E), (0, 0));
        assert_eq!(map.step((0, 0), Action::N), (0, 0));
        assert_eq!(map.step((0, 0), Action::SE), (1, 1));
        // corner cutting past the obstacle at (0, 1)
        assert_eq!(map.step((1, 0), Action::NE), (1, 0));
        assert_eq!(map.step((1, 2), Action::NW), (1, 2));
        assert_eq!(map.step((1, 1), Action::NE), (0, 2));
    }

    #[test]
    fn goal_on_obstacle_is_invalid() {
        let mut obstacles = vec![false; 16];
        obstacles[5] = true;
        assert!(GridMap::new(4, 4, obstacles, (1, 1)).is_err());
    }
}
