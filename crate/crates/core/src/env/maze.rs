use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{displacement, Action, EnvState, Goal, TABLE_HEIGHT};
use crate::error::{Error, Result};

/// Cell side length. A power of two keeps wall faces exactly representable.
pub const DEFAULT_CELL_SIZE: f64 = 0.125;
/// Start cell `(column, row)`.
pub const MAZE_START: (usize, usize) = (1, 3);

const MIN_SIZE: usize = 10;
const MAX_SIZE: usize = 20;
/// Gap kept between the gripper and a blocking face.
const FACE_GAP: f64 = 1e-9;

/// Four-room maze on a `width x height` grid. The outer ring is wall; one
/// vertical wall at `wall_col` and one horizontal wall at `wall_row` split the
/// interior into rooms, each wall segment pierced by one gate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MazeSpec {
    pub width: usize,
    pub height: usize,
    pub wall_col: usize,
    pub wall_row: usize,
    /// Gates on the horizontal wall (left, right segment) then on the
    /// vertical wall (upper, lower segment), as `(column, row)`.
    pub gates: [(usize, usize); 4],
    pub cell_size: f64,
    pub table_height: f64,
}

/// Random maze with width and height drawn from `[10, 20]`.
pub fn generate_maze(rng_seed: u64) -> MazeSpec {
    MazeSpec::generate_sized(rng_seed, None, None).expect("random sizes are always in range")
}

impl MazeSpec {
    pub fn generate_sized(
        rng_seed: u64,
        width: Option<usize>,
        height: Option<usize>,
    ) -> Result<MazeSpec> {
        for size in [width, height].into_iter().flatten() {
            if !(MIN_SIZE..=MAX_SIZE).contains(&size) {
                return Err(Error::config(format!(
                    "maze dimension {size} outside [{MIN_SIZE}, {MAX_SIZE}]"
                )));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        let width = width.unwrap_or_else(|| rng.random_range(MIN_SIZE..=MAX_SIZE));
        let height = height.unwrap_or_else(|| rng.random_range(MIN_SIZE..=MAX_SIZE));
        loop {
            let wall_col = rng.random_range(2..=width - 3);
            let wall_row = rng.random_range(2..=height - 3);
            if wall_row == MAZE_START.1 {
                continue;
            }
            let gates = [
                (rng.random_range(1..=wall_col - 1), wall_row),
                (rng.random_range(wall_col + 1..=width - 2), wall_row),
                (wall_col, rng.random_range(1..=wall_row - 1)),
                (wall_col, rng.random_range(wall_row + 1..=height - 2)),
            ];
            let spec = MazeSpec {
                width,
                height,
                wall_col,
                wall_row,
                gates,
                cell_size: DEFAULT_CELL_SIZE,
                table_height: TABLE_HEIGHT,
            };
            if spec.check().is_ok() {
                return Ok(spec);
            }
        }
    }

    /// Verifies the structural invariants.
    pub fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::validation(m));
        if !(MIN_SIZE..=MAX_SIZE).contains(&self.width)
            || !(MIN_SIZE..=MAX_SIZE).contains(&self.height)
        {
            return bad(format!(
                "maze size {}x{} outside [10, 20]",
                self.width, self.height
            ));
        }
        if !(self.wall_col > 1 && self.wall_col < self.width - 2) {
            return bad(format!(
                "wall column {} outside (1, {})",
                self.wall_col,
                self.width - 2
            ));
        }
        if !(self.wall_row > 1 && self.wall_row < self.height - 2) {
            return bad(format!(
                "wall row {} outside (1, {})",
                self.wall_row,
                self.height - 2
            ));
        }
        for &(x, y) in &self.gates {
            let on_wall = (x == self.wall_col) != (y == self.wall_row);
            let interior = x >= 1 && x <= self.width - 2 && y >= 1 && y <= self.height - 2;
            if !on_wall || !interior {
                return bad(format!(
                    "gate ({x}, {y}) is not on an interior wall segment"
                ));
            }
        }
        let segment = |&(x, y): &(usize, usize)| match (
            x == self.wall_col,
            x < self.wall_col,
            y < self.wall_row,
        ) {
            (false, true, _) => 0,
            (false, false, _) => 1,
            (true, _, true) => 2,
            (true, _, false) => 3,
        };
        let mut seen = [false; 4];
        for g in &self.gates {
            seen[segment(g)] = true;
        }
        if seen.iter().any(|s| !s) {
            return bad("gates must cover all four wall segments".into());
        }
        if self.is_blocked(MAZE_START.0 as i64, MAZE_START.1 as i64)
            || self.is_gate(MAZE_START.0, MAZE_START.1)
        {
            return bad("start cell is not free".into());
        }
        if !(self.cell_size > 2.0 * super::STEP_SCALE) {
            return bad("cell size must exceed two steps".into());
        }
        Ok(())
    }

    pub fn is_gate(&self, x: usize, y: usize) -> bool {
        self.gates.contains(&(x, y))
    }

    fn is_wall_line(&self, x: usize, y: usize) -> bool {
        x == 0
            || y == 0
            || x == self.width - 1
            || y == self.height - 1
            || x == self.wall_col
            || y == self.wall_row
    }

    /// True for wall cells and anything outside the grid. Gates are passable.
    pub fn is_blocked(&self, x: i64, y: i64) -> bool {
        if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
            return true;
        }
        let (x, y) = (x as usize, y as usize);
        self.is_wall_line(x, y) && !self.is_gate(x, y)
    }

    /// Wall map `M`, row-major over rows then columns.
    pub fn occupancy(&self) -> Vec<f64> {
        let mut m = Vec::with_capacity(self.width * self.height);
        for y in 0..self.height {
            for x in 0..self.width {
                m.push(if self.is_blocked(x as i64, y as i64) {
                    1.0
                } else {
                    0.0
                });
            }
        }
        m
    }

    /// Interior cells that are neither wall nor gate.
    pub fn free_cells(&self) -> Vec<(usize, usize)> {
        let mut cells = Vec::new();
        for y in 1..self.height - 1 {
            for x in 1..self.width - 1 {
                if !self.is_wall_line(x, y) {
                    cells.push((x, y));
                }
            }
        }
        cells
    }

    pub fn cell_center(&self, x: usize, y: usize) -> Goal {
        [
            (x as f64 + 0.5) * self.cell_size,
            (y as f64 + 0.5) * self.cell_size,
            self.table_height,
        ]
    }

    /// Grid cell containing a world point.
    pub fn cell_of(&self, p: &Goal) -> (i64, i64) {
        (
            (p[0] / self.cell_size).floor() as i64,
            (p[1] / self.cell_size).floor() as i64,
        )
    }

    /// Converts grid coordinates (cell centers at integers) to world coordinates.
    pub fn grid_to_world(&self, gx: f64, gy: f64) -> Goal {
        [
            (gx + 0.5) * self.cell_size,
            (gy + 0.5) * self.cell_size,
            self.table_height,
        ]
    }

    /// The landmark "bottom right corner": last free cell of the last free row.
    pub fn bottom_right_corner(&self) -> (usize, usize) {
        (self.width - 2, self.height - 2)
    }

    pub fn validate_goal(&self, goal: &Goal) -> Result<()> {
        if (goal[2] - self.table_height).abs() > 1e-9 {
            return Err(Error::validation(format!(
                "maze goals lie at table height {}, got z={}",
                self.table_height, goal[2]
            )));
        }
        let (cx, cy) = self.cell_of(goal);
        if cx < 0 || cy < 0 || cx >= self.width as i64 || cy >= self.height as i64 {
            return Err(Error::validation(format!("goal {goal:?} outside the maze")));
        }
        let (ux, uy) = (cx as usize, cy as usize);
        if self.is_gate(ux, uy) {
            return Err(Error::validation(format!(
                "goal cell ({ux}, {uy}) is a gate"
            )));
        }
        if self.is_blocked(cx, cy) {
            return Err(Error::validation(format!(
                "goal cell ({ux}, {uy}) is a wall"
            )));
        }
        if (ux, uy) == MAZE_START {
            return Err(Error::validation(format!(
                "goal cell ({ux}, {uy}) coincides with the start position"
            )));
        }
        Ok(())
    }

    /// Moves the gripper one axis at a time; a move into a blocked cell stops
    /// at the face of that cell. The gripper stays at table height.
    pub(crate) fn step(&self, state: &EnvState, action: &Action) -> EnvState {
        let d = displacement(action);
        let mut p = state.gripper_pos;
        for axis in 0..2 {
            let (cx, cy) = self.cell_of(&p);
            let target = p[axis] + d[axis];
            let cell = (target / self.cell_size).floor() as i64;
            let blocked = match axis {
                0 => self.is_blocked(cell, cy),
                _ => self.is_blocked(cx, cell),
            };
            p[axis] = if !blocked {
                target
            } else if d[axis] > 0.0 {
                cell as f64 * self.cell_size - FACE_GAP
            } else {
                (cell + 1) as f64 * self.cell_size
            };
        }
        p[2] = self.table_height;
        let mut next = state.clone();
        next.gripper_pos = p;
        next.gripper_open = false;
        next
    }

    /// ASCII map: `#` wall, `.` free, `G` gate, `S` start.
    pub fn render(&self) -> String {
        let mut s = String::new();
        for y in 0..self.height {
            for x in 0..self.width {
                let c = if (x, y) == MAZE_START {
                    'S'
                } else if self.is_gate(x, y) {
                    'G'
                } else if self.is_blocked(x as i64, y as i64) {
                    '#'
                } else {
                    '.'
                };
                s.push(c);
            }
            s.push('\n');
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{Env, EnvConfig, EnvKind};
    use proptest::prelude::*;

    #[test]
    fn same_seed_same_maze() {
        assert_eq!(generate_maze(7), generate_maze(7));
    }

    #[test]
    fn wall_face_clamp() {
        let spec = MazeSpec::generate_sized(0, Some(10), Some(10)).unwrap();
        let env = Env::from_maze(spec.clone());
        let mut s = env.clone().reset_keep_goal(0);
        // Push left into the outer wall until blocked.
        for _ in 0..20 {
            s = env.step(&s, &[0.0, 0.5, 0.5, 0.0]).unwrap().state;
        }
        assert_eq!(s.gripper_pos[0], spec.cell_size);
        assert_eq!(spec.cell_of(&s.gripper_pos).0, 1);
        // And up into the outer wall.
        for _ in 0..40 {
            s = env.step(&s, &[0.5, 0.0, 0.5, 0.0]).unwrap().state;
        }
        let (_, cy) = spec.cell_of(&s.gripper_pos);
        assert!(!spec.is_blocked(1, cy));
    }

    #[test]
    fn rejects_out_of_range_size() {
        assert!(MazeSpec::generate_sized(0, Some(9), None).is_err());
        assert!(MazeSpec::generate_sized(0, None, Some(21)).is_err());
    }

    proptest! {
        #[test]
        fn generated_mazes_satisfy_invariants(seed in any::<u64>()) {
            let m = generate_maze(seed);
            prop_assert!((10..=20).contains(&m.width));
            prop_assert!((10..=20).contains(&m.height));
            prop_assert_eq!(m.gates.len(), 4);
            prop_assert!(m.check().is_ok());
            for &(x, y) in &m.gates {
                prop_assert!(!m.is_blocked(x as i64, y as i64));
                prop_assert!(x == m.wall_col || y == m.wall_row);
            }
            prop_assert!(!m.is_blocked(1, 3));
        }

        #[test]
        fn gripper_never_enters_walls(seed in 0u64..50, actions in prop::collection::vec(prop::array::uniform4(0.0f64..=1.0), 1..150)) {
            let mut env = Env::new(&EnvConfig { kind: EnvKind::Maze, layout_seed: seed, maze_width: None, maze_height: None }).unwrap();
            let (mut s, _) = env.reset(seed);
            let m = env.maze().unwrap().clone();
            for a in actions {
                s = env.step(&s, &a).unwrap().state;
                let (cx, cy) = m.cell_of(&s.gripper_pos);
                prop_assert!(!m.is_blocked(cx, cy), "gripper inside wall at {:?}", s.gripper_pos);
                prop_assert_eq!(s.gripper_pos[2], TABLE_HEIGHT);
            }
        }
    }
}
