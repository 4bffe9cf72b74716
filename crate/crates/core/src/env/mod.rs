//! Goal-conditioned simulations: a four-room maze for navigation and a
//! tabletop for pick-and-place and bin placement.
//!
//! All environments share one world frame. The gripper moves by
//! `STEP_SCALE * (2a - 1)` per axis per step and heights are bounded by
//! [`TABLE_HEIGHT`] and [`MAX_HEIGHT`]. Stepping is a pure function of
//! `(state, action)`, so any stored state can be re-simulated.

mod demo;
mod maze;
mod table;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use demo::{scripted_demo, scripted_demo_from};
pub use maze::{generate_maze, MazeSpec, DEFAULT_CELL_SIZE, MAZE_START};

pub const TABLE_HEIGHT: f64 = 0.42;
pub const MAX_HEIGHT: f64 = 0.66;
/// Per-axis displacement for a saturated action component.
pub const STEP_SCALE: f64 = 0.05;
pub const GRASP_RADIUS: f64 = 0.03;
pub const MANIPULATION_TOLERANCE: f64 = 0.05;
/// Side length of the square manipulation table.
pub const TABLE_EXTENT: f64 = 1.0;
/// The manipulation table seen as a grid of `TABLE_CELLS x TABLE_CELLS`.
pub const TABLE_CELLS: usize = 10;
/// Pick-and-place goals always sit at this height.
pub const GOAL_HEIGHT: f64 = 0.52;
pub const BIN_SIZE: f64 = 0.1;
pub const VELOCITY_DIM: usize = 11;
/// Observation size of the manipulation layout `[dx, o, q, e]`.
pub const TABLE_OBS_DIM: usize = 3 + 3 + 3 + VELOCITY_DIM;

pub type Goal = [f64; 3];
/// Four components in `[0, 1]`: three position offsets and the gripper command.
pub type Action = [f64; 4];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvKind {
    Maze,
    PickPlace,
    Bin,
}

impl EnvKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EnvKind::Maze => "maze",
            EnvKind::PickPlace => "pick_place",
            EnvKind::Bin => "bin",
        }
    }

    /// The state component a goal refers to.
    pub fn feature(self) -> FeatureSelector {
        match self {
            EnvKind::Maze => FeatureSelector::GripperPos,
            EnvKind::PickPlace | EnvKind::Bin => FeatureSelector::ObjectPos,
        }
    }

    pub fn is_manipulation(self) -> bool {
        !matches!(self, EnvKind::Maze)
    }
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EnvKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "maze" => Ok(EnvKind::Maze),
            "pick_place" | "pick-place" | "pickplace" => Ok(EnvKind::PickPlace),
            "bin" => Ok(EnvKind::Bin),
            other => Err(Error::config(format!("unknown env kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSelector {
    GripperPos,
    ObjectPos,
}

impl FeatureSelector {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureSelector::GripperPos => "gripper_pos",
            FeatureSelector::ObjectPos => "object_pos",
        }
    }
}

/// Full simulator state. The observation vector is derived from it and,
/// conversely, fully determines it.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    pub kind: EnvKind,
    pub gripper_pos: [f64; 3],
    /// Row-major `height x width` wall map (maze only), 1 for blocked cells.
    pub maze_occupancy: Option<Arc<[f64]>>,
    pub object_pos: [f64; 3],
    pub object_rel: [f64; 3],
    /// Gripper linear velocity, object linear velocity, object angular
    /// velocity, finger opening and grasp contact.
    pub velocities: [f64; VELOCITY_DIM],
    pub gripper_open: bool,
}

impl EnvState {
    pub fn obs_dim(&self) -> usize {
        match &self.maze_occupancy {
            Some(m) => 3 + m.len(),
            None => TABLE_OBS_DIM,
        }
    }

    pub fn feature(&self, selector: FeatureSelector) -> Goal {
        match selector {
            FeatureSelector::GripperPos => self.gripper_pos,
            FeatureSelector::ObjectPos => self.object_pos,
        }
    }

    /// The goal-space point this state achieves.
    pub fn achieved(&self) -> Goal {
        self.feature(self.kind.feature())
    }

    pub fn grasped(&self) -> bool {
        self.velocities[10] > 0.5
    }

    /// Appends the observation vector (`[dx, M]` or `[dx, o, q, e]`).
    pub fn write_obs(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(&self.gripper_pos);
        match &self.maze_occupancy {
            Some(m) => out.extend_from_slice(m),
            None => {
                out.extend_from_slice(&self.object_pos);
                out.extend_from_slice(&self.object_rel);
                out.extend_from_slice(&self.velocities);
            }
        }
    }

    pub fn to_obs(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.obs_dim());
        self.write_obs(&mut out);
        out
    }

    /// Rebuilds a state from its observation vector.
    pub fn from_obs(kind: EnvKind, obs: &[f64]) -> Result<Self> {
        if obs.len() < 3 {
            return Err(Error::input("observation shorter than gripper position"));
        }
        let gripper_pos = [obs[0], obs[1], obs[2]];
        match kind {
            EnvKind::Maze => Ok(EnvState {
                kind,
                gripper_pos,
                maze_occupancy: Some(Arc::from(&obs[3..])),
                object_pos: [0.0; 3],
                object_rel: [0.0; 3],
                velocities: [0.0; VELOCITY_DIM],
                gripper_open: false,
            }),
            _ => {
                if obs.len() != TABLE_OBS_DIM {
                    return Err(Error::input(format!(
                        "{kind} observation has {} values, expected {TABLE_OBS_DIM}",
                        obs.len()
                    )));
                }
                let mut velocities = [0.0; VELOCITY_DIM];
                velocities.copy_from_slice(&obs[9..]);
                Ok(EnvState {
                    kind,
                    gripper_pos,
                    maze_occupancy: None,
                    object_pos: [obs[3], obs[4], obs[5]],
                    object_rel: [obs[6], obs[7], obs[8]],
                    gripper_open: velocities[9] > 0.5,
                    velocities,
                })
            }
        }
    }
}

/// Axis-aligned box; degenerate axes (`low == high`) are allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    pub low: Goal,
    pub high: Goal,
}

impl Bounds {
    pub fn contains(&self, p: &Goal) -> bool {
        (0..3).all(|i| p[i] >= self.low[i] && p[i] <= self.high[i])
    }

    pub fn clamp(&self, p: &mut Goal) {
        for (i, v) in p.iter_mut().enumerate() {
            *v = v.clamp(self.low[i], self.high[i]);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub state: EnvState,
    /// Sparse task reward: `-1` unless the achieved goal is within tolerance.
    pub env_reward: f64,
    pub achieved_goal: Goal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvConfig {
    pub kind: EnvKind,
    /// Seeds the static layout: maze walls and gates, or bin placement.
    #[serde(default)]
    pub layout_seed: u64,
    /// Maze size override; random in `[10, 20]` when absent.
    #[serde(default)]
    pub maze_width: Option<usize>,
    #[serde(default)]
    pub maze_height: Option<usize>,
}

impl EnvConfig {
    pub fn new(kind: EnvKind) -> Self {
        EnvConfig {
            kind,
            layout_seed: 0,
            maze_width: None,
            maze_height: None,
        }
    }

    /// Desk-scale 10x10 maze.
    pub fn maze(layout_seed: u64) -> Self {
        EnvConfig {
            kind: EnvKind::Maze,
            layout_seed,
            maze_width: Some(10),
            maze_height: Some(10),
        }
    }
}

#[derive(Debug, Clone)]
enum Layout {
    Maze(MazeSpec),
    Table { bin_center: Option<[f64; 2]> },
}

/// One environment instance: static layout plus the current final goal.
#[derive(Debug, Clone)]
pub struct Env {
    kind: EnvKind,
    layout: Layout,
    goal: Goal,
    tolerance: f64,
    occupancy: Option<Arc<[f64]>>,
}

impl Env {
    pub fn new(cfg: &EnvConfig) -> Result<Self> {
        match cfg.kind {
            EnvKind::Maze => {
                let spec = match (cfg.maze_width, cfg.maze_height) {
                    (None, None) => generate_maze(cfg.layout_seed),
                    (w, h) => MazeSpec::generate_sized(cfg.layout_seed, w, h)?,
                };
                Ok(Env::from_maze(spec))
            }
            EnvKind::PickPlace => Ok(Env::table(EnvKind::PickPlace, None)),
            EnvKind::Bin => {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.layout_seed ^ 0xB1B1);
                let lo = BIN_SIZE;
                let hi = TABLE_EXTENT - BIN_SIZE;
                let center = [rng.random_range(lo..hi), rng.random_range(lo..hi)];
                Ok(Env::table(EnvKind::Bin, Some(center)))
            }
        }
    }

    pub fn from_maze(spec: MazeSpec) -> Self {
        let occupancy: Arc<[f64]> = Arc::from(spec.occupancy());
        let start = spec.cell_center(MAZE_START.0, MAZE_START.1);
        // Placeholder goal until reset or set_goal: any valid cell.
        let goal = spec
            .free_cells()
            .into_iter()
            .find(|c| *c != MAZE_START)
            .map(|(x, y)| spec.cell_center(x, y))
            .unwrap_or(start);
        Env {
            kind: EnvKind::Maze,
            tolerance: spec.cell_size / 2.0,
            layout: Layout::Maze(spec),
            goal,
            occupancy: Some(occupancy),
        }
    }

    fn table(kind: EnvKind, bin_center: Option<[f64; 2]>) -> Self {
        let goal = match bin_center {
            Some(c) => [c[0], c[1], TABLE_HEIGHT],
            None => [0.5, 0.5, GOAL_HEIGHT],
        };
        Env {
            kind,
            layout: Layout::Table { bin_center },
            goal,
            tolerance: MANIPULATION_TOLERANCE,
            occupancy: None,
        }
    }

    pub fn kind(&self) -> EnvKind {
        self.kind
    }

    pub fn goal(&self) -> Goal {
        self.goal
    }

    /// Success tolerance `epsilon` for this environment.
    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn maze(&self) -> Option<&MazeSpec> {
        match &self.layout {
            Layout::Maze(m) => Some(m),
            Layout::Table { .. } => None,
        }
    }

    pub fn bin_center(&self) -> Option<[f64; 2]> {
        match &self.layout {
            Layout::Table { bin_center } => *bin_center,
            Layout::Maze(_) => None,
        }
    }

    pub fn obs_dim(&self) -> usize {
        match &self.layout {
            Layout::Maze(m) => 3 + m.width * m.height,
            Layout::Table { .. } => TABLE_OBS_DIM,
        }
    }

    /// Reachable positions of the goal feature; also the higher-level action box.
    pub fn goal_bounds(&self) -> Bounds {
        match &self.layout {
            Layout::Maze(m) => Bounds {
                low: [0.0, 0.0, m.table_height],
                high: [
                    m.width as f64 * m.cell_size,
                    m.height as f64 * m.cell_size,
                    m.table_height,
                ],
            },
            Layout::Table { .. } => table::workspace(),
        }
    }

    /// Checks the placement rules for a final goal.
    pub fn validate_goal(&self, goal: &Goal) -> Result<()> {
        if goal.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("goal has non-finite components"));
        }
        match &self.layout {
            Layout::Maze(m) => m.validate_goal(goal),
            Layout::Table { bin_center } => table::validate_goal(self.kind, *bin_center, goal),
        }
    }

    pub fn set_goal(&mut self, goal: Goal) -> Result<()> {
        self.validate_goal(&goal)?;
        self.goal = goal;
        Ok(())
    }

    /// Starts an episode. The maze always starts at its fixed start cell; the
    /// tabletop randomizes the object (and, for pick-and-place, the goal).
    pub fn reset(&mut self, seed: u64) -> (EnvState, Goal) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        match &self.layout {
            Layout::Maze(m) => {
                let cells: Vec<_> = m
                    .free_cells()
                    .into_iter()
                    .filter(|c| *c != MAZE_START)
                    .collect();
                let (gx, gy) = cells[rng.random_range(0..cells.len())];
                self.goal = m.cell_center(gx, gy);
                (self.maze_start_state(), self.goal)
            }
            Layout::Table { bin_center } => {
                let (state, goal) = table::reset(self.kind, *bin_center, &mut rng);
                self.goal = goal;
                (state, goal)
            }
        }
    }

    /// Same as [`Env::reset`] but keeps the current final goal.
    pub fn reset_keep_goal(&mut self, seed: u64) -> EnvState {
        let goal = self.goal;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let state = match &self.layout {
            Layout::Maze(_) => self.maze_start_state(),
            Layout::Table { bin_center } => {
                table::reset_object(self.kind, *bin_center, &goal, &mut rng)
            }
        };
        self.goal = goal;
        state
    }

    fn maze_start_state(&self) -> EnvState {
        let m = self.maze().expect("maze layout");
        EnvState {
            kind: EnvKind::Maze,
            gripper_pos: m.cell_center(MAZE_START.0, MAZE_START.1),
            maze_occupancy: self.occupancy.clone(),
            object_pos: [0.0; 3],
            object_rel: [0.0; 3],
            velocities: [0.0; VELOCITY_DIM],
            gripper_open: false,
        }
    }

    /// Sparse reward of an achieved goal against `goal`.
    pub fn reward_for(&self, achieved: &Goal, goal: &Goal) -> f64 {
        if distance(achieved, goal) > self.tolerance {
            -1.0
        } else {
            0.0
        }
    }

    pub fn step(&self, state: &EnvState, action: &Action) -> Result<Step> {
        if action.iter().any(|a| a.is_nan()) {
            return Err(Error::input("action contains NaN"));
        }
        if action.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(Error::input(format!("action {action:?} outside [0, 1]")));
        }
        if state.kind != self.kind {
            return Err(Error::input(format!(
                "state belongs to {} but env is {}",
                state.kind, self.kind
            )));
        }
        let next = match &self.layout {
            Layout::Maze(m) => m.step(state, action),
            Layout::Table { .. } => table::step(state, action),
        };
        let achieved_goal = next.achieved();
        Ok(Step {
            env_reward: self.reward_for(&achieved_goal, &self.goal),
            achieved_goal,
            state: next,
        })
    }
}

pub fn distance(a: &Goal, b: &Goal) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Per-axis displacement commanded by an action.
pub(crate) fn displacement(action: &Action) -> [f64; 3] {
    [
        STEP_SCALE * (2.0 * action[0] - 1.0),
        STEP_SCALE * (2.0 * action[1] - 1.0),
        STEP_SCALE * (2.0 * action[2] - 1.0),
    ]
}
