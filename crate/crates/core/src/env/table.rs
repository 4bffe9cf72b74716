use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{
    displacement, distance, Action, Bounds, EnvKind, EnvState, Goal, BIN_SIZE, GOAL_HEIGHT,
    GRASP_RADIUS, MANIPULATION_TOLERANCE, MAX_HEIGHT, TABLE_EXTENT, TABLE_HEIGHT, VELOCITY_DIM,
};
use crate::error::{Error, Result};

/// Gripper rest position at the start of every episode.
pub(crate) const GRIPPER_HOME: [f64; 3] = [0.5, 0.5, 0.5];
/// Objects and pick-and-place goals keep this margin from the table edge.
const SPAWN_MARGIN: f64 = 0.1;

pub(crate) fn workspace() -> Bounds {
    Bounds {
        low: [0.0, 0.0, TABLE_HEIGHT],
        high: [TABLE_EXTENT, TABLE_EXTENT, MAX_HEIGHT],
    }
}

pub(crate) fn validate_goal(
    kind: EnvKind,
    bin_center: Option<[f64; 2]>,
    goal: &Goal,
) -> Result<()> {
    if goal[2] > MAX_HEIGHT {
        return Err(Error::validation(format!(
            "goal height {} exceeds max_height {MAX_HEIGHT}",
            goal[2]
        )));
    }
    if goal[2] < TABLE_HEIGHT {
        return Err(Error::validation(format!(
            "goal height {} is below the table ({TABLE_HEIGHT})",
            goal[2]
        )));
    }
    if !workspace().contains(goal) {
        return Err(Error::validation(format!("goal {goal:?} is off the table")));
    }
    if kind == EnvKind::Bin {
        let c = bin_center.ok_or_else(|| Error::Internal("bin env without a bin".into()))?;
        let half = BIN_SIZE / 2.0;
        if (goal[0] - c[0]).abs() > half || (goal[1] - c[1]).abs() > half {
            return Err(Error::validation(format!(
                "goal {goal:?} is not inside the bin at {c:?}"
            )));
        }
    }
    Ok(())
}

fn random_goal(kind: EnvKind, bin_center: Option<[f64; 2]>, rng: &mut ChaCha8Rng) -> Goal {
    match (kind, bin_center) {
        (EnvKind::Bin, Some(c)) => [c[0], c[1], TABLE_HEIGHT],
        _ => [
            rng.random_range(SPAWN_MARGIN..TABLE_EXTENT - SPAWN_MARGIN),
            rng.random_range(SPAWN_MARGIN..TABLE_EXTENT - SPAWN_MARGIN),
            GOAL_HEIGHT,
        ],
    }
}

pub(crate) fn reset(
    kind: EnvKind,
    bin_center: Option<[f64; 2]>,
    rng: &mut ChaCha8Rng,
) -> (EnvState, Goal) {
    let goal = random_goal(kind, bin_center, rng);
    (reset_object(kind, bin_center, &goal, rng), goal)
}

/// Places the object on the table away from the goal (and outside the bin).
pub(crate) fn reset_object(
    kind: EnvKind,
    bin_center: Option<[f64; 2]>,
    goal: &Goal,
    rng: &mut ChaCha8Rng,
) -> EnvState {
    loop {
        let object = [
            rng.random_range(SPAWN_MARGIN..TABLE_EXTENT - SPAWN_MARGIN),
            rng.random_range(SPAWN_MARGIN..TABLE_EXTENT - SPAWN_MARGIN),
            TABLE_HEIGHT,
        ];
        let near_goal = distance(&[object[0], object[1], 0.0], &[goal[0], goal[1], 0.0])
            < 2.0 * MANIPULATION_TOLERANCE;
        let in_bin = bin_center.is_some_and(|c| {
            (object[0] - c[0]).abs() < BIN_SIZE && (object[1] - c[1]).abs() < BIN_SIZE
        });
        if near_goal || in_bin {
            continue;
        }
        return make_state(kind, GRIPPER_HOME, object, true, false, [0.0; 3], [0.0; 3]);
    }
}

fn make_state(
    kind: EnvKind,
    gripper: [f64; 3],
    object: [f64; 3],
    open: bool,
    grasped: bool,
    gripper_vel: [f64; 3],
    object_vel: [f64; 3],
) -> EnvState {
    let mut velocities = [0.0; VELOCITY_DIM];
    velocities[..3].copy_from_slice(&gripper_vel);
    velocities[3..6].copy_from_slice(&object_vel);
    velocities[9] = if open { 1.0 } else { 0.0 };
    velocities[10] = if grasped { 1.0 } else { 0.0 };
    EnvState {
        kind,
        gripper_pos: gripper,
        maze_occupancy: None,
        object_pos: object,
        object_rel: [
            object[0] - gripper[0],
            object[1] - gripper[1],
            object[2] - gripper[2],
        ],
        velocities,
        gripper_open: open,
    }
}

/// Kinematic tabletop: a closed gripper within the grasp radius carries the
/// object; opening the gripper drops the object onto the table.
pub(crate) fn step(state: &EnvState, action: &Action) -> EnvState {
    let d = displacement(action);
    let ws = workspace();
    let mut gripper = state.gripper_pos;
    for i in 0..3 {
        gripper[i] = (gripper[i] + d[i]).clamp(ws.low[i], ws.high[i]);
    }
    let open = action[3] >= 0.5;
    let was_grasped = state.grasped();
    let grasped = !open && (was_grasped || distance(&gripper, &state.object_pos) <= GRASP_RADIUS);
    let object = if grasped {
        gripper
    } else if was_grasped {
        [state.object_pos[0], state.object_pos[1], TABLE_HEIGHT]
    } else {
        state.object_pos
    };
    let vel = |a: &[f64; 3], b: &[f64; 3]| [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    make_state(
        state.kind,
        gripper,
        object,
        open,
        grasped,
        vel(&state.gripper_pos, &gripper),
        vel(&state.object_pos, &object),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{Env, EnvConfig};
    use proptest::prelude::*;

    #[test]
    fn pick_place_goal_at_fixed_height() {
        let mut env = Env::new(&EnvConfig::new(EnvKind::PickPlace)).unwrap();
        for seed in 0..20 {
            let (s, g) = env.reset(seed);
            assert_eq!(g[2], GOAL_HEIGHT);
            assert_eq!(s.object_pos[2], TABLE_HEIGHT);
        }
    }

    #[test]
    fn bin_inside_table() {
        for seed in 0..50 {
            let cfg = EnvConfig {
                kind: EnvKind::Bin,
                layout_seed: seed,
                maze_width: None,
                maze_height: None,
            };
            let mut env = Env::new(&cfg).unwrap();
            let c = env.bin_center().unwrap();
            let half = BIN_SIZE / 2.0;
            assert!(c[0] - half >= 0.0 && c[0] + half <= TABLE_EXTENT);
            assert!(c[1] - half >= 0.0 && c[1] + half <= TABLE_EXTENT);
            let (_, g) = env.reset(seed);
            assert_eq!(g, [c[0], c[1], TABLE_HEIGHT]);
        }
    }

    #[test]
    fn goal_above_max_height_rejected() {
        let env = Env::new(&EnvConfig::new(EnvKind::PickPlace)).unwrap();
        assert!(env.validate_goal(&[0.2, 0.2, 0.9]).is_err());
        assert!(env.validate_goal(&[0.2, 0.2, 0.6]).is_ok());
    }

    proptest! {
        #[test]
        fn containment_and_relative_coordinates(seed in 0u64..100, actions in prop::collection::vec(prop::array::uniform4(0.0f64..=1.0), 1..120)) {
            let mut env = Env::new(&EnvConfig::new(EnvKind::PickPlace)).unwrap();
            let (mut s, _) = env.reset(seed);
            let ws = workspace();
            for a in actions {
                s = env.step(&s, &a).unwrap().state;
                prop_assert!(ws.contains(&s.gripper_pos));
                prop_assert!(ws.contains(&s.object_pos));
                for i in 0..3 {
                    prop_assert_eq!(s.object_rel[i], s.object_pos[i] - s.gripper_pos[i]);
                }
            }
        }
    }
}
