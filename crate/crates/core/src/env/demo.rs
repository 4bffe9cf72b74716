use super::{Action, Env, EnvKind, EnvState, Goal, MAX_HEIGHT, STEP_SCALE, TABLE_HEIGHT};
use crate::error::{Error, Result};
use crate::replay::PrimitiveTransition;

const CARRY_CLEARANCE: f64 = 0.08;
const REACHED: f64 = 1e-9;
const MAX_DEMO_STEPS: usize = 400;

/// Waypoint controller for the tabletop tasks: approach, grasp, lift,
/// transport, release. The returned transitions carry the final goal as `g`
/// and end on the first step with zero task reward.
pub fn scripted_demo(env: &mut Env, rng_seed: u64) -> Result<Vec<PrimitiveTransition>> {
    let state = env.reset_keep_goal(rng_seed);
    scripted_demo_from(env, state)
}

/// Same controller started from an arbitrary tabletop state.
pub fn scripted_demo_from(env: &Env, state: EnvState) -> Result<Vec<PrimitiveTransition>> {
    if env.kind() == EnvKind::Maze {
        return Err(Error::input("no demonstration is used for the maze task"));
    }
    let goal = env.goal();
    let mut demo = Demo {
        env,
        goal,
        state,
        out: Vec::new(),
    };

    let o = demo.state.object_pos;
    let hover = (TABLE_HEIGHT + CARRY_CLEARANCE).min(MAX_HEIGHT);
    let carry = match demo.env.kind() {
        EnvKind::PickPlace => goal[2],
        _ => hover,
    };
    demo.move_to([o[0], o[1], hover], true)?;
    demo.move_to(o, true)?;
    demo.move_to(o, false)?;
    if !demo.state.grasped() {
        return Err(Error::Internal("scripted grasp failed".into()));
    }
    demo.move_to([o[0], o[1], carry], false)?;
    demo.move_to([goal[0], goal[1], carry], false)?;
    if demo.env.kind() == EnvKind::Bin {
        // Release over the bin; the object settles on the bin floor.
        demo.move_to([goal[0], goal[1], carry], true)?;
    }
    demo.move_to(goal, demo.env.kind() == EnvKind::Bin)?;

    match demo.out.last() {
        Some(t) if t.r_l == 0.0 => Ok(demo.out),
        _ => Err(Error::Internal(
            "scripted demonstration did not reach the goal".into(),
        )),
    }
}

struct Demo<'a> {
    env: &'a Env,
    goal: Goal,
    state: EnvState,
    out: Vec<PrimitiveTransition>,
}

impl Demo<'_> {
    fn done(&self) -> bool {
        self.out.last().is_some_and(|t| t.r_l == 0.0)
    }

    /// Steps toward `target` until reached (or the task is already solved).
    /// Always takes at least one step so gripper commands register.
    fn move_to(&mut self, target: [f64; 3], open: bool) -> Result<()> {
        let mut first = true;
        while !self.done() {
            let p = self.state.gripper_pos;
            let reached = (0..3).all(|i| (target[i] - p[i]).abs() < REACHED);
            let gripper_ok = self.state.gripper_open == open;
            if reached && gripper_ok && !first {
                break;
            }
            first = false;
            if self.out.len() >= MAX_DEMO_STEPS {
                return Err(Error::Internal(
                    "scripted demonstration exceeded its step budget".into(),
                ));
            }
            let mut a: Action = [0.5, 0.5, 0.5, if open { 1.0 } else { 0.0 }];
            for i in 0..3 {
                a[i] = 0.5 + ((target[i] - p[i]) / STEP_SCALE).clamp(-1.0, 1.0) / 2.0;
            }
            let step = self.env.step(&self.state, &a)?;
            self.out.push(PrimitiveTransition {
                s: self.state.clone(),
                g: self.goal,
                a,
                r_l: step.env_reward,
                s_next: step.state.clone(),
            });
            self.state = step.state;
            if reached && gripper_ok {
                break;
            }
        }
        Ok(())
    }
}
