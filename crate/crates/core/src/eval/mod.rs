//! Evaluation rollouts, success curves and the run driver behind the CLI.

mod config;
mod curves;
mod run;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use config::{RunConfig, TranslatorBackend, RUN_CONFIG_SCHEMA};
pub use curves::{
    aggregate, read_curves, terminal_success, write_curves, CurvePoint, CurveRow, CURVES_HEADER,
    METRICS_HEADER, STALENESS_HEADER,
};
pub use run::{
    env_id, eval_only, resolve_params, run, run_seed, EvalReport, RunSummary, SeedResult,
};

use crate::env::{scripted_demo_from, Action, Env, EnvState};
use crate::error::{Error, Result};
use crate::trainer::Controller;

/// Success rate of `controller` over `episodes` deterministic rollouts of
/// `horizon` steps. An episode succeeds when its final step earns zero task reward.
pub fn evaluate(
    controller: &mut dyn Controller,
    env: &mut Env,
    episodes: usize,
    horizon: usize,
    seed: u64,
) -> Result<f64> {
    if episodes == 0 {
        return Err(Error::input("evaluation needs at least one episode"));
    }
    if horizon == 0 {
        return Err(Error::input("evaluation horizon must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut successes = 0usize;
    for _ in 0..episodes {
        let mut s = env.reset_keep_goal(rng.random());
        controller.begin(env, &s)?;
        let mut last = -1.0;
        for t in 0..horizon {
            let a = controller.act(env, &s, t)?;
            let step = env.step(&s, &a)?;
            last = step.env_reward;
            s = step.state;
        }
        if last == 0.0 {
            successes += 1;
        }
    }
    Ok(successes as f64 / episodes as f64)
}

/// Uniformly random actions.
pub struct RandomController {
    rng: ChaCha8Rng,
}

impl RandomController {
    pub fn new(seed: u64) -> Self {
        RandomController {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Controller for RandomController {
    fn begin(&mut self, _env: &Env, _initial: &EnvState) -> Result<()> {
        Ok(())
    }

    fn act(&mut self, _env: &Env, _state: &EnvState, _t: usize) -> Result<Action> {
        Ok([
            self.rng.random(),
            self.rng.random(),
            self.rng.random(),
            self.rng.random(),
        ])
    }
}

/// Replays the scripted tabletop controller, then holds still.
#[derive(Default)]
pub struct ScriptedController {
    plan: Vec<Action>,
}

impl Controller for ScriptedController {
    fn begin(&mut self, env: &Env, initial: &EnvState) -> Result<()> {
        self.plan = scripted_demo_from(env, initial.clone())?
            .into_iter()
            .map(|t| t.a)
            .collect();
        Ok(())
    }

    fn act(&mut self, _env: &Env, state: &EnvState, t: usize) -> Result<Action> {
        Ok(match self.plan.get(t) {
            Some(a) => *a,
            None => [0.5, 0.5, 0.5, if state.gripper_open { 1.0 } else { 0.0 }],
        })
    }
}
