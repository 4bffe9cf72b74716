//! Instruction to reward-parameter translation.
//!
//! Two backends produce the same [`RewardParams`]: a deterministic grammar
//! ([`parse_instruction`]) and a remote language model driven by the
//! motion-descriptor / reward-coder prompt pair ([`translate_via_llm`]).
//! Both pass through [`RewardParams::validate`].

mod grammar;
mod llm;
mod prompts;

use serde::{Deserialize, Serialize};

use crate::env::{
    distance, Env, EnvKind, EnvState, FeatureSelector, Goal, MAX_HEIGHT, TABLE_HEIGHT,
};
use crate::error::{Error, Result};

pub use grammar::parse_instruction;
pub use llm::{
    params_from_response, parse_position_calls, translate_via_llm, CompletionClient, HttpLlmClient,
    PositionCall, RecordedClient, LLM_KEY_VAR, LLM_URL_VAR,
};
pub use prompts::{render_prompts, PromptBundle, PromptRole};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TranslatorSource {
    #[default]
    Grammar,
    Llm,
}

/// Stationary higher-level reward: a sparse indicator of the selected state
/// feature being within `tolerance` of `goal`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardParams {
    pub goal: Goal,
    pub tolerance: f64,
    #[serde(rename = "feature")]
    pub feature_selector: FeatureSelector,
    #[serde(rename = "env")]
    pub env_kind: EnvKind,
    #[serde(default)]
    pub source: TranslatorSource,
}

impl RewardParams {
    pub fn validate(&self, env: &Env) -> Result<()> {
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(Error::validation(format!(
                "tolerance {} must be positive",
                self.tolerance
            )));
        }
        if self.env_kind != env.kind() {
            return Err(Error::validation(format!(
                "reward parameters are for {} but the env is {}",
                self.env_kind,
                env.kind()
            )));
        }
        if self.feature_selector != self.env_kind.feature() {
            return Err(Error::validation(format!(
                "feature {} does not match env {}",
                self.feature_selector.as_str(),
                self.env_kind
            )));
        }
        env.validate_goal(&self.goal)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("reward params serialize")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::input(format!("bad reward params JSON: {e}")))
    }
}

/// `-1` if the selected feature of `state` is farther than the tolerance
/// from the goal (`goal_override` when given), else `0`.
pub fn evaluate_reward(
    params: &RewardParams,
    state: &EnvState,
    goal_override: Option<&Goal>,
) -> Result<f64> {
    if state.kind != params.env_kind {
        return Err(Error::input(format!(
            "state layout is {} but reward parameters are for {}",
            state.kind, params.env_kind
        )));
    }
    let goal = goal_override.unwrap_or(&params.goal);
    let feature = state.feature(params.feature_selector);
    Ok(if distance(&feature, goal) > params.tolerance {
        -1.0
    } else {
        0.0
    })
}

/// Range check shared by both backends before a position becomes a goal.
pub(crate) fn check_height(z: f64) -> Result<()> {
    if z > MAX_HEIGHT {
        return Err(Error::validation(format!(
            "height {z} exceeds max_height {MAX_HEIGHT}"
        )));
    }
    if z < TABLE_HEIGHT {
        return Err(Error::validation(format!(
            "height {z} is below table_height {TABLE_HEIGHT}"
        )));
    }
    Ok(())
}

/// Maps a position in the instruction frame to a world-frame goal. Maze
/// instructions use grid coordinates (integers are cell centers) and the
/// gripper stays at table height; tabletop instructions are in world units.
pub(crate) fn resolve_position(env: &Env, x: f64, y: f64, z: Option<f64>) -> Result<Goal> {
    if let Some(z) = z {
        check_height(z)?;
    }
    match env.maze() {
        Some(m) => Ok(m.grid_to_world(x, y)),
        None => Ok([x, y, z.unwrap_or(TABLE_HEIGHT)]),
    }
}
