use crate::env::{Action, Bounds, Env, EnvKind, EnvState, Goal};
use crate::error::Result;
use crate::learner::{ActionBox, SacAgent};
use crate::replay::SubgoalPolicy;

/// Maps policy outputs onto environment actions and subgoals. Dimensions the
/// environment ignores (the maze's vertical axis and gripper) are not
/// learned; they are filled with neutral values.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionSpaces {
    lower_dims: Vec<usize>,
    higher_dims: Vec<usize>,
    goal_bounds: Bounds,
}

impl ActionSpaces {
    pub fn for_env(env: &Env) -> Self {
        let (lower_dims, higher_dims) = match env.kind() {
            EnvKind::Maze => (vec![0, 1], vec![0, 1]),
            _ => (vec![0, 1, 2, 3], vec![0, 1, 2]),
        };
        ActionSpaces {
            lower_dims,
            higher_dims,
            goal_bounds: env.goal_bounds(),
        }
    }

    pub fn lower_dim(&self) -> usize {
        self.lower_dims.len()
    }

    pub fn higher_dim(&self) -> usize {
        self.higher_dims.len()
    }

    pub fn lower_box(&self) -> ActionBox {
        let d = self.lower_dim();
        ActionBox::new(vec![0.0; d], vec![1.0; d])
    }

    pub fn higher_box(&self) -> ActionBox {
        ActionBox::new(
            self.higher_dims
                .iter()
                .map(|&i| self.goal_bounds.low[i])
                .collect(),
            self.higher_dims
                .iter()
                .map(|&i| self.goal_bounds.high[i])
                .collect(),
        )
    }

    /// Box action of the lower policy to a full environment action.
    pub fn to_env_action(&self, a: &[f64]) -> Action {
        let mut out = [0.5; 4];
        for (&i, &v) in self.lower_dims.iter().zip(a) {
            out[i] = v;
        }
        out
    }

    /// Environment action to the lower policy's unit space.
    pub fn lower_unit(&self, a: &Action) -> Vec<f64> {
        let picked: Vec<f64> = self.lower_dims.iter().map(|&i| a[i]).collect();
        self.lower_box().to_unit(&picked)
    }

    /// Box action of the higher policy to a subgoal.
    pub fn to_subgoal(&self, a: &[f64]) -> Goal {
        let mut g = self.goal_bounds.low;
        for (&i, &v) in self.higher_dims.iter().zip(a) {
            g[i] = v;
        }
        g
    }

    /// Subgoal to the higher policy's unit space.
    pub fn subgoal_unit(&self, g: &Goal) -> Vec<f64> {
        let picked: Vec<f64> = self.higher_dims.iter().map(|&i| g[i]).collect();
        self.higher_box().to_unit(&picked)
    }
}

/// Closed-loop policy driven by an evaluation rollout.
pub trait Controller {
    /// Called once at the start of every episode.
    fn begin(&mut self, env: &Env, initial: &EnvState) -> Result<()>;
    fn act(&mut self, env: &Env, state: &EnvState, t: usize) -> Result<Action>;
}

/// Mean-action lower policy, as used by the staleness diagnostic.
pub struct LowerPolicy<'a> {
    agent: &'a SacAgent,
    spaces: ActionSpaces,
}

impl<'a> LowerPolicy<'a> {
    pub fn new(agent: &'a SacAgent, spaces: ActionSpaces) -> Self {
        LowerPolicy { agent, spaces }
    }
}

impl SubgoalPolicy for LowerPolicy<'_> {
    fn act(&self, state: &EnvState, subgoal: &Goal) -> Result<Action> {
        Ok(self
            .spaces
            .to_env_action(&self.agent.act(&state.to_obs(), subgoal)?))
    }
}

/// Deterministic two-level policy: a fresh subgoal every `k` steps.
pub struct HierarchicalController<'a> {
    higher: &'a SacAgent,
    lower: &'a SacAgent,
    spaces: ActionSpaces,
    k: usize,
    subgoal: Goal,
}

impl<'a> HierarchicalController<'a> {
    pub fn new(higher: &'a SacAgent, lower: &'a SacAgent, spaces: ActionSpaces, k: usize) -> Self {
        HierarchicalController {
            higher,
            lower,
            spaces,
            k,
            subgoal: [0.0; 3],
        }
    }
}

impl Controller for HierarchicalController<'_> {
    fn begin(&mut self, env: &Env, _initial: &EnvState) -> Result<()> {
        self.subgoal = env.goal();
        Ok(())
    }

    fn act(&mut self, env: &Env, state: &EnvState, t: usize) -> Result<Action> {
        let obs = state.to_obs();
        if t.is_multiple_of(self.k) {
            self.subgoal = self.spaces.to_subgoal(&self.higher.act(&obs, &env.goal())?);
        }
        Ok(self
            .spaces
            .to_env_action(&self.lower.act(&obs, &self.subgoal)?))
    }
}

/// Deterministic single-level policy toward a fixed goal.
pub struct FlatController<'a> {
    agent: &'a SacAgent,
    spaces: ActionSpaces,
    goal: Goal,
}

impl<'a> FlatController<'a> {
    pub fn new(agent: &'a SacAgent, spaces: ActionSpaces, goal: Goal) -> Self {
        FlatController {
            agent,
            spaces,
            goal,
        }
    }
}

impl Controller for FlatController<'_> {
    fn begin(&mut self, _env: &Env, _initial: &EnvState) -> Result<()> {
        Ok(())
    }

    fn act(&mut self, _env: &Env, state: &EnvState, _t: usize) -> Result<Action> {
        Ok(self
            .spaces
            .to_env_action(&self.agent.act(&state.to_obs(), &self.goal)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::EnvConfig;

    #[test]
    fn maze_drops_unused_axes() {
        let env = Env::new(&EnvConfig::maze(0)).unwrap();
        let s = ActionSpaces::for_env(&env);
        assert_eq!((s.lower_dim(), s.higher_dim()), (2, 2));
        assert_eq!(s.to_env_action(&[0.2, 0.9]), [0.2, 0.9, 0.5, 0.5]);
        let g = s.to_subgoal(&[0.3, 0.4]);
        assert_eq!(g, [0.3, 0.4, env.goal_bounds().low[2]]);
        let u = s.subgoal_unit(&g);
        let back = s.to_subgoal(&s.higher_box().from_unit(&u));
        for i in 0..3 {
            assert!((back[i] - g[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn table_uses_all_axes() {
        let env = Env::new(&EnvConfig::new(EnvKind::PickPlace)).unwrap();
        let s = ActionSpaces::for_env(&env);
        assert_eq!((s.lower_dim(), s.higher_dim()), (4, 3));
        assert_eq!(
            s.lower_unit(&[0.0, 0.5, 1.0, 0.25]),
            vec![-1.0, 0.0, 1.0, -0.5]
        );
    }
}
