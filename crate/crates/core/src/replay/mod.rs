//! Lower- and higher-level replay with sample-time language relabeling and
//! hindsight goal relabeling.

mod record;

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{Action, Env, EnvKind, EnvState, Goal};
use crate::error::{Error, Result};
use crate::translator::{evaluate_reward, RewardParams};

pub use record::{
    read_primitive_records, read_subgoal_records, write_primitive_records, write_subgoal_records,
    RECORD_SCHEMA_PRIMITIVE, RECORD_SCHEMA_SUBGOAL,
};

/// Desk-scale buffer capacity.
pub const DEFAULT_CAPACITY: usize = 100_000;

/// Lower-level transition `(s, g, a, r_l, s')` with `g` the held subgoal.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimitiveTransition {
    pub s: EnvState,
    pub g: Goal,
    pub a: Action,
    pub r_l: f64,
    pub s_next: EnvState,
}

/// Higher-level transition `(s, g*, g, r_h, s')` spanning one subgoal window.
#[derive(Debug, Clone, PartialEq)]
pub struct SubgoalTransition {
    pub s: EnvState,
    pub g_star: Goal,
    pub g: Goal,
    pub r_h: f64,
    /// State after the window's lower steps.
    pub s_next: EnvState,
    pub relabeled: bool,
    /// Last window of its episode; bootstrapping stops here.
    pub episode_end: bool,
    /// Number of lower steps in the window (`k`, or fewer for a short final window).
    pub steps: usize,
}

/// One episode of subgoal transitions.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct HigherTrajectory {
    pub transitions: Vec<SubgoalTransition>,
}

impl HigherTrajectory {
    pub fn new(transitions: Vec<SubgoalTransition>) -> Self {
        HigherTrajectory { transitions }
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    /// Achieved goal of each window's final state, in order.
    pub fn achieved_states(&self) -> Vec<Goal> {
        self.transitions
            .iter()
            .map(|t| t.s_next.achieved())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum HerStrategy {
    /// The trajectory's last achieved state becomes the goal of a full copy.
    Final,
    /// A uniformly drawn achieved state becomes the goal of the prefix that ends there.
    #[default]
    Future,
}

/// Replaces every reward with the language-guided indicator on `s_next`.
pub fn relabel_language(
    batch: &[SubgoalTransition],
    params: &RewardParams,
) -> Result<Vec<SubgoalTransition>> {
    batch
        .iter()
        .map(|t| {
            if t.g_star != params.goal {
                return Err(Error::input(format!(
                    "transition final goal {:?} differs from the instruction goal {:?}",
                    t.g_star, params.goal
                )));
            }
            let mut out = t.clone();
            out.r_h = evaluate_reward(params, &t.s_next, None)?;
            out.relabeled = true;
            Ok(out)
        })
        .collect()
}

/// Builds `count` hindsight copies of `sigma` whose final goal is an achieved
/// state and whose rewards are the indicator against that goal.
pub fn her_relabel<R: Rng + ?Sized>(
    sigma: &HigherTrajectory,
    params: &RewardParams,
    strategy: HerStrategy,
    count: usize,
    rng: &mut R,
) -> Result<Vec<HigherTrajectory>> {
    if sigma.is_empty() {
        return Err(Error::input("cannot relabel an empty trajectory"));
    }
    if count == 0 {
        return Err(Error::input("hindsight copy count must be at least 1"));
    }
    let achieved = sigma.achieved_states();
    (0..count)
        .map(|_| {
            let end = match strategy {
                HerStrategy::Final => sigma.len() - 1,
                HerStrategy::Future => rng.random_range(0..sigma.len()),
            };
            let goal = achieved[end];
            let mut copy = Vec::with_capacity(end + 1);
            for (i, t) in sigma.transitions[..=end].iter().enumerate() {
                let mut r = t.clone();
                r.g_star = goal;
                r.r_h = evaluate_reward(params, &t.s_next, Some(&goal))?;
                r.relabeled = true;
                r.episode_end = i == end || t.episode_end;
                copy.push(r);
            }
            Ok(HigherTrajectory::new(copy))
        })
        .collect()
}

fn check_state(kind: EnvKind, obs_dim: usize, s: &EnvState) -> Result<()> {
    if s.kind != kind || s.obs_dim() != obs_dim {
        return Err(Error::input(format!(
            "state ({}, dim {}) does not match buffer ({kind}, dim {obs_dim})",
            s.kind,
            s.obs_dim()
        )));
    }
    Ok(())
}

/// Lower-level ring buffer. Each entry remembers how many later steps of its
/// episode follow it, so hindsight goals can be drawn from the future.
#[derive(Debug, Clone)]
pub struct LowerBuffer {
    kind: EnvKind,
    obs_dim: usize,
    capacity: usize,
    items: VecDeque<(PrimitiveTransition, usize)>,
}

impl LowerBuffer {
    pub fn new(kind: EnvKind, obs_dim: usize, capacity: usize) -> Self {
        LowerBuffer {
            kind,
            obs_dim,
            capacity: capacity.max(1),
            items: VecDeque::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn get(&self, i: usize) -> Option<&PrimitiveTransition> {
        self.items.get(i).map(|(t, _)| t)
    }

    pub fn iter(&self) -> impl Iterator<Item = &PrimitiveTransition> {
        self.items.iter().map(|(t, _)| t)
    }

    fn check(&self, t: &PrimitiveTransition) -> Result<()> {
        check_state(self.kind, self.obs_dim, &t.s)?;
        check_state(self.kind, self.obs_dim, &t.s_next)
    }

    fn push_raw(&mut self, t: PrimitiveTransition, later: usize) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back((t, later));
    }

    /// Pushes a transition with no known episode continuation.
    pub fn push_lower(&mut self, t: PrimitiveTransition) -> Result<()> {
        self.check(&t)?;
        self.push_raw(t, 0);
        Ok(())
    }

    /// Pushes a contiguous episode.
    pub fn push_episode(&mut self, episode: &[PrimitiveTransition]) -> Result<()> {
        for t in episode {
            self.check(t)?;
        }
        let n = episode.len();
        for (i, t) in episode.iter().enumerate() {
            self.push_raw(t.clone(), n - 1 - i);
        }
        Ok(())
    }

    /// Uniform sample with replacement.
    pub fn sample_batch<R: Rng + ?Sized>(
        &self,
        m: usize,
        rng: &mut R,
    ) -> Result<Vec<PrimitiveTransition>> {
        if self.items.is_empty() {
            return Err(Error::State("lower buffer is empty".into()));
        }
        Ok((0..m)
            .map(|_| self.items[rng.random_range(0..self.items.len())].0.clone())
            .collect())
    }

    /// Uniform sample where, with probability `future_p`, the subgoal is
    /// replaced by an achieved goal from later in the same episode and the
    /// reward recomputed with `env`'s tolerance.
    pub fn sample_her<R: Rng + ?Sized>(
        &self,
        m: usize,
        future_p: f64,
        env: &Env,
        rng: &mut R,
    ) -> Result<Vec<PrimitiveTransition>> {
        if self.items.is_empty() {
            return Err(Error::State("lower buffer is empty".into()));
        }
        let mut out = Vec::with_capacity(m);
        for _ in 0..m {
            let i = rng.random_range(0..self.items.len());
            let (t, later) = &self.items[i];
            let mut t = t.clone();
            if rng.random::<f64>() < future_p {
                let j = i + rng.random_range(0..=*later).min(self.items.len() - 1 - i);
                t.g = self.items[j].0.s_next.achieved();
                t.r_l = env.reward_for(&t.s_next.achieved(), &t.g);
            }
            out.push(t);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct TrajectoryMeta {
    len: usize,
    hindsight: bool,
}

/// Higher-level buffer of whole trajectories. Capacity counts transitions;
/// the oldest trajectories are evicted whole.
#[derive(Debug, Clone)]
pub struct HigherBuffer {
    kind: EnvKind,
    obs_dim: usize,
    capacity: usize,
    items: VecDeque<SubgoalTransition>,
    trajectories: VecDeque<TrajectoryMeta>,
    /// Start offset (into `items`) of each trajectory, parallel to `trajectories`.
    starts: VecDeque<usize>,
    evicted: usize,
}

impl HigherBuffer {
    pub fn new(kind: EnvKind, obs_dim: usize, capacity: usize) -> Self {
        HigherBuffer {
            kind,
            obs_dim,
            capacity: capacity.max(1),
            items: VecDeque::new(),
            trajectories: VecDeque::new(),
            starts: VecDeque::new(),
            evicted: 0,
        }
    }

    /// Number of stored transitions.
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn trajectory_count(&self) -> usize {
        self.trajectories.len()
    }

    /// Trajectories appended by hindsight relabeling.
    pub fn hindsight_count(&self) -> usize {
        self.trajectories.iter().filter(|t| t.hindsight).count()
    }

    pub fn iter(&self) -> impl Iterator<Item = &SubgoalTransition> {
        self.items.iter()
    }

    pub fn get(&self, i: usize) -> Option<&SubgoalTransition> {
        self.items.get(i)
    }

    /// The `i`-th stored trajectory (oldest first) and whether it is a hindsight copy.
    pub fn trajectory(&self, i: usize) -> Option<(HigherTrajectory, bool)> {
        let meta = self.trajectories.get(i)?;
        let start = self.starts[i] - self.evicted;
        let ts = self.items.range(start..start + meta.len).cloned().collect();
        Some((HigherTrajectory::new(ts), meta.hindsight))
    }

    /// Appends a collected trajectory.
    pub fn push_higher(&mut self, sigma: &HigherTrajectory) -> Result<()> {
        self.push_trajectory(sigma, false)
    }

    /// Appends a hindsight-relabeled copy.
    pub fn push_hindsight(&mut self, sigma: &HigherTrajectory) -> Result<()> {
        self.push_trajectory(sigma, true)
    }

    fn push_trajectory(&mut self, sigma: &HigherTrajectory, hindsight: bool) -> Result<()> {
        if sigma.is_empty() {
            return Err(Error::input("cannot store an empty trajectory"));
        }
        if sigma.len() > self.capacity {
            return Err(Error::input(format!(
                "trajectory of {} transitions exceeds capacity {}",
                sigma.len(),
                self.capacity
            )));
        }
        for t in &sigma.transitions {
            check_state(self.kind, self.obs_dim, &t.s)?;
            check_state(self.kind, self.obs_dim, &t.s_next)?;
        }
        while self.items.len() + sigma.len() > self.capacity {
            let meta = self
                .trajectories
                .pop_front()
                .expect("non-empty buffer has a trajectory");
            self.starts.pop_front();
            self.items.drain(..meta.len);
            self.evicted += meta.len;
        }
        self.starts.push_back(self.evicted + self.items.len());
        self.trajectories.push_back(TrajectoryMeta {
            len: sigma.len(),
            hindsight,
        });
        self.items.extend(sigma.transitions.iter().cloned());
        Ok(())
    }

    /// Uniform transition sample with replacement.
    pub fn sample_batch<R: Rng + ?Sized>(
        &self,
        m: usize,
        rng: &mut R,
    ) -> Result<Vec<SubgoalTransition>> {
        if self.items.is_empty() {
            return Err(Error::State("higher buffer is empty".into()));
        }
        Ok((0..m)
            .map(|_| self.items[rng.random_range(0..self.items.len())].clone())
            .collect())
    }

    /// Uniform sample of collected (non-hindsight) trajectories, with replacement.
    pub fn sample_trajectories<R: Rng + ?Sized>(
        &self,
        m: usize,
        rng: &mut R,
    ) -> Result<Vec<HigherTrajectory>> {
        let collected: Vec<usize> = (0..self.trajectories.len())
            .filter(|&i| !self.trajectories[i].hindsight)
            .collect();
        if collected.is_empty() {
            return Err(Error::State(
                "higher buffer holds no collected trajectory".into(),
            ));
        }
        Ok((0..m)
            .map(|_| {
                self.trajectory(collected[rng.random_range(0..collected.len())])
                    .unwrap()
                    .0
            })
            .collect())
    }
}

/// Lower-level behaviour used to re-execute stored windows.
pub trait SubgoalPolicy {
    fn act(&self, state: &EnvState, subgoal: &Goal) -> Result<Action>;
}

/// Mean absolute gap between each stored higher reward and its recomputation
/// under `lower`. Relabeled transitions are recomputed from `params` alone
/// (goal override `g_star`); vanilla ones by re-running `lower` from `s` for
/// the window's steps and summing the task rewards against `g_star`.
pub fn staleness_diagnostic(
    batch: &[SubgoalTransition],
    params: &RewardParams,
    lower: &dyn SubgoalPolicy,
    env: &Env,
) -> Result<f64> {
    if batch.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for t in batch {
        let recomputed = if t.relabeled {
            evaluate_reward(params, &t.s_next, Some(&t.g_star))?
        } else {
            let mut s = t.s.clone();
            let mut sum = 0.0;
            for _ in 0..t.steps {
                let a = lower.act(&s, &t.g)?;
                let step = env.step(&s, &a)?;
                sum += env.reward_for(&step.achieved_goal, &t.g_star);
                s = step.state;
            }
            sum
        };
        total += (t.r_h - recomputed).abs();
    }
    Ok(total / batch.len() as f64)
}
