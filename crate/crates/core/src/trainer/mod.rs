//! Training loop for both levels, the baseline modes and the imitation term.
//!
//! One call to [`Trainer::run_cycle`] collects one episode, stores it,
//! relabels (in the language-guided modes), samples every minibatch for the
//! cycle and only then applies the gradient steps.

mod config;
mod policy;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use config::{Mode, TrainConfig};
pub use policy::{ActionSpaces, Controller, FlatController, HierarchicalController, LowerPolicy};

use crate::env::{scripted_demo, Env, EnvState, Goal};
use crate::error::{Error, Result};
use crate::learner::{Matrix, SacAgent, SacBatch};
use crate::replay::{
    her_relabel, relabel_language, staleness_diagnostic, HigherBuffer, HigherTrajectory,
    LowerBuffer, PrimitiveTransition, SubgoalTransition,
};
use crate::translator::{evaluate_reward, parse_instruction, RewardParams};

/// Demonstration episodes generated when imitation is enabled.
pub const DEMO_EPISODES: usize = 16;

/// Step of a training cycle, recorded in order for inspection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Collect,
    Push,
    Relabel,
    Sample,
    Gradient,
}

/// How often each relabeling operation ran.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CallCounts {
    pub relabel_language: u64,
    pub her_relabel: u64,
    pub hac_relabel: u64,
    /// Higher-level transitions whose stored reward was replaced in a sampled copy.
    pub higher_reward_mutations: u64,
}

/// One collected episode.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    /// Empty in flat mode.
    pub higher: HigherTrajectory,
    pub lower: Vec<PrimitiveTransition>,
    pub success: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LevelLosses {
    pub critic: f64,
    pub actor: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CycleMetrics {
    /// 1-based episode index.
    pub cycle: usize,
    pub env_steps: u64,
    pub train_success: bool,
    /// `None` while the buffers are still warming up.
    pub lower: Option<LevelLosses>,
    pub higher: Option<LevelLosses>,
    pub lower_buffer: usize,
    pub higher_buffer: usize,
    pub hindsight_trajectories: usize,
}

/// Mean staleness of stored higher rewards, as stored and after language relabeling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Staleness {
    pub vanilla: f64,
    pub relabeled: f64,
    /// Transitions the diagnostic examined.
    pub samples: usize,
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

struct Streams {
    collect: ChaCha8Rng,
    sample: ChaCha8Rng,
    grad: ChaCha8Rng,
    diag: ChaCha8Rng,
}

struct DemoSet {
    obs: Vec<f64>,
    goal: Vec<f64>,
    action: Vec<f64>,
    rows: usize,
}

/// Rolls out one hierarchical episode. The higher policy picks a subgoal at
/// steps `0, k, 2k, ..`; the lower acts every step toward the held subgoal.
pub fn collect_episode<R: Rng + ?Sized>(
    env: &mut Env,
    higher: &SacAgent,
    lower: &SacAgent,
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<Episode> {
    let spaces = ActionSpaces::for_env(env);
    let goal = env.goal();
    let mut s = env.reset_keep_goal(rng.random());
    let mut windows = Vec::with_capacity(cfg.horizon.div_ceil(cfg.k));
    let mut prims = Vec::with_capacity(cfg.horizon);
    let mut window_start = s.clone();
    let mut subgoal = goal;
    let mut window_reward = 0.0;
    let mut steps = 0;
    let mut last_reward = -1.0;
    for t in 0..cfg.horizon {
        let obs = s.to_obs();
        if t % cfg.k == 0 {
            let u = higher.explore_action(&obs, &goal, cfg.random_eps, cfg.noise_eps, rng)?;
            subgoal = spaces.to_subgoal(&u);
            window_start = s.clone();
            window_reward = 0.0;
            steps = 0;
        }
        let u = lower.explore_action(&obs, &subgoal, cfg.random_eps, cfg.noise_eps, rng)?;
        let a = spaces.to_env_action(&u);
        let step = env.step(&s, &a)?;
        window_reward += step.env_reward;
        last_reward = step.env_reward;
        steps += 1;
        prims.push(PrimitiveTransition {
            s: s.clone(),
            g: subgoal,
            a,
            r_l: env.reward_for(&step.achieved_goal, &subgoal),
            s_next: step.state.clone(),
        });
        s = step.state;
        let end = t + 1 == cfg.horizon;
        if (t + 1) % cfg.k == 0 || end {
            windows.push(SubgoalTransition {
                s: window_start.clone(),
                g_star: goal,
                g: subgoal,
                r_h: window_reward,
                s_next: s.clone(),
                relabeled: false,
                episode_end: end,
                steps,
            });
        }
    }
    Ok(Episode {
        higher: HigherTrajectory::new(windows),
        lower: prims,
        success: last_reward == 0.0,
    })
}

/// Rolls out one flat episode; every step is rewarded with the language reward.
pub fn collect_flat_episode<R: Rng + ?Sized>(
    env: &mut Env,
    agent: &SacAgent,
    params: &RewardParams,
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<Episode> {
    let spaces = ActionSpaces::for_env(env);
    let mut s = env.reset_keep_goal(rng.random());
    let mut prims = Vec::with_capacity(cfg.horizon);
    let mut last_reward = -1.0;
    for _ in 0..cfg.horizon {
        let u = agent.explore_action(
            &s.to_obs(),
            &params.goal,
            cfg.random_eps,
            cfg.noise_eps,
            rng,
        )?;
        let a = spaces.to_env_action(&u);
        let step = env.step(&s, &a)?;
        last_reward = step.env_reward;
        prims.push(PrimitiveTransition {
            s: s.clone(),
            g: params.goal,
            a,
            r_l: evaluate_reward(params, &step.state, None)?,
            s_next: step.state.clone(),
        });
        s = step.state;
    }
    Ok(Episode {
        higher: HigherTrajectory::default(),
        lower: prims,
        success: last_reward == 0.0,
    })
}

/// Replaces the subgoal with the state actually reached and rescores the
/// transition against the final goal.
pub fn hac_relabel(t: &SubgoalTransition, env: &Env) -> SubgoalTransition {
    let achieved = t.s_next.achieved();
    let mut out = t.clone();
    out.g = achieved;
    out.r_h = env.reward_for(&achieved, &t.g_star);
    out
}

fn stack(rows: usize, cols: usize, data: Vec<f64>) -> Matrix {
    debug_assert_eq!(data.len(), rows * cols);
    Matrix::from_vec(rows, cols, data)
}

/// Lower-level (or flat) batch with unit-space actions.
pub fn lower_batch(spaces: &ActionSpaces, ts: &[PrimitiveTransition]) -> SacBatch {
    let n = ts.len();
    let dim = ts.first().map_or(0, |t| t.s.obs_dim());
    let (mut obs, mut next, mut goal, mut act) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for t in ts {
        t.s.write_obs(&mut obs);
        t.s_next.write_obs(&mut next);
        goal.extend_from_slice(&t.g);
        act.extend(spaces.lower_unit(&t.a));
    }
    SacBatch {
        obs: stack(n, dim, obs),
        goal: stack(n, 3, goal),
        action: stack(n, spaces.lower_dim(), act),
        reward: ts.iter().map(|t| t.r_l).collect(),
        next_obs: stack(n, dim, next),
        done: vec![0.0; n],
    }
}

/// Higher-level batch: goal is `g*`, action the subgoal, bootstrapping
/// masked at episode ends.
pub fn higher_batch(spaces: &ActionSpaces, ts: &[SubgoalTransition]) -> SacBatch {
    let n = ts.len();
    let dim = ts.first().map_or(0, |t| t.s.obs_dim());
    let (mut obs, mut next, mut goal, mut act) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for t in ts {
        t.s.write_obs(&mut obs);
        t.s_next.write_obs(&mut next);
        goal.extend_from_slice(&t.g_star);
        act.extend(spaces.subgoal_unit(&t.g));
    }
    SacBatch {
        obs: stack(n, dim, obs),
        goal: stack(n, 3, goal),
        action: stack(n, spaces.higher_dim(), act),
        reward: ts.iter().map(|t| t.r_h).collect(),
        next_obs: stack(n, dim, next),
        done: ts
            .iter()
            .map(|t| f64::from(u8::from(t.episode_end)))
            .collect(),
    }
}

/// State of one (seed, mode) run.
pub struct Trainer {
    cfg: TrainConfig,
    seed: u64,
    env: Env,
    params: RewardParams,
    spaces: ActionSpaces,
    lower: SacAgent,
    higher: Option<SacAgent>,
    lower_buf: LowerBuffer,
    higher_buf: HigherBuffer,
    demos: Option<DemoSet>,
    rng: Streams,
    episodes_done: usize,
    env_steps: u64,
    diagnostic_steps: u64,
    calls: CallCounts,
    phase_log: Vec<Phase>,
}

impl Trainer {
    /// Builds a run whose reward parameters come from the grammar translator.
    pub fn from_instruction(cfg: TrainConfig, seed: u64) -> Result<Self> {
        let env = Env::new(&cfg.env)?;
        let params = parse_instruction(&cfg.instruction, &env)?;
        Trainer::new(cfg, params, seed)
    }

    pub fn new(cfg: TrainConfig, params: RewardParams, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut env = Env::new(&cfg.env)?;
        params.validate(&env)?;
        env.set_goal(params.goal)?;
        let spaces = ActionSpaces::for_env(&env);
        let obs_dim = env.obs_dim();
        let mut init = stream(seed, 0);
        let gamma = cfg.sac.gamma;
        let mut lower = SacAgent::new(&cfg.sac, obs_dim, 3, spaces.lower_box(), &mut init);
        lower.target_clip = Some((-1.0 / (1.0 - gamma), 0.0));
        let higher = if cfg.mode.is_hierarchical() {
            let mut h = SacAgent::new(&cfg.sac, obs_dim, 3, spaces.higher_box(), &mut init);
            let r_min = if cfg.mode == Mode::Hier {
                -(cfg.k as f64)
            } else {
                -1.0
            };
            h.target_clip = Some((r_min / (1.0 - gamma), 0.0));
            Some(h)
        } else {
            None
        };
        let demos = if cfg.demo_enabled {
            Some(Trainer::build_demos(&mut env, &spaces, &cfg, &mut init)?)
        } else {
            None
        };
        Ok(Trainer {
            lower_buf: LowerBuffer::new(env.kind(), obs_dim, cfg.buffer_capacity),
            higher_buf: HigherBuffer::new(env.kind(), obs_dim, cfg.buffer_capacity),
            rng: Streams {
                collect: stream(seed, 1),
                sample: stream(seed, 2),
                grad: stream(seed, 3),
                diag: stream(seed, 4),
            },
            cfg,
            seed,
            env,
            params,
            spaces,
            lower,
            higher,
            demos,
            episodes_done: 0,
            env_steps: 0,
            diagnostic_steps: 0,
            calls: CallCounts::default(),
            phase_log: Vec::new(),
        })
    }

    /// Scripted episodes cut into `k`-step windows; each window's subgoal is
    /// the state it ends in, matching how the lower level is conditioned.
    fn build_demos(
        env: &mut Env,
        spaces: &ActionSpaces,
        cfg: &TrainConfig,
        rng: &mut ChaCha8Rng,
    ) -> Result<DemoSet> {
        let mut set = DemoSet {
            obs: Vec::new(),
            goal: Vec::new(),
            action: Vec::new(),
            rows: 0,
        };
        for _ in 0..DEMO_EPISODES {
            let demo = scripted_demo(env, rng.random())?;
            for window in demo.chunks(cfg.k) {
                let g = window
                    .last()
                    .expect("chunks are non-empty")
                    .s_next
                    .achieved();
                for t in window {
                    t.s.write_obs(&mut set.obs);
                    set.goal.extend_from_slice(&g);
                    set.action.extend(spaces.lower_unit(&t.a));
                    set.rows += 1;
                }
            }
        }
        Ok(set)
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn env(&self) -> &Env {
        &self.env
    }

    pub fn params(&self) -> &RewardParams {
        &self.params
    }

    pub fn spaces(&self) -> &ActionSpaces {
        &self.spaces
    }

    pub fn lower(&self) -> &SacAgent {
        &self.lower
    }

    pub fn higher(&self) -> Option<&SacAgent> {
        self.higher.as_ref()
    }

    pub fn lower_buffer(&self) -> &LowerBuffer {
        &self.lower_buf
    }

    pub fn higher_buffer(&self) -> &HigherBuffer {
        &self.higher_buf
    }

    pub fn episodes_done(&self) -> usize {
        self.episodes_done
    }

    pub fn finished(&self) -> bool {
        self.episodes_done >= self.cfg.episodes
    }

    /// Environment steps spent on training episodes.
    pub fn env_steps(&self) -> u64 {
        self.env_steps
    }

    /// Steps spent re-running the lower policy for the staleness diagnostic.
    pub fn diagnostic_steps(&self) -> u64 {
        self.diagnostic_steps
    }

    pub fn calls(&self) -> CallCounts {
        self.calls
    }

    /// Phases of the most recent cycle, in execution order.
    pub fn phase_log(&self) -> &[Phase] {
        &self.phase_log
    }

    /// Total gradient updates applied across levels.
    pub fn gradient_steps(&self) -> u64 {
        self.lower.gradient_steps() + self.higher.as_ref().map_or(0, SacAgent::gradient_steps)
    }

    /// Networks in checkpoint order.
    pub fn agents(&self) -> Vec<(&'static str, &SacAgent)> {
        match &self.higher {
            Some(h) => vec![("higher", h), ("lower", &self.lower)],
            None => vec![("flat", &self.lower)],
        }
    }

    pub fn agents_mut(&mut self) -> Vec<(&'static str, &mut SacAgent)> {
        match &mut self.higher {
            Some(h) => vec![("higher", h), ("lower", &mut self.lower)],
            None => vec![("flat", &mut self.lower)],
        }
    }

    /// Deterministic policy for evaluation.
    pub fn controller(&self) -> Box<dyn Controller + '_> {
        match &self.higher {
            Some(h) => Box::new(HierarchicalController::new(
                h,
                &self.lower,
                self.spaces.clone(),
                self.cfg.k,
            )),
            None => Box::new(FlatController::new(
                &self.lower,
                self.spaces.clone(),
                self.params.goal,
            )),
        }
    }

    fn bc_weight(&self) -> f64 {
        let half = self.cfg.episodes as f64 / 2.0;
        self.cfg.bc_weight * (1.0 - self.episodes_done as f64 / half).max(0.0)
    }

    /// One collection cycle followed by the gradient steps of both levels.
    pub fn run_cycle(&mut self) -> Result<CycleMetrics> {
        if self.finished() {
            return Err(Error::State(format!(
                "all {} episodes are done",
                self.cfg.episodes
            )));
        }
        self.phase_log.clear();

        self.phase_log.push(Phase::Collect);
        let episode = match &self.higher {
            Some(h) => collect_episode(
                &mut self.env,
                h,
                &self.lower,
                &self.cfg,
                &mut self.rng.collect,
            )?,
            None => collect_flat_episode(
                &mut self.env,
                &self.lower,
                &self.params,
                &self.cfg,
                &mut self.rng.collect,
            )?,
        };
        self.env_steps += episode.lower.len() as u64;
        self.episodes_done += 1;

        self.phase_log.push(Phase::Push);
        self.push_episode(&episode)?;

        if self.cfg.mode.relabels_language() {
            self.phase_log.push(Phase::Relabel);
            self.relabel_phase()?;
        }

        let ready = self.lower_buf.len() >= self.cfg.batch_size
            && (self.higher.is_none() || self.higher_buf.len() >= self.cfg.batch_size);
        let (mut lower_losses, mut higher_losses) = (None, None);
        if ready {
            self.phase_log.push(Phase::Sample);
            let batches = self.sample_phase()?;
            self.phase_log.push(Phase::Gradient);
            (lower_losses, higher_losses) = self.gradient_phase(batches)?;
        }

        Ok(CycleMetrics {
            cycle: self.episodes_done,
            env_steps: self.env_steps,
            train_success: episode.success,
            lower: lower_losses,
            higher: higher_losses,
            lower_buffer: self.lower_buf.len(),
            higher_buffer: self.higher_buf.len(),
            hindsight_trajectories: self.higher_buf.hindsight_count(),
        })
    }

    fn push_episode(&mut self, episode: &Episode) -> Result<()> {
        for t in &episode.lower {
            self.lower.obs_norm.update(&t.s.to_obs());
            self.lower.goal_norm.update(&t.g);
            self.lower.goal_norm.update(&t.s_next.achieved());
        }
        match &self.higher {
            // Each subgoal window is its own lower-level episode, so hindsight
            // goals stay reachable within `k` steps.
            Some(_) => {
                for window in episode.lower.chunks(self.cfg.k) {
                    self.lower_buf.push_episode(window)?;
                }
            }
            None => self.lower_buf.push_episode(&episode.lower)?,
        }
        if let Some(h) = &mut self.higher {
            for t in &episode.higher.transitions {
                h.obs_norm.update(&t.s.to_obs());
                h.goal_norm.update(&t.g_star);
                h.goal_norm.update(&t.s_next.achieved());
            }
            self.higher_buf.push_higher(&episode.higher)?;
        }
        Ok(())
    }

    /// Draws `relabel_m` stored trajectories, relabels them with the
    /// language reward and, in full mode, appends hindsight copies.
    fn relabel_phase(&mut self) -> Result<()> {
        let sampled = self
            .higher_buf
            .sample_trajectories(self.cfg.relabel_m, &mut self.rng.sample)?;
        for sigma in sampled {
            let relabeled =
                HigherTrajectory::new(relabel_language(&sigma.transitions, &self.params)?);
            self.calls.relabel_language += 1;
            if self.cfg.mode == Mode::Lgr2 {
                let copies = her_relabel(
                    &relabeled,
                    &self.params,
                    self.cfg.her_strategy,
                    self.cfg.her_count,
                    &mut self.rng.sample,
                )?;
                self.calls.her_relabel += 1;
                for c in &copies {
                    self.higher_buf.push_hindsight(c)?;
                }
            }
        }
        Ok(())
    }

    fn sample_higher(&mut self) -> Result<Vec<SubgoalTransition>> {
        let mut batch = self
            .higher_buf
            .sample_batch(self.cfg.batch_size, &mut self.rng.sample)?;
        match self.cfg.mode {
            Mode::Lgr2 | Mode::Lgr2NoHer => {
                let fresh: Vec<SubgoalTransition> =
                    batch.iter().filter(|t| !t.relabeled).cloned().collect();
                if !fresh.is_empty() {
                    let mut relabeled = relabel_language(&fresh, &self.params)?.into_iter();
                    self.calls.relabel_language += 1;
                    self.calls.higher_reward_mutations += fresh.len() as u64;
                    for t in batch.iter_mut().filter(|t| !t.relabeled) {
                        *t = relabeled
                            .next()
                            .expect("one relabeled copy per fresh transition");
                    }
                }
            }
            Mode::Hac => {
                for t in &mut batch {
                    *t = hac_relabel(t, &self.env);
                }
                self.calls.hac_relabel += batch.len() as u64;
                self.calls.higher_reward_mutations += batch.len() as u64;
            }
            Mode::Hier | Mode::FlatL2r => {}
        }
        Ok(batch)
    }

    fn sample_demo(&mut self) -> Option<(Matrix, Matrix, Matrix)> {
        let set = self.demos.as_ref()?;
        let n = self.cfg.batch_size;
        let (od, ad) = (self.env.obs_dim(), self.spaces.lower_dim());
        let (mut obs, mut goal, mut act) = (Vec::new(), Vec::new(), Vec::new());
        for _ in 0..n {
            let i = self.rng.sample.random_range(0..set.rows);
            obs.extend_from_slice(&set.obs[i * od..(i + 1) * od]);
            goal.extend_from_slice(&set.goal[i * 3..(i + 1) * 3]);
            act.extend_from_slice(&set.action[i * ad..(i + 1) * ad]);
        }
        Some((stack(n, od, obs), stack(n, 3, goal), stack(n, ad, act)))
    }

    fn sample_phase(&mut self) -> Result<Vec<CycleBatch>> {
        let mut out = Vec::with_capacity(self.cfg.n_batches);
        for _ in 0..self.cfg.n_batches {
            let lower = match self.higher {
                Some(_) => self.lower_buf.sample_her(
                    self.cfg.batch_size,
                    self.cfg.lower_her_p,
                    &self.env,
                    &mut self.rng.sample,
                )?,
                None => self
                    .lower_buf
                    .sample_batch(self.cfg.batch_size, &mut self.rng.sample)?,
            };
            let higher = match self.higher {
                Some(_) => {
                    let ts = self.sample_higher()?;
                    Some(higher_batch(&self.spaces, &ts))
                }
                None => None,
            };
            out.push(CycleBatch {
                lower: lower_batch(&self.spaces, &lower),
                higher,
                demo: self.sample_demo(),
            });
        }
        Ok(out)
    }

    fn gradient_phase(
        &mut self,
        batches: Vec<CycleBatch>,
    ) -> Result<(Option<LevelLosses>, Option<LevelLosses>)> {
        let n = batches.len() as f64;
        let bc_weight = self.bc_weight();
        let mut lower = LevelLosses::default();
        let mut higher = LevelLosses::default();
        for b in &batches {
            lower.critic += self.lower.update_critics(&b.lower, &mut self.rng.grad)? / n;
            let bc = b.demo.as_ref().map(|(o, g, a)| (o, g, a, bc_weight));
            lower.actor += self.lower.update_actor(&b.lower, bc, &mut self.rng.grad)? / n;
            if let (Some(h), Some(hb)) = (&mut self.higher, &b.higher) {
                higher.critic += h.update_critics(hb, &mut self.rng.grad)? / n;
                higher.actor += h.update_actor(hb, None, &mut self.rng.grad)? / n;
            }
        }
        self.lower.polyak_update();
        if let Some(h) = &mut self.higher {
            h.polyak_update();
        }
        if !self.lower.is_finite() || !self.higher.as_ref().is_none_or(SacAgent::is_finite) {
            return Err(Error::Training("non-finite network parameters".into()));
        }
        Ok((Some(lower), self.higher.as_ref().map(|_| higher)))
    }

    /// Measures how far stored higher rewards drift from what the current
    /// lower policy would earn. Uses its own random stream and does not
    /// count toward the training budget.
    pub fn staleness(&mut self, samples: usize) -> Result<Staleness> {
        if self.higher.is_none() || self.higher_buf.is_empty() {
            return Ok(Staleness {
                vanilla: 0.0,
                relabeled: 0.0,
                samples: 0,
            });
        }
        let batch = self.higher_buf.sample_batch(samples, &mut self.rng.diag)?;
        let vanilla: Vec<SubgoalTransition> = batch.into_iter().filter(|t| !t.relabeled).collect();
        let relabeled = relabel_language(&vanilla, &self.params)?;
        let policy = LowerPolicy::new(&self.lower, self.spaces.clone());
        let stale = staleness_diagnostic(&vanilla, &self.params, &policy, &self.env)?;
        let fresh = staleness_diagnostic(&relabeled, &self.params, &policy, &self.env)?;
        self.diagnostic_steps += vanilla.iter().map(|t| t.steps as u64).sum::<u64>();
        Ok(Staleness {
            vanilla: stale,
            relabeled: fresh,
            samples: vanilla.len(),
        })
    }

    /// Start state of an evaluation episode.
    pub fn eval_reset(&mut self, seed: u64) -> EnvState {
        self.env.reset_keep_goal(seed)
    }

    pub fn goal(&self) -> Goal {
        self.env.goal()
    }
}

struct CycleBatch {
    lower: SacBatch,
    higher: Option<SacBatch>,
    demo: Option<(Matrix, Matrix, Matrix)>,
}
