use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::mlp::{Matrix, Mlp, MlpGrads};
use super::normalizer::Normalizer;
use crate::error::{Error, Result};

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SacConfig {
    pub hidden: usize,
    pub hidden_layers: usize,
    pub lr: f64,
    pub alpha: f64,
    pub gamma: f64,
    /// Weight retained by the target network at each polyak update.
    pub tau: f64,
    /// Output-layer init scale for all networks.
    pub out_scale: f64,
}

impl Default for SacConfig {
    fn default() -> Self {
        SacConfig {
            hidden: 512,
            hidden_layers: 3,
            lr: 1e-3,
            alpha: 0.05,
            gamma: 0.99,
            tau: 0.8,
            out_scale: 1.0,
        }
    }
}

/// Per-dimension box the unit action `(-1, 1)^d` is mapped onto.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionBox {
    pub low: Vec<f64>,
    pub high: Vec<f64>,
}

impl ActionBox {
    pub fn new(low: Vec<f64>, high: Vec<f64>) -> Self {
        assert_eq!(low.len(), high.len(), "action box bounds");
        ActionBox { low, high }
    }

    pub fn dim(&self) -> usize {
        self.low.len()
    }

    pub fn from_unit(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .enumerate()
            .map(|(i, &v)| {
                let a = self.low[i] + (v + 1.0) * 0.5 * (self.high[i] - self.low[i]);
                a.clamp(self.low[i], self.high[i])
            })
            .collect()
    }

    pub fn to_unit(&self, a: &[f64]) -> Vec<f64> {
        a.iter()
            .enumerate()
            .map(|(i, &v)| {
                (2.0 * (v - self.low[i]) / (self.high[i] - self.low[i]) - 1.0).clamp(-1.0, 1.0)
            })
            .collect()
    }
}

/// Training batch; actions are in unit space.
#[derive(Debug, Clone, PartialEq)]
pub struct SacBatch {
    pub obs: Matrix,
    pub goal: Matrix,
    pub action: Matrix,
    pub reward: Vec<f64>,
    pub next_obs: Matrix,
    /// 1 where bootstrapping stops.
    pub done: Vec<f64>,
}

impl SacBatch {
    pub fn len(&self) -> usize {
        self.reward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reward.is_empty()
    }
}

/// Behaviour-cloning term on demonstration states (unit-space actions).
#[derive(Debug, Clone)]
pub struct BcTerm<'a> {
    pub input: &'a Matrix,
    pub action: &'a Matrix,
    pub weight: f64,
}

/// Squashed-Gaussian samples for actor output `out` and standard normal noise `eps`.
pub struct SquashedSample {
    pub u: Matrix,
    pub log_prob: Vec<f64>,
    /// Clamped log-std and the clamp mask, kept for the backward pass.
    log_std: Matrix,
    inside: Vec<bool>,
}

/// `log(1 - tanh(x)^2)` without cancellation.
pub fn log1m_tanh_sq(x: f64) -> f64 {
    2.0 * (std::f64::consts::LN_2 - x - softplus(-2.0 * x))
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

pub fn squash(out: &Matrix, eps: &Matrix) -> SquashedSample {
    let d = out.cols / 2;
    assert_eq!(eps.cols, d, "noise width");
    let n = out.rows;
    let mut u = Matrix::zeros(n, d);
    let mut log_std = Matrix::zeros(n, d);
    let mut inside = vec![true; n * d];
    let mut log_prob = vec![0.0; n];
    for r in 0..n {
        let row = out.row(r);
        for j in 0..d {
            let raw = row[d + j];
            let ls = raw.clamp(LOG_STD_MIN, LOG_STD_MAX);
            inside[r * d + j] = raw > LOG_STD_MIN && raw < LOG_STD_MAX;
            let e = eps.get(r, j);
            let x = row[j] + ls.exp() * e;
            u.row_mut(r)[j] = x.tanh();
            log_std.row_mut(r)[j] = ls;
            log_prob[r] += -0.5 * e * e - ls - HALF_LN_2PI - log1m_tanh_sq(x);
        }
    }
    SquashedSample {
        u,
        log_prob,
        log_std,
        inside,
    }
}

/// Critic loss `mean((Q(x) - y)^2)` and its parameter gradient.
pub fn critic_loss_grad(critic: &Mlp, input: &Matrix, target: &[f64]) -> (f64, MlpGrads) {
    let n = input.rows as f64;
    let (q, cache) = critic.forward_cached(input);
    let mut dy = Matrix::zeros(input.rows, 1);
    let mut loss = 0.0;
    for (i, y) in target.iter().enumerate() {
        let diff = q.data[i] - y;
        loss += diff * diff / n;
        dy.data[i] = 2.0 * diff / n;
    }
    let mut grads = MlpGrads::zeros_like(critic);
    critic.backward(&cache, &dy, Some(&mut grads), false);
    (loss, grads)
}

/// Actor loss `mean(alpha * log pi(u|x) - min(Q1, Q2)(x, u))` under the
/// reparameterized sample `u = tanh(mu + sigma * eps)`, plus an optional
/// behaviour-cloning term `weight * mean ||tanh(mu_demo) - a_demo||^2`.
pub fn actor_loss_grad(
    actor: &Mlp,
    critics: [&Mlp; 2],
    input: &Matrix,
    eps: &Matrix,
    alpha: f64,
    bc: Option<&BcTerm>,
) -> (f64, MlpGrads) {
    let n = input.rows;
    let nf = n as f64;
    let d = actor.output_dim() / 2;
    let (out, cache) = actor.forward_cached(input);
    let s = squash(&out, eps);
    let critic_in = Matrix::hcat(&[input, &s.u]);
    let (q1, c1) = critics[0].forward_cached(&critic_in);
    let (q2, c2) = critics[1].forward_cached(&critic_in);

    let mut loss = 0.0;
    let mut dq1 = Matrix::zeros(n, 1);
    let mut dq2 = Matrix::zeros(n, 1);
    for i in 0..n {
        let first = q1.data[i] <= q2.data[i];
        let q = if first { q1.data[i] } else { q2.data[i] };
        loss += (alpha * s.log_prob[i] - q) / nf;
        if first {
            dq1.data[i] = -1.0 / nf;
        } else {
            dq2.data[i] = -1.0 / nf;
        }
    }
    let dx1 = critics[0]
        .backward(&c1, &dq1, None, true)
        .expect("input gradient");
    let dx2 = critics[1]
        .backward(&c2, &dq2, None, true)
        .expect("input gradient");
    let off = input.cols;

    let mut dout = Matrix::zeros(n, 2 * d);
    for i in 0..n {
        for j in 0..d {
            let u = s.u.get(i, j);
            let sigma = s.log_std.get(i, j).exp();
            let e = eps.get(i, j);
            let gu = dx1.get(i, off + j) + dx2.get(i, off + j);
            let dx = alpha * 2.0 * u / nf + gu * (1.0 - u * u);
            dout.row_mut(i)[j] = dx;
            if s.inside[i * d + j] {
                dout.row_mut(i)[d + j] = -alpha / nf + dx * sigma * e;
            }
        }
    }
    let mut grads = MlpGrads::zeros_like(actor);
    actor.backward(&cache, &dout, Some(&mut grads), false);

    if let Some(bc) = bc {
        let m = bc.input.rows;
        let (out, cache) = actor.forward_cached(bc.input);
        let mut dout = Matrix::zeros(m, 2 * d);
        for i in 0..m {
            for j in 0..d {
                let a = out.get(i, j).tanh();
                let diff = a - bc.action.get(i, j);
                loss += bc.weight * diff * diff / m as f64;
                dout.row_mut(i)[j] = bc.weight * 2.0 * diff * (1.0 - a * a) / m as f64;
            }
        }
        actor.backward(&cache, &dout, Some(&mut grads), false);
    }
    (loss, grads)
}

/// Soft actor-critic agent with twin critics, fixed temperature and
/// separate observation / goal normalizers.
#[derive(Debug, Clone)]
pub struct SacAgent {
    pub cfg: SacConfig,
    pub obs_dim: usize,
    pub goal_dim: usize,
    pub action_box: ActionBox,
    pub actor: Mlp,
    pub critic1: Mlp,
    pub critic2: Mlp,
    pub target1: Mlp,
    pub target2: Mlp,
    pub(crate) actor_opt: Adam,
    pub(crate) critic1_opt: Adam,
    pub(crate) critic2_opt: Adam,
    pub obs_norm: Normalizer,
    pub goal_norm: Normalizer,
    /// Lower and upper bound applied to critic targets.
    pub target_clip: Option<(f64, f64)>,
    gradient_steps: u64,
}

impl SacAgent {
    pub fn new<R: Rng + ?Sized>(
        cfg: &SacConfig,
        obs_dim: usize,
        goal_dim: usize,
        action_box: ActionBox,
        rng: &mut R,
    ) -> Self {
        let d = action_box.dim();
        let hidden = vec![cfg.hidden; cfg.hidden_layers];
        let sizes = |inp: usize, out: usize| {
            let mut s = vec![inp];
            s.extend(&hidden);
            s.push(out);
            s
        };
        let actor = Mlp::new(&sizes(obs_dim + goal_dim, 2 * d), cfg.out_scale, rng);
        let critic1 = Mlp::new(&sizes(obs_dim + goal_dim + d, 1), cfg.out_scale, rng);
        let critic2 = Mlp::new(&sizes(obs_dim + goal_dim + d, 1), cfg.out_scale, rng);
        SacAgent {
            cfg: cfg.clone(),
            obs_dim,
            goal_dim,
            actor_opt: Adam::new(&actor, cfg.lr),
            critic1_opt: Adam::new(&critic1, cfg.lr),
            critic2_opt: Adam::new(&critic2, cfg.lr),
            target1: critic1.clone(),
            target2: critic2.clone(),
            actor,
            critic1,
            critic2,
            action_box,
            obs_norm: Normalizer::new(obs_dim),
            goal_norm: Normalizer::new(goal_dim),
            target_clip: None,
            gradient_steps: 0,
        }
    }

    pub fn act_dim(&self) -> usize {
        self.action_box.dim()
    }

    /// Number of critic and actor updates applied so far.
    pub fn gradient_steps(&self) -> u64 {
        self.gradient_steps
    }

    /// Normalized `[obs, goal]` rows.
    pub fn policy_input(&self, obs: &Matrix, goal: &Matrix) -> Matrix {
        let n = obs.rows;
        let width = self.obs_dim + self.goal_dim;
        let mut x = Matrix::zeros(n, width);
        for r in 0..n {
            let row = x.row_mut(r);
            self.obs_norm
                .normalize_into(obs.row(r), &mut row[..self.obs_dim]);
            self.goal_norm
                .normalize_into(goal.row(r), &mut row[self.obs_dim..]);
        }
        x
    }

    fn check_input(&self, obs: &[f64], goal: &[f64]) -> Result<()> {
        if obs.len() != self.obs_dim || goal.len() != self.goal_dim {
            return Err(Error::input(format!(
                "policy input ({}, {}) does not match ({}, {})",
                obs.len(),
                goal.len(),
                self.obs_dim,
                self.goal_dim
            )));
        }
        if obs.iter().chain(goal).any(|v| !v.is_finite()) {
            return Err(Error::input("non-finite policy input"));
        }
        Ok(())
    }

    /// Box action and its log-density. Without `noise` the mean action is
    /// returned (log-density evaluated at zero noise).
    pub fn forward_actor(
        &self,
        obs: &[f64],
        goal: &[f64],
        noise: Option<&[f64]>,
    ) -> Result<(Vec<f64>, f64)> {
        self.check_input(obs, goal)?;
        let d = self.act_dim();
        let x = self.policy_input(
            &Matrix::from_vec(1, self.obs_dim, obs.to_vec()),
            &Matrix::from_vec(1, self.goal_dim, goal.to_vec()),
        );
        let eps = Matrix::from_vec(1, d, noise.map_or_else(|| vec![0.0; d], <[f64]>::to_vec));
        let s = squash(&self.actor.forward(&x), &eps);
        Ok((self.action_box.from_unit(s.u.row(0)), s.log_prob[0]))
    }

    /// Mean action mapped to the box.
    pub fn act(&self, obs: &[f64], goal: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_actor(obs, goal, None)?.0)
    }

    /// With probability `random_eps` a uniform box action; otherwise the mean
    /// action plus Gaussian noise of std `noise_eps * range`, clipped to the box.
    pub fn explore_action<R: Rng + ?Sized>(
        &self,
        obs: &[f64],
        goal: &[f64],
        random_eps: f64,
        noise_eps: f64,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        let b = &self.action_box;
        if random_eps > 0.0 && rng.random::<f64>() < random_eps {
            return Ok((0..b.dim())
                .map(|i| b.low[i] + rng.random::<f64>() * (b.high[i] - b.low[i]))
                .collect());
        }
        let mut a = self.act(obs, goal)?;
        if noise_eps > 0.0 {
            for (i, v) in a.iter_mut().enumerate() {
                let range = b.high[i] - b.low[i];
                let z: f64 = rng.sample(StandardNormal);
                *v = (*v + noise_eps * range * z).clamp(b.low[i], b.high[i]);
            }
        }
        Ok(a)
    }

    fn noise<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Matrix {
        let d = self.act_dim();
        Matrix::from_vec(
            n,
            d,
            (0..n * d).map(|_| rng.sample(StandardNormal)).collect(),
        )
    }

    /// Bellman targets `r + gamma (1 - done) (min Q'(s', a') - alpha log pi(a'|s'))`.
    pub fn critic_targets<R: Rng + ?Sized>(&self, batch: &SacBatch, rng: &mut R) -> Vec<f64> {
        let n = batch.len();
        let next_in = self.policy_input(&batch.next_obs, &batch.goal);
        let s = squash(&self.actor.forward(&next_in), &self.noise(n, rng));
        let critic_in = Matrix::hcat(&[&next_in, &s.u]);
        let q1 = self.target1.forward(&critic_in);
        let q2 = self.target2.forward(&critic_in);
        (0..n)
            .map(|i| {
                let v = q1.data[i].min(q2.data[i]) - self.cfg.alpha * s.log_prob[i];
                let y = batch.reward[i] + self.cfg.gamma * (1.0 - batch.done[i]) * v;
                match self.target_clip {
                    Some((lo, hi)) => y.clamp(lo, hi),
                    None => y,
                }
            })
            .collect()
    }

    /// One Adam step on both critics; returns the summed loss.
    pub fn update_critics<R: Rng + ?Sized>(
        &mut self,
        batch: &SacBatch,
        rng: &mut R,
    ) -> Result<f64> {
        if batch.reward.iter().any(|r| !r.is_finite()) {
            return Err(Error::Training("non-finite reward in critic batch".into()));
        }
        let y = self.critic_targets(batch, rng);
        let x = self.policy_input(&batch.obs, &batch.goal);
        let input = Matrix::hcat(&[&x, &batch.action]);
        let (l1, g1) = critic_loss_grad(&self.critic1, &input, &y);
        let (l2, g2) = critic_loss_grad(&self.critic2, &input, &y);
        let loss = l1 + l2;
        if !loss.is_finite() {
            return Err(Error::Training(format!("critic loss is {loss}")));
        }
        self.critic1_opt.step(&mut self.critic1, &g1);
        self.critic2_opt.step(&mut self.critic2, &g2);
        self.gradient_steps += 1;
        Ok(loss)
    }

    /// One Adam step on the actor; `bc` adds the imitation term.
    pub fn update_actor<R: Rng + ?Sized>(
        &mut self,
        batch: &SacBatch,
        bc: Option<(&Matrix, &Matrix, &Matrix, f64)>,
        rng: &mut R,
    ) -> Result<f64> {
        let x = self.policy_input(&batch.obs, &batch.goal);
        let eps = self.noise(batch.len(), rng);
        let bc_input;
        let term = match bc {
            Some((obs, goal, action, weight)) if weight > 0.0 => {
                bc_input = self.policy_input(obs, goal);
                Some(BcTerm {
                    input: &bc_input,
                    action,
                    weight,
                })
            }
            _ => None,
        };
        let (loss, grads) = actor_loss_grad(
            &self.actor,
            [&self.critic1, &self.critic2],
            &x,
            &eps,
            self.cfg.alpha,
            term.as_ref(),
        );
        if !loss.is_finite() {
            return Err(Error::Training(format!("actor loss is {loss}")));
        }
        self.actor_opt.step(&mut self.actor, &grads);
        Ok(loss)
    }

    /// `target <- tau * target + (1 - tau) * online`.
    pub fn polyak_update(&mut self) {
        let tau = self.cfg.tau;
        polyak(&mut self.target1, &self.critic1, tau);
        polyak(&mut self.target2, &self.critic2, tau);
    }

    pub fn is_finite(&self) -> bool {
        [
            &self.actor,
            &self.critic1,
            &self.critic2,
            &self.target1,
            &self.target2,
        ]
        .iter()
        .all(|n| n.is_finite())
    }
}

pub fn polyak(target: &mut Mlp, online: &Mlp, tau: f64) {
    for (t, o) in target.tensors_mut().into_iter().zip(online.tensors()) {
        for (a, b) in t.iter_mut().zip(o) {
            *a = tau * *a + (1.0 - tau) * b;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_cfg() -> SacConfig {
        SacConfig {
            hidden: 8,
            ..SacConfig::default()
        }
    }

    fn unit_box(d: usize) -> ActionBox {
        ActionBox::new(vec![0.0; d], vec![1.0; d])
    }

    #[test]
    fn zero_network_acts_at_box_center() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut agent = SacAgent::new(&small_cfg(), 3, 3, unit_box(2), &mut rng);
        agent.actor = Mlp::zeros(&[6, 8, 8, 8, 4]);
        let (a, _) = agent
            .forward_actor(&[1.0, 2.0, 3.0], &[0.0; 3], None)
            .unwrap();
        assert_eq!(a, vec![0.5, 0.5]);
    }

    #[test]
    fn non_finite_obs_is_input_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let agent = SacAgent::new(&small_cfg(), 3, 3, unit_box(2), &mut rng);
        let err = agent
            .forward_actor(&[f64::NAN, 0.0, 0.0], &[0.0; 3], None)
            .unwrap_err();
        assert!(matches!(err, Error::Input(_)));
    }

    #[test]
    fn log_prob_matches_density_recomputation() {
        let out = Matrix::from_vec(1, 2, vec![0.3, -0.7]);
        let eps = Matrix::from_vec(1, 1, vec![0.9]);
        let s = squash(&out, &eps);
        let sigma = (-0.7f64).exp();
        let x = 0.3 + sigma * 0.9;
        let u = x.tanh();
        let gauss = (-(0.9f64 * 0.9) / 2.0).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt());
        let want = (gauss / (1.0 - u * u)).ln();
        assert!((s.log_prob[0] - want).abs() < 1e-9);
    }

    #[test]
    fn squashed_density_integrates_to_one() {
        let (mu, ls): (f64, f64) = (0.4, -0.3);
        let sigma = ls.exp();
        let steps = 200_000;
        let h = 2.0 / steps as f64;
        let mut total = 0.0;
        for k in 0..steps {
            let u: f64 = -1.0 + (k as f64 + 0.5) * h;
            let e = (u.atanh() - mu) / sigma;
            let s = squash(
                &Matrix::from_vec(1, 2, vec![mu, ls]),
                &Matrix::from_vec(1, 1, vec![e]),
            );
            total += s.log_prob[0].exp() * h;
        }
        assert!((total - 1.0).abs() <= 1e-3, "{total}");
    }

    #[test]
    fn polyak_semantics() {
        let mut t = Mlp::zeros(&[2, 2]);
        let mut o = Mlp::zeros(&[2, 2]);
        for v in o.tensors_mut() {
            v.fill(1.0);
        }
        polyak(&mut t, &o, 0.8);
        assert!(t
            .tensors()
            .iter()
            .all(|x| x.iter().all(|v| (v - 0.2).abs() < 1e-15)));
        polyak(&mut t, &o, 0.0);
        assert_eq!(t, o);
        let before = t.clone();
        polyak(&mut t, &o, 0.8);
        assert_eq!(t, before);
    }

    #[test]
    fn explore_without_noise_is_mean_action() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let agent = SacAgent::new(&small_cfg(), 3, 3, unit_box(2), &mut rng);
        let obs = [0.1, 0.2, 0.3];
        let a = agent
            .explore_action(&obs, &[0.0; 3], 0.0, 0.0, &mut rng)
            .unwrap();
        assert_eq!(a, agent.act(&obs, &[0.0; 3]).unwrap());
        for _ in 0..200 {
            let a = agent
                .explore_action(&obs, &[0.0; 3], 0.2, 0.5, &mut rng)
                .unwrap();
            assert!(a.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn constant_critic_actor_loss() {
        // Zero-weight critics with bias c: loss = alpha * mean(log pi) - c.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let actor = Mlp::new(&[3, 5, 5, 4], 1.0, &mut rng);
        let mut critic = Mlp::zeros(&[5, 4, 1]);
        critic.layers[1].b[0] = 1.5;
        let x = Matrix::from_vec(2, 3, vec![0.1, -0.2, 0.3, 0.5, 0.0, -0.4]);
        let eps = Matrix::from_vec(2, 2, vec![0.3, -1.1, 0.7, 0.2]);
        let (loss, _) = actor_loss_grad(&actor, [&critic, &critic], &x, &eps, 0.05, None);
        let s = squash(&actor.forward(&x), &eps);
        let want = 0.05 * (s.log_prob[0] + s.log_prob[1]) / 2.0 - 1.5;
        assert!((loss - want).abs() < 1e-6);
    }

    #[test]
    fn entropy_rises_under_constant_critics() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut agent = SacAgent::new(&small_cfg(), 2, 1, unit_box(1), &mut rng);
        agent.critic1 = Mlp::zeros(&[4, 8, 8, 8, 1]);
        agent.critic2 = Mlp::zeros(&[4, 8, 8, 8, 1]);
        let n = 64;
        let batch = SacBatch {
            obs: Matrix::from_vec(n, 2, (0..2 * n).map(|i| (i as f64 * 0.1).sin()).collect()),
            goal: Matrix::zeros(n, 1),
            action: Matrix::zeros(n, 1),
            reward: vec![0.0; n],
            next_obs: Matrix::zeros(n, 2),
            done: vec![1.0; n],
        };
        let mut probe = ChaCha8Rng::seed_from_u64(100);
        let mean_logp = |agent: &SacAgent, rng: &mut ChaCha8Rng| {
            let x = agent.policy_input(&batch.obs, &batch.goal);
            let s = squash(&agent.actor.forward(&x), &agent.noise(n, rng));
            s.log_prob.iter().sum::<f64>() / n as f64
        };
        let before = mean_logp(&agent, &mut probe.clone());
        for _ in 0..50 {
            agent.update_actor(&batch, None, &mut rng).unwrap();
        }
        let after = mean_logp(&agent, &mut probe);
        assert!(after < before, "entropy did not rise: {before} -> {after}");
    }

    #[test]
    fn zero_critic_targets_are_entropy_bonus() {
        // Zero target critics, r = 0: y = gamma * (0 - alpha log pi(a'|s')).
        for gamma in [0.0, 1.0] {
            let mut rng = ChaCha8Rng::seed_from_u64(2);
            let mut agent = SacAgent::new(
                &SacConfig {
                    gamma,
                    ..small_cfg()
                },
                2,
                1,
                unit_box(1),
                &mut rng,
            );
            agent.target1 = Mlp::zeros(&[4, 8, 8, 8, 1]);
            agent.target2 = agent.target1.clone();
            let batch = SacBatch {
                obs: Matrix::zeros(3, 2),
                goal: Matrix::zeros(3, 1),
                action: Matrix::zeros(3, 1),
                reward: vec![0.0; 3],
                next_obs: Matrix::from_vec(3, 2, vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6]),
                done: vec![0.0; 3],
            };
            let mut replay = rng.clone();
            let y = agent.critic_targets(&batch, &mut rng);
            let x = agent.policy_input(&batch.next_obs, &batch.goal);
            let s = squash(&agent.actor.forward(&x), &agent.noise(3, &mut replay));
            for i in 0..3 {
                assert_eq!(y[i], gamma * (0.0 - 0.05 * s.log_prob[i]));
            }
        }
    }
}
