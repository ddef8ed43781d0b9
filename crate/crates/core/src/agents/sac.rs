//! Soft actor-critic: twin Q-networks, a tanh-squashed Gaussian policy
//! trained by reparameterization, and a temperature tuned toward a target
//! entropy. Targets and the policy objective both take the minimum of the
//! two critics.

use std::io;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::config::AgentConfig;
use crate::nn::{checkpoint, clip_global_norm, soft_update, Adam, Mlp, OutputActivation};

use super::buffer::Transition;
use super::ddpg::{add, join, sized};
use super::{TargetNorm, GRAD_CLIP};

const LOG_STD_MIN: f64 = -20.0;
const LOG_STD_MAX: f64 = 2.0;
/// Keeps the tanh-correction log finite at the squash boundary.
const SQUASH_EPS: f64 = 1e-6;
/// Temperature bounds. Adam walks log-alpha at a near-constant pace, so
/// thousands of updates spent on one side of the entropy target would
/// otherwise push alpha far enough that the entropy bonus drowns the
/// return and the policy degenerates to noise.
const LOG_ALPHA_MIN: f64 = -13.8;
const LOG_ALPHA_MAX: f64 = -0.69;

#[derive(Debug, Clone, Copy, Default)]
pub struct SacStats {
    pub q1_loss: f64,
    pub q2_loss: f64,
    pub policy_loss: f64,
    pub alpha: f64,
    /// Monte-Carlo entropy estimate, -E[log pi].
    pub entropy: f64,
    pub mean_target: f64,
    /// First-sample trace of the target computation, for structural checks:
    /// both target critics, their minimum, next-action log-prob, reward
    /// after normalization, and the assembled target.
    pub trace_tq1: f64,
    pub trace_tq2: f64,
    pub trace_min: f64,
    pub trace_logpi_next: f64,
    pub trace_reward: f64,
    pub trace_target: f64,
    /// First-sample trace of the policy objective's critic pair.
    pub trace_q1_pi: f64,
    pub trace_q2_pi: f64,
    pub trace_min_pi: f64,
}

pub struct Sac {
    /// Outputs `[mu, raw log-std]`, split down the middle.
    policy: Mlp,
    q1: Mlp,
    q2: Mlp,
    tq1: Mlp,
    tq2: Mlp,
    opt_policy: Adam,
    opt_q1: Adam,
    opt_q2: Adam,
    log_alpha: f64,
    opt_alpha: Adam,
    /// When set, the temperature is pinned and never updated.
    alpha_frozen: Option<f64>,
    target_entropy: f64,
    gamma: f64,
    soft_tau: f64,
    obs_dim: usize,
    act_dim: usize,
}

impl Sac {
    pub fn new(obs_dim: usize, act_dim: usize, cfg: &AgentConfig, rng: &mut impl Rng) -> Self {
        let hidden = vec![cfg.hidden_width; cfg.hidden_layers];
        let mut policy = Mlp::new(obs_dim, &hidden, 2 * act_dim, OutputActivation::Identity, rng);
        policy.scale_final_layer(1e-3);
        let q1 = Mlp::new(obs_dim + act_dim, &hidden, 1, OutputActivation::Identity, rng);
        let q2 = Mlp::new(obs_dim + act_dim, &hidden, 1, OutputActivation::Identity, rng);
        let tq1 = q1.clone();
        let tq2 = q2.clone();
        Sac {
            opt_policy: Adam::new(policy.param_count()),
            opt_q1: Adam::new(q1.param_count()),
            opt_q2: Adam::new(q2.param_count()),
            policy,
            q1,
            q2,
            tq1,
            tq2,
            log_alpha: cfg.sac_init_temperature.ln(),
            opt_alpha: Adam::new(1),
            alpha_frozen: None,
            target_entropy: act_dim as f64 * cfg.sac_entropy_target_per_dim,
            gamma: cfg.gamma,
            soft_tau: cfg.soft_tau,
            obs_dim,
            act_dim,
        }
    }

    pub fn act_dim(&self) -> usize {
        self.act_dim
    }

    pub fn alpha(&self) -> f64 {
        self.alpha_frozen.unwrap_or_else(|| self.log_alpha.exp())
    }

    /// Pins the entropy temperature, disabling its automatic tuning.
    pub fn force_temperature(&mut self, alpha: f64) {
        assert!(alpha >= 0.0);
        self.alpha_frozen = Some(alpha);
    }

    /// Mean and clamped log-std of the Gaussian head at `obs`.
    pub fn gaussian_head(&self, obs: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let out = self.policy.forward(obs);
        let (mu, raw) = out.split_at(self.act_dim);
        let log_std = raw.iter().map(|&v| v.clamp(LOG_STD_MIN, LOG_STD_MAX)).collect();
        (mu.to_vec(), log_std)
    }

    pub fn act(&self, obs: &[f64], explore: bool, rng: &mut impl Rng) -> Vec<f64> {
        let (mu, log_std) = self.gaussian_head(obs);
        if explore {
            mu.iter()
                .zip(&log_std)
                .map(|(&m, &l)| {
                    let eps: f64 = StandardNormal.sample(rng);
                    (m + l.exp() * eps).tanh()
                })
                .collect()
        } else {
            mu.iter().map(|&m| m.tanh()).collect()
        }
    }

    /// Squashed sample with its log-density.
    fn sample(&self, obs: &[f64], rng: &mut impl Rng) -> (Vec<f64>, f64) {
        let out = self.policy.forward(obs);
        let (mu, raw) = out.split_at(self.act_dim);
        let mut a = Vec::with_capacity(self.act_dim);
        let mut log_pi = 0.0;
        for j in 0..self.act_dim {
            let l = raw[j].clamp(LOG_STD_MIN, LOG_STD_MAX);
            let sigma = l.exp();
            let eps: f64 = StandardNormal.sample(rng);
            let u = mu[j] + sigma * eps;
            let aj = u.tanh();
            // log N(u; mu, sigma) - log(1 - a^2 + eps)
            log_pi += -0.5 * eps * eps
                - l
                - 0.5 * (2.0 * std::f64::consts::PI).ln()
                - (1.0 - aj * aj + SQUASH_EPS).ln();
            a.push(aj);
        }
        (a, log_pi)
    }

    /// One gradient step on each critic, the policy, and the temperature,
    /// then EMA target refresh.
    pub fn update(
        &mut self,
        batch: &[&Transition],
        actor_lr: f64,
        critic_lr: f64,
        norm: &TargetNorm,
        rng: &mut impl Rng,
    ) -> SacStats {
        assert!(!batch.is_empty());
        let n = batch.len() as f64;
        let alpha = self.alpha();
        let mut stats = SacStats {
            alpha,
            ..SacStats::default()
        };

        // soft targets from fresh next-state samples
        let mut targets = Vec::with_capacity(batch.len());
        for (idx, t) in batch.iter().enumerate() {
            let r = norm.apply(t.reward);
            let y = if t.done {
                if idx == 0 {
                    stats.trace_reward = r;
                    stats.trace_target = r;
                }
                r
            } else {
                let (a2, log_pi2) = self.sample(&t.next_obs, rng);
                let sa2 = join(&t.next_obs, &a2);
                let v1 = self.tq1.forward(&sa2)[0];
                let v2 = self.tq2.forward(&sa2)[0];
                let v_min = v1.min(v2);
                let y = r + self.gamma * (v_min - alpha * log_pi2);
                if idx == 0 {
                    stats.trace_tq1 = v1;
                    stats.trace_tq2 = v2;
                    stats.trace_min = v_min;
                    stats.trace_logpi_next = log_pi2;
                    stats.trace_reward = r;
                    stats.trace_target = y;
                }
                y
            };
            targets.push(y);
        }
        stats.mean_target = targets.iter().sum::<f64>() / n;

        for (critic, opt, loss_out) in [
            (&mut self.q1, &mut self.opt_q1, &mut stats.q1_loss),
            (&mut self.q2, &mut self.opt_q2, &mut stats.q2_loss),
        ] {
            let mut grad = vec![0.0; critic.param_count()];
            for (t, &y) in batch.iter().zip(&targets) {
                let cache = critic.forward_cache(&join(&t.obs, &t.action));
                let err = cache.output()[0] - y;
                *loss_out += err * err / n;
                let (g, _) = critic.backward(&cache, &[2.0 * err / n]);
                add(&mut grad, &g);
            }
            clip_global_norm(&mut grad, GRAD_CLIP);
            opt.step(critic_lr, &mut critic.theta, &grad);
        }

        // policy: minimize alpha * log pi - min(Q1, Q2) along the
        // reparameterized sample
        let mut pol_grad = vec![0.0; self.policy.param_count()];
        let mut log_pi_acc = 0.0;
        for (idx, t) in batch.iter().enumerate() {
            let cache = self.policy.forward_cache(&t.obs);
            let out = cache.output();
            let (mu, raw) = out.split_at(self.act_dim);
            let mut a = vec![0.0; self.act_dim];
            let mut sigma = vec![0.0; self.act_dim];
            let mut eps = vec![0.0; self.act_dim];
            let mut in_range = vec![false; self.act_dim];
            let mut log_pi = 0.0;
            for j in 0..self.act_dim {
                let l = raw[j].clamp(LOG_STD_MIN, LOG_STD_MAX);
                in_range[j] = (LOG_STD_MIN..LOG_STD_MAX).contains(&raw[j]);
                sigma[j] = l.exp();
                eps[j] = StandardNormal.sample(rng);
                let u = mu[j] + sigma[j] * eps[j];
                a[j] = u.tanh();
                log_pi += -0.5 * eps[j] * eps[j]
                    - l
                    - 0.5 * (2.0 * std::f64::consts::PI).ln()
                    - (1.0 - a[j] * a[j] + SQUASH_EPS).ln();
            }
            log_pi_acc += log_pi;

            let sa = join(&t.obs, &a);
            let c1 = self.q1.forward_cache(&sa);
            let c2 = self.q2.forward_cache(&sa);
            let (q1v, q2v) = (c1.output()[0], c2.output()[0]);
            let q_min = q1v.min(q2v);
            if idx == 0 {
                stats.trace_q1_pi = q1v;
                stats.trace_q2_pi = q2v;
                stats.trace_min_pi = q_min;
            }
            stats.policy_loss += (alpha * log_pi - q_min) / n;
            let (_, dq_din) = if q1v <= q2v {
                self.q1.backward(&c1, &[1.0])
            } else {
                self.q2.backward(&c2, &[1.0])
            };
            let dq_da = &dq_din[self.obs_dim..];

            let mut d_out = vec![0.0; 2 * self.act_dim];
            for j in 0..self.act_dim {
                let tj = 1.0 - a[j] * a[j];
                let denom = tj + SQUASH_EPS;
                let dlogpi_du = 2.0 * a[j] * tj / denom;
                // d(alpha logpi - q)/du through squash and density
                let dl_du = alpha * dlogpi_du - dq_da[j] * tj;
                d_out[j] = dl_du / n;
                if in_range[j] {
                    // log-std path: u moves by sigma*eps, density adds -1
                    d_out[self.act_dim + j] = (-alpha + dl_du * sigma[j] * eps[j]) / n;
                }
            }
            let (g, _) = self.policy.backward(&cache, &d_out);
            add(&mut pol_grad, &g);
        }
        clip_global_norm(&mut pol_grad, GRAD_CLIP);
        self.opt_policy
            .step(actor_lr, &mut self.policy.theta, &pol_grad);
        stats.entropy = -log_pi_acc / n;

        // temperature follows the entropy gap
        if self.alpha_frozen.is_none() {
            let grad_la = -self.log_alpha.exp() * (log_pi_acc / n + self.target_entropy);
            let mut la = [self.log_alpha];
            self.opt_alpha.step(actor_lr, &mut la, &[grad_la]);
            self.log_alpha = la[0].clamp(LOG_ALPHA_MIN, LOG_ALPHA_MAX);
        }

        soft_update(&mut self.tq1.theta, &self.q1.theta, self.soft_tau);
        soft_update(&mut self.tq2.theta, &self.q2.theta, self.soft_tau);
        stats
    }

    /// Critic value of a given pair, for tests and diagnostics.
    pub fn q_min(&self, obs: &[f64], action: &[f64]) -> f64 {
        let sa = join(obs, action);
        self.q1.forward(&sa)[0].min(self.q2.forward(&sa)[0])
    }

    pub fn save(&self, path: &Path) -> io::Result<()> {
        checkpoint::save(
            path,
            &[
                ("policy", &self.policy.theta),
                ("q1", &self.q1.theta),
                ("q2", &self.q2.theta),
                ("tq1", &self.tq1.theta),
                ("tq2", &self.tq2.theta),
                ("opt_policy", &self.opt_policy.state()),
                ("opt_q1", &self.opt_q1.state()),
                ("opt_q2", &self.opt_q2.state()),
                ("log_alpha", &[self.log_alpha]),
                ("opt_alpha", &self.opt_alpha.state()),
            ],
        )
    }

    pub fn load(&mut self, path: &Path) -> io::Result<()> {
        let entries = checkpoint::load(path)?;
        self.policy.theta = sized(
            checkpoint::take(&entries, "policy")?,
            self.policy.param_count(),
        )?;
        self.q1.theta = sized(checkpoint::take(&entries, "q1")?, self.q1.param_count())?;
        self.q2.theta = sized(checkpoint::take(&entries, "q2")?, self.q2.param_count())?;
        self.tq1.theta = sized(checkpoint::take(&entries, "tq1")?, self.tq1.param_count())?;
        self.tq2.theta = sized(checkpoint::take(&entries, "tq2")?, self.tq2.param_count())?;
        self.opt_policy
            .restore(&checkpoint::take(&entries, "opt_policy")?);
        self.opt_q1.restore(&checkpoint::take(&entries, "opt_q1")?);
        self.opt_q2.restore(&checkpoint::take(&entries, "opt_q2")?);
        self.log_alpha = sized(checkpoint::take(&entries, "log_alpha")?, 1)?[0];
        self.opt_alpha
            .restore(&checkpoint::take(&entries, "opt_alpha")?);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ScenarioConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn small_cfg() -> AgentConfig {
        let mut cfg = ScenarioConfig::desk().agent;
        cfg.hidden_width = 16;
        cfg.hidden_layers = 1;
        cfg
    }

    #[test]
    fn zero_temperature_bandit_matches_fixed_point() {
        let mut cfg = small_cfg();
        cfg.gamma = 0.0;
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        let mut agent = Sac::new(2, 1, &cfg, &mut rng);
        agent.force_temperature(0.0);
        let t = Transition {
            obs: vec![0.5, -0.5],
            action: vec![0.3],
            reward: 1.0,
            next_obs: vec![0.5, -0.5],
            done: false,
        };
        for _ in 0..2000 {
            let batch = vec![&t; 8];
            agent.update(&batch, 1e-4, 1e-2, &TargetNorm::identity(), &mut rng);
        }
        let q = agent.q_min(&t.obs, &t.action);
        assert!((q - 1.0).abs() < 0.05, "Q = {q}");
    }

    #[test]
    fn initial_entropy_matches_gaussian_closed_form() {
        let cfg = small_cfg();
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let agent = Sac::new(3, 4, &cfg, &mut rng);
        let obs = vec![0.2, -0.4, 0.6];
        let (mu, log_std) = agent.gaussian_head(&obs);
        let closed: f64 = log_std
            .iter()
            .map(|&l| l + 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln())
            .sum();
        // empirical differential entropy of the pre-squash Gaussian
        let draws = 20_000;
        let mut acc = 0.0;
        for _ in 0..draws {
            for (j, &l) in log_std.iter().enumerate() {
                let sigma = l.exp();
                let eps: f64 = StandardNormal.sample(&mut rng);
                let u = mu[j] + sigma * eps;
                let z = (u - mu[j]) / sigma;
                acc -= -0.5 * z * z - l - 0.5 * (2.0 * std::f64::consts::PI).ln();
            }
        }
        let empirical = acc / draws as f64;
        assert!(
            (empirical - closed).abs() < 0.1 * closed.abs().max(1.0),
            "empirical {empirical} vs closed {closed}"
        );
    }

    #[test]
    fn targets_and_policy_use_the_twin_minimum() {
        let cfg = small_cfg();
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let mut agent = Sac::new(2, 2, &cfg, &mut rng);
        let t = Transition {
            obs: vec![0.1, 0.9],
            action: vec![0.2, -0.2],
            reward: 0.7,
            next_obs: vec![-0.3, 0.4],
            done: false,
        };
        let stats = agent.update(&[&t], 1e-3, 1e-3, &TargetNorm::identity(), &mut rng);
        assert_eq!(stats.trace_min, stats.trace_tq1.min(stats.trace_tq2));
        let rebuilt = stats.trace_reward
            + cfg.gamma * (stats.trace_min - stats.alpha * stats.trace_logpi_next);
        assert!((rebuilt - stats.trace_target).abs() < 1e-12);
        assert_eq!(stats.trace_min_pi, stats.trace_q1_pi.min(stats.trace_q2_pi));
    }

    #[test]
    fn temperature_rises_when_entropy_is_short() {
        let mut cfg = small_cfg();
        // demand far more entropy than the init head provides
        cfg.sac_entropy_target_per_dim = 50.0;
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let mut agent = Sac::new(2, 1, &cfg, &mut rng);
        let a0 = agent.alpha();
        let t = Transition {
            obs: vec![0.0, 0.0],
            action: vec![0.1],
            reward: 0.0,
            next_obs: vec![0.0, 0.0],
            done: false,
        };
        for _ in 0..50 {
            agent.update(&[&t], 1e-2, 1e-3, &TargetNorm::identity(), &mut rng);
        }
        assert!(agent.alpha() > a0, "{} vs {a0}", agent.alpha());
    }

    #[test]
    fn deterministic_act_ignores_rng() {
        let cfg = small_cfg();
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let agent = Sac::new(2, 3, &cfg, &mut rng);
        let obs = vec![0.4, -0.6];
        let a = agent.act(&obs, false, &mut rng);
        let b = agent.act(&obs, false, &mut rng);
        assert_eq!(a, b);
        assert!(a.iter().all(|v| (-1.0..=1.0).contains(v)));
        // exploring draws differ
        let c = agent.act(&obs, true, &mut rng);
        let d = agent.act(&obs, true, &mut rng);
        assert_ne!(c, d);
    }

    #[test]
    fn checkpoint_round_trip_preserves_forward_pass() {
        let cfg = small_cfg();
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let mut agent = Sac::new(3, 2, &cfg, &mut rng);
        let t = Transition {
            obs: vec![0.1, 0.2, 0.3],
            action: vec![0.0, 0.1],
            reward: 0.5,
            next_obs: vec![0.2, 0.3, 0.4],
            done: false,
        };
        for _ in 0..3 {
            agent.update(&[&t], 1e-3, 1e-3, &TargetNorm::identity(), &mut rng);
        }
        let obs = vec![0.7, -0.7, 0.1];
        let before = agent.act(&obs, false, &mut rng);
        let qb = agent.q_min(&obs, &before);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sac.ckpt");
        agent.save(&path).unwrap();
        let mut restored = Sac::new(3, 2, &cfg, &mut ChaCha12Rng::seed_from_u64(77));
        restored.load(&path).unwrap();
        let after = restored.act(&obs, false, &mut rng);
        for (x, y) in before.iter().zip(&after) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        assert_eq!(qb.to_bits(), restored.q_min(&obs, &after).to_bits());
        assert_eq!(agent.alpha().to_bits(), restored.alpha().to_bits());
    }
}
