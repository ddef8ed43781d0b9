//! Deterministic policy gradient with target networks.

use std::io;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::config::AgentConfig;
use crate::nn::{checkpoint, clip_global_norm, soft_update, Adam, Mlp, OutputActivation};

use super::buffer::Transition;
use super::{TargetNorm, GRAD_CLIP};

/// Per-update diagnostics.
#[derive(Debug, Clone, Copy, Default)]
pub struct DdpgStats {
    pub critic_loss: f64,
    /// Mean critic value of the current policy's actions, the maximized
    /// objective.
    pub policy_value: f64,
    pub mean_target: f64,
}

pub struct Ddpg {
    pub actor: Mlp,
    pub critic: Mlp,
    target_actor: Mlp,
    target_critic: Mlp,
    opt_actor: Adam,
    opt_critic: Adam,
    gamma: f64,
    soft_tau: f64,
    obs_dim: usize,
    act_dim: usize,
}

impl Ddpg {
    pub fn new(obs_dim: usize, act_dim: usize, cfg: &AgentConfig, rng: &mut impl Rng) -> Self {
        let hidden = vec![cfg.hidden_width; cfg.hidden_layers];
        let mut actor = Mlp::new(obs_dim, &hidden, act_dim, OutputActivation::Tanh, rng);
        actor.scale_final_layer(1e-3);
        let critic = Mlp::new(
            obs_dim + act_dim,
            &hidden,
            1,
            OutputActivation::Identity,
            rng,
        );
        let target_actor = actor.clone();
        let target_critic = critic.clone();
        let opt_actor = Adam::new(actor.param_count());
        let opt_critic = Adam::new(critic.param_count());
        Ddpg {
            actor,
            critic,
            target_actor,
            target_critic,
            opt_actor,
            opt_critic,
            gamma: cfg.gamma,
            soft_tau: cfg.soft_tau,
            obs_dim,
            act_dim,
        }
    }

    pub fn act_dim(&self) -> usize {
        self.act_dim
    }

    /// Policy output, optionally with Gaussian exploration noise, clamped
    /// to the action box.
    pub fn act(&self, obs: &[f64], noise_scale: f64, rng: &mut impl Rng) -> Vec<f64> {
        let mut a = self.actor.forward(obs);
        if noise_scale > 0.0 {
            let noise = Normal::new(0.0, noise_scale).expect("scale is finite");
            for v in &mut a {
                *v += noise.sample(rng);
            }
        }
        for v in &mut a {
            *v = v.clamp(-1.0, 1.0);
        }
        a
    }

    /// One critic step on the TD error, one actor step up the critic, one
    /// soft update of both targets.
    pub fn update(
        &mut self,
        batch: &[&Transition],
        actor_lr: f64,
        critic_lr: f64,
        norm: &TargetNorm,
    ) -> DdpgStats {
        assert!(!batch.is_empty());
        let n = batch.len() as f64;

        // targets from the frozen pair
        let targets: Vec<f64> = batch
            .iter()
            .map(|t| {
                let r = norm.apply(t.reward);
                if t.done {
                    r
                } else {
                    let a2 = self.target_actor.forward(&t.next_obs);
                    let q2 = self.target_critic.forward(&join(&t.next_obs, &a2))[0];
                    r + self.gamma * q2
                }
            })
            .collect();

        let mut critic_grad = vec![0.0; self.critic.param_count()];
        let mut critic_loss = 0.0;
        for (t, &y) in batch.iter().zip(&targets) {
            let cache = self.critic.forward_cache(&join(&t.obs, &t.action));
            let q = cache.output()[0];
            let err = q - y;
            critic_loss += err * err / n;
            let (g, _) = self.critic.backward(&cache, &[2.0 * err / n]);
            add(&mut critic_grad, &g);
        }
        clip_global_norm(&mut critic_grad, GRAD_CLIP);
        self.opt_critic
            .step(critic_lr, &mut self.critic.theta, &critic_grad);

        // actor ascends the refreshed critic
        let mut actor_grad = vec![0.0; self.actor.param_count()];
        let mut policy_value = 0.0;
        for t in batch {
            let a_cache = self.actor.forward_cache(&t.obs);
            let a = a_cache.output().to_vec();
            let q_cache = self.critic.forward_cache(&join(&t.obs, &a));
            policy_value += q_cache.output()[0] / n;
            let (_, dq_din) = self.critic.backward(&q_cache, &[1.0]);
            // descend on -Q
            let d_action: Vec<f64> = dq_din[self.obs_dim..].iter().map(|&g| -g / n).collect();
            let (g, _) = self.actor.backward(&a_cache, &d_action);
            add(&mut actor_grad, &g);
        }
        clip_global_norm(&mut actor_grad, GRAD_CLIP);
        self.opt_actor
            .step(actor_lr, &mut self.actor.theta, &actor_grad);

        soft_update(&mut self.target_actor.theta, &self.actor.theta, self.soft_tau);
        soft_update(
            &mut self.target_critic.theta,
            &self.critic.theta,
            self.soft_tau,
        );

        DdpgStats {
            critic_loss,
            policy_value,
            mean_target: targets.iter().sum::<f64>() / n,
        }
    }

    pub fn save(&self, path: &Path) -> io::Result<()> {
        checkpoint::save(
            path,
            &[
                ("actor", &self.actor.theta),
                ("critic", &self.critic.theta),
                ("target_actor", &self.target_actor.theta),
                ("target_critic", &self.target_critic.theta),
                ("opt_actor", &self.opt_actor.state()),
                ("opt_critic", &self.opt_critic.state()),
            ],
        )
    }

    pub fn load(&mut self, path: &Path) -> io::Result<()> {
        let entries = checkpoint::load(path)?;
        self.actor.theta = sized(checkpoint::take(&entries, "actor")?, self.actor.param_count())?;
        self.critic.theta = sized(
            checkpoint::take(&entries, "critic")?,
            self.critic.param_count(),
        )?;
        self.target_actor.theta = sized(
            checkpoint::take(&entries, "target_actor")?,
            self.target_actor.param_count(),
        )?;
        self.target_critic.theta = sized(
            checkpoint::take(&entries, "target_critic")?,
            self.target_critic.param_count(),
        )?;
        self.opt_actor.restore(&checkpoint::take(&entries, "opt_actor")?);
        self.opt_critic.restore(&checkpoint::take(&entries, "opt_critic")?);
        Ok(())
    }
}

pub(crate) fn join(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut v = Vec::with_capacity(a.len() + b.len());
    v.extend_from_slice(a);
    v.extend_from_slice(b);
    v
}

pub(crate) fn add(acc: &mut [f64], g: &[f64]) {
    for (a, &x) in acc.iter_mut().zip(g) {
        *a += x;
    }
}

pub(crate) fn sized(v: Vec<f64>, want: usize) -> io::Result<Vec<f64>> {
    if v.len() == want {
        Ok(v)
    } else {
        Err(io::Error::new(
            io::ErrorKind::InvalidData,
            format!("checkpoint tensor has {} values, expected {want}", v.len()),
        ))
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

    /// gamma = 0, constant reward 1, one state-action: Q must find the
    /// fixed point at 1.
    #[test]
    fn bandit_critic_converges_to_one() {
        let mut cfg = small_cfg();
        cfg.gamma = 0.0;
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        let mut agent = Ddpg::new(2, 1, &cfg, &mut rng);
        let t = Transition {
            obs: vec![0.5, -0.5],
            action: vec![0.3],
            reward: 1.0,
            next_obs: vec![0.5, -0.5],
            done: false,
        };
        let norm = TargetNorm::identity();
        let mut q = 0.0;
        for _ in 0..2000 {
            let batch = vec![&t; 8];
            let stats = agent.update(&batch, 1e-4, 1e-2, &norm);
            q = stats.mean_target; // gamma = 0 so target IS the reward
            let _ = q;
        }
        let q_now = agent.critic.forward(&join(&t.obs, &t.action))[0];
        assert!((q_now - 1.0).abs() < 0.05, "Q = {q_now}");
        assert!((q - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tau_one_copies_online_to_target() {
        let mut cfg = small_cfg();
        cfg.soft_tau = 1.0;
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let mut agent = Ddpg::new(2, 1, &cfg, &mut rng);
        let t = Transition {
            obs: vec![0.1, 0.2],
            action: vec![0.0],
            reward: 0.5,
            next_obs: vec![0.2, 0.1],
            done: false,
        };
        agent.update(&[&t], 1e-3, 1e-3, &TargetNorm::identity());
        assert_eq!(agent.actor.theta, agent.target_actor.theta);
        assert_eq!(agent.critic.theta, agent.target_critic.theta);
    }

    #[test]
    fn exploration_noise_statistics() {
        let cfg = small_cfg();
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let agent = Ddpg::new(3, 4, &cfg, &mut rng);
        let obs = vec![0.0, 0.1, -0.1];
        // deterministic without noise
        let a1 = agent.act(&obs, 0.0, &mut rng);
        let a2 = agent.act(&obs, 0.0, &mut rng);
        assert_eq!(a1, a2);
        // noisy actions scatter around the mean with the requested scale;
        // the tiny final layer keeps outputs far from the clamp
        let n = 10_000;
        let mut acc2 = 0.0;
        for _ in 0..n {
            let a = agent.act(&obs, 0.1, &mut rng);
            for (j, &v) in a.iter().enumerate() {
                let d = v - a1[j];
                acc2 += d * d;
            }
        }
        let std = (acc2 / (n * 4) as f64).sqrt();
        assert!((std - 0.1).abs() < 0.005, "std {std}");
        // all actions stay in the box
        for _ in 0..100 {
            let a = agent.act(&obs, 5.0, &mut rng);
            assert!(a.iter().all(|v| (-1.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn targets_use_normalized_rewards() {
        let mut cfg = small_cfg();
        cfg.gamma = 0.0;
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let mut agent = Ddpg::new(1, 1, &cfg, &mut rng);
        let t = Transition {
            obs: vec![0.0],
            action: vec![0.0],
            reward: 10.0,
            next_obs: vec![0.0],
            done: false,
        };
        let norm = TargetNorm { mean: 10.0, std: 2.0 };
        let stats = agent.update(&[&t], 1e-4, 1e-3, &norm);
        assert_eq!(stats.mean_target, 0.0);
    }

    #[test]
    fn checkpoint_round_trip_preserves_forward_pass() {
        let cfg = small_cfg();
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let mut agent = Ddpg::new(3, 2, &cfg, &mut rng);
        let obs = vec![0.3, -0.2, 0.9];
        // a few updates so optimizer state is nontrivial
        let t = Transition {
            obs: obs.clone(),
            action: vec![0.1, -0.1],
            reward: 1.0,
            next_obs: obs.clone(),
            done: false,
        };
        for _ in 0..3 {
            agent.update(&[&t], 1e-3, 1e-3, &TargetNorm::identity());
        }
        let before = agent.act(&obs, 0.0, &mut rng);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ddpg.ckpt");
        agent.save(&path).unwrap();
        let mut restored = Ddpg::new(3, 2, &cfg, &mut ChaCha12Rng::seed_from_u64(99));
        restored.load(&path).unwrap();
        let after = restored.act(&obs, 0.0, &mut rng);
        assert_eq!(before.len(), after.len());
        for (x, y) in before.iter().zip(&after) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }
}
