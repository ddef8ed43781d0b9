//! Recurrent deterministic policy gradient. Actor and critic each run an
//! LSTM over the observation-action history, so the policy can act on
//! state the instantaneous observation no longer shows. Updates replay
//! whole episodes and backpropagate through time; the final step of an
//! episode takes its reward as the full target, with no bootstrap term.

use std::io;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::config::AgentConfig;
use crate::nn::{
    checkpoint, clip_global_norm, soft_update, Adam, LstmCell, Mlp, OutputActivation,
};

use super::buffer::Episode;
use super::ddpg::{add, join, sized};
use super::{TargetNorm, GRAD_CLIP};

#[derive(Debug, Clone, Copy, Default)]
pub struct RdpgStats {
    pub critic_loss: f64,
    /// Mean critic value of the policy's own actions at visited states.
    pub policy_value: f64,
    pub mean_target: f64,
}

/// Recurrent state the caller threads through an episode: hidden and cell
/// vectors plus the previously executed action.
pub struct RdpgState {
    h: Vec<f64>,
    c: Vec<f64>,
    a_prev: Vec<f64>,
}

pub struct Rdpg {
    actor_rnn: LstmCell,
    actor_head: Mlp,
    critic_rnn: LstmCell,
    critic_head: Mlp,
    t_actor_rnn: LstmCell,
    t_actor_head: Mlp,
    t_critic_rnn: LstmCell,
    t_critic_head: Mlp,
    opt_actor_rnn: Adam,
    opt_actor_head: Adam,
    opt_critic_rnn: Adam,
    opt_critic_head: Adam,
    gamma: f64,
    soft_tau: f64,
    obs_dim: usize,
    act_dim: usize,
    hidden: usize,
}

impl Rdpg {
    pub fn new(obs_dim: usize, act_dim: usize, cfg: &AgentConfig, rng: &mut impl Rng) -> Self {
        let hidden = cfg.hidden_width;
        let head_hidden = vec![cfg.hidden_width; cfg.hidden_layers];
        // both recurrences read the observation next to the last action
        let actor_rnn = LstmCell::new(obs_dim + act_dim, hidden, rng);
        let mut actor_head =
            Mlp::new(hidden, &head_hidden, act_dim, OutputActivation::Tanh, rng);
        actor_head.scale_final_layer(1e-3);
        let critic_rnn = LstmCell::new(obs_dim + act_dim, hidden, rng);
        let critic_head = Mlp::new(
            hidden + act_dim,
            &head_hidden,
            1,
            OutputActivation::Identity,
            rng,
        );
        Rdpg {
            t_actor_rnn: actor_rnn.clone(),
            t_actor_head: actor_head.clone(),
            t_critic_rnn: critic_rnn.clone(),
            t_critic_head: critic_head.clone(),
            opt_actor_rnn: Adam::new(actor_rnn.param_count()),
            opt_actor_head: Adam::new(actor_head.param_count()),
            opt_critic_rnn: Adam::new(critic_rnn.param_count()),
            opt_critic_head: Adam::new(critic_head.param_count()),
            actor_rnn,
            actor_head,
            critic_rnn,
            critic_head,
            gamma: cfg.gamma,
            soft_tau: cfg.soft_tau,
            obs_dim,
            act_dim,
            hidden,
        }
    }

    pub fn act_dim(&self) -> usize {
        self.act_dim
    }

    pub fn initial_state(&self) -> RdpgState {
        RdpgState {
            h: vec![0.0; self.hidden],
            c: vec![0.0; self.hidden],
            a_prev: vec![0.0; self.act_dim],
        }
    }

    /// One policy step. Advances `state` with the executed (noisy) action,
    /// matching how stored episodes replay during training.
    pub fn act(
        &self,
        obs: &[f64],
        state: &mut RdpgState,
        noise_scale: f64,
        rng: &mut impl Rng,
    ) -> Vec<f64> {
        assert_eq!(obs.len(), self.obs_dim);
        let x = join(obs, &state.a_prev);
        let (h, c, _) = self.actor_rnn.forward_step(&x, &state.h, &state.c);
        let mut a = self.actor_head.forward(&h);
        if noise_scale > 0.0 {
            for v in &mut a {
                let eps: f64 = StandardNormal.sample(rng);
                *v = (*v + noise_scale * eps).clamp(-1.0, 1.0);
            }
        }
        state.h = h;
        state.c = c;
        state.a_prev = a.clone();
        a
    }

    /// Inputs the recurrences consume: observation beside the previous
    /// executed action, zero action before the first step.
    fn inputs(&self, e: &Episode) -> Vec<Vec<f64>> {
        (0..e.len())
            .map(|t| {
                if t == 0 {
                    join(&e.obs[0], &vec![0.0; self.act_dim])
                } else {
                    join(&e.obs[t], &e.actions[t - 1])
                }
            })
            .collect()
    }

    /// Critic values along an episode under teacher-forced actions.
    pub fn critic_value(&self, e: &Episode) -> Vec<f64> {
        let xs = self.inputs(e);
        self.critic_rnn
            .forward_sequence(&xs)
            .iter()
            .zip(&e.actions)
            .map(|(g, a)| self.critic_head.forward(&join(g, a))[0])
            .collect()
    }

    /// One gradient step over a batch of whole episodes.
    pub fn update_episodes(
        &mut self,
        episodes: &[&Episode],
        actor_lr: f64,
        critic_lr: f64,
        norm: &TargetNorm,
    ) -> RdpgStats {
        if episodes.is_empty() {
            return RdpgStats::default();
        }
        let n_total: f64 = episodes.iter().map(|e| e.len() as f64).sum();
        let mut stats = RdpgStats::default();
        let mut g_actor_rnn = vec![0.0; self.actor_rnn.param_count()];
        let mut g_actor_head = vec![0.0; self.actor_head.param_count()];
        let mut g_critic_rnn = vec![0.0; self.critic_rnn.param_count()];
        let mut g_critic_head = vec![0.0; self.critic_head.param_count()];

        for e in episodes {
            let steps = e.len();
            let xs = self.inputs(e);

            // targets from the lagged networks; the terminal step has no
            // successor, so its reward stands alone
            let t_hs = self.t_actor_rnn.forward_sequence(&xs);
            let t_gs = self.t_critic_rnn.forward_sequence(&xs);
            let next_q: Vec<f64> = t_hs
                .iter()
                .zip(&t_gs)
                .map(|(h, g)| {
                    let a_hat = self.t_actor_head.forward(h);
                    self.t_critic_head.forward(&join(g, &a_hat))[0]
                })
                .collect();
            let targets: Vec<f64> = (0..steps)
                .map(|t| {
                    let r = norm.apply(e.rewards[t]);
                    if t + 1 < steps {
                        r + self.gamma * next_q[t + 1]
                    } else {
                        r
                    }
                })
                .collect();
            stats.mean_target += targets.iter().sum::<f64>() / n_total;

            // online critic forward, keeping every cache for the sweep back
            let (mut h, mut c) = self.critic_rnn.zero_state();
            let mut rnn_caches = Vec::with_capacity(steps);
            let mut gs = Vec::with_capacity(steps);
            for x in &xs {
                let (h2, c2, cache) = self.critic_rnn.forward_step(x, &h, &c);
                rnn_caches.push(cache);
                gs.push(h2.clone());
                h = h2;
                c = c2;
            }
            let head_caches: Vec<_> = (0..steps)
                .map(|t| self.critic_head.forward_cache(&join(&gs[t], &e.actions[t])))
                .collect();

            let mut d_h = vec![0.0; self.hidden];
            let mut d_c = vec![0.0; self.hidden];
            for t in (0..steps).rev() {
                let err = head_caches[t].output()[0] - targets[t];
                stats.critic_loss += err * err / n_total;
                let (gh, d_in) = self
                    .critic_head
                    .backward(&head_caches[t], &[2.0 * err / n_total]);
                add(&mut g_critic_head, &gh);
                for (acc, &v) in d_h.iter_mut().zip(&d_in[..self.hidden]) {
                    *acc += v;
                }
                let (_, d_h_prev, d_c_prev) =
                    self.critic_rnn
                        .backward_step(&rnn_caches[t], &d_h, &d_c, &mut g_critic_rnn);
                d_h = d_h_prev;
                d_c = d_c_prev;
            }

            // actor forward; the critic recurrence is reused frozen, only
            // the head input carries the policy's action
            let (mut h, mut c) = self.actor_rnn.zero_state();
            let mut a_caches = Vec::with_capacity(steps);
            let mut pi_caches = Vec::with_capacity(steps);
            for x in &xs {
                let (h2, c2, cache) = self.actor_rnn.forward_step(x, &h, &c);
                a_caches.push(cache);
                pi_caches.push(self.actor_head.forward_cache(&h2));
                h = h2;
                c = c2;
            }

            let mut d_h = vec![0.0; self.hidden];
            let mut d_c = vec![0.0; self.hidden];
            for t in (0..steps).rev() {
                let pi = pi_caches[t].output().to_vec();
                let cq = self.critic_head.forward_cache(&join(&gs[t], &pi));
                stats.policy_value += cq.output()[0] / n_total;
                let (_, dq_din) = self.critic_head.backward(&cq, &[-1.0 / n_total]);
                let d_a = &dq_din[self.hidden..];
                let (gh, d_h_in) = self.actor_head.backward(&pi_caches[t], d_a);
                add(&mut g_actor_head, &gh);
                for (acc, &v) in d_h.iter_mut().zip(&d_h_in) {
                    *acc += v;
                }
                let (_, d_h_prev, d_c_prev) =
                    self.actor_rnn
                        .backward_step(&a_caches[t], &d_h, &d_c, &mut g_actor_rnn);
                d_h = d_h_prev;
                d_c = d_c_prev;
            }
        }

        clip_global_norm(&mut g_critic_rnn, GRAD_CLIP);
        clip_global_norm(&mut g_critic_head, GRAD_CLIP);
        clip_global_norm(&mut g_actor_rnn, GRAD_CLIP);
        clip_global_norm(&mut g_actor_head, GRAD_CLIP);
        self.opt_critic_rnn
            .step(critic_lr, &mut self.critic_rnn.theta, &g_critic_rnn);
        self.opt_critic_head
            .step(critic_lr, &mut self.critic_head.theta, &g_critic_head);
        self.opt_actor_rnn
            .step(actor_lr, &mut self.actor_rnn.theta, &g_actor_rnn);
        self.opt_actor_head
            .step(actor_lr, &mut self.actor_head.theta, &g_actor_head);

        soft_update(&mut self.t_actor_rnn.theta, &self.actor_rnn.theta, self.soft_tau);
        soft_update(&mut self.t_actor_head.theta, &self.actor_head.theta, self.soft_tau);
        soft_update(&mut self.t_critic_rnn.theta, &self.critic_rnn.theta, self.soft_tau);
        soft_update(&mut self.t_critic_head.theta, &self.critic_head.theta, self.soft_tau);
        stats
    }

    pub fn save(&self, path: &Path) -> io::Result<()> {
        checkpoint::save(
            path,
            &[
                ("actor_rnn", &self.actor_rnn.theta),
                ("actor_head", &self.actor_head.theta),
                ("critic_rnn", &self.critic_rnn.theta),
                ("critic_head", &self.critic_head.theta),
                ("t_actor_rnn", &self.t_actor_rnn.theta),
                ("t_actor_head", &self.t_actor_head.theta),
                ("t_critic_rnn", &self.t_critic_rnn.theta),
                ("t_critic_head", &self.t_critic_head.theta),
                ("opt_actor_rnn", &self.opt_actor_rnn.state()),
                ("opt_actor_head", &self.opt_actor_head.state()),
                ("opt_critic_rnn", &self.opt_critic_rnn.state()),
                ("opt_critic_head", &self.opt_critic_head.state()),
            ],
        )
    }

    pub fn load(&mut self, path: &Path) -> io::Result<()> {
        let entries = checkpoint::load(path)?;
        fn put(
            entries: &[(String, Vec<f64>)],
            name: &str,
            theta: &mut Vec<f64>,
        ) -> io::Result<()> {
            *theta = sized(checkpoint::take(entries, name)?, theta.len())?;
            Ok(())
        }
        put(&entries, "actor_rnn", &mut self.actor_rnn.theta)?;
        put(&entries, "actor_head", &mut self.actor_head.theta)?;
        put(&entries, "critic_rnn", &mut self.critic_rnn.theta)?;
        put(&entries, "critic_head", &mut self.critic_head.theta)?;
        put(&entries, "t_actor_rnn", &mut self.t_actor_rnn.theta)?;
        put(&entries, "t_actor_head", &mut self.t_actor_head.theta)?;
        put(&entries, "t_critic_rnn", &mut self.t_critic_rnn.theta)?;
        put(&entries, "t_critic_head", &mut self.t_critic_head.theta)?;
        self.opt_actor_rnn
            .restore(&checkpoint::take(&entries, "opt_actor_rnn")?);
        self.opt_actor_head
            .restore(&checkpoint::take(&entries, "opt_actor_head")?);
        self.opt_critic_rnn
            .restore(&checkpoint::take(&entries, "opt_critic_rnn")?);
        self.opt_critic_head
            .restore(&checkpoint::take(&entries, "opt_critic_head")?);
        Ok(())
    }
}
