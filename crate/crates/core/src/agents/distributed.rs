//! Distributed control: one soft actor-critic per domain. The radio agent
//! sees channel magnitudes and demands and emits the power and scheduling
//! half of the action; the core agent sees link, demand, and node state and
//! emits placement and routing. They share the global reward but exchange
//! nothing else, trading coordination for a much smaller signaling load.

use std::io;
use std::path::Path;

use rand::Rng;

use crate::config::AgentConfig;
use crate::env::{obs_dim, ActionLayout};
use crate::scenario::Scenario;

use super::buffer::{ReplayBuffer, Transition};
use super::sac::{Sac, SacStats};
use super::TargetNorm;

/// Where the global observation and action vectors split between domains.
#[derive(Debug, Clone, Copy)]
pub struct DomainSplit {
    /// Channel-magnitude block length at the front of the observation.
    n_channels: usize,
    n_links: usize,
    n_users: usize,
    n_nodes: usize,
    /// Action prefix owned by the radio agent.
    radio_act: usize,
    core_act: usize,
}

impl DomainSplit {
    pub fn for_scenario(scn: &Scenario, layout: &ActionLayout) -> Self {
        let split = DomainSplit {
            n_channels: scn.radio.n_bs * scn.n_users() * scn.radio.n_subchannels,
            n_links: scn.graph.link_count(),
            n_users: scn.n_users(),
            n_nodes: scn.graph.node_count(),
            radio_act: layout.radio_prefix_len(),
            core_act: layout.dim - layout.radio_prefix_len(),
        };
        debug_assert_eq!(
            split.n_channels + split.n_links + split.n_users + split.n_nodes,
            obs_dim(scn)
        );
        split
    }

    pub fn obs_dim(&self) -> usize {
        self.n_channels + self.n_links + self.n_users + self.n_nodes
    }

    pub fn action_dim(&self) -> usize {
        self.radio_act + self.core_act
    }

    pub fn radio_obs_dim(&self) -> usize {
        self.n_channels + self.n_users
    }

    pub fn core_obs_dim(&self) -> usize {
        self.n_links + self.n_users + self.n_nodes
    }

    /// Channel block plus demands; link and node state stays invisible.
    pub fn radio_obs(&self, obs: &[f64]) -> Vec<f64> {
        assert_eq!(obs.len(), self.obs_dim());
        let demand_lo = self.n_channels + self.n_links;
        let mut v = Vec::with_capacity(self.radio_obs_dim());
        v.extend_from_slice(&obs[..self.n_channels]);
        v.extend_from_slice(&obs[demand_lo..demand_lo + self.n_users]);
        v
    }

    /// Everything past the channel block: links, demands, nodes.
    pub fn core_obs(&self, obs: &[f64]) -> Vec<f64> {
        assert_eq!(obs.len(), self.obs_dim());
        obs[self.n_channels..].to_vec()
    }
}

pub struct Distributed {
    split: DomainSplit,
    radio: Sac,
    core: Sac,
    radio_buf: ReplayBuffer,
    core_buf: ReplayBuffer,
}

impl Distributed {
    pub fn new(split: DomainSplit, cfg: &AgentConfig, rng: &mut impl Rng) -> Self {
        Distributed {
            radio: Sac::new(split.radio_obs_dim(), split.radio_act, cfg, rng),
            core: Sac::new(split.core_obs_dim(), split.core_act, cfg, rng),
            radio_buf: ReplayBuffer::new(cfg.buffer_capacity),
            core_buf: ReplayBuffer::new(cfg.buffer_capacity),
            split,
        }
    }

    pub fn split(&self) -> DomainSplit {
        self.split
    }

    /// Both policies act on their own views; the outputs concatenate back
    /// into one global action.
    pub fn act(&self, obs: &[f64], explore: bool, rng: &mut impl Rng) -> Vec<f64> {
        let mut a = self.radio.act(&self.split.radio_obs(obs), explore, rng);
        a.extend(self.core.act(&self.split.core_obs(obs), explore, rng));
        a
    }

    /// Stores one environment step as two domain-local transitions. Both
    /// carry the same shared reward.
    pub fn observe(
        &mut self,
        obs: &[f64],
        action: &[f64],
        reward: f64,
        next_obs: &[f64],
        done: bool,
    ) {
        assert_eq!(action.len(), self.split.action_dim());
        let (ra, ca) = action.split_at(self.split.radio_act);
        self.radio_buf.push(Transition {
            obs: self.split.radio_obs(obs),
            action: ra.to_vec(),
            reward,
            next_obs: self.split.radio_obs(next_obs),
            done,
        });
        self.core_buf.push(Transition {
            obs: self.split.core_obs(obs),
            action: ca.to_vec(),
            reward,
            next_obs: self.split.core_obs(next_obs),
            done,
        });
    }

    pub fn buffered(&self) -> usize {
        self.radio_buf.len()
    }

    /// One gradient step per agent, each sampling only its own buffer.
    pub fn update(
        &mut self,
        batch: usize,
        actor_lr: f64,
        critic_lr: f64,
        norm: &TargetNorm,
        rng: &mut impl Rng,
    ) -> (SacStats, SacStats) {
        let rb = self.radio_buf.sample(batch, rng);
        let rs = self.radio.update(&rb, actor_lr, critic_lr, norm, rng);
        let cb = self.core_buf.sample(batch, rng);
        let cs = self.core.update(&cb, actor_lr, critic_lr, norm, rng);
        (rs, cs)
    }

    pub fn save(&self, radio_path: &Path, core_path: &Path) -> io::Result<()> {
        self.radio.save(radio_path)?;
        self.core.save(core_path)
    }

    pub fn load(&mut self, radio_path: &Path, core_path: &Path) -> io::Result<()> {
        self.radio.load(radio_path)?;
        self.core.load(core_path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ScenarioConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;
    use std::sync::Arc;

    fn desk_setup() -> (Arc<Scenario>, DomainSplit, AgentConfig) {
        let cfg = ScenarioConfig::desk();
        let scn = Scenario::generate(&cfg).unwrap();
        let layout = ActionLayout::for_scenario(&scn);
        let split = DomainSplit::for_scenario(&scn, &layout);
        let mut agent_cfg = cfg.agent;
        agent_cfg.hidden_width = 16;
        agent_cfg.hidden_layers = 1;
        (Arc::new(scn), split, agent_cfg)
    }

    #[test]
    fn views_partition_the_observation() {
        let (scn, split, _) = desk_setup();
        assert_eq!(split.obs_dim(), obs_dim(&scn));
        let obs: Vec<f64> = (0..split.obs_dim()).map(|i| i as f64).collect();
        let radio = split.radio_obs(&obs);
        let core = split.core_obs(&obs);
        // radio: channels then demands, nothing from links or nodes
        assert_eq!(radio.len(), split.radio_obs_dim());
        assert_eq!(radio[0], 0.0);
        let demand_lo = (split.n_channels + split.n_links) as f64;
        assert_eq!(radio[split.n_channels], demand_lo);
        // core: contiguous tail
        assert_eq!(core.len(), split.core_obs_dim());
        assert_eq!(core[0], split.n_channels as f64);
        assert_eq!(*core.last().unwrap(), (split.obs_dim() - 1) as f64);
    }

    /// The radio policy must not react to link or node state, and the core
    /// policy must not react to channel state: the two sides only share the
    /// demand block and the reward.
    #[test]
    fn domains_do_not_react_to_each_others_state() {
        let (_, split, cfg) = desk_setup();
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        let agents = Distributed::new(split, &cfg, &mut rng);
        let base: Vec<f64> = (0..split.obs_dim()).map(|i| (i as f64).sin()).collect();
        let a0 = agents.act(&base, false, &mut rng);
        assert_eq!(a0.len(), split.action_dim());

        let mut core_shift = base.clone();
        for v in &mut core_shift[split.n_channels..split.n_channels + split.n_links] {
            *v += 1.0;
        }
        for v in &mut core_shift[split.obs_dim() - split.n_nodes..] {
            *v += 1.0;
        }
        let a1 = agents.act(&core_shift, false, &mut rng);
        assert_eq!(&a0[..split.radio_act], &a1[..split.radio_act]);
        assert_ne!(&a0[split.radio_act..], &a1[split.radio_act..]);

        let mut radio_shift = base.clone();
        for v in &mut radio_shift[..split.n_channels] {
            *v += 1.0;
        }
        let a2 = agents.act(&radio_shift, false, &mut rng);
        assert_eq!(&a0[split.radio_act..], &a2[split.radio_act..]);
        assert_ne!(&a0[..split.radio_act], &a2[..split.radio_act]);
    }

    #[test]
    fn updates_run_on_domain_local_batches() {
        let (_, split, mut cfg) = desk_setup();
        cfg.hidden_width = 8;
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let mut agents = Distributed::new(split, &cfg, &mut rng);
        let obs: Vec<f64> = (0..split.obs_dim()).map(|_| 0.1).collect();
        for step in 0..8 {
            let a = agents.act(&obs, true, &mut rng);
            agents.observe(&obs, &a, 0.5, &obs, step == 7);
        }
        assert_eq!(agents.buffered(), 8);
        let (rs, cs) = agents.update(4, 1e-4, 1e-3, &TargetNorm::identity(), &mut rng);
        assert!(rs.q1_loss.is_finite() && cs.q1_loss.is_finite());
        assert!(rs.alpha > 0.0 && cs.alpha > 0.0);
    }

    #[test]
    fn checkpoint_round_trip() {
        let (_, split, mut cfg) = desk_setup();
        cfg.hidden_width = 8;
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let agents = Distributed::new(split, &cfg, &mut rng);
        let dir = tempfile::tempdir().unwrap();
        let (rp, cp) = (dir.path().join("radio.ckpt"), dir.path().join("core.ckpt"));
        agents.save(&rp, &cp).unwrap();
        let mut other = Distributed::new(split, &cfg, &mut ChaCha12Rng::seed_from_u64(3));
        other.load(&rp, &cp).unwrap();
        let obs: Vec<f64> = (0..split.obs_dim()).map(|i| (i as f64).cos()).collect();
        let a = agents.act(&obs, false, &mut rng);
        let b = other.act(&obs, false, &mut rng);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }
}
