//! Training and evaluation loops shared by the command line and the test
//! harness. One entry point drives any allocator over the environment,
//! records a learning curve, and hands the trained policy back.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::config::AgentConfig;
use crate::env::{Allocation, SliceEnv, StepOutcome};

use super::buffer::{Episode, EpisodeBuffer, ReplayBuffer, Transition};
use super::ddpg::Ddpg;
use super::distributed::{Distributed, DomainSplit};
use super::greedy::greedy_allocate;
use super::rdpg::{Rdpg, RdpgState};
use super::sac::Sac;
use super::{Algorithm, RewardStats, TargetNorm};

/// Any of the allocators behind one face.
pub enum AnyAgent {
    Greedy,
    Ddpg(Ddpg),
    Sac(Sac),
    Rdpg(Rdpg),
    Distributed(Box<Distributed>),
}

impl AnyAgent {
    pub fn algorithm(&self) -> Algorithm {
        match self {
            AnyAgent::Greedy => Algorithm::Greedy,
            AnyAgent::Ddpg(_) => Algorithm::Ddpg,
            AnyAgent::Sac(_) => Algorithm::Sac,
            AnyAgent::Rdpg(_) => Algorithm::Rdpg,
            AnyAgent::Distributed(_) => Algorithm::Distributed,
        }
    }
}

/// Per-episode averages over the slots actually played.
#[derive(Debug, Clone, Copy)]
pub struct EpisodeStats {
    pub episode: usize,
    pub reward: f64,
    pub utility: f64,
    pub sum_rate_bps: f64,
    pub served_users: f64,
    pub violations: f64,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct EvalSummary {
    pub reward: f64,
    pub utility: f64,
    pub sum_rate_bps: f64,
    pub served_users: f64,
    pub violations: f64,
}

pub struct TrainResult {
    pub curve: Vec<EpisodeStats>,
    pub agent: AnyAgent,
}

/// Distinct, reproducible stream per (run seed, episode).
fn episode_seed(seed: u64, episode: u64, salt: u64) -> u64 {
    (seed ^ salt).wrapping_add(episode.wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

fn build_agent(
    algo: Algorithm,
    env: &SliceEnv,
    cfg: &AgentConfig,
    rng: &mut ChaCha12Rng,
) -> AnyAgent {
    let (od, ad) = (env.obs_dim(), env.action_dim());
    match algo {
        Algorithm::Greedy => AnyAgent::Greedy,
        Algorithm::Ddpg => AnyAgent::Ddpg(Ddpg::new(od, ad, cfg, rng)),
        Algorithm::Sac => AnyAgent::Sac(Sac::new(od, ad, cfg, rng)),
        Algorithm::Rdpg => AnyAgent::Rdpg(Rdpg::new(od, ad, cfg, rng)),
        Algorithm::Distributed => {
            let split = DomainSplit::for_scenario(env.scenario(), env.layout());
            AnyAgent::Distributed(Box::new(Distributed::new(split, cfg, rng)))
        }
    }
}

/// What the policy wants executed this slot.
enum Decision {
    Vector(Vec<f64>),
    Alloc(Box<Allocation>),
}

fn decide(
    agent: &AnyAgent,
    env: &SliceEnv,
    explore: bool,
    noise: f64,
    rdpg_state: &mut Option<RdpgState>,
    rng: &mut ChaCha12Rng,
) -> Decision {
    let obs = env.current_obs();
    match agent {
        AnyAgent::Greedy => Decision::Alloc(Box::new(greedy_allocate(
            env.scenario(),
            env.channels(),
            env.demands(),
        ))),
        AnyAgent::Ddpg(a) => {
            Decision::Vector(a.act(obs, if explore { noise } else { 0.0 }, rng))
        }
        AnyAgent::Sac(a) => Decision::Vector(a.act(obs, explore, rng)),
        AnyAgent::Rdpg(a) => {
            let st = rdpg_state.as_mut().expect("recurrent state primed per episode");
            Decision::Vector(a.act(obs, st, if explore { noise } else { 0.0 }, rng))
        }
        AnyAgent::Distributed(a) => Decision::Vector(a.act(obs, explore, rng)),
    }
}

fn execute(env: &mut SliceEnv, decision: &Decision) -> StepOutcome {
    match decision {
        Decision::Vector(a) => env.step(a).expect("policy action malformed"),
        Decision::Alloc(al) => env.step_allocation(al).expect("heuristic allocation malformed"),
    }
}

fn decided_action(env: &SliceEnv, decision: Decision) -> Vec<f64> {
    match decision {
        Decision::Vector(a) => a,
        Decision::Alloc(al) => crate::env::encode_allocation(env.scenario(), env.layout(), &al),
    }
}

/// Trains `algo` on the environment for `episodes` episodes and returns the
/// learning curve next to the trained policy. The same seed reproduces the
/// same curve bit for bit.
pub fn train(
    algo: Algorithm,
    env: &mut SliceEnv,
    cfg: &AgentConfig,
    episodes: usize,
    seed: u64,
) -> TrainResult {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut agent = build_agent(algo, env, cfg, &mut rng);
    let mut replay = ReplayBuffer::new(cfg.buffer_capacity);
    let mut episode_buf = EpisodeBuffer::new(cfg.buffer_capacity);
    let mut stats = RewardStats::default();
    let mut curve = Vec::with_capacity(episodes);
    if episodes == 0 {
        return TrainResult { curve, agent };
    }

    // random-policy warmup seeds the buffers before any gradient steps
    let learns = !matches!(agent, AnyAgent::Greedy);
    if learns && cfg.warmup_steps > 0 {
        let mut taken = 0;
        let mut round = 0u64;
        while taken < cfg.warmup_steps {
            let mut obs = env.reset(episode_seed(seed, round, 0x57a2));
            let mut ep = Episode::default();
            while taken < cfg.warmup_steps {
                let action: Vec<f64> =
                    (0..env.action_dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let out = env.step(&action).expect("warmup action malformed");
                stats.push(out.eval.reward);
                record(
                    &mut agent,
                    &mut replay,
                    &mut ep,
                    &obs,
                    action,
                    out.eval.reward,
                    &out.obs,
                    out.done,
                );
                obs = out.obs;
                taken += 1;
                if out.done {
                    break;
                }
            }
            if !ep.is_empty() {
                episode_buf.push(ep);
            }
            round += 1;
        }
    }

    for e in 0..episodes {
        let decay = 1.0 / (1.0 + cfg.lr_decay * e as f64);
        let actor_lr = cfg.actor_lr * decay;
        let critic_lr = cfg.critic_lr * decay;
        let noise = cfg.noise_at(e);

        let mut obs = env.reset(episode_seed(seed, e as u64, 0));
        let mut rdpg_state = match &agent {
            AnyAgent::Rdpg(a) => Some(a.initial_state()),
            _ => None,
        };
        let mut ep = Episode::default();
        let mut acc = EvalSummary::default();
        let mut slots = 0usize;

        loop {
            let decision = decide(&agent, env, true, noise, &mut rdpg_state, &mut rng);
            let out = execute(env, &decision);
            let action = decided_action(env, decision);
            stats.push(out.eval.reward);
            accumulate(&mut acc, &out);
            slots += 1;
            record(
                &mut agent,
                &mut replay,
                &mut ep,
                &obs,
                action,
                out.eval.reward,
                &out.obs,
                out.done,
            );
            obs = out.obs;

            let norm = target_norm(cfg, &stats);
            match &mut agent {
                AnyAgent::Ddpg(a) => {
                    if replay.len() >= cfg.batch {
                        let batch = replay.sample(cfg.batch, &mut rng);
                        a.update(&batch, actor_lr, critic_lr, &norm);
                    }
                }
                AnyAgent::Sac(a) => {
                    if replay.len() >= cfg.batch {
                        let batch = replay.sample(cfg.batch, &mut rng);
                        a.update(&batch, actor_lr, critic_lr, &norm, &mut rng);
                    }
                }
                AnyAgent::Distributed(a) => {
                    if a.buffered() >= cfg.batch {
                        a.update(cfg.batch, actor_lr, critic_lr, &norm, &mut rng);
                    }
                }
                AnyAgent::Greedy | AnyAgent::Rdpg(_) => {}
            }
            if out.done {
                break;
            }
        }

        if let AnyAgent::Rdpg(a) = &mut agent {
            if !ep.is_empty() {
                episode_buf.push(ep);
            }
            if episode_buf.len() >= cfg.rdpg_episode_batch {
                let norm = target_norm(cfg, &stats);
                for _ in 0..cfg.rdpg_updates_per_episode {
                    let batch = episode_buf.sample(cfg.rdpg_episode_batch, &mut rng);
                    a.update_episodes(&batch, actor_lr, critic_lr, &norm);
                }
            }
        }

        curve.push(finish(acc, slots, e));
    }
    TrainResult { curve, agent }
}

/// Exploration-free rollouts; means over every slot of every episode.
pub fn evaluate(
    agent: &AnyAgent,
    env: &mut SliceEnv,
    episodes: usize,
    seed: u64,
) -> EvalSummary {
    let mut rng = ChaCha12Rng::seed_from_u64(seed ^ 0xe7a1);
    let mut acc = EvalSummary::default();
    let mut slots = 0usize;
    for e in 0..episodes {
        env.reset(episode_seed(seed, e as u64, 0xe7a1));
        let mut rdpg_state = match agent {
            AnyAgent::Rdpg(a) => Some(a.initial_state()),
            _ => None,
        };
        loop {
            let decision = decide(agent, env, false, 0.0, &mut rdpg_state, &mut rng);
            let out = execute(env, &decision);
            accumulate(&mut acc, &out);
            slots += 1;
            if out.done {
                break;
            }
        }
    }
    if slots > 0 {
        let n = slots as f64;
        acc.reward /= n;
        acc.utility /= n;
        acc.sum_rate_bps /= n;
        acc.served_users /= n;
        acc.violations /= n;
    }
    acc
}

fn target_norm(cfg: &AgentConfig, stats: &RewardStats) -> TargetNorm {
    if cfg.normalize_targets {
        stats.norm()
    } else {
        TargetNorm::identity()
    }
}

#[allow(clippy::too_many_arguments)]
fn record(
    agent: &mut AnyAgent,
    replay: &mut ReplayBuffer,
    ep: &mut Episode,
    obs: &[f64],
    action: Vec<f64>,
    reward: f64,
    next_obs: &[f64],
    done: bool,
) {
    match agent {
        AnyAgent::Greedy => {}
        AnyAgent::Ddpg(_) | AnyAgent::Sac(_) => replay.push(Transition {
            obs: obs.to_vec(),
            action,
            reward,
            next_obs: next_obs.to_vec(),
            done,
        }),
        AnyAgent::Rdpg(_) => ep.push(obs.to_vec(), action, reward),
        AnyAgent::Distributed(a) => a.observe(obs, &action, reward, next_obs, done),
    }
}

fn accumulate(acc: &mut EvalSummary, out: &StepOutcome) {
    acc.reward += out.eval.reward;
    acc.utility += out.eval.utility;
    acc.sum_rate_bps += out.eval.sum_rate_bps;
    acc.served_users += out.eval.served_users as f64;
    acc.violations += out.eval.violations.len() as f64;
}

fn finish(acc: EvalSummary, slots: usize, episode: usize) -> EpisodeStats {
    let n = slots.max(1) as f64;
    EpisodeStats {
        episode,
        reward: acc.reward / n,
        utility: acc.utility / n,
        sum_rate_bps: acc.sum_rate_bps / n,
        served_users: acc.served_users / n,
        violations: acc.violations / n,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ScenarioConfig;
    use crate::scenario::Scenario;
    use std::sync::Arc;

    fn tiny_env_and_cfg() -> (SliceEnv, AgentConfig) {
        let mut cfg = ScenarioConfig::desk();
        cfg.episode_len = 5;
        let scn = Scenario::generate(&cfg).unwrap();
        let env = SliceEnv::new(Arc::new(scn));
        let mut acfg = cfg.agent;
        acfg.hidden_width = 8;
        acfg.hidden_layers = 1;
        acfg.batch = 4;
        acfg.warmup_steps = 8;
        acfg.buffer_capacity = 256;
        acfg.rdpg_episode_batch = 2;
        acfg.rdpg_updates_per_episode = 1;
        (env, acfg)
    }

    #[test]
    fn zero_episodes_yields_an_empty_curve() {
        let (mut env, cfg) = tiny_env_and_cfg();
        let res = train(Algorithm::Sac, &mut env, &cfg, 0, 7);
        assert!(res.curve.is_empty());
        assert_eq!(res.agent.algorithm(), Algorithm::Sac);
    }

    #[test]
    fn same_seed_reproduces_the_curve_bit_for_bit() {
        let (mut env, cfg) = tiny_env_and_cfg();
        let a = train(Algorithm::Ddpg, &mut env, &cfg, 3, 42);
        let b = train(Algorithm::Ddpg, &mut env, &cfg, 3, 42);
        assert_eq!(a.curve.len(), b.curve.len());
        for (x, y) in a.curve.iter().zip(&b.curve) {
            assert_eq!(x.reward.to_bits(), y.reward.to_bits());
            assert_eq!(x.utility.to_bits(), y.utility.to_bits());
        }
        let c = train(Algorithm::Ddpg, &mut env, &cfg, 3, 43);
        let same = a
            .curve
            .iter()
            .zip(&c.curve)
            .all(|(x, y)| x.reward.to_bits() == y.reward.to_bits());
        assert!(!same, "different seeds should explore differently");
    }

    #[test]
    fn every_algorithm_survives_a_short_run() {
        let (mut env, cfg) = tiny_env_and_cfg();
        for algo in Algorithm::ALL {
            let res = train(algo, &mut env, &cfg, 2, 5);
            assert_eq!(res.curve.len(), 2, "{algo}");
            assert!(res.curve.iter().all(|s| s.reward.is_finite()), "{algo}");
            let summary = evaluate(&res.agent, &mut env, 1, 11);
            assert!(summary.reward.is_finite(), "{algo}");
            assert!(summary.served_users >= 0.0);
        }
    }

    #[test]
    fn greedy_needs_no_learning_and_evaluates_deterministically() {
        let (mut env, cfg) = tiny_env_and_cfg();
        let res = train(Algorithm::Greedy, &mut env, &cfg, 2, 3);
        let e1 = evaluate(&res.agent, &mut env, 2, 9);
        let e2 = evaluate(&res.agent, &mut env, 2, 9);
        assert_eq!(e1.reward.to_bits(), e2.reward.to_bits());
        assert_eq!(e1.sum_rate_bps.to_bits(), e2.sum_rate_bps.to_bits());
        assert!(e1.served_users > 0.0, "heuristic should serve someone");
    }
}
