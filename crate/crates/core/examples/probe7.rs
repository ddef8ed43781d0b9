//! Scratch runner: instrumented DDPG loop printing update statistics.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use slicesim::agents::{Ddpg, ReplayBuffer, RewardStats, Transition};
use slicesim::config::ScenarioConfig;
use slicesim::env::SliceEnv;
use slicesim::scenario::Scenario;

fn main() {
    let cfg = ScenarioConfig::desk();
    let scn = Arc::new(Scenario::generate(&cfg).expect("desk builds"));
    let mut env = SliceEnv::new(Arc::clone(&scn));
    let a = &cfg.agent;
    let mut rng = ChaCha12Rng::seed_from_u64(1);
    let mut agent = Ddpg::new(env.obs_dim(), env.action_dim(), a, &mut rng);
    let mut replay = ReplayBuffer::new(a.buffer_capacity);
    let mut stats = RewardStats::default();

    // random warmup
    let mut obs = env.reset(900);
    for _ in 0..a.warmup_steps {
        let act: Vec<f64> = (0..env.action_dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let out = env.step(&act).expect("warmup ok");
        stats.push(out.eval.reward);
        replay.push(Transition {
            obs: obs.clone(),
            action: act,
            reward: out.eval.reward,
            next_obs: out.obs.clone(),
            done: out.done,
        });
        obs = if out.done { env.reset(rng.gen()) } else { out.obs };
    }

    let layout_probe = env.layout().power_idx(0, 0);
    for e in 0..300usize {
        let decay = 1.0 / (1.0 + a.lr_decay * e as f64);
        let mut ep_reward = 0.0;
        let mut slots = 0;
        let mut last = Default::default();
        let mut mean_power_act = 0.0;
        obs = env.reset(3000 + e as u64);
        loop {
            let act = agent.act(&obs, a.explore_noise * decay, &mut rng);
            mean_power_act += act[layout_probe];
            let out = env.step(&act).expect("act ok");
            stats.push(out.eval.reward);
            ep_reward += out.eval.reward;
            slots += 1;
            replay.push(Transition {
                obs: obs.clone(),
                action: act,
                reward: out.eval.reward,
                next_obs: out.obs.clone(),
                done: out.done,
            });
            obs = out.obs;
            let batch = replay.sample(a.batch, &mut rng);
            last = agent.update(&batch, a.actor_lr * decay, a.critic_lr * decay, &stats.norm());
            if out.done {
                break;
            }
        }
        if e % 25 == 0 {
            println!(
                "ep {e:3} reward {:7.3} critic_loss {:8.4} policy_value {:8.4} mean_target {:8.4} pw_act {:+.3}",
                ep_reward / slots as f64,
                last.critic_loss,
                last.policy_value,
                last.mean_target,
                mean_power_act / slots as f64
            );
        }
    }
}
