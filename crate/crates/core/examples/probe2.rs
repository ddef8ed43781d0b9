//! Scratch runner comparing fixed-action baselines against the heuristic.

use std::sync::Arc;

use slicesim::agents::greedy_allocate;
use slicesim::config::ScenarioConfig;
use slicesim::env::{encode_allocation, SliceEnv};
use slicesim::scenario::Scenario;

fn replay(env: &mut SliceEnv, action: &[f64], episodes: usize, label: &str) {
    let mut reward = 0.0;
    let mut served = 0.0;
    let mut slots = 0usize;
    let mut by_kind = [0.0f64; 3];
    let mut norm_by_kind = [0.0f64; 3];
    for e in 0..episodes {
        env.reset(1000 + e as u64);
        loop {
            let out = env.step(action).expect("fixed action decodes");
            reward += out.eval.reward;
            for v in &out.eval.violations {
                let i = match v.kind {
                    slicesim::env::ConstraintKind::RateFloor => 0,
                    slicesim::env::ConstraintKind::DelayBudget => 1,
                    slicesim::env::ConstraintKind::LinkCapacity => 2,
                };
                by_kind[i] += 1.0;
                norm_by_kind[i] += v.normalized;
            }
            served += out.eval.served_users as f64;
            slots += 1;
            if out.done {
                break;
            }
        }
    }
    let n = slots as f64;
    println!(
        "{label:24} reward {:8.4}  served {:5.2}  rate/delay/link counts {:.2}/{:.2}/{:.2}  norms {:.3}/{:.3}/{:.3}",
        reward / n,
        served / n,
        by_kind[0] / n,
        by_kind[1] / n,
        by_kind[2] / n,
        norm_by_kind[0] / n,
        norm_by_kind[1] / n,
        norm_by_kind[2] / n
    );
}

fn main() {
    let cfg = ScenarioConfig::desk();
    let scn = Arc::new(Scenario::generate(&cfg).expect("desk builds"));
    let mut env = SliceEnv::new(Arc::clone(&scn));

    let zero = vec![0.0; env.action_dim()];
    replay(&mut env, &zero, 100, "zero action");

    env.reset(42);
    let alloc = greedy_allocate(&scn, env.channels(), env.demands());
    let frozen = encode_allocation(&scn, env.layout(), &alloc);
    replay(&mut env, &frozen, 100, "frozen greedy slot");

    // same assignment at a sweep of uniform power fractions
    for alpha in [1.0, 0.5, 0.25, 0.1, 0.05, 0.02] {
        let mut scaled = frozen.clone();
        for bs in 0..scn.radio.n_bs {
            for k in 0..scn.radio.n_subchannels {
                let idx = env.layout().power_idx(bs, k);
                if alloc.radio.assign[bs][k].is_some() {
                    scaled[idx] = 2.0 * alpha - 1.0;
                }
            }
        }
        replay(&mut env, &scaled, 100, &format!("frozen @ {alpha:4.2} power"));
    }

    let mut reward = 0.0;
    let mut slots = 0;
    for e in 0..100 {
        env.reset(1000 + e as u64);
        loop {
            let a = greedy_allocate(&scn, env.channels(), env.demands());
            let out = env.step_allocation(&a).expect("greedy is well formed");
            reward += out.eval.reward;
            slots += 1;
            if out.done {
                break;
            }
        }
    }
    println!("greedy per-slot          reward {:8.4}", reward / slots as f64);
}
