//! Scratch runner printing worst-case rate quantiles under a full grid.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use slicesim::config::ScenarioConfig;
use slicesim::radio::{realize_channels, worst_case_user_rate, RadioAllocation};
use slicesim::scenario::Scenario;

fn main() {
    let cfg = ScenarioConfig::desk();
    let scn = Arc::new(Scenario::generate(&cfg).expect("desk builds"));
    let users_by_bs = scn.users_by_bs();
    let mut rng = ChaCha12Rng::seed_from_u64(99);

    for alpha in [0.25, 0.5, 1.0] {
        let cap = scn.radio.p_max_w / scn.radio.n_subchannels as f64;
        let mut rates: Vec<f64> = Vec::new();
        for _ in 0..2000 {
            let ch = realize_channels(&scn.radio, &mut rng);
            let mut alloc = RadioAllocation::empty(scn.radio.n_bs, scn.radio.n_subchannels);
            for (bs, pool) in users_by_bs.iter().enumerate() {
                for k in 0..scn.radio.n_subchannels {
                    alloc.assign[bs][k] = Some(pool[k % pool.len()]);
                    alloc.power_w[bs][k] = alpha * cap;
                }
            }
            for pool in &users_by_bs {
                for &u in pool.iter() {
                    rates.push(worst_case_user_rate(&scn.radio, &ch, &alloc, u));
                }
            }
        }
        rates.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let q = |p: f64| rates[(p * rates.len() as f64) as usize] / 1e3;
        println!(
            "alpha {alpha:4.2}: q01 {:8.2}k q05 {:8.2}k q25 {:8.2}k q50 {:8.2}k q95 {:8.2}k",
            q(0.01),
            q(0.05),
            q(0.25),
            q(0.50),
            q(0.95)
        );
    }
}
