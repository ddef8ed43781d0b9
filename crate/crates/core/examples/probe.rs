//! Scratch runner for eyeballing training curves while tuning.

use std::env;
use std::sync::Arc;
use std::time::Instant;

use slicesim::agents::{train, Algorithm};
use slicesim::config::ScenarioConfig;
use slicesim::env::SliceEnv;
use slicesim::harness::final_decile_mean;
use slicesim::scenario::Scenario;

fn main() {
    let mut args = env::args().skip(1);
    let algo: Algorithm = args.next().expect("algo").parse().expect("algo name");
    let seed: u64 = args.next().map(|s| s.parse().unwrap()).unwrap_or(1);
    let episodes: usize = args.next().map(|s| s.parse().unwrap()).unwrap_or(500);

    let cfg = ScenarioConfig::desk();
    let scn = Arc::new(Scenario::generate(&cfg).expect("desk builds"));
    let mut env = SliceEnv::new(Arc::clone(&scn));
    let t0 = Instant::now();
    let out = train(algo, &mut env, &cfg.agent, episodes, seed);
    let dt = t0.elapsed();

    for (i, chunk) in out.curve.chunks(50).enumerate() {
        let n = chunk.len() as f64;
        let reward = chunk.iter().map(|e| e.reward).sum::<f64>() / n;
        let viol = chunk.iter().map(|e| e.violations).sum::<f64>() / n;
        let rate = chunk.iter().map(|e| e.sum_rate_bps).sum::<f64>() / n / 1e6;
        let served = chunk.iter().map(|e| e.served_users).sum::<f64>() / n;
        println!(
            "ep {:3}..{:3}  reward {reward:8.4}  viol {viol:6.3}  rate {rate:6.3}M  served {served:5.2}",
            i * 50,
            i * 50 + chunk.len()
        );
    }
    let whole = out.curve.iter().map(|e| e.reward).sum::<f64>() / out.curve.len() as f64;
    println!(
        "{algo} seed {seed}: whole {whole:.4}  final-decile {:.4}  ({dt:.1?})",
        final_decile_mean(&out.curve)
    );
}
