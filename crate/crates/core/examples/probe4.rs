//! Scratch runner printing the desk link budget: own and cross gains,
//! noise floor, and SNR/INR at the per-channel power cap.

use slicesim::config::ScenarioConfig;
use slicesim::scenario::Scenario;

fn main() {
    let cfg = ScenarioConfig::desk();
    let scn = Scenario::generate(&cfg).expect("desk builds");
    let r = &scn.radio;
    let cap = r.p_max_w / r.n_subchannels as f64;
    println!("noise_w {:.3e}  per-channel cap {cap} W", r.noise_w);
    for u in 0..r.n_users {
        let own_bs = r.user_bs[u];
        let own = r.gain[own_bs][u];
        let cross: f64 = (0..r.n_bs)
            .filter(|&b| b != own_bs)
            .map(|b| r.gain[b][u])
            .sum();
        println!(
            "user {u} bs {own_bs} dist {:7.1} m  own gain {:.3e} (snr@cap {:9.2})  cross {:.3e} (inr@cap {:9.2})",
            r.user_bs_dist[u],
            own,
            cap * own / r.noise_w,
            cross,
            cap * cross / r.noise_w
        );
    }
}
