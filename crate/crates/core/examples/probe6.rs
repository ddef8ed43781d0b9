//! Scratch check: MLP input gradients against central differences.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use slicesim::nn::{Mlp, OutputActivation};

fn main() {
    let mut rng = ChaCha12Rng::seed_from_u64(5);
    for &act in &[OutputActivation::Identity, OutputActivation::Tanh] {
        let net = Mlp::new(4, &[6, 5], 3, act, &mut rng);
        let x: Vec<f64> = (0..4).map(|i| 0.3 * (i as f64) - 0.5).collect();
        let w = [0.7, -1.3, 0.4];

        let cache = net.forward_cache(&x);
        let (_, d_in) = net.backward(&cache, &w);

        let h = 1e-6;
        let mut worst = 0.0f64;
        for i in 0..x.len() {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            let f = |v: &[f64]| -> f64 {
                net.forward(v).iter().zip(&w).map(|(o, &c)| o * c).sum()
            };
            let num = (f(&xp) - f(&xm)) / (2.0 * h);
            let rel = (d_in[i] - num).abs() / num.abs().max(1e-9);
            worst = worst.max(rel);
            println!("{act:?} dx[{i}]: analytic {:+.6e} numeric {:+.6e} rel {rel:.2e}", d_in[i], num);
        }
        println!("worst {worst:.3e}");
    }
}
