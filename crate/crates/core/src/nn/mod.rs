//! Small dense networks with hand-written backward passes.
//!
//! Every module keeps all of its parameters in one flat `Vec<f64>` and
//! produces gradients in the same layout, so the optimizer, Polyak
//! averaging, and checkpointing never need to know about layer structure.
//! Backward passes also return gradients with respect to the inputs, which
//! is what lets a critic drive an actor.

pub mod adam;
pub mod checkpoint;
pub mod lstm;
pub mod mlp;

pub use adam::Adam;
pub use lstm::LstmCell;
pub use mlp::{Mlp, OutputActivation};

use rand::Rng;

pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Uniform `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` draw.
pub(crate) fn init_uniform(rng: &mut impl Rng, fan_in: usize) -> f64 {
    let bound = 1.0 / (fan_in as f64).sqrt();
    rng.gen_range(-bound..=bound)
}

/// Polyak averaging: `target = (1 - tau) * target + tau * online`.
pub fn soft_update(target: &mut [f64], online: &[f64], tau: f64) {
    assert_eq!(target.len(), online.len());
    for (t, &o) in target.iter_mut().zip(online) {
        *t += tau * (o - *t);
    }
}

/// Scales `grad` down so its L2 norm is at most `max_norm`. Returns the
/// pre-clip norm.
pub fn clip_global_norm(grad: &mut [f64], max_norm: f64) -> f64 {
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        for g in grad.iter_mut() {
            *g *= s;
        }
    }
    norm
}

/// Central-difference gradient of a scalar function, entry by entry.
pub fn numeric_grad(f: &mut dyn FnMut(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    let mut out = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let orig = probe[i];
        probe[i] = orig + h;
        let hi = f(&probe);
        probe[i] = orig - h;
        let lo = f(&probe);
        probe[i] = orig;
        out.push((hi - lo) / (2.0 * h));
    }
    out
}

/// Worst relative disagreement between two gradient vectors, with a
/// magnitude floor so that near-zero entries are compared absolutely.
pub fn max_rel_err(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y).abs() / x.abs().max(y.abs()).max(1e-6))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn soft_update_decays_geometrically() {
        let mut target = vec![1.0];
        let online = vec![0.0];
        for _ in 0..1000 {
            soft_update(&mut target, &online, 0.001);
        }
        // (1 - 0.001)^1000 = 0.3677
        assert!((target[0] - 0.999f64.powi(1000)).abs() < 1e-12);
        assert!((target[0] - 0.3677).abs() < 1e-4);
    }

    #[test]
    fn clip_caps_the_norm() {
        let mut g = vec![3.0, 4.0];
        let norm = clip_global_norm(&mut g, 1.0);
        assert_eq!(norm, 5.0);
        assert!((g[0] - 0.6).abs() < 1e-15);
        assert!((g[1] - 0.8).abs() < 1e-15);
        let mut small = vec![0.3, 0.4];
        clip_global_norm(&mut small, 1.0);
        assert_eq!(small, vec![0.3, 0.4]);
    }

    #[test]
    fn numeric_grad_of_quadratic() {
        let mut f = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>();
        let g = numeric_grad(&mut f, &[1.0, -2.0, 0.5], 1e-5);
        let expect = [2.0, -4.0, 1.0];
        assert!(max_rel_err(&g, &expect) < 1e-9);
    }

    #[test]
    fn rel_err_floors_small_magnitudes() {
        // absolute error 1e-8 on tiny entries stays below 1e-2
        let a = [1e-9];
        let b = [1.1e-8];
        assert!(max_rel_err(&a, &b) < 1.1e-2);
    }
}
