//! Fully connected network with ReLU hidden layers.

use rand::Rng;

use super::init_uniform;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputActivation {
    Identity,
    Tanh,
}

/// Parameters live in one flat vector, layer by layer as `[W, b]` with `W`
/// row-major `(out, in)`.
#[derive(Debug, Clone)]
pub struct Mlp {
    dims: Vec<usize>,
    out_act: OutputActivation,
    pub theta: Vec<f64>,
}

/// Everything the backward pass needs: layer inputs and pre-activations.
pub struct MlpCache {
    acts: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
}

impl MlpCache {
    pub fn output(&self) -> &[f64] {
        self.acts.last().expect("cache always holds the output")
    }
}

impl Mlp {
    pub fn new(
        in_dim: usize,
        hidden: &[usize],
        out_dim: usize,
        out_act: OutputActivation,
        rng: &mut impl Rng,
    ) -> Self {
        let mut dims = Vec::with_capacity(hidden.len() + 2);
        dims.push(in_dim);
        dims.extend_from_slice(hidden);
        dims.push(out_dim);
        let n_params: usize = dims.windows(2).map(|w| w[1] * (w[0] + 1)).sum();
        let mut theta = Vec::with_capacity(n_params);
        for w in dims.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            for _ in 0..fan_out * fan_in + fan_out {
                theta.push(init_uniform(rng, fan_in));
            }
        }
        Mlp { dims, out_act, theta }
    }

    pub fn in_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn out_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn n_layers(&self) -> usize {
        self.dims.len() - 1
    }

    pub fn param_count(&self) -> usize {
        self.theta.len()
    }

    /// Shrinks the last layer's weights and biases; keeps early actor
    /// outputs near zero so exploration starts unbiased.
    pub fn scale_final_layer(&mut self, s: f64) {
        let last_in = self.dims[self.dims.len() - 2];
        let last_out = *self.dims.last().unwrap();
        let start = self.theta.len() - last_out * (last_in + 1);
        for v in &mut self.theta[start..] {
            *v *= s;
        }
    }

    fn layer_offset(&self, layer: usize) -> usize {
        self.dims
            .windows(2)
            .take(layer)
            .map(|w| w[1] * (w[0] + 1))
            .sum()
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.forward_cache(x).acts.pop().unwrap()
    }

    pub fn forward_cache(&self, x: &[f64]) -> MlpCache {
        assert_eq!(x.len(), self.in_dim(), "input width mismatch");
        let n_layers = self.n_layers();
        let mut acts = Vec::with_capacity(n_layers + 1);
        let mut pre = Vec::with_capacity(n_layers);
        acts.push(x.to_vec());
        let mut off = 0;
        for (l, w) in self.dims.windows(2).enumerate() {
            let (in_dim, out_dim) = (w[0], w[1]);
            let weights = &self.theta[off..off + out_dim * in_dim];
            let bias = &self.theta[off + out_dim * in_dim..off + out_dim * (in_dim + 1)];
            off += out_dim * (in_dim + 1);
            let input = acts.last().unwrap();
            let mut z = bias.to_vec();
            for (o, zo) in z.iter_mut().enumerate() {
                let row = &weights[o * in_dim..(o + 1) * in_dim];
                *zo += row.iter().zip(input).map(|(&w, &a)| w * a).sum::<f64>();
            }
            let a = if l + 1 == n_layers {
                match self.out_act {
                    OutputActivation::Identity => z.clone(),
                    OutputActivation::Tanh => z.iter().map(|&v| v.tanh()).collect(),
                }
            } else {
                z.iter().map(|&v| v.max(0.0)).collect()
            };
            pre.push(z);
            acts.push(a);
        }
        MlpCache { acts, pre }
    }

    /// Backpropagates `d_out` (gradient of some scalar loss with respect to
    /// the network output). Returns the parameter gradient in `theta`
    /// layout and the gradient with respect to the input.
    pub fn backward(&self, cache: &MlpCache, d_out: &[f64]) -> (Vec<f64>, Vec<f64>) {
        assert_eq!(d_out.len(), self.out_dim());
        let n_layers = self.n_layers();
        let mut grad = vec![0.0; self.theta.len()];
        let mut dz: Vec<f64> = match self.out_act {
            OutputActivation::Identity => d_out.to_vec(),
            OutputActivation::Tanh => {
                let y = cache.acts.last().unwrap();
                d_out.iter().zip(y).map(|(&d, &a)| d * (1.0 - a * a)).collect()
            }
        };
        for l in (0..n_layers).rev() {
            let (in_dim, out_dim) = (self.dims[l], self.dims[l + 1]);
            let off = self.layer_offset(l);
            let input = &cache.acts[l];
            {
                let gw = &mut grad[off..off + out_dim * (in_dim + 1)];
                for (o, &d) in dz.iter().enumerate() {
                    let row = &mut gw[o * in_dim..(o + 1) * in_dim];
                    for (g, &a) in row.iter_mut().zip(input) {
                        *g += d * a;
                    }
                }
                for (o, &d) in dz.iter().enumerate() {
                    gw[out_dim * in_dim + o] += d;
                }
            }
            let weights = &self.theta[off..off + out_dim * in_dim];
            let mut dx = vec![0.0; in_dim];
            for (o, &d) in dz.iter().enumerate() {
                let row = &weights[o * in_dim..(o + 1) * in_dim];
                for (x, &w) in dx.iter_mut().zip(row) {
                    *x += d * w;
                }
            }
            if l == 0 {
                return (grad, dx);
            }
            let z_prev = &cache.pre[l - 1];
            dz = dx
                .iter()
                .zip(z_prev)
                .map(|(&d, &z)| if z > 0.0 { d } else { 0.0 })
                .collect();
        }
        unreachable!("loop always returns at layer 0")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{max_rel_err, numeric_grad};
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn forward_matches_hand_computation() {
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        let mut net = Mlp::new(2, &[2], 1, OutputActivation::Identity, &mut rng);
        // W0 = [[1, 2], [-1, 0.5]], b0 = [0, 1], W1 = [[1, -1]], b1 = [0.5]
        net.theta = vec![1.0, 2.0, -1.0, 0.5, 0.0, 1.0, 1.0, -1.0, 0.5];
        let y = net.forward(&[1.0, 1.0]);
        // z0 = [3, 0.5] -> relu [3, 0.5]; y = 3 - 0.5 + 0.5 = 3
        assert!((y[0] - 3.0).abs() < 1e-15);
        // negative pre-activation is cut
        let y2 = net.forward(&[-1.0, 0.0]);
        // z0 = [-1, 2] -> relu [0, 2]; y = 0 - 2 + 0.5 = -1.5
        assert!((y2[0] + 1.5).abs() < 1e-15);
    }

    #[test]
    fn tanh_output_saturates() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let mut net = Mlp::new(1, &[], 1, OutputActivation::Tanh, &mut rng);
        net.theta = vec![100.0, 0.0];
        assert!((net.forward(&[1.0])[0] - 1.0).abs() < 1e-12);
        assert!((net.forward(&[-1.0])[0] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn parameter_count_and_final_scale() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let mut net = Mlp::new(3, &[5, 4], 2, OutputActivation::Tanh, &mut rng);
        assert_eq!(net.param_count(), 5 * 4 + 4 * 6 + 2 * 5);
        let before = net.theta.clone();
        net.scale_final_layer(1e-3);
        let cut = net.param_count() - 2 * 5;
        assert_eq!(&net.theta[..cut], &before[..cut]);
        for (a, b) in net.theta[cut..].iter().zip(&before[cut..]) {
            assert!((a - b * 1e-3).abs() < 1e-18);
        }
    }

    fn gradcheck(out_act: OutputActivation, seed: u64) {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let net = Mlp::new(4, &[8, 6], 3, out_act, &mut rng);
        let x: Vec<f64> = (0..4).map(|i| 0.3 + 0.2 * i as f64).collect();
        // scalar loss: weighted sum of outputs, weights fixed
        let w = [1.0, -0.7, 0.4];
        let cache = net.forward_cache(&x);
        let d_out: Vec<f64> = w.to_vec();
        let (g_theta, g_x) = net.backward(&cache, &d_out);

        let mut f_theta = |theta: &[f64]| {
            let mut probe = net.clone();
            probe.theta = theta.to_vec();
            probe.forward(&x).iter().zip(&w).map(|(y, &c)| y * c).sum()
        };
        let num_theta = numeric_grad(&mut f_theta, &net.theta, 1e-5);
        assert!(
            max_rel_err(&g_theta, &num_theta) < 1e-6,
            "theta gradient mismatch"
        );

        let mut f_x =
            |xx: &[f64]| net.forward(xx).iter().zip(&w).map(|(y, &c)| y * c).sum();
        let num_x = numeric_grad(&mut f_x, &x, 1e-5);
        assert!(max_rel_err(&g_x, &num_x) < 1e-6, "input gradient mismatch");
    }

    #[test]
    fn gradients_match_central_differences() {
        gradcheck(OutputActivation::Identity, 3);
        gradcheck(OutputActivation::Tanh, 4);
    }

    #[test]
    fn input_width_mismatch_panics() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let net = Mlp::new(3, &[4], 1, OutputActivation::Identity, &mut rng);
        let r = std::panic::catch_unwind(|| net.forward(&[1.0, 2.0]));
        assert!(r.is_err());
    }
}
