//! Single-layer LSTM cell with truncation-free backpropagation through
//! time. The recurrent policy and its critic run this over whole episodes.

use rand::Rng;

use super::{init_uniform, sigmoid};

/// Gate order in the stacked parameter blocks: input, forget, cell, output.
///
/// Flat layout: `W (4H x I)`, then `U (4H x H)`, then `b (4H)`.
#[derive(Debug, Clone)]
pub struct LstmCell {
    in_dim: usize,
    hidden: usize,
    pub theta: Vec<f64>,
}

/// Per-step values the backward pass replays.
pub struct LstmStepCache {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    i: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
    o: Vec<f64>,
    tanh_c: Vec<f64>,
}

impl LstmCell {
    pub fn new(in_dim: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let n = 4 * hidden * in_dim + 4 * hidden * hidden + 4 * hidden;
        let mut theta = Vec::with_capacity(n);
        for _ in 0..4 * hidden * in_dim {
            theta.push(init_uniform(rng, in_dim));
        }
        for _ in 0..4 * hidden * hidden {
            theta.push(init_uniform(rng, hidden));
        }
        for gate in 0..4 {
            for _ in 0..hidden {
                // forget gate starts open so early training can carry state
                theta.push(if gate == 1 { 1.0 } else { 0.0 });
            }
        }
        LstmCell { in_dim, hidden, theta }
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn param_count(&self) -> usize {
        self.theta.len()
    }

    pub fn zero_state(&self) -> (Vec<f64>, Vec<f64>) {
        (vec![0.0; self.hidden], vec![0.0; self.hidden])
    }

    fn split(&self) -> (&[f64], &[f64], &[f64]) {
        let (h, i) = (self.hidden, self.in_dim);
        let w_end = 4 * h * i;
        let u_end = w_end + 4 * h * h;
        (&self.theta[..w_end], &self.theta[w_end..u_end], &self.theta[u_end..])
    }

    /// One step: returns the new `(h, c)` and the cache for BPTT.
    pub fn forward_step(
        &self,
        x: &[f64],
        h_prev: &[f64],
        c_prev: &[f64],
    ) -> (Vec<f64>, Vec<f64>, LstmStepCache) {
        assert_eq!(x.len(), self.in_dim, "input width mismatch");
        assert_eq!(h_prev.len(), self.hidden);
        assert_eq!(c_prev.len(), self.hidden);
        let hdim = self.hidden;
        let (w, u, b) = self.split();

        // z = W x + U h + b, four stacked gate blocks
        let mut z = b.to_vec();
        for (row, zr) in z.iter_mut().enumerate() {
            let wr = &w[row * self.in_dim..(row + 1) * self.in_dim];
            let ur = &u[row * hdim..(row + 1) * hdim];
            *zr += wr.iter().zip(x).map(|(&a, &v)| a * v).sum::<f64>()
                + ur.iter().zip(h_prev).map(|(&a, &v)| a * v).sum::<f64>();
        }
        let i: Vec<f64> = z[..hdim].iter().map(|&v| sigmoid(v)).collect();
        let f: Vec<f64> = z[hdim..2 * hdim].iter().map(|&v| sigmoid(v)).collect();
        let g: Vec<f64> = z[2 * hdim..3 * hdim].iter().map(|&v| v.tanh()).collect();
        let o: Vec<f64> = z[3 * hdim..].iter().map(|&v| sigmoid(v)).collect();

        let mut c = vec![0.0; hdim];
        for idx in 0..hdim {
            c[idx] = f[idx] * c_prev[idx] + i[idx] * g[idx];
        }
        let tanh_c: Vec<f64> = c.iter().map(|&v| v.tanh()).collect();
        let h: Vec<f64> = o.iter().zip(&tanh_c).map(|(&ov, &tv)| ov * tv).collect();

        let cache = LstmStepCache {
            x: x.to_vec(),
            h_prev: h_prev.to_vec(),
            c_prev: c_prev.to_vec(),
            i,
            f,
            g,
            o,
            tanh_c,
        };
        (h, c, cache)
    }

    /// One BPTT step. `d_h` and `d_c` are the incoming gradients on this
    /// step's outputs; parameter gradients accumulate into `grad` (same
    /// layout as `theta`). Returns gradients for the step inputs.
    pub fn backward_step(
        &self,
        cache: &LstmStepCache,
        d_h: &[f64],
        d_c: &[f64],
        grad: &mut [f64],
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        assert_eq!(grad.len(), self.theta.len());
        let hdim = self.hidden;
        let (w, u, _) = self.split();

        let mut dz = vec![0.0; 4 * hdim];
        let mut d_c_prev = vec![0.0; hdim];
        for idx in 0..hdim {
            let (i, f, g, o) = (cache.i[idx], cache.f[idx], cache.g[idx], cache.o[idx]);
            let tc = cache.tanh_c[idx];
            let d_o = d_h[idx] * tc;
            let d_c_total = d_c[idx] + d_h[idx] * o * (1.0 - tc * tc);
            let d_i = d_c_total * g;
            let d_f = d_c_total * cache.c_prev[idx];
            let d_g = d_c_total * i;
            d_c_prev[idx] = d_c_total * f;
            dz[idx] = d_i * i * (1.0 - i);
            dz[hdim + idx] = d_f * f * (1.0 - f);
            dz[2 * hdim + idx] = d_g * (1.0 - g * g);
            dz[3 * hdim + idx] = d_o * o * (1.0 - o);
        }

        let w_end = 4 * hdim * self.in_dim;
        let u_end = w_end + 4 * hdim * hdim;
        for (row, &d) in dz.iter().enumerate() {
            let gw = &mut grad[row * self.in_dim..(row + 1) * self.in_dim];
            for (gv, &xv) in gw.iter_mut().zip(&cache.x) {
                *gv += d * xv;
            }
        }
        for (row, &d) in dz.iter().enumerate() {
            let gu = &mut grad[w_end + row * hdim..w_end + (row + 1) * hdim];
            for (gv, &hv) in gu.iter_mut().zip(&cache.h_prev) {
                *gv += d * hv;
            }
        }
        for (row, &d) in dz.iter().enumerate() {
            grad[u_end + row] += d;
        }

        let mut d_x = vec![0.0; self.in_dim];
        let mut d_h_prev = vec![0.0; hdim];
        for (row, &d) in dz.iter().enumerate() {
            let wr = &w[row * self.in_dim..(row + 1) * self.in_dim];
            for (dxv, &wv) in d_x.iter_mut().zip(wr) {
                *dxv += d * wv;
            }
            let ur = &u[row * hdim..(row + 1) * hdim];
            for (dhv, &uv) in d_h_prev.iter_mut().zip(ur) {
                *dhv += d * uv;
            }
        }
        (d_x, d_h_prev, d_c_prev)
    }

    /// Runs a whole sequence from the zero state; convenience for forward
    /// passes that only need the hidden trajectory.
    pub fn forward_sequence(&self, xs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let (mut h, mut c) = self.zero_state();
        let mut out = Vec::with_capacity(xs.len());
        for x in xs {
            let (h2, c2, _) = self.forward_step(x, &h, &c);
            h = h2;
            c = c2;
            out.push(h.clone());
        }
        out
    }
}
