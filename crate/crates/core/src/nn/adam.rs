//! Adam with bias correction and a non-finite-gradient guard.

#[derive(Debug, Clone)]
pub struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

impl Adam {
    pub fn new(n_params: usize) -> Self {
        Adam {
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    /// Applies one update in place. A gradient containing NaN or infinity
    /// is dropped whole (returns false) so one bad batch cannot poison the
    /// parameters or the moment estimates.
    pub fn step(&mut self, lr: f64, theta: &mut [f64], grad: &[f64]) -> bool {
        assert_eq!(theta.len(), self.m.len(), "optimizer bound to another shape");
        assert_eq!(grad.len(), self.m.len());
        if grad.iter().any(|g| !g.is_finite()) {
            return false;
        }
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..theta.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            theta[i] -= lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        true
    }

    /// Moment vectors flattened for checkpointing: `[m, v, t]`.
    pub fn state(&self) -> Vec<f64> {
        let mut out = self.m.clone();
        out.extend_from_slice(&self.v);
        out.push(self.t as f64);
        out
    }

    pub fn restore(&mut self, state: &[f64]) {
        let n = self.m.len();
        assert_eq!(state.len(), 2 * n + 1, "optimizer state size mismatch");
        self.m.copy_from_slice(&state[..n]);
        self.v.copy_from_slice(&state[n..2 * n]);
        self.t = state[2 * n] as u64;
    }
}
