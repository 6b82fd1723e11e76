//! First-order optimizers.

use alloc::vec;
use alloc::vec::Vec;

use crate::gcn::{GcnGrads, GcnModel};

/// Adam with L2 weight decay folded into the gradient.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(model: &GcnModel, lr: f64) -> Self {
        let zeros: Vec<Vec<f64>> = model.params().map(|p| vec![0.0; p.len()]).collect();
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, t: 0, m: zeros.clone(), v: zeros }
    }

    pub fn step(&mut self, model: &mut GcnModel, grads: &GcnGrads, weight_decay: f64) {
        self.t += 1;
        let bc1 = 1.0 - libm::pow(self.beta1, f64::from(self.t));
        let bc2 = 1.0 - libm::pow(self.beta2, f64::from(self.t));
        for (((p, g), m), v) in model.params_mut().zip(grads.blocks()).zip(&mut self.m).zip(&mut self.v) {
            for k in 0..p.len() {
                let gk = g[k] + weight_decay * p[k];
                m[k] = self.beta1 * m[k] + (1.0 - self.beta1) * gk;
                v[k] = self.beta2 * v[k] + (1.0 - self.beta2) * gk * gk;
                let m_hat = m[k] / bc1;
                let v_hat = v[k] / bc2;
                p[k] -= self.lr * m_hat / (libm::sqrt(v_hat) + self.eps);
            }
        }
    }
}

/// SGD with optional Nesterov momentum on a flat parameter vector:
/// `b ← m·b + g`, `x ← x − α·(g + m·b)`. With `m = 0` this is plain SGD.
#[derive(Debug, Clone)]
pub struct NesterovSgd {
    lr: f64,
    momentum: f64,
    buf: Vec<f64>,
}

impl NesterovSgd {
    pub fn new(n: usize, lr: f64, momentum: f64) -> Self {
        Self { lr, momentum, buf: vec![0.0; n] }
    }

    pub fn buffer(&self) -> &[f64] {
        &self.buf
    }

    pub fn step(&mut self, x: &mut [f64], grad: &[f64]) {
        for ((xk, &g), b) in x.iter_mut().zip(grad).zip(self.buf.iter_mut()) {
            if self.momentum == 0.0 {
                *xk -= self.lr * g;
            } else {
                *b = self.momentum * *b + g;
                *xk -= self.lr * (g + self.momentum * *b);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_sgd_step() {
        let mut opt = NesterovSgd::new(2, 0.1, 0.0);
        let mut x = [1.0, -1.0];
        opt.step(&mut x, &[2.0, 0.5]);
        assert_eq!(x, [0.8, -1.05]);
    }

    #[test]
    fn nesterov_minimizes_quadratic() {
        // f(x) = ½ Σ c_k x_k²
        let c = [1.0, 10.0];
        let mut x = [3.0, -2.0];
        let mut opt = NesterovSgd::new(2, 0.05, 0.9);
        for _ in 0..300 {
            let g = [c[0] * x[0], c[1] * x[1]];
            opt.step(&mut x, &g);
        }
        assert!(x[0].abs() < 1e-6 && x[1].abs() < 1e-6, "{x:?}");
    }

    #[test]
    fn nesterov_first_step_matches_formula() {
        let mut opt = NesterovSgd::new(1, 0.1, 0.9);
        let mut x = [0.0];
        opt.step(&mut x, &[1.0]);
        // b = 1, x = -0.1 (1 + 0.9)
        assert!((x[0] + 0.19).abs() < 1e-15);
        assert_eq!(opt.buffer(), &[1.0]);
    }
}
