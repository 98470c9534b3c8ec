use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Affine;
use crate::model::logistic;

/// Number of trainable parameters: `alpha, beta, w1, c1, w2, c2`.
pub const SOFT_PARAMS: usize = 6;

/// Soft mixture `y = p1 f1 + (1 - p1) f2` with `p1 = sigmoid((alpha x + beta + h) / T)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoftMoe {
    pub alpha: f64,
    pub beta: f64,
    /// Fixed external bias.
    pub h: f64,
    pub temp: f64,
    pub experts: [Affine; 2],
    /// Weight of `alpha^2 + beta^2` in the loss.
    pub reg: f64,
    pub lr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SoftOutput {
    pub prediction: f64,
    pub p1: f64,
}

impl SoftMoe {
    /// Experts `w, c ~ U(-0.5, 0.5)`, `alpha ~ U(0.5, 1.5)`, `beta = 0`.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, h: f64, temp: f64, lr: f64, reg: f64) -> Self {
        let experts = [Affine::random(rng), Affine::random(rng)];
        Self {
            alpha: rng.random_range(0.5..1.5),
            beta: 0.0,
            h,
            temp,
            experts,
            reg,
            lr,
        }
    }

    pub fn p1(&self, x: f64) -> f64 {
        logistic((self.alpha * x + self.beta + self.h) / self.temp)
    }

    pub fn forward(&self, x: f64) -> SoftOutput {
        let p1 = self.p1(x);
        let [f1, f2] = self.experts;
        SoftOutput {
            prediction: p1 * f1.eval(x) + (1.0 - p1) * f2.eval(x),
            p1,
        }
    }

    /// Learned decision boundary `x* = -(beta + h) / alpha`; `None` when `alpha == 0`.
    pub fn boundary(&self) -> Option<f64> {
        (self.alpha != 0.0).then(|| -(self.beta + self.h) / self.alpha)
    }

    /// `E_x u = 2 E_x p1 - 1` over the given inputs.
    pub fn expected_imbalance(&self, xs: &[f64]) -> f64 {
        let mean_p1 = xs.iter().map(|&x| self.p1(x)).sum::<f64>() / xs.len() as f64;
        2.0 * mean_p1 - 1.0
    }

    /// Mean squared error against `target` over the given inputs (no regularization).
    pub fn mse(&self, xs: &[f64], target: impl Fn(f64) -> f64) -> f64 {
        xs.iter()
            .map(|&x| (self.forward(x).prediction - target(x)).powi(2))
            .sum::<f64>()
            / xs.len() as f64
    }

    pub fn params(&self) -> [f64; SOFT_PARAMS] {
        let [f1, f2] = self.experts;
        [self.alpha, self.beta, f1.w, f1.c, f2.w, f2.c]
    }

    pub fn set_params(&mut self, p: [f64; SOFT_PARAMS]) {
        self.alpha = p[0];
        self.beta = p[1];
        self.experts = [Affine::new(p[2], p[3]), Affine::new(p[4], p[5])];
    }

    /// Training objective `mean((y_hat - y)^2) + reg (alpha^2 + beta^2)`.
    pub fn loss(&self, batch: &[(f64, f64)]) -> f64 {
        let mse = batch
            .iter()
            .map(|&(x, y)| (self.forward(x).prediction - y).powi(2))
            .sum::<f64>()
            / batch.len() as f64;
        mse + self.reg * (self.alpha * self.alpha + self.beta * self.beta)
    }

    /// Loss and its analytic gradient, ordered as in [`SoftMoe::params`].
    pub fn loss_and_grad(&self, batch: &[(f64, f64)]) -> (f64, [f64; SOFT_PARAMS]) {
        assert!(!batch.is_empty(), "empty batch");
        let n = batch.len() as f64;
        let [f1, f2] = self.experts;
        let mut g = [0.0; SOFT_PARAMS];
        let mut sse = 0.0;
        for &(x, y) in batch {
            let p1 = self.p1(x);
            let (v1, v2) = (f1.eval(x), f2.eval(x));
            let err = p1 * v1 + (1.0 - p1) * v2 - y;
            sse += err * err;
            let d = 2.0 * err / n;
            // d y_hat / d z with z = (alpha x + beta + h) / T
            let dz = d * (v1 - v2) * p1 * (1.0 - p1) / self.temp;
            g[0] += dz * x;
            g[1] += dz;
            g[2] += d * p1 * x;
            g[3] += d * p1;
            g[4] += d * (1.0 - p1) * x;
            g[5] += d * (1.0 - p1);
        }
        g[0] += 2.0 * self.reg * self.alpha;
        g[1] += 2.0 * self.reg * self.beta;
        let loss = sse / n + self.reg * (self.alpha * self.alpha + self.beta * self.beta);
        (loss, g)
    }

    /// One SGD step; returns the loss before the update.
    pub fn sgd_step(&mut self, batch: &[(f64, f64)]) -> f64 {
        let (loss, grad) = self.loss_and_grad(batch);
        let mut p = self.params();
        for (pi, gi) in p.iter_mut().zip(grad) {
            *pi -= self.lr * gi;
        }
        self.set_params(p);
        loss
    }

    /// Same model with the experts' roles exchanged.
    pub fn label_swapped(&self) -> Self {
        Self {
            alpha: -self.alpha,
            beta: -self.beta,
            h: -self.h,
            experts: [self.experts[1], self.experts[0]],
            ..*self
        }
    }
}
