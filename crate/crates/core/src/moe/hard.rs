use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Affine;
use crate::model::logistic;

/// Number of trainable parameters: `W1, W2, w1, c1, w2, c2`.
pub const HARD_PARAMS: usize = 6;

/// Hard top-1 mixture with logits `z(x) = W x + (h/2, -h/2)`.
///
/// The forward pass uses only the argmax expert (ties go to expert one).
/// Router gradients follow the straight-through composite
/// `g + p - stopgrad(p)` with `p = softmax(z / T)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HardMoe {
    pub router: [f64; 2],
    pub h: f64,
    pub temp: f64,
    pub experts: [Affine; 2],
    pub lambda_lb: f64,
    /// Weight of `W1^2 + W2^2` in the loss.
    #[serde(default)]
    pub reg: f64,
    pub lr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HardOutput {
    pub prediction: f64,
    pub selected: usize,
    pub p: [f64; 2],
}

/// Batch diagnostics of one evaluation or training step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HardStepStats {
    /// MSE of the hard forward pass.
    pub mse: f64,
    /// `lambda_lb * sum_i (mean p_i - 1/2)^2`.
    pub lb_loss: f64,
    /// `(N1 - N2) / B` of the hard selection.
    pub hard_load: f64,
    /// Mean soft importance `mean_x p_i(x)`.
    pub importance: [f64; 2],
    /// Expert that received no samples, if any.
    pub dead_expert: Option<usize>,
}

impl HardMoe {
    /// Experts `w, c ~ U(-0.5, 0.5)`, router weights `W ~ U(-0.5, 0.5)`.
    pub fn random<R: Rng + ?Sized>(
        rng: &mut R,
        h: f64,
        temp: f64,
        lr: f64,
        lambda_lb: f64,
    ) -> Self {
        let experts = [Affine::random(rng), Affine::random(rng)];
        Self {
            router: [rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)],
            h,
            temp,
            experts,
            lambda_lb,
            reg: 0.0,
            lr,
        }
    }

    pub fn with_reg(self, reg: f64) -> Self {
        Self { reg, ..self }
    }

    pub fn logits(&self, x: f64) -> [f64; 2] {
        [
            self.router[0] * x + 0.5 * self.h,
            self.router[1] * x - 0.5 * self.h,
        ]
    }

    pub fn probs(&self, x: f64) -> [f64; 2] {
        let [z1, z2] = self.logits(x);
        let p1 = logistic((z1 - z2) / self.temp);
        [p1, 1.0 - p1]
    }

    pub fn forward(&self, x: f64) -> HardOutput {
        let [z1, z2] = self.logits(x);
        let selected = if z1 >= z2 { 0 } else { 1 };
        HardOutput {
            prediction: self.experts[selected].eval(x),
            selected,
            p: self.probs(x),
        }
    }

    pub fn params(&self) -> [f64; HARD_PARAMS] {
        let [f1, f2] = self.experts;
        [self.router[0], self.router[1], f1.w, f1.c, f2.w, f2.c]
    }

    pub fn set_params(&mut self, p: [f64; HARD_PARAMS]) {
        self.router = [p[0], p[1]];
        self.experts = [Affine::new(p[2], p[3]), Affine::new(p[4], p[5])];
    }

    /// Hard-forward diagnostics over labelled samples.
    pub fn evaluate(&self, batch: &[(f64, f64)]) -> HardStepStats {
        self.stats_and_grad(batch).0
    }

    /// Diagnostics and the straight-through gradient, ordered as in [`HardMoe::params`].
    pub fn stats_and_grad(&self, batch: &[(f64, f64)]) -> (HardStepStats, [f64; HARD_PARAMS]) {
        assert!(!batch.is_empty(), "empty batch");
        let n = batch.len() as f64;
        let mut g = [0.0; HARD_PARAMS];
        let mut sse = 0.0;
        let mut counts = [0usize; 2];
        let mut mean_p1 = 0.0;
        for &(x, y) in batch {
            let out = self.forward(x);
            counts[out.selected] += 1;
            mean_p1 += out.p[0];
            let err = out.prediction - y;
            sse += err * err;
            let d = 2.0 * err / n;
            // Expert gradients flow through the selected expert only.
            let k = 2 + 2 * out.selected;
            g[k] += d * x;
            g[k + 1] += d;
            // Router: d y_hat / d z_1 = p1 p2 (f1 - f2) / T = -d y_hat / d z_2.
            let (v1, v2) = (self.experts[0].eval(x), self.experts[1].eval(x));
            let dz = d * out.p[0] * out.p[1] * (v1 - v2) / self.temp;
            g[0] += dz * x;
            g[1] -= dz * x;
        }
        mean_p1 /= n;
        let imbalance = mean_p1 - 0.5;
        // sum_i (m_i - 1/2)^2 = 2 (m_1 - 1/2)^2 for two experts.
        let lb_loss = 2.0 * self.lambda_lb * imbalance * imbalance;
        if self.lambda_lb != 0.0 {
            let coeff = 4.0 * self.lambda_lb * imbalance / n / self.temp;
            for &(x, _) in batch {
                let [p1, p2] = self.probs(x);
                g[0] += coeff * p1 * p2 * x;
                g[1] -= coeff * p1 * p2 * x;
            }
        }
        g[0] += 2.0 * self.reg * self.router[0];
        g[1] += 2.0 * self.reg * self.router[1];
        let dead_expert = match counts {
            [0, _] => Some(0),
            [_, 0] => Some(1),
            _ => None,
        };
        let stats = HardStepStats {
            mse: sse / n,
            lb_loss,
            hard_load: (counts[0] as f64 - counts[1] as f64) / n,
            importance: [mean_p1, 1.0 - mean_p1],
            dead_expert,
        };
        (stats, g)
    }

    /// One SGD step on `MSE + L_lb + reg |W|^2`; returns diagnostics before the update.
    pub fn sgd_step(&mut self, batch: &[(f64, f64)]) -> HardStepStats {
        let (stats, grad) = self.stats_and_grad(batch);
        let mut p = self.params();
        for (pi, gi) in p.iter_mut().zip(grad) {
            *pi -= self.lr * gi;
        }
        self.set_params(p);
        stats
    }

    /// Objective whose gradient at `self == reference` is the straight-through gradient.
    ///
    /// Selections and the stop-gradient copy of `p` are taken from `reference`;
    /// the soft probabilities, experts and penalty use `self`.
    pub fn straight_through_objective(&self, reference: &HardMoe, batch: &[(f64, f64)]) -> f64 {
        let n = batch.len() as f64;
        let mut sse = 0.0;
        let mut mean_p1 = 0.0;
        for &(x, y) in batch {
            let frozen = reference.forward(x);
            let p = self.probs(x);
            mean_p1 += p[0];
            let pred: f64 = (0..2)
                .map(|i| {
                    let gate = if frozen.selected == i { 1.0 } else { 0.0 };
                    (gate + p[i] - frozen.p[i]) * self.experts[i].eval(x)
                })
                .sum();
            sse += (pred - y) * (pred - y);
        }
        mean_p1 /= n;
        let [w1, w2] = self.router;
        sse / n
            + 2.0 * self.lambda_lb * (mean_p1 - 0.5) * (mean_p1 - 0.5)
            + self.reg * (w1 * w1 + w2 * w2)
    }

    /// Same model with the experts' roles exchanged.
    pub fn label_swapped(&self) -> Self {
        Self {
            router: [self.router[1], self.router[0]],
            h: -self.h,
            experts: [self.experts[1], self.experts[0]],
            ..*self
        }
    }
}
