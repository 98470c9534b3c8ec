//! Two-expert trainable regressors on a piecewise-affine target.
//!
//! Both models use affine experts `f_i(x) = w_i x + c_i` and are trained by
//! plain SGD with hand-derived gradients:
//!
//! * [`SoftMoe`]: input-dependent soft mixing, `p1 = sigmoid((alpha x + beta + h) / T)`.
//! * [`HardMoe`]: hard top-1 selection with a straight-through router gradient
//!   and an optional soft-importance balancing penalty.

mod hard;
mod soft;

pub use hard::{HardMoe, HardStepStats, HARD_PARAMS};
pub use soft::{SoftMoe, SoftOutput, SOFT_PARAMS};

use rand::Rng;
use serde::{Deserialize, Serialize};

/// Affine regressor `w x + c`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Affine {
    pub w: f64,
    pub c: f64,
}

impl Affine {
    pub fn new(w: f64, c: f64) -> Self {
        Self { w, c }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.w * x + self.c
    }

    pub(crate) fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self {
            w: rng.random_range(-0.5..0.5),
            c: rng.random_range(-0.5..0.5),
        }
    }
}

/// Regression target with a jump of height two at `x = 0`.
pub fn piecewise_target(x: f64) -> f64 {
    let ripple = 0.05 * (8.0 * std::f64::consts::PI * x).sin();
    if x < 0.0 {
        -1.0 - 0.7 * x + ripple
    } else {
        1.0 + 0.7 * x + ripple
    }
}

/// `n` samples with `x ~ Uniform[-1, 1]` labelled by [`piecewise_target`].
pub fn sample_batch<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|_| {
            let x = rng.random_range(-1.0..=1.0);
            (x, piecewise_target(x))
        })
        .collect()
}

/// `n` evenly spaced points covering `[-1, 1]`.
pub fn evaluation_grid(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n)
            .map(|i| -1.0 + 2.0 * i as f64 / (n - 1) as f64)
            .collect(),
    }
}
