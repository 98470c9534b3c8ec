//! Stochastic batch routing and its deterministic mean-field limit.
//!
//! Each step routes a batch of `B` tokens with the softmax probabilities of
//! the current scores (frozen within the batch), so the count sent to expert
//! one is `Binomial(B, p1)`. With `l_i = N_i / B` the scores move by
//!
//! ```text
//! r_i += eta * (a l_i - rho (l_i - 1/2) - gamma r_i + b_i)
//! ```
//!
//! Random streams: run `k` of a configuration seeded with `seed` draws from
//! `ChaCha8Rng::seed_from_u64(seed)` with stream `k`, so results do not
//! depend on how runs are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{non_negative, positive, ParamError, Result};
use crate::model::{logistic, RouterParams, RouterState};

/// Random generator for run `stream` of a configuration seeded with `seed`.
pub fn run_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub params: RouterParams,
    /// Adaptation step `eta`.
    pub eta: f64,
    /// Tokens routed per step.
    pub batch_size: u64,
    /// Load-feedback strength; the effective reinforcement is `a - rho`.
    #[serde(default)]
    pub rho: f64,
    pub steps: usize,
    pub seed: u64,
    #[serde(default)]
    pub init: RouterState,
}

impl SimConfig {
    pub fn new(params: RouterParams, eta: f64, batch_size: u64, steps: usize, seed: u64) -> Self {
        Self {
            params,
            eta,
            batch_size,
            rho: 0.0,
            steps,
            seed,
            init: RouterState::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        positive("eta", self.eta)?;
        non_negative("rho", self.rho)?;
        if self.batch_size < 1 {
            return Err(ParamError::TooSmall {
                name: "batch_size",
                min: 1.0,
                value: self.batch_size as f64,
            });
        }
        if !(self.init.r1.is_finite() && self.init.r2.is_finite()) {
            return Err(ParamError::Invalid("initial scores must be finite".into()));
        }
        Ok(())
    }
}

/// Outcome of routing one batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchStep {
    pub state: RouterState,
    /// Empirical imbalance `(N1 - N2) / B`.
    pub u_hat: f64,
    /// Fraction of the batch sent to expert one.
    pub l1: f64,
}

/// Per-expert score drift given the realised batch fractions.
pub fn batch_drift(state: RouterState, l1: f64, params: &RouterParams, rho: f64) -> (f64, f64) {
    let l2 = 1.0 - l1;
    let (a, gamma) = (params.a(), params.gamma());
    (
        a * l1 - rho * (l1 - 0.5) - gamma * state.r1 + params.b1(),
        a * l2 - rho * (l2 - 0.5) - gamma * state.r2 + params.b2(),
    )
}

/// Route one batch at frozen probabilities and apply the summed update.
pub fn step_batch<R: rand::Rng + ?Sized>(
    state: RouterState,
    params: &RouterParams,
    eta: f64,
    batch_size: u64,
    rho: f64,
    rng: &mut R,
) -> BatchStep {
    let p1 = logistic(state.y() / params.temp());
    let n1 = Binomial::new(batch_size, p1)
        .expect("p1 lies in [0, 1]")
        .sample(rng);
    let l1 = n1 as f64 / batch_size as f64;
    let (d1, d2) = batch_drift(state, l1, params, rho);
    BatchStep {
        state: RouterState::new(state.r1 + eta * d1, state.r2 + eta * d2),
        u_hat: 2.0 * l1 - 1.0,
        l1,
    }
}

/// A batch router whose parameters may change between steps (used by sweeps).
#[derive(Debug, Clone)]
pub struct BatchRouter {
    pub state: RouterState,
    pub params: RouterParams,
    pub eta: f64,
    pub batch_size: u64,
    pub rho: f64,
    rng: ChaCha8Rng,
}

impl BatchRouter {
    pub fn new(cfg: &SimConfig, stream: u64) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            state: cfg.init,
            params: cfg.params,
            eta: cfg.eta,
            batch_size: cfg.batch_size,
            rho: cfg.rho,
            rng: run_rng(cfg.seed, stream),
        })
    }

    pub fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    pub fn step(&mut self) -> BatchStep {
        let out = step_batch(
            self.state,
            &self.params,
            self.eta,
            self.batch_size,
            self.rho,
            &mut self.rng,
        );
        self.state = out.state;
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub initial: RouterState,
    pub final_state: RouterState,
    /// `t = n * eta` for `n = 1..=steps`.
    pub times: Vec<f64>,
    pub y_path: Vec<f64>,
    pub u_hat_path: Vec<f64>,
    pub l1_path: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Single run on stream 0 of `cfg.seed`.
pub fn run_trajectory(cfg: &SimConfig) -> Result<Trajectory> {
    run_stream(cfg, 0)
}

fn run_stream(cfg: &SimConfig, stream: u64) -> Result<Trajectory> {
    let mut router = BatchRouter::new(cfg, stream)?;
    let mut traj = Trajectory {
        initial: cfg.init,
        final_state: cfg.init,
        times: Vec::with_capacity(cfg.steps),
        y_path: Vec::with_capacity(cfg.steps),
        u_hat_path: Vec::with_capacity(cfg.steps),
        l1_path: Vec::with_capacity(cfg.steps),
    };
    for n in 1..=cfg.steps {
        let out = router.step();
        traj.times.push(n as f64 * cfg.eta);
        traj.y_path.push(out.state.y());
        traj.u_hat_path.push(out.u_hat);
        traj.l1_path.push(out.l1);
    }
    traj.final_state = router.state;
    Ok(traj)
}

/// Pointwise statistics of `u_hat` over independent runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub times: Vec<f64>,
    pub mean_u: Vec<f64>,
    /// Sample standard deviation (zero for a single run).
    pub std_u: Vec<f64>,
    pub n_runs: usize,
}

/// Runs `n_runs` independent trajectories (run `k` uses stream `k`).
///
/// Runs execute on the current rayon pool; the reduction happens in run
/// order afterwards so the result does not depend on the schedule.
pub fn run_ensemble(cfg: &SimConfig, n_runs: usize) -> Result<EnsembleStats> {
    cfg.validate()?;
    if n_runs < 1 {
        return Err(ParamError::TooSmall {
            name: "n_runs",
            min: 1.0,
            value: 0.0,
        });
    }
    let paths: Vec<Vec<f64>> = (0..n_runs as u64)
        .into_par_iter()
        .map(|k| run_stream(cfg, k).map(|t| t.u_hat_path))
        .collect::<Result<_>>()?;
    let (mean_u, std_u) = pointwise_mean_std(&paths, cfg.steps);
    Ok(EnsembleStats {
        times: (1..=cfg.steps).map(|n| n as f64 * cfg.eta).collect(),
        mean_u,
        std_u,
        n_runs,
    })
}

pub(crate) fn pointwise_mean_std(paths: &[Vec<f64>], len: usize) -> (Vec<f64>, Vec<f64>) {
    let n = paths.len() as f64;
    let mut mean = vec![0.0; len];
    for path in paths {
        for (m, v) in mean.iter_mut().zip(path) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut std = vec![0.0; len];
    if paths.len() > 1 {
        for path in paths {
            for ((s, v), m) in std.iter_mut().zip(path).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        std.iter_mut().for_each(|s| *s = (*s / (n - 1.0)).sqrt());
    }
    (mean, std)
}

/// Deterministic solution of the mean-field system sampled on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldPath {
    pub times: Vec<f64>,
    pub r1: Vec<f64>,
    pub r2: Vec<f64>,
    pub temp: f64,
}

impl MeanFieldPath {
    pub fn y(&self) -> Vec<f64> {
        self.r1.iter().zip(&self.r2).map(|(a, b)| a - b).collect()
    }

    /// Load difference `tanh(y / 2T)` along the path.
    pub fn u(&self) -> Vec<f64> {
        self.y()
            .into_iter()
            .map(|y| crate::model::load_difference(y, self.temp))
            .collect()
    }

    pub fn last(&self) -> RouterState {
        let n = self.times.len() - 1;
        RouterState::new(self.r1[n], self.r2[n])
    }
}

/// Mean-field drift `(a - rho) p_i + rho/2 - gamma r_i + b_i`.
pub fn mean_field_drift(state: RouterState, params: &RouterParams, rho: f64) -> (f64, f64) {
    let p1 = logistic(state.y() / params.temp());
    let a_eff = params.a() - rho;
    let (gamma, half_rho) = (params.gamma(), 0.5 * rho);
    (
        a_eff * p1 + half_rho - gamma * state.r1 + params.b1(),
        a_eff * (1.0 - p1) + half_rho - gamma * state.r2 + params.b2(),
    )
}

/// Classical RK4 with `ceil(t_end / dt)` equal steps of size `<= dt`.
///
/// The returned path includes `t = 0`.
pub fn integrate_mean_field(
    params: &RouterParams,
    rho: f64,
    init: RouterState,
    t_end: f64,
    dt: f64,
) -> Result<MeanFieldPath> {
    positive("dt", dt)?;
    non_negative("t_end", t_end)?;
    non_negative("rho", rho)?;
    let n = ((t_end / dt) - 1e-9).ceil().max(0.0) as usize;
    let step = if n == 0 { 0.0 } else { t_end / n as f64 };
    let f = |s: RouterState| mean_field_drift(s, params, rho);
    let shift =
        |s: RouterState, k: (f64, f64), c: f64| RouterState::new(s.r1 + c * k.0, s.r2 + c * k.1);

    let mut path = MeanFieldPath {
        times: Vec::with_capacity(n + 1),
        r1: Vec::with_capacity(n + 1),
        r2: Vec::with_capacity(n + 1),
        temp: params.temp(),
    };
    let mut s = init;
    path.times.push(0.0);
    path.r1.push(s.r1);
    path.r2.push(s.r2);
    for i in 1..=n {
        let k1 = f(s);
        let k2 = f(shift(s, k1, 0.5 * step));
        let k3 = f(shift(s, k2, 0.5 * step));
        let k4 = f(shift(s, k3, step));
        s = RouterState::new(
            s.r1 + step / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
            s.r2 + step / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
        );
        path.times.push(i as f64 * step);
        path.r1.push(s.r1);
        path.r2.push(s.r2);
    }
    Ok(path)
}
