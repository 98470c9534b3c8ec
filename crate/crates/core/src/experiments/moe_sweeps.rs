use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::hysteresis::Direction;
use super::{linspace, mean_std, Cell, Table, UNDEFINED};
use crate::error::{positive, ParamError, Result};
use crate::moe::{evaluation_grid, piecewise_target, sample_batch, HardMoe, SoftMoe};
use crate::simulator::run_rng;

fn sweep_grid(h_max: f64, n_values: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    positive("h_max", h_max)?;
    if n_values < 2 {
        return Err(ParamError::TooSmall {
            name: "n_values",
            min: 2.0,
            value: n_values as f64,
        });
    }
    let up = linspace(-h_max, h_max, n_values);
    let down = up.iter().rev().copied().collect();
    Ok((up, down))
}

fn labelled(xs: &[f64]) -> Vec<(f64, f64)> {
    xs.iter().map(|&x| (x, piecewise_target(x))).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SoftSweepConfig {
    pub temp: f64,
    pub lr: f64,
    pub reg: f64,
    pub batch_size: usize,
    pub steps_per_value: usize,
    pub h_max: f64,
    pub n_values: usize,
    pub eval_points: usize,
    pub seed: u64,
}

impl Default for SoftSweepConfig {
    fn default() -> Self {
        Self {
            temp: 0.2,
            lr: 0.2,
            reg: 0.03,
            batch_size: 64,
            steps_per_value: 2000,
            h_max: 5.0,
            n_values: 41,
            eval_points: 401,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SoftSweepRow {
    pub direction: Direction,
    pub h: f64,
    /// `2 E_x p1 - 1` on the evaluation grid.
    pub expected_u: f64,
    /// `None` when `alpha` is zero or changed sign while training at this `h`.
    pub x_star: Option<f64>,
    pub mse: f64,
}

/// Warm-started upward then downward bias sweep of the soft mixture.
pub fn soft_moe_bias_sweep(cfg: &SoftSweepConfig) -> Result<(Vec<SoftSweepRow>, Table)> {
    let (up, down) = sweep_grid(cfg.h_max, cfg.n_values)?;
    positive("temp", cfg.temp)?;
    let xs = evaluation_grid(cfg.eval_points.max(2));
    let mut rng = run_rng(cfg.seed, 0);
    let mut model = SoftMoe::random(&mut rng, up[0], cfg.temp, cfg.lr, cfg.reg);
    let mut rows = Vec::with_capacity(2 * cfg.n_values);
    for (direction, grid) in [(Direction::Up, &up), (Direction::Down, &down)] {
        for &h in grid {
            model.h = h;
            let sign_before = model.alpha.signum();
            for _ in 0..cfg.steps_per_value {
                let batch = sample_batch(&mut rng, cfg.batch_size.max(1));
                model.sgd_step(&batch);
            }
            let flipped = model.alpha.signum() != sign_before;
            rows.push(SoftSweepRow {
                direction,
                h,
                expected_u: model.expected_imbalance(&xs),
                x_star: if flipped { None } else { model.boundary() },
                mse: model.mse(&xs, piecewise_target),
            });
        }
    }
    let mut table = Table::new(&["direction", "h", "expected_u", "x_star", "mse"]);
    for r in &rows {
        table.push(vec![
            r.direction.as_str().into(),
            r.h.into(),
            r.expected_u.into(),
            Cell::opt(r.x_star, UNDEFINED),
            r.mse.into(),
        ]);
    }
    Ok((rows, table))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HardSweepConfig {
    pub temp: f64,
    pub lr: f64,
    pub reg: f64,
    pub batch_size: usize,
    pub steps_per_value: usize,
    pub h_max: f64,
    pub n_values: usize,
    pub lambdas: Vec<f64>,
    pub eval_points: usize,
    pub seed: u64,
}

impl Default for HardSweepConfig {
    fn default() -> Self {
        Self {
            temp: 1.0,
            lr: 0.05,
            reg: 0.03,
            batch_size: 64,
            steps_per_value: 2000,
            h_max: 5.0,
            n_values: 41,
            lambdas: vec![0.0, 1.0],
            eval_points: 401,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HardSweepRow {
    pub lambda: f64,
    pub direction: Direction,
    pub h: f64,
    /// Hard load `(N1 - N2) / B` on the evaluation grid.
    pub hard_u: f64,
    /// Mean soft importance of expert one.
    pub importance: f64,
    pub mse: f64,
}

/// Warm-started bias sweeps of the hard top-1 model, one per penalty weight.
///
/// Every penalty weight starts from the same initialization and batch stream.
pub fn hard_moe_bias_sweep(cfg: &HardSweepConfig) -> Result<(Vec<HardSweepRow>, Table)> {
    let (up, down) = sweep_grid(cfg.h_max, cfg.n_values)?;
    positive("temp", cfg.temp)?;
    let eval = labelled(&evaluation_grid(cfg.eval_points.max(2)));
    let per_lambda: Vec<Vec<HardSweepRow>> = cfg
        .lambdas
        .par_iter()
        .map(|&lambda| {
            let mut rng = run_rng(cfg.seed, 0);
            let mut model =
                HardMoe::random(&mut rng, up[0], cfg.temp, cfg.lr, lambda).with_reg(cfg.reg);
            let mut rows = Vec::with_capacity(2 * cfg.n_values);
            for (direction, grid) in [(Direction::Up, &up), (Direction::Down, &down)] {
                for &h in grid {
                    model.h = h;
                    for _ in 0..cfg.steps_per_value {
                        let batch = sample_batch(&mut rng, cfg.batch_size.max(1));
                        model.sgd_step(&batch);
                    }
                    let stats = model.evaluate(&eval);
                    rows.push(HardSweepRow {
                        lambda,
                        direction,
                        h,
                        hard_u: stats.hard_load,
                        importance: stats.importance[0],
                        mse: stats.mse,
                    });
                }
            }
            rows
        })
        .collect();
    let rows: Vec<HardSweepRow> = per_lambda.into_iter().flatten().collect();
    let mut table = Table::new(&["lambda", "direction", "h", "hard_u", "importance", "mse"]);
    for r in &rows {
        table.push(vec![
            r.lambda.into(),
            r.direction.as_str().into(),
            r.h.into(),
            r.hard_u.into(),
            r.importance.into(),
            r.mse.into(),
        ]);
    }
    Ok((rows, table))
}

/// Smallest `|h|` on the given sweep beyond which `|hard_u| >= level` holds
/// for the rest of the sweep, restricted to the half of the grid the sweep
/// moves into (`h >= 0` upward, `h <= 0` downward).
pub fn saturation_h(
    rows: &[HardSweepRow],
    lambda: f64,
    direction: Direction,
    level: f64,
) -> Option<f64> {
    let sweep: Vec<&HardSweepRow> = rows
        .iter()
        .filter(|r| r.lambda == lambda && r.direction == direction)
        .filter(|r| match direction {
            Direction::Up => r.h >= 0.0,
            Direction::Down => r.h <= 0.0,
        })
        .collect();
    let mut onset = None;
    for r in sweep.iter().rev() {
        if r.hard_u.abs() >= level {
            onset = Some(r.h.abs());
        } else {
            break;
        }
    }
    onset
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LambdaScanConfig {
    pub h: f64,
    pub lambdas: Vec<f64>,
    pub replicates: usize,
    pub steps: usize,
    pub temp: f64,
    pub lr: f64,
    pub reg: f64,
    pub batch_size: usize,
    pub eval_points: usize,
    pub seed: u64,
}

impl Default for LambdaScanConfig {
    fn default() -> Self {
        Self {
            h: 2.0,
            lambdas: vec![0.0, 0.01, 0.03, 0.1, 0.3, 1.0, 3.0, 10.0],
            replicates: 5,
            steps: 4000,
            temp: 1.0,
            lr: 0.05,
            reg: 0.03,
            batch_size: 64,
            eval_points: 401,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LambdaScanRow {
    pub lambda: f64,
    pub mean_abs_u: f64,
    pub std_abs_u: f64,
    pub mean_mse: f64,
    pub std_mse: f64,
}

/// Fresh-init training at fixed `h` for each penalty weight; replicate `k` uses stream `k`.
pub fn hard_moe_lambda_scan(cfg: &LambdaScanConfig) -> Result<(Vec<LambdaScanRow>, Table)> {
    positive("temp", cfg.temp)?;
    if cfg.replicates < 1 {
        return Err(ParamError::TooSmall {
            name: "replicates",
            min: 1.0,
            value: 0.0,
        });
    }
    let eval = labelled(&evaluation_grid(cfg.eval_points.max(2)));
    let jobs: Vec<(f64, u64)> = cfg
        .lambdas
        .iter()
        .flat_map(|&l| (0..cfg.replicates as u64).map(move |k| (l, k)))
        .collect();
    let finals: Vec<(f64, f64)> = jobs
        .par_iter()
        .map(|&(lambda, k)| {
            let mut rng = run_rng(cfg.seed, k);
            let mut model =
                HardMoe::random(&mut rng, cfg.h, cfg.temp, cfg.lr, lambda).with_reg(cfg.reg);
            for _ in 0..cfg.steps {
                let batch = sample_batch(&mut rng, cfg.batch_size.max(1));
                model.sgd_step(&batch);
            }
            let stats = model.evaluate(&eval);
            (stats.hard_load.abs(), stats.mse)
        })
        .collect();
    let rows: Vec<LambdaScanRow> = finals
        .chunks(cfg.replicates)
        .zip(&cfg.lambdas)
        .map(|(chunk, &lambda)| {
            let abs_u: Vec<f64> = chunk.iter().map(|c| c.0).collect();
            let mse: Vec<f64> = chunk.iter().map(|c| c.1).collect();
            let (mean_abs_u, std_abs_u) = mean_std(&abs_u);
            let (mean_mse, std_mse) = mean_std(&mse);
            LambdaScanRow {
                lambda,
                mean_abs_u,
                std_abs_u,
                mean_mse,
                std_mse,
            }
        })
        .collect();
    let mut table = Table::new(&["lambda", "mean_abs_u", "std_abs_u", "mean_mse", "std_mse"]);
    for r in &rows {
        table.push(vec![
            r.lambda.into(),
            r.mean_abs_u.into(),
            r.std_abs_u.into(),
            r.mean_mse.into(),
            r.std_mse.into(),
        ]);
    }
    Ok((rows, table))
}
