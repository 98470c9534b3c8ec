//! Resolved configs of every subcommand and how each one runs.

use routerlab::bifurcation::critical_feedback;
use routerlab::experiments::{
    balancing_feedback, collapse_map, critical_temperature_scan, hard_moe_bias_sweep,
    hard_moe_lambda_scan, hysteresis, linspace, mean_field_comparison, saturation_h,
    soft_moe_bias_sweep, width_vs_a, BalancingConfig, Cell, CollapseConfig, CriticalTempConfig,
    Direction, HardSweepConfig, HysteresisConfig, LambdaScanConfig, MeanFieldCompareConfig,
    SoftSweepConfig, Table, WidthVsAConfig,
};
use routerlab::simulator::{integrate_mean_field, run_ensemble, run_trajectory};
use routerlab::{
    find_equilibria, fold_curve, hysteresis_boundary, ParamError, RouterParams, RouterState,
    SimConfig,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

/// One CSV table plus the summary stored in its sidecar.
pub struct Output {
    pub name: &'static str,
    pub table: Table,
    pub summary: Value,
}

impl Output {
    fn new(name: &'static str, table: Table, summary: Value) -> Self {
        Self {
            name,
            table,
            summary,
        }
    }
}

pub trait Job: Serialize + DeserializeOwned + Default {
    /// Subcommand path as typed on the command line.
    const NAME: &'static str;

    fn seed_mut(&mut self) -> &mut u64;

    fn execute(&self) -> Result<Vec<Output>, ParamError>;
}

macro_rules! seeded {
    ($t:ty, $name:literal, $($seed:ident).+) => {
        impl Job for $t {
            const NAME: &'static str = $name;

            fn seed_mut(&mut self) -> &mut u64 {
                &mut self.$($seed).+
            }

            fn execute(&self) -> Result<Vec<Output>, ParamError> {
                Run::run(self)
            }
        }
    };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EquilibriaConfig {
    pub a: f64,
    pub gamma: f64,
    pub temp: f64,
    pub h: f64,
    pub seed: u64,
}

impl Default for EquilibriaConfig {
    fn default() -> Self {
        Self {
            a: 4.0,
            gamma: 1.0,
            temp: 1.0,
            h: 0.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FoldCurveConfig {
    pub gamma: f64,
    pub temp: f64,
    pub q_max: f64,
    pub n: usize,
    pub seed: u64,
}

impl Default for FoldCurveConfig {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            temp: 1.0,
            q_max: 2.0,
            n: 201,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HysteresisBoundaryConfig {
    pub a: Vec<f64>,
    pub gamma: f64,
    pub temp: f64,
    pub seed: u64,
}

impl Default for HysteresisBoundaryConfig {
    fn default() -> Self {
        Self {
            a: vec![4.0],
            gamma: 1.0,
            temp: 1.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulateConfig {
    pub a: f64,
    pub gamma: f64,
    pub temp: f64,
    pub h: f64,
    pub rho: f64,
    pub eta: f64,
    pub batch_size: u64,
    pub steps: usize,
    pub y0: f64,
    pub runs: usize,
    pub seed: u64,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            a: 3.0,
            gamma: 1.0,
            temp: 1.0,
            h: 0.0,
            rho: 0.0,
            eta: 0.002,
            batch_size: 512,
            steps: 5000,
            y0: 0.0,
            runs: 1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MeanFieldConfig {
    pub a: f64,
    pub gamma: f64,
    pub temp: f64,
    pub h: f64,
    pub rho: f64,
    pub y0: f64,
    pub t_end: f64,
    pub dt: f64,
    pub seed: u64,
}

impl Default for MeanFieldConfig {
    fn default() -> Self {
        Self {
            a: 3.0,
            gamma: 1.0,
            temp: 1.0,
            h: 0.0,
            rho: 0.0,
            y0: 0.1,
            t_end: 10.0,
            dt: 1e-3,
            seed: 0,
        }
    }
}

/// Bias sweeps and the fixed-bias penalty scan share model settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HardMoeConfig {
    pub temp: f64,
    pub lr: f64,
    pub reg: f64,
    pub batch_size: usize,
    pub eval_points: usize,
    pub steps_per_value: usize,
    pub h_max: f64,
    pub n_values: usize,
    pub sweep_lambdas: Vec<f64>,
    pub scan_h: f64,
    pub scan_lambdas: Vec<f64>,
    pub replicates: usize,
    pub scan_steps: usize,
    pub saturation_level: f64,
    pub seed: u64,
}

impl Default for HardMoeConfig {
    fn default() -> Self {
        let sweep = HardSweepConfig::default();
        let scan = LambdaScanConfig::default();
        Self {
            temp: sweep.temp,
            lr: sweep.lr,
            reg: sweep.reg,
            batch_size: sweep.batch_size,
            eval_points: sweep.eval_points,
            steps_per_value: sweep.steps_per_value,
            h_max: sweep.h_max,
            n_values: sweep.n_values,
            sweep_lambdas: sweep.lambdas,
            scan_h: scan.h,
            scan_lambdas: scan.lambdas,
            replicates: scan.replicates,
            scan_steps: scan.steps,
            saturation_level: 0.95,
            seed: sweep.seed,
        }
    }
}

impl HardMoeConfig {
    pub fn sweep(&self) -> HardSweepConfig {
        HardSweepConfig {
            temp: self.temp,
            lr: self.lr,
            reg: self.reg,
            batch_size: self.batch_size,
            steps_per_value: self.steps_per_value,
            h_max: self.h_max,
            n_values: self.n_values,
            lambdas: self.sweep_lambdas.clone(),
            eval_points: self.eval_points,
            seed: self.seed,
        }
    }

    pub fn scan(&self) -> LambdaScanConfig {
        LambdaScanConfig {
            h: self.scan_h,
            lambdas: self.scan_lambdas.clone(),
            replicates: self.replicates,
            steps: self.scan_steps,
            temp: self.temp,
            lr: self.lr,
            reg: self.reg,
            batch_size: self.batch_size,
            eval_points: self.eval_points,
            seed: self.seed,
        }
    }
}

trait Run {
    fn run(&self) -> Result<Vec<Output>, ParamError>;
}

seeded!(EquilibriaConfig, "equilibria", seed);
seeded!(FoldCurveConfig, "fold-curve", seed);
seeded!(HysteresisBoundaryConfig, "hysteresis-boundary", seed);
seeded!(SimulateConfig, "simulate", seed);
seeded!(MeanFieldConfig, "mean-field", seed);
seeded!(MeanFieldCompareConfig, "exp mean-field-compare", seed);
seeded!(HysteresisConfig, "exp hysteresis", seed);
seeded!(CollapseConfig, "exp collapse-map", seed);
seeded!(CriticalTempConfig, "exp critical-temp", seed);
seeded!(WidthVsAConfig, "exp width-vs-a", base.seed);
seeded!(BalancingConfig, "exp balancing", base.seed);
seeded!(SoftSweepConfig, "exp soft-moe", seed);
seeded!(HardMoeConfig, "exp hard-moe", seed);

impl Run for EquilibriaConfig {
    fn run(&self) -> Result<Vec<Output>, ParamError> {
        let p = RouterParams::new(self.a, self.gamma, self.temp, self.h)?;
        let set = find_equilibria(&p);
        let mut t = Table::new(&["y", "stability", "f_y"]);
        for e in &set.equilibria {
            t.push(vec![e.y.into(), e.stability.as_str().into(), e.f_y.into()]);
        }
        let summary = json!({ "count": set.len(), "regime": set.regime });
        Ok(vec![Output::new("equilibria", t, summary)])
    }
}

impl Run for FoldCurveConfig {
    fn run(&self) -> Result<Vec<Output>, ParamError> {
        let q = linspace(-self.q_max, self.q_max, self.n);
        let pts = fold_curve(&q, self.gamma, self.temp)?;
        let mut t = Table::new(&["q", "a", "h"]);
        for p in &pts {
            t.push(vec![p.q.into(), p.a.into(), p.h.into()]);
        }
        let summary =
            json!({ "cusp_a": critical_feedback(self.gamma, self.temp), "points": pts.len() });
        Ok(vec![Output::new("fold_curve", t, summary)])
    }
}

impl Run for HysteresisBoundaryConfig {
    fn run(&self) -> Result<Vec<Output>, ParamError> {
        let a_c = critical_feedback(self.gamma, self.temp);
        let mut t = Table::new(&["a", "H", "a_c"]);
        let mut values = Vec::with_capacity(self.a.len());
        for &a in &self.a {
            let h = hysteresis_boundary(a, self.gamma, self.temp)?;
            values.push(h);
            t.push(vec![a.into(), h.into(), a_c.into()]);
        }
        Ok(vec![Output::new(
            "hysteresis_boundary",
            t,
            json!({ "a_c": a_c, "H": values }),
        )])
    }
}

impl SimulateConfig {
    fn sim_config(&self) -> Result<SimConfig, ParamError> {
        let params = RouterParams::new(self.a, self.gamma, self.temp, self.h)?;
        let mut cfg = SimConfig::new(params, self.eta, self.batch_size, self.steps, self.seed);
        cfg.rho = self.rho;
        cfg.init = RouterState::from_difference(self.y0);
        cfg.validate()?;
        Ok(cfg)
    }
}

impl Run for SimulateConfig {
    fn run(&self) -> Result<Vec<Output>, ParamError> {
        let cfg = self.sim_config()?;
        if self.runs > 1 {
            let stats = run_ensemble(&cfg, self.runs)?;
            let mut t = Table::new(&["t", "mean_u", "std_u"]);
            for i in 0..stats.times.len() {
                t.push(vec![
                    stats.times[i].into(),
                    stats.mean_u[i].into(),
                    stats.std_u[i].into(),
                ]);
            }
            let summary = json!({ "runs": self.runs, "final_mean_u": stats.mean_u.last() });
            return Ok(vec![Output::new("ensemble", t, summary)]);
        }
        let traj = run_trajectory(&cfg)?;
        let mut t = Table::new(&["t", "y", "u_hat", "l1"]);
        for i in 0..traj.len() {
            t.push(vec![
                traj.times[i].into(),
                traj.y_path[i].into(),
                traj.u_hat_path[i].into(),
                traj.l1_path[i].into(),
            ]);
        }
        let summary = json!({ "final_y": traj.final_state.y(), "final_state": traj.final_state });
        Ok(vec![Output::new("trajectory", t, summary)])
    }
}

impl Run for MeanFieldConfig {
    fn run(&self) -> Result<Vec<Output>, ParamError> {
        let params = RouterParams::new(self.a, self.gamma, self.temp, self.h)?;
        let init = RouterState::from_difference(self.y0);
        let path = integrate_mean_field(&params, self.rho, init, self.t_end, self.dt)?;
        let (y, u) = (path.y(), path.u());
        let mut t = Table::new(&["t", "r1", "r2", "y", "u"]);
        for i in 0..path.times.len() {
            t.push(vec![
                path.times[i].into(),
                path.r1[i].into(),
                path.r2[i].into(),
                y[i].into(),
                u[i].into(),
            ]);
        }
        let summary = json!({ "final_y": y.last(), "final_u": u.last() });
        Ok(vec![Output::new("mean_field", t, summary)])
    }
}

impl Run for MeanFieldCompareConfig {
    fn run(&self) -> Result<Vec<Output>, ParamError> {
        let r = mean_field_comparison(self)?;
        let summary = json!({ "max_deviation": r.max_deviation, "max_std": r.max_std });
        Ok(vec![Output::new("mean_field_compare", r.table(), summary)])
    }
}

impl Run for HysteresisConfig {
    fn run(&self) -> Result<Vec<Output>, ParamError> {
        let r = hysteresis(self)?;
        Ok(vec![Output::new("hysteresis", r.table(), r.summary())])
    }
}

impl Run for CollapseConfig {
    fn run(&self) -> Result<Vec<Output>, ParamError> {
        let (cells, t) = collapse_map(self)?;
        let collapsed = cells.iter().filter(|c| c.final_abs_u >= 0.5).count();
        let summary = json!({ "cells": cells.len(), "collapsed_cells": collapsed });
        Ok(vec![Output::new("collapse_map", t, summary)])
    }
}

impl Run for CriticalTempConfig {
    fn run(&self) -> Result<Vec<Output>, ParamError> {
        let (rows, t) = critical_temperature_scan(self)?;
        Ok(vec![Output::new(
            "critical_temp",
            t,
            json!({ "rows": rows }),
        )])
    }
}

impl Run for WidthVsAConfig {
    fn run(&self) -> Result<Vec<Output>, ParamError> {
        let (rows, t) = width_vs_a(self)?;
        Ok(vec![Output::new("width_vs_a", t, json!({ "rows": rows }))])
    }
}

impl Run for BalancingConfig {
    fn run(&self) -> Result<Vec<Output>, ParamError> {
        let (rows, t) = balancing_feedback(self)?;
        Ok(vec![Output::new("balancing", t, json!({ "rows": rows }))])
    }
}

impl Run for SoftSweepConfig {
    fn run(&self) -> Result<Vec<Output>, ParamError> {
        let (rows, t) = soft_moe_bias_sweep(self)?;
        let n = rows.len() / 2;
        let centre = |sweep: &[routerlab::experiments::SoftSweepRow]| {
            sweep
                .iter()
                .min_by(|a, b| a.h.abs().total_cmp(&b.h.abs()))
                .map(|r| json!({ "h": r.h, "x_star": r.x_star, "expected_u": r.expected_u, "mse": r.mse }))
        };
        let end = |r: &routerlab::experiments::SoftSweepRow| json!({ "h": r.h, "expected_u": r.expected_u, "mse": r.mse });
        let summary = json!({
            "up_centre": centre(&rows[..n]),
            "down_centre": centre(&rows[n..]),
            "up_end": rows.get(n.wrapping_sub(1)).map(end),
            "down_end": rows.last().map(end),
        });
        Ok(vec![Output::new("soft_moe", t, summary)])
    }
}

impl Run for HardMoeConfig {
    fn run(&self) -> Result<Vec<Output>, ParamError> {
        let (rows, sweep_table) = hard_moe_bias_sweep(&self.sweep())?;
        let saturation: Vec<Value> = self
            .sweep_lambdas
            .iter()
            .map(|&l| {
                json!({
                    "lambda": l,
                    "up": saturation_h(&rows, l, Direction::Up, self.saturation_level),
                    "down": saturation_h(&rows, l, Direction::Down, self.saturation_level),
                })
            })
            .collect();
        let (scan, scan_table) = hard_moe_lambda_scan(&self.scan())?;
        let mut sat_table = Table::new(&["lambda", "direction", "saturation_h"]);
        for (l, s) in self.sweep_lambdas.iter().zip(&saturation) {
            for dir in ["up", "down"] {
                let cell = s[dir].as_f64().map_or(Cell::Text("none".into()), Cell::Num);
                sat_table.push(vec![(*l).into(), dir.into(), cell]);
            }
        }
        Ok(vec![
            Output::new(
                "hard_moe_sweep",
                sweep_table,
                json!({ "saturation": saturation }),
            ),
            Output::new(
                "hard_moe_saturation",
                sat_table,
                json!({ "level": self.saturation_level }),
            ),
            Output::new("hard_moe_lambda_scan", scan_table, json!({ "rows": scan })),
        ])
    }
}
