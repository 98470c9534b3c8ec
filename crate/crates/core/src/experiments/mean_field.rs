use serde::{Deserialize, Serialize};

use super::{Cell, Table};
use crate::error::{positive, Result};
use crate::model::{RouterParams, RouterState};
use crate::simulator::{integrate_mean_field, run_ensemble, SimConfig};

/// Stochastic ensemble against the deterministic mean-field path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MeanFieldCompareConfig {
    pub a: f64,
    pub gamma: f64,
    pub temp: f64,
    pub h: f64,
    pub rho: f64,
    pub batch_size: u64,
    pub eta: f64,
    pub runs: usize,
    pub t_end: f64,
    /// Upper bound on the RK4 step; the step is `eta / k` for the smallest integer `k` that satisfies it.
    pub max_dt: f64,
    pub seed: u64,
}

impl Default for MeanFieldCompareConfig {
    fn default() -> Self {
        Self {
            a: 3.0,
            gamma: 1.0,
            temp: 1.0,
            h: 0.08,
            rho: 0.0,
            batch_size: 512,
            eta: 0.002,
            runs: 40,
            t_end: 10.0,
            max_dt: 1e-3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanFieldCompare {
    pub times: Vec<f64>,
    pub mean_u: Vec<f64>,
    pub std_u: Vec<f64>,
    pub u_mf: Vec<f64>,
    /// `max_t |mean u - u_mf|`
    pub max_deviation: f64,
    pub max_std: f64,
}

impl MeanFieldCompare {
    pub fn table(&self) -> Table {
        let mut t = Table::new(&["time", "mean_u", "std_u", "u_mf"]);
        for i in 0..self.times.len() {
            t.push(vec![
                Cell::Num(self.times[i]),
                Cell::Num(self.mean_u[i]),
                Cell::Num(self.std_u[i]),
                Cell::Num(self.u_mf[i]),
            ]);
        }
        t
    }
}

pub fn mean_field_comparison(cfg: &MeanFieldCompareConfig) -> Result<MeanFieldCompare> {
    let params = RouterParams::new(cfg.a, cfg.gamma, cfg.temp, cfg.h)?;
    positive("t_end", cfg.t_end)?;
    positive("max_dt", cfg.max_dt)?;
    let steps = (cfg.t_end / positive("eta", cfg.eta)?).round() as usize;
    let mut sim = SimConfig::new(params, cfg.eta, cfg.batch_size, steps, cfg.seed);
    sim.rho = cfg.rho;
    let ens = run_ensemble(&sim, cfg.runs)?;

    let substeps = (cfg.eta / cfg.max_dt).ceil().max(1.0) as usize;
    let dt = cfg.eta / substeps as f64;
    let mf = integrate_mean_field(
        &params,
        cfg.rho,
        RouterState::default(),
        steps as f64 * cfg.eta,
        dt,
    )?;
    let u_all = mf.u();
    let u_mf: Vec<f64> = (1..=steps).map(|n| u_all[n * substeps]).collect();

    let max_deviation = ens
        .mean_u
        .iter()
        .zip(&u_mf)
        .map(|(m, u)| (m - u).abs())
        .fold(0.0, f64::max);
    let max_std = ens.std_u.iter().copied().fold(0.0, f64::max);
    Ok(MeanFieldCompare {
        times: ens.times,
        mean_u: ens.mean_u,
        std_u: ens.std_u,
        u_mf,
        max_deviation,
        max_std,
    })
}
