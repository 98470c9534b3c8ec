use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{trailing_mean, Cell, Table, NO_SWITCH};
use crate::bifurcation::critical_temperature;
use crate::error::{positive, ParamError, Result};
use crate::model::{RouterParams, RouterState};
use crate::simulator::{BatchRouter, SimConfig};

/// `n` log-spaced values from `min` to `max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogGrid {
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

impl LogGrid {
    pub fn values(&self) -> Result<Vec<f64>> {
        let (lo, hi) = (
            positive("grid min", self.min)?.ln(),
            positive("grid max", self.max)?.ln(),
        );
        Ok(super::linspace(lo, hi, self.n)
            .into_iter()
            .enumerate()
            .map(|(i, v)| match i {
                0 => self.min,
                i if i + 1 == self.n => self.max,
                _ => v.exp(),
            })
            .collect())
    }
}

/// Shared settings of the symmetric (h = 0) collapse runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct RunSettings {
    eta: f64,
    batch_size: u64,
    steps: usize,
    replicates: usize,
    init_amplitude: f64,
    final_fraction: f64,
    seed: u64,
}

/// Mean over replicates of `|trailing mean u_hat|` at `h = 0`.
///
/// Replicate `k` uses stream `k` and starts from `y0 ~ U(-amp, amp)` drawn
/// from that stream.
#[allow(clippy::too_many_arguments)]
pub fn final_abs_imbalance(
    a: f64,
    gamma: f64,
    temp: f64,
    eta: f64,
    batch_size: u64,
    steps: usize,
    replicates: usize,
    init_amplitude: f64,
    final_fraction: f64,
    seed: u64,
) -> Result<f64> {
    let params = RouterParams::new(a, gamma, temp, 0.0)?;
    let cfg = SimConfig::new(params, eta, batch_size, steps, seed);
    if replicates < 1 || steps < 1 {
        return Err(ParamError::Invalid(
            "replicates and steps must be >= 1".into(),
        ));
    }
    let mut total = 0.0;
    let mut u_hat = vec![0.0; steps];
    for k in 0..replicates as u64 {
        let mut router = BatchRouter::new(&cfg, k)?;
        let y0 = if init_amplitude > 0.0 {
            router
                .rng_mut()
                .random_range(-init_amplitude..init_amplitude)
        } else {
            0.0
        };
        router.state = RouterState::from_difference(y0);
        for u in u_hat.iter_mut() {
            *u = router.step().u_hat;
        }
        total += trailing_mean(&u_hat, final_fraction).abs();
    }
    Ok(total / replicates as f64)
}

impl RunSettings {
    fn measure(&self, a: f64, gamma: f64, temp: f64) -> Result<f64> {
        final_abs_imbalance(
            a,
            gamma,
            temp,
            self.eta,
            self.batch_size,
            self.steps,
            self.replicates,
            self.init_amplitude,
            self.final_fraction,
            self.seed,
        )
    }
}

fn steps_for(t_end: f64, eta: f64) -> Result<usize> {
    Ok((positive("t_end", t_end)? / positive("eta", eta)?)
        .round()
        .max(1.0) as usize)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CollapseConfig {
    pub a: f64,
    pub temps: LogGrid,
    pub gammas: LogGrid,
    pub replicates: usize,
    pub eta: f64,
    pub batch_size: u64,
    pub t_end: f64,
    pub init_amplitude: f64,
    /// Fraction of the run averaged into the final imbalance.
    pub final_fraction: f64,
    pub seed: u64,
}

impl Default for CollapseConfig {
    fn default() -> Self {
        Self {
            a: 3.0,
            temps: LogGrid {
                min: 0.1,
                max: 3.0,
                n: 41,
            },
            gammas: LogGrid {
                min: 0.1,
                max: 3.0,
                n: 41,
            },
            replicates: 8,
            eta: 0.002,
            batch_size: 512,
            t_end: 50.0,
            init_amplitude: 0.01,
            final_fraction: 0.05,
            seed: 0,
        }
    }
}

impl CollapseConfig {
    fn settings(&self) -> Result<RunSettings> {
        Ok(RunSettings {
            eta: self.eta,
            batch_size: self.batch_size,
            steps: steps_for(self.t_end, self.eta)?,
            replicates: self.replicates,
            init_amplitude: self.init_amplitude,
            final_fraction: self.final_fraction,
            seed: self.seed,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CollapseCell {
    pub temp: f64,
    pub gamma: f64,
    pub final_abs_u: f64,
    /// Threshold temperature `a / (2 gamma)` for this row's `gamma`.
    pub threshold_temp: f64,
}

/// Final `|u_hat|` over a `(T, gamma)` grid at fixed `a` and `h = 0`.
pub fn collapse_map(cfg: &CollapseConfig) -> Result<(Vec<CollapseCell>, Table)> {
    let settings = cfg.settings()?;
    let temps = cfg.temps.values()?;
    let gammas = cfg.gammas.values()?;
    let coords: Vec<(f64, f64)> = gammas
        .iter()
        .flat_map(|&g| temps.iter().map(move |&t| (t, g)))
        .collect();
    let cells = coords
        .par_iter()
        .map(|&(temp, gamma)| {
            Ok(CollapseCell {
                temp,
                gamma,
                final_abs_u: settings.measure(cfg.a, gamma, temp)?,
                threshold_temp: critical_temperature(cfg.a, gamma),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut table = Table::new(&["temp", "gamma", "final_abs_u", "threshold_temp"]);
    for c in &cells {
        table.push(vec![
            c.temp.into(),
            c.gamma.into(),
            c.final_abs_u.into(),
            c.threshold_temp.into(),
        ]);
    }
    Ok((cells, table))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CriticalTempConfig {
    pub a: f64,
    pub gammas: Vec<f64>,
    pub onset_level: f64,
    pub replicates: usize,
    pub eta: f64,
    pub batch_size: u64,
    pub t_end: f64,
    pub init_amplitude: f64,
    pub final_fraction: f64,
    /// Scan `T` downward from `scan_hi * T_c` to `scan_lo * T_c`.
    pub scan_lo: f64,
    pub scan_hi: f64,
    pub scan_points: usize,
    /// Bisection refinements of the first bracketing scan interval.
    pub refine_iters: usize,
    pub seed: u64,
}

impl Default for CriticalTempConfig {
    fn default() -> Self {
        Self {
            a: 3.0,
            gammas: vec![0.5, 1.0, 2.0],
            onset_level: 0.1,
            replicates: 8,
            eta: 0.002,
            batch_size: 512,
            t_end: 50.0,
            init_amplitude: 0.01,
            final_fraction: 0.05,
            scan_lo: 0.3,
            scan_hi: 1.2,
            scan_points: 19,
            refine_iters: 8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalTempRow {
    pub gamma: f64,
    /// Highest temperature whose final `|u_hat|` reaches the onset level.
    pub t_onset: Option<f64>,
    pub t_c: f64,
}

/// Finite-time collapse onset temperature per `gamma`, next to `T_c = a / (2 gamma)`.
pub fn critical_temperature_scan(
    cfg: &CriticalTempConfig,
) -> Result<(Vec<CriticalTempRow>, Table)> {
    if !(cfg.onset_level > 0.0 && cfg.onset_level < 1.0) {
        return Err(ParamError::OutOfRange {
            name: "onset_level",
            lo: 0.0,
            hi: 1.0,
            value: cfg.onset_level,
        });
    }
    if cfg.scan_points < 2 || !(cfg.scan_lo > 0.0 && cfg.scan_lo < cfg.scan_hi) {
        return Err(ParamError::Invalid(
            "scan needs >= 2 points and 0 < scan_lo < scan_hi".into(),
        ));
    }
    let settings = RunSettings {
        eta: cfg.eta,
        batch_size: cfg.batch_size,
        steps: steps_for(cfg.t_end, cfg.eta)?,
        replicates: cfg.replicates,
        init_amplitude: cfg.init_amplitude,
        final_fraction: cfg.final_fraction,
        seed: cfg.seed,
    };
    let rows = cfg
        .gammas
        .par_iter()
        .map(|&gamma| {
            let t_c = critical_temperature(positive("a", cfg.a)?, positive("gamma", gamma)?);
            let grid: Vec<f64> = super::linspace(cfg.scan_hi, cfg.scan_lo, cfg.scan_points)
                .into_iter()
                .map(|f| f * t_c)
                .collect();
            let collapsed = |t: f64| -> Result<bool> {
                Ok(settings.measure(cfg.a, gamma, t)? >= cfg.onset_level)
            };
            let mut t_onset = None;
            let mut above = None;
            for &t in &grid {
                if collapsed(t)? {
                    t_onset = Some(match above {
                        None => t,
                        Some(mut hi) => {
                            let mut lo = t;
                            for _ in 0..cfg.refine_iters {
                                let mid = 0.5 * (lo + hi);
                                if collapsed(mid)? {
                                    lo = mid;
                                } else {
                                    hi = mid;
                                }
                            }
                            0.5 * (lo + hi)
                        }
                    });
                    break;
                }
                above = Some(t);
            }
            Ok(CriticalTempRow {
                gamma,
                t_onset,
                t_c,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut table = Table::new(&["gamma", "t_onset", "t_c"]);
    for r in &rows {
        table.push(vec![
            r.gamma.into(),
            Cell::opt(r.t_onset, NO_SWITCH),
            r.t_c.into(),
        ]);
    }
    Ok((rows, table))
}
