use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{linspace, trailing_mean, Cell, Table, NO_SWITCH};
use crate::bifurcation::hysteresis_boundary;
use crate::error::{non_negative, ParamError, Result};
use crate::model::RouterParams;
use crate::simulator::{BatchRouter, SimConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Up,
    Down,
}

impl Direction {
    pub fn as_str(&self) -> &'static str {
        match self {
            Direction::Up => "up",
            Direction::Down => "down",
        }
    }
}

/// Quasi-static protocol: settle for `steps_per_value` batches at each `h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSchedule {
    pub h_values: Vec<f64>,
    pub steps_per_value: usize,
    pub direction: Direction,
    /// Carry the router state from one `h` to the next.
    pub warm_start: bool,
    /// Fraction of the settle steps averaged into each record.
    pub trailing_fraction: f64,
}

impl SweepSchedule {
    /// `n` values spanning `[-span, span]`, ordered by `direction`.
    pub fn symmetric(span: f64, n: usize, steps_per_value: usize, direction: Direction) -> Self {
        let mut h_values = linspace(-span, span, n);
        if direction == Direction::Down {
            h_values.reverse();
        }
        Self {
            h_values,
            steps_per_value,
            direction,
            warm_start: true,
            trailing_fraction: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps_per_value < 1 {
            return Err(ParamError::TooSmall {
                name: "steps_per_value",
                min: 1.0,
                value: 0.0,
            });
        }
        if self.h_values.is_empty() {
            return Err(ParamError::Invalid("sweep grid is empty".into()));
        }
        let monotone = self.h_values.windows(2).all(|w| match self.direction {
            Direction::Up => w[1] > w[0],
            Direction::Down => w[1] < w[0],
        });
        if !monotone {
            return Err(ParamError::Invalid(format!(
                "sweep grid must be strictly {} ",
                if self.direction == Direction::Up {
                    "increasing"
                } else {
                    "decreasing"
                }
            )));
        }
        if !(self.trailing_fraction > 0.0 && self.trailing_fraction <= 1.0) {
            return Err(ParamError::OutOfRange {
                name: "trailing_fraction",
                lo: 0.0,
                hi: 1.0,
                value: self.trailing_fraction,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub h: f64,
    /// Mean of `u_hat` over the trailing part of the settle steps.
    pub mean_u: f64,
    pub direction: Direction,
}

/// Runs one sweep on random stream `stream`; `base.params` supplies `a, gamma, T`.
pub fn run_sweep(
    base: &SimConfig,
    schedule: &SweepSchedule,
    stream: u64,
) -> Result<Vec<SweepRecord>> {
    schedule.validate()?;
    let mut router = BatchRouter::new(base, stream)?;
    let mut u_hat = vec![0.0; schedule.steps_per_value];
    schedule
        .h_values
        .iter()
        .map(|&h| {
            router.params = base.params.with_h(h)?;
            if !schedule.warm_start {
                router.state = base.init;
            }
            for u in u_hat.iter_mut() {
                *u = router.step().u_hat;
            }
            Ok(SweepRecord {
                h,
                mean_u: trailing_mean(&u_hat, schedule.trailing_fraction),
                direction: schedule.direction,
            })
        })
        .collect()
}

/// First grid value at which the record sign differs from the previous record.
pub fn switch_point(records: &[SweepRecord]) -> Option<f64> {
    let mut sign = 0.0f64;
    for r in records {
        let s = if r.mean_u > 0.0 {
            1.0
        } else if r.mean_u < 0.0 {
            -1.0
        } else {
            0.0
        };
        if s != 0.0 {
            if sign != 0.0 && s != sign {
                return Some(r.h);
            }
            sign = s;
        }
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HysteresisConfig {
    pub a: f64,
    pub gamma: f64,
    pub temp: f64,
    pub rho: f64,
    pub eta: f64,
    pub batch_size: u64,
    pub n_values: usize,
    pub steps_per_value: usize,
    pub trailing_fraction: f64,
    /// Grid half-width as a multiple of `H(a)`.
    pub span_factor: f64,
    /// Lower bound on the grid half-width (used when `H(a)` is small or zero).
    pub min_span: f64,
    /// Explicit grid half-width; overrides `span_factor` and `min_span`.
    pub h_span: Option<f64>,
    pub seed: u64,
}

impl Default for HysteresisConfig {
    fn default() -> Self {
        Self {
            a: 4.0,
            gamma: 1.0,
            temp: 1.0,
            rho: 0.0,
            eta: 0.002,
            batch_size: 512,
            n_values: 81,
            steps_per_value: 16000,
            trailing_fraction: 0.5,
            span_factor: 1.5,
            min_span: 0.2,
            h_span: None,
            seed: 0,
        }
    }
}

impl HysteresisConfig {
    pub fn span(&self) -> Result<f64> {
        if let Some(span) = self.h_span {
            return non_negative("h_span", span);
        }
        let big_h = hysteresis_boundary(self.a, self.gamma, self.temp)?;
        Ok((self.span_factor * big_h).max(self.min_span))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HysteresisResult {
    pub up: Vec<SweepRecord>,
    pub down: Vec<SweepRecord>,
    pub up_switch: Option<f64>,
    pub down_switch: Option<f64>,
    /// Measured loop width `up_switch - down_switch`.
    pub width: Option<f64>,
    /// Predicted fold location `H(a - rho)`; folds sit at `+-predicted_h`.
    pub predicted_h: f64,
    pub grid_spacing: f64,
}

impl HysteresisResult {
    pub fn table(&self) -> Table {
        let mut t = Table::new(&["direction", "h", "mean_u"]);
        for r in self.up.iter().chain(&self.down) {
            t.push(vec![
                r.direction.as_str().into(),
                r.h.into(),
                r.mean_u.into(),
            ]);
        }
        t
    }

    pub fn summary(&self) -> serde_json::Value {
        let opt = |v: Option<f64>| v.map_or(serde_json::json!(NO_SWITCH), |x| serde_json::json!(x));
        serde_json::json!({
            "up_switch": opt(self.up_switch),
            "down_switch": opt(self.down_switch),
            "width": opt(self.width),
            "predicted_fold_lo": -self.predicted_h,
            "predicted_fold_hi": self.predicted_h,
            "predicted_width": 2.0 * self.predicted_h,
            "grid_spacing": self.grid_spacing,
        })
    }
}

/// Up and down sweeps (streams 0 and 1) plus switch points and predicted folds.
pub fn hysteresis(cfg: &HysteresisConfig) -> Result<HysteresisResult> {
    let params = RouterParams::new(cfg.a, cfg.gamma, cfg.temp, 0.0)?;
    non_negative("rho", cfg.rho)?;
    let span = cfg.span()?;
    let mut base = SimConfig::new(params, cfg.eta, cfg.batch_size, 0, cfg.seed);
    base.rho = cfg.rho;
    let schedule = |direction| SweepSchedule {
        trailing_fraction: cfg.trailing_fraction,
        ..SweepSchedule::symmetric(span, cfg.n_values, cfg.steps_per_value, direction)
    };
    let (up, down) = rayon::join(
        || run_sweep(&base, &schedule(Direction::Up), 0),
        || run_sweep(&base, &schedule(Direction::Down), 1),
    );
    let (up, down) = (up?, down?);
    let up_switch = switch_point(&up);
    let down_switch = switch_point(&down);
    let a_eff = (cfg.a - cfg.rho).max(0.0);
    Ok(HysteresisResult {
        width: up_switch.zip(down_switch).map(|(u, d)| u - d),
        up_switch,
        down_switch,
        predicted_h: hysteresis_boundary(a_eff, cfg.gamma, cfg.temp)?,
        grid_spacing: if cfg.n_values > 1 {
            2.0 * span / (cfg.n_values - 1) as f64
        } else {
            0.0
        },
        up,
        down,
    })
}

/// One row of a loop-width table keyed by `a` or `rho`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WidthRow {
    pub key: f64,
    pub measured_width: Option<f64>,
    pub predicted_width: f64,
    pub grid_spacing: f64,
}

fn width_table(key: &str, rows: &[WidthRow]) -> Table {
    let mut t = Table::new(&[key, "measured_width", "predicted_width"]);
    for r in rows {
        t.push(vec![
            r.key.into(),
            Cell::opt(r.measured_width, NO_SWITCH),
            r.predicted_width.into(),
        ]);
    }
    t
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WidthVsAConfig {
    pub a_values: Vec<f64>,
    #[serde(flatten)]
    pub base: HysteresisConfig,
}

impl Default for WidthVsAConfig {
    fn default() -> Self {
        Self {
            a_values: vec![2.5, 3.0, 4.0, 5.0],
            base: HysteresisConfig::default(),
        }
    }
}

/// Loop width against `2 H(a)` for each `a` (grid half-width follows `H(a)`).
pub fn width_vs_a(cfg: &WidthVsAConfig) -> Result<(Vec<WidthRow>, Table)> {
    let rows = cfg
        .a_values
        .par_iter()
        .map(|&a| {
            let run = hysteresis(&HysteresisConfig { a, ..cfg.base })?;
            Ok(WidthRow {
                key: a,
                measured_width: run.width,
                predicted_width: 2.0 * run.predicted_h,
                grid_spacing: run.grid_spacing,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let table = width_table("a", &rows);
    Ok((rows, table))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BalancingConfig {
    pub rho_values: Vec<f64>,
    #[serde(flatten)]
    pub base: HysteresisConfig,
}

impl Default for BalancingConfig {
    fn default() -> Self {
        Self {
            rho_values: vec![0.0, 0.4, 0.8, 1.2, 1.6, 2.0, 2.2, 2.6],
            base: HysteresisConfig::default(),
        }
    }
}

/// Loop width with load feedback `rho` against `2 H(a - rho)`.
///
/// All sweeps share the grid built from `H(a)` at `rho = 0`.
pub fn balancing_feedback(cfg: &BalancingConfig) -> Result<(Vec<WidthRow>, Table)> {
    let span = cfg.base.span()?;
    let rows = cfg
        .rho_values
        .par_iter()
        .map(|&rho| {
            let run = hysteresis(&HysteresisConfig {
                rho,
                h_span: Some(span),
                ..cfg.base
            })?;
            Ok(WidthRow {
                key: rho,
                measured_width: run.width,
                predicted_width: 2.0 * run.predicted_h,
                grid_spacing: run.grid_spacing,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let table = width_table("rho", &rows);
    Ok((rows, table))
}
