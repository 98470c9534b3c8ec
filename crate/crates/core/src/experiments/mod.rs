//! Reproducible experiment protocols.
//!
//! Every protocol is a pure function of its config (which carries the master
//! seed) and returns a [`Table`]; [`write_outputs`] serialises a table to
//! `<name>.csv` plus a `<name>.json` sidecar. Numbers are written with Rust's
//! shortest round-trip formatting, and sentinels (`no_switch`, `undefined`)
//! appear in-band as text cells.

mod collapse;
mod hysteresis;
mod mean_field;
mod moe_sweeps;

pub use collapse::{
    collapse_map, critical_temperature_scan, final_abs_imbalance, CollapseCell, CollapseConfig,
    CriticalTempConfig, CriticalTempRow, LogGrid,
};
pub use hysteresis::{
    balancing_feedback, hysteresis, run_sweep, switch_point, width_vs_a, BalancingConfig,
    Direction, HysteresisConfig, HysteresisResult, SweepRecord, SweepSchedule, WidthRow,
    WidthVsAConfig,
};
pub use mean_field::{mean_field_comparison, MeanFieldCompare, MeanFieldCompareConfig};
pub use moe_sweeps::{
    hard_moe_bias_sweep, hard_moe_lambda_scan, saturation_h, soft_moe_bias_sweep, HardSweepConfig,
    HardSweepRow, LambdaScanConfig, LambdaScanRow, SoftSweepConfig, SoftSweepRow,
};

use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;

/// Marker written where a sweep never changes sign.
pub const NO_SWITCH: &str = "no_switch";
/// Marker written where a quantity is not defined (e.g. `x*` with `alpha` crossing zero).
pub const UNDEFINED: &str = "undefined";

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl Cell {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Num(v) => Some(*v),
            Cell::Int(v) => Some(*v as f64),
            Cell::Text(_) => None,
        }
    }

    fn opt(value: Option<f64>, sentinel: &str) -> Self {
        value.map_or_else(|| Cell::Text(sentinel.to_string()), Cell::Num)
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Num(v) => write!(f, "{v}"),
            Cell::Int(v) => write!(f, "{v}"),
            Cell::Text(s) => f.write_str(s),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

/// Column-named rows destined for one CSV file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<&Cell>> {
        let idx = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| &r[idx]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut wtr = csv::Writer::from_writer(Vec::new());
        wtr.write_record(&self.columns).expect("in-memory write");
        for row in &self.rows {
            wtr.write_record(row.iter().map(|c| c.to_string()))
                .expect("in-memory write");
        }
        String::from_utf8(wtr.into_inner().expect("flush")).expect("utf-8")
    }
}

/// Version string recorded in sidecars.
pub fn version_string() -> String {
    format!("routerlab {}", env!("CARGO_PKG_VERSION"))
}

#[derive(Debug, Serialize)]
struct Sidecar<'a, C: Serialize, S: Serialize> {
    experiment: &'a str,
    version: String,
    seed: u64,
    config: &'a C,
    summary: &'a S,
    columns: &'a [String],
    rows: usize,
    wall_time_s: f64,
}

/// Files written for one experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputPaths {
    pub csv: PathBuf,
    pub sidecar: PathBuf,
}

/// Writes `<dir>/<name>.csv` and its `<dir>/<name>.json` sidecar.
#[allow(clippy::too_many_arguments)]
pub fn write_outputs<C: Serialize, S: Serialize>(
    dir: &Path,
    name: &str,
    table: &Table,
    config: &C,
    summary: &S,
    seed: u64,
    wall_time_s: f64,
) -> io::Result<OutputPaths> {
    fs::create_dir_all(dir)?;
    let csv = dir.join(format!("{name}.csv"));
    let sidecar = dir.join(format!("{name}.json"));
    fs::write(&csv, table.to_csv())?;
    let meta = Sidecar {
        experiment: name,
        version: version_string(),
        seed,
        config,
        summary,
        columns: &table.columns,
        rows: table.rows.len(),
        wall_time_s,
    };
    let json = serde_json::to_string_pretty(&meta).map_err(io::Error::other)?;
    fs::write(&sidecar, json + "\n")?;
    Ok(OutputPaths { csv, sidecar })
}

/// Mean of the last `ceil(fraction * len)` values (at least one).
pub(crate) fn trailing_mean(values: &[f64], fraction: f64) -> f64 {
    let k = ((values.len() as f64 * fraction).ceil() as usize).clamp(1, values.len());
    values[values.len() - k..].iter().sum::<f64>() / k as f64
}

pub(crate) fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// `n` evenly spaced values from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| {
                if i == n - 1 {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}
