use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::parser::ValueSource;
use clap::ArgMatches;
use routerlab::experiments::{version_string, write_outputs};
use routerlab::ParamError;
use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

use crate::args::*;
use crate::configs::*;
use routerlab::experiments::{
    BalancingConfig, CollapseConfig, CriticalTempConfig, HysteresisConfig, MeanFieldCompareConfig,
    SoftSweepConfig, WidthVsAConfig,
};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("invalid parameter: {0}")]
    Domain(#[from] ParamError),
    #[error("{context}: {source}")]
    Io { context: String, source: io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Domain(_) => 3,
            CliError::Io { .. } => 4,
        }
    }

    fn io(context: impl Into<String>, source: io::Error) -> Self {
        CliError::Io {
            context: context.into(),
            source,
        }
    }
}

/// Copies `src` into `dst` only when the flag was typed on the command line.
fn apply<T: Clone>(m: &ArgMatches, id: &str, src: &T, dst: &mut T) {
    if m.value_source(id) == Some(ValueSource::CommandLine) {
        *dst = src.clone();
    }
}

macro_rules! overlay {
    ($m:expr, $args:expr, $cfg:expr; $($field:ident),+ $(,)?) => {
        $( apply($m, stringify!($field), &$args.$field, &mut $cfg.$field); )+
    };
}

#[derive(Serialize)]
struct Manifest<'a, C> {
    subcommand: &'a str,
    version: String,
    seed: u64,
    config: &'a C,
    outputs: Vec<String>,
}

/// Reads a plain config, or the `config` of a manifest written by the same subcommand.
fn load_config<J: Job>(path: &Path) -> Result<J, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path.display().to_string(), e))?;
    let bad = |e: serde_json::Error| CliError::Usage(format!("{}: {e}", path.display()));
    let mut value: Value = serde_json::from_str(&text).map_err(bad)?;
    if let Some(sub) = value.get("subcommand") {
        if sub.as_str() != Some(J::NAME) {
            return Err(CliError::Usage(format!(
                "{} is a manifest of `{}`, not `{}`",
                path.display(),
                sub.as_str().unwrap_or("?"),
                J::NAME
            )));
        }
        value = value.get("config").cloned().ok_or_else(|| {
            CliError::Usage(format!("{}: manifest has no config", path.display()))
        })?;
    }
    serde_json::from_value(value).map_err(bad)
}

/// Starting config: the `--config` file if given, else the defaults.
fn base<J: Job>(m: &ArgMatches, common: &Common) -> Result<J, CliError> {
    let mut cfg = match &common.config {
        Some(path) => load_config::<J>(path)?,
        None => J::default(),
    };
    apply(m, "seed", &common.seed, cfg.seed_mut());
    Ok(cfg)
}

fn execute<J: Job>(cfg: J, common: &Common) -> Result<(), CliError> {
    if common.print_config {
        let json = serde_json::to_string_pretty(&cfg).expect("config serialises");
        println!("{json}");
        return Ok(());
    }
    let mut cfg = cfg;
    let seed = *cfg.seed_mut();
    let start = Instant::now();
    let outputs = cfg.execute()?;
    let wall = start.elapsed().as_secs_f64();

    let dir = &common.out_dir;
    let mut files = Vec::new();
    for out in &outputs {
        let paths = write_outputs(dir, out.name, &out.table, &cfg, &out.summary, seed, wall)
            .map_err(|e| CliError::io(dir.display().to_string(), e))?;
        for p in [&paths.csv, &paths.sidecar] {
            files.push(file_name(p));
        }
        println!(
            "{}: {} rows -> {}",
            out.name,
            out.table.rows.len(),
            paths.csv.display()
        );
        println!("  {}", out.summary);
        if common.stdout {
            print!("{}", out.table.to_csv());
        }
    }
    let manifest = Manifest {
        subcommand: J::NAME,
        version: version_string(),
        seed,
        config: &cfg,
        outputs: files,
    };
    let path = dir.join("manifest.json");
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
    fs::write(&path, json + "\n").map_err(|e| CliError::io(path.display().to_string(), e))?;
    println!("wrote {} ({wall:.2}s)", path.display());
    Ok(())
}

fn file_name(p: &Path) -> String {
    p.file_name()
        .map(PathBuf::from)
        .unwrap_or_default()
        .display()
        .to_string()
}

fn sweep_overlay(m: &ArgMatches, s: &SweepArgs, cfg: &mut HysteresisConfig) {
    overlay!(m, s, cfg; gamma, temp, eta, batch_size, n_values, steps_per_value,
        trailing_fraction, span_factor, min_span);
    if s.h_span.is_some() {
        cfg.h_span = s.h_span;
    }
}

/// The innermost subcommand's matches, where the leaf flags live.
pub fn leaf(m: &ArgMatches) -> &ArgMatches {
    match m.subcommand() {
        Some((_, sub)) => leaf(sub),
        None => m,
    }
}

pub fn dispatch(command: &Command, m: &ArgMatches) -> Result<(), CliError> {
    match command {
        Command::Equilibria(a) => {
            let mut c: EquilibriaConfig = base(m, &a.common)?;
            overlay!(m, a, c; a, gamma, temp, h);
            execute(c, &a.common)
        }
        Command::FoldCurve(a) => {
            let mut c: FoldCurveConfig = base(m, &a.common)?;
            overlay!(m, a, c; gamma, temp, q_max, n);
            execute(c, &a.common)
        }
        Command::HysteresisBoundary(a) => {
            let mut c: HysteresisBoundaryConfig = base(m, &a.common)?;
            overlay!(m, a, c; a, gamma, temp);
            execute(c, &a.common)
        }
        Command::Simulate(a) => {
            let mut c: SimulateConfig = base(m, &a.common)?;
            overlay!(m, a, c; a, gamma, temp, h, rho, eta, batch_size, steps, y0, runs);
            execute(c, &a.common)
        }
        Command::MeanField(a) => {
            let mut c: MeanFieldConfig = base(m, &a.common)?;
            overlay!(m, a, c; a, gamma, temp, h, rho, y0, t_end, dt);
            execute(c, &a.common)
        }
        Command::Exp(e) => dispatch_experiment(e, m),
    }
}

fn dispatch_experiment(e: &Experiment, m: &ArgMatches) -> Result<(), CliError> {
    match e {
        Experiment::MeanFieldCompare(a) => {
            let mut c: MeanFieldCompareConfig = base(m, &a.common)?;
            overlay!(m, a, c; a, gamma, temp, h, rho, batch_size, eta, runs, t_end, max_dt);
            execute(c, &a.common)
        }
        Experiment::Hysteresis(a) => {
            let mut c: HysteresisConfig = base(m, &a.common)?;
            overlay!(m, a, c; a, rho);
            sweep_overlay(m, &a.sweep, &mut c);
            execute(c, &a.common)
        }
        Experiment::CollapseMap(a) => {
            let mut c: CollapseConfig = base(m, &a.common)?;
            overlay!(m, a, c; a, replicates, eta, batch_size, t_end, init_amplitude, final_fraction);
            apply(m, "temp_min", &a.temp_min, &mut c.temps.min);
            apply(m, "temp_max", &a.temp_max, &mut c.temps.max);
            apply(m, "temp_n", &a.temp_n, &mut c.temps.n);
            apply(m, "gamma_min", &a.gamma_min, &mut c.gammas.min);
            apply(m, "gamma_max", &a.gamma_max, &mut c.gammas.max);
            apply(m, "gamma_n", &a.gamma_n, &mut c.gammas.n);
            execute(c, &a.common)
        }
        Experiment::CriticalTemp(a) => {
            let mut c: CriticalTempConfig = base(m, &a.common)?;
            overlay!(m, a, c; a, gammas, onset_level, replicates, eta, batch_size, t_end,
                init_amplitude, final_fraction, scan_lo, scan_hi, scan_points, refine_iters);
            execute(c, &a.common)
        }
        Experiment::WidthVsA(a) => {
            let mut c: WidthVsAConfig = base(m, &a.common)?;
            overlay!(m, a, c; a_values);
            apply(m, "rho", &a.rho, &mut c.base.rho);
            sweep_overlay(m, &a.sweep, &mut c.base);
            execute(c, &a.common)
        }
        Experiment::Balancing(a) => {
            let mut c: BalancingConfig = base(m, &a.common)?;
            overlay!(m, a, c; rho_values);
            apply(m, "a", &a.a, &mut c.base.a);
            sweep_overlay(m, &a.sweep, &mut c.base);
            execute(c, &a.common)
        }
        Experiment::SoftMoe(a) => {
            let mut c: SoftSweepConfig = base(m, &a.common)?;
            overlay!(m, a, c; temp, lr, reg, batch_size, steps_per_value, h_max, n_values, eval_points);
            execute(c, &a.common)
        }
        Experiment::HardMoe(a) => {
            let mut c: HardMoeConfig = base(m, &a.common)?;
            overlay!(m, a, c; temp, lr, reg, batch_size, eval_points, steps_per_value, h_max,
                n_values, sweep_lambdas, scan_h, scan_lambdas, replicates, scan_steps,
                saturation_level);
            execute(c, &a.common)
        }
    }
}
