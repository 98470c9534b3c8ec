use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use routerlab::experiments::{
    BalancingConfig, CollapseConfig, CriticalTempConfig, HardSweepConfig, HysteresisConfig,
    LambdaScanConfig, MeanFieldCompareConfig, SoftSweepConfig, WidthVsAConfig,
};

use crate::configs::{
    EquilibriaConfig, FoldCurveConfig, HysteresisBoundaryConfig, MeanFieldConfig, SimulateConfig,
};

#[derive(Debug, Parser)]
#[command(
    name = "routerlab",
    version,
    about = "Adaptive two-expert router laboratory"
)]
pub struct Cli {
    /// Worker threads (0 = one per core); results do not depend on it
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Master seed
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory for CSV, sidecar and manifest files
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
    /// JSON config file or a manifest.json from an earlier run; flags override it
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Also print the CSV tables to stdout
    #[arg(long)]
    pub stdout: bool,
    /// Print the resolved config as JSON and exit without running
    #[arg(long)]
    pub print_config: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Equilibria of the reduced field with stability
    Equilibria(EquilibriaArgs),
    /// Fold (saddle-node) curve in the (a, h) plane
    FoldCurve(FoldCurveArgs),
    /// Fold bias H(a) for one or more feedback strengths
    HysteresisBoundary(HysteresisBoundaryArgs),
    /// Stochastic batch-routing trajectory or ensemble
    Simulate(SimulateArgs),
    /// RK4 solution of the mean-field system
    MeanField(MeanFieldArgs),
    /// Experiment protocols
    #[command(subcommand)]
    Exp(Experiment),
}

#[derive(Debug, Subcommand)]
pub enum Experiment {
    /// Stochastic ensemble mean against the mean-field path
    MeanFieldCompare(MeanFieldCompareArgs),
    /// Up and down bias sweeps with switch points
    Hysteresis(HysteresisArgs),
    /// Final |u| over a log grid of (T, gamma)
    CollapseMap(CollapseMapArgs),
    /// Finite-time collapse onset temperature per gamma
    CriticalTemp(CriticalTempArgs),
    /// Loop width against 2 H(a)
    WidthVsA(WidthVsAArgs),
    /// Loop width under load feedback rho
    Balancing(BalancingArgs),
    /// Bias sweep of the trainable soft mixture
    SoftMoe(SoftMoeArgs),
    /// Bias sweeps and penalty scan of the hard top-1 model
    HardMoe(HardMoeArgs),
}

#[derive(Debug, Args)]
pub struct EquilibriaArgs {
    #[arg(long, default_value_t = EquilibriaConfig::default().a)]
    pub a: f64,
    #[arg(long, default_value_t = EquilibriaConfig::default().gamma)]
    pub gamma: f64,
    #[arg(long, default_value_t = EquilibriaConfig::default().temp)]
    pub temp: f64,
    #[arg(long, default_value_t = EquilibriaConfig::default().h, allow_negative_numbers = true)]
    pub h: f64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct FoldCurveArgs {
    #[arg(long, default_value_t = FoldCurveConfig::default().gamma)]
    pub gamma: f64,
    #[arg(long, default_value_t = FoldCurveConfig::default().temp)]
    pub temp: f64,
    /// Curve parameter range is [-q_max, q_max]
    #[arg(long, default_value_t = FoldCurveConfig::default().q_max)]
    pub q_max: f64,
    #[arg(long, default_value_t = FoldCurveConfig::default().n)]
    pub n: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct HysteresisBoundaryArgs {
    /// Comma-separated feedback strengths
    #[arg(long, value_delimiter = ',', default_values_t = HysteresisBoundaryConfig::default().a)]
    pub a: Vec<f64>,
    #[arg(long, default_value_t = HysteresisBoundaryConfig::default().gamma)]
    pub gamma: f64,
    #[arg(long, default_value_t = HysteresisBoundaryConfig::default().temp)]
    pub temp: f64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = SimulateConfig::default().a)]
    pub a: f64,
    #[arg(long, default_value_t = SimulateConfig::default().gamma)]
    pub gamma: f64,
    #[arg(long, default_value_t = SimulateConfig::default().temp)]
    pub temp: f64,
    #[arg(long, default_value_t = SimulateConfig::default().h, allow_negative_numbers = true)]
    pub h: f64,
    #[arg(long, default_value_t = SimulateConfig::default().rho)]
    pub rho: f64,
    #[arg(long, default_value_t = SimulateConfig::default().eta)]
    pub eta: f64,
    #[arg(long, default_value_t = SimulateConfig::default().batch_size)]
    pub batch_size: u64,
    #[arg(long, default_value_t = SimulateConfig::default().steps)]
    pub steps: usize,
    /// Initial score difference r1 - r2
    #[arg(long, default_value_t = SimulateConfig::default().y0, allow_negative_numbers = true)]
    pub y0: f64,
    /// Independent runs; more than one writes pointwise mean and std instead of a path
    #[arg(long, default_value_t = SimulateConfig::default().runs)]
    pub runs: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct MeanFieldArgs {
    #[arg(long, default_value_t = MeanFieldConfig::default().a)]
    pub a: f64,
    #[arg(long, default_value_t = MeanFieldConfig::default().gamma)]
    pub gamma: f64,
    #[arg(long, default_value_t = MeanFieldConfig::default().temp)]
    pub temp: f64,
    #[arg(long, default_value_t = MeanFieldConfig::default().h, allow_negative_numbers = true)]
    pub h: f64,
    #[arg(long, default_value_t = MeanFieldConfig::default().rho)]
    pub rho: f64,
    #[arg(long, default_value_t = MeanFieldConfig::default().y0, allow_negative_numbers = true)]
    pub y0: f64,
    #[arg(long, default_value_t = MeanFieldConfig::default().t_end)]
    pub t_end: f64,
    #[arg(long, default_value_t = MeanFieldConfig::default().dt)]
    pub dt: f64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct MeanFieldCompareArgs {
    #[arg(long, default_value_t = MeanFieldCompareConfig::default().a)]
    pub a: f64,
    #[arg(long, default_value_t = MeanFieldCompareConfig::default().gamma)]
    pub gamma: f64,
    #[arg(long, default_value_t = MeanFieldCompareConfig::default().temp)]
    pub temp: f64,
    #[arg(long, default_value_t = MeanFieldCompareConfig::default().h, allow_negative_numbers = true)]
    pub h: f64,
    #[arg(long, default_value_t = MeanFieldCompareConfig::default().rho)]
    pub rho: f64,
    #[arg(long, default_value_t = MeanFieldCompareConfig::default().batch_size)]
    pub batch_size: u64,
    #[arg(long, default_value_t = MeanFieldCompareConfig::default().eta)]
    pub eta: f64,
    #[arg(long, default_value_t = MeanFieldCompareConfig::default().runs)]
    pub runs: usize,
    #[arg(long, default_value_t = MeanFieldCompareConfig::default().t_end)]
    pub t_end: f64,
    #[arg(long, default_value_t = MeanFieldCompareConfig::default().max_dt)]
    pub max_dt: f64,
    #[command(flatten)]
    pub common: Common,
}

/// Sweep settings shared by the hysteresis-style experiments.
#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, default_value_t = HysteresisConfig::default().gamma)]
    pub gamma: f64,
    #[arg(long, default_value_t = HysteresisConfig::default().temp)]
    pub temp: f64,
    #[arg(long, default_value_t = HysteresisConfig::default().eta)]
    pub eta: f64,
    #[arg(long, default_value_t = HysteresisConfig::default().batch_size)]
    pub batch_size: u64,
    #[arg(long, default_value_t = HysteresisConfig::default().n_values)]
    pub n_values: usize,
    #[arg(long, default_value_t = HysteresisConfig::default().steps_per_value)]
    pub steps_per_value: usize,
    #[arg(long, default_value_t = HysteresisConfig::default().trailing_fraction)]
    pub trailing_fraction: f64,
    /// Grid half-width as a multiple of H(a)
    #[arg(long, default_value_t = HysteresisConfig::default().span_factor)]
    pub span_factor: f64,
    #[arg(long, default_value_t = HysteresisConfig::default().min_span)]
    pub min_span: f64,
    /// Explicit grid half-width [default: none]
    #[arg(long)]
    pub h_span: Option<f64>,
}

#[derive(Debug, Args)]
pub struct HysteresisArgs {
    #[arg(long, default_value_t = HysteresisConfig::default().a)]
    pub a: f64,
    #[arg(long, default_value_t = HysteresisConfig::default().rho)]
    pub rho: f64,
    #[command(flatten)]
    pub sweep: SweepArgs,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct WidthVsAArgs {
    #[arg(long, value_delimiter = ',', default_values_t = WidthVsAConfig::default().a_values)]
    pub a_values: Vec<f64>,
    #[arg(long, default_value_t = HysteresisConfig::default().rho)]
    pub rho: f64,
    #[command(flatten)]
    pub sweep: SweepArgs,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct BalancingArgs {
    #[arg(long, value_delimiter = ',', default_values_t = BalancingConfig::default().rho_values)]
    pub rho_values: Vec<f64>,
    #[arg(long, default_value_t = HysteresisConfig::default().a)]
    pub a: f64,
    #[command(flatten)]
    pub sweep: SweepArgs,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct CollapseMapArgs {
    #[arg(long, default_value_t = CollapseConfig::default().a)]
    pub a: f64,
    #[arg(long, default_value_t = CollapseConfig::default().temps.min)]
    pub temp_min: f64,
    #[arg(long, default_value_t = CollapseConfig::default().temps.max)]
    pub temp_max: f64,
    #[arg(long, default_value_t = CollapseConfig::default().temps.n)]
    pub temp_n: usize,
    #[arg(long, default_value_t = CollapseConfig::default().gammas.min)]
    pub gamma_min: f64,
    #[arg(long, default_value_t = CollapseConfig::default().gammas.max)]
    pub gamma_max: f64,
    #[arg(long, default_value_t = CollapseConfig::default().gammas.n)]
    pub gamma_n: usize,
    #[arg(long, default_value_t = CollapseConfig::default().replicates)]
    pub replicates: usize,
    #[arg(long, default_value_t = CollapseConfig::default().eta)]
    pub eta: f64,
    #[arg(long, default_value_t = CollapseConfig::default().batch_size)]
    pub batch_size: u64,
    #[arg(long, default_value_t = CollapseConfig::default().t_end)]
    pub t_end: f64,
    #[arg(long, default_value_t = CollapseConfig::default().init_amplitude)]
    pub init_amplitude: f64,
    #[arg(long, default_value_t = CollapseConfig::default().final_fraction)]
    pub final_fraction: f64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct CriticalTempArgs {
    #[arg(long, default_value_t = CriticalTempConfig::default().a)]
    pub a: f64,
    #[arg(long, value_delimiter = ',', default_values_t = CriticalTempConfig::default().gammas)]
    pub gammas: Vec<f64>,
    #[arg(long, default_value_t = CriticalTempConfig::default().onset_level)]
    pub onset_level: f64,
    #[arg(long, default_value_t = CriticalTempConfig::default().replicates)]
    pub replicates: usize,
    #[arg(long, default_value_t = CriticalTempConfig::default().eta)]
    pub eta: f64,
    #[arg(long, default_value_t = CriticalTempConfig::default().batch_size)]
    pub batch_size: u64,
    #[arg(long, default_value_t = CriticalTempConfig::default().t_end)]
    pub t_end: f64,
    #[arg(long, default_value_t = CriticalTempConfig::default().init_amplitude)]
    pub init_amplitude: f64,
    #[arg(long, default_value_t = CriticalTempConfig::default().final_fraction)]
    pub final_fraction: f64,
    /// Lowest scanned temperature as a multiple of a/(2 gamma)
    #[arg(long, default_value_t = CriticalTempConfig::default().scan_lo)]
    pub scan_lo: f64,
    /// Highest scanned temperature as a multiple of a/(2 gamma)
    #[arg(long, default_value_t = CriticalTempConfig::default().scan_hi)]
    pub scan_hi: f64,
    #[arg(long, default_value_t = CriticalTempConfig::default().scan_points)]
    pub scan_points: usize,
    #[arg(long, default_value_t = CriticalTempConfig::default().refine_iters)]
    pub refine_iters: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct SoftMoeArgs {
    #[arg(long, default_value_t = SoftSweepConfig::default().temp)]
    pub temp: f64,
    #[arg(long, default_value_t = SoftSweepConfig::default().lr)]
    pub lr: f64,
    /// Router regularization weight
    #[arg(long, default_value_t = SoftSweepConfig::default().reg)]
    pub reg: f64,
    #[arg(long, default_value_t = SoftSweepConfig::default().batch_size)]
    pub batch_size: usize,
    #[arg(long, default_value_t = SoftSweepConfig::default().steps_per_value)]
    pub steps_per_value: usize,
    #[arg(long, default_value_t = SoftSweepConfig::default().h_max)]
    pub h_max: f64,
    #[arg(long, default_value_t = SoftSweepConfig::default().n_values)]
    pub n_values: usize,
    #[arg(long, default_value_t = SoftSweepConfig::default().eval_points)]
    pub eval_points: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct HardMoeArgs {
    #[arg(long, default_value_t = HardSweepConfig::default().temp)]
    pub temp: f64,
    #[arg(long, default_value_t = HardSweepConfig::default().lr)]
    pub lr: f64,
    /// Router weight decay
    #[arg(long, default_value_t = HardSweepConfig::default().reg)]
    pub reg: f64,
    #[arg(long, default_value_t = HardSweepConfig::default().batch_size)]
    pub batch_size: usize,
    #[arg(long, default_value_t = HardSweepConfig::default().eval_points)]
    pub eval_points: usize,
    #[arg(long, default_value_t = HardSweepConfig::default().steps_per_value)]
    pub steps_per_value: usize,
    #[arg(long, default_value_t = HardSweepConfig::default().h_max)]
    pub h_max: f64,
    #[arg(long, default_value_t = HardSweepConfig::default().n_values)]
    pub n_values: usize,
    /// Penalty weights of the bias sweeps
    #[arg(long, value_delimiter = ',', default_values_t = HardSweepConfig::default().lambdas)]
    pub sweep_lambdas: Vec<f64>,
    /// Fixed bias of the penalty scan
    #[arg(long, default_value_t = LambdaScanConfig::default().h, allow_negative_numbers = true)]
    pub scan_h: f64,
    /// Penalty weights of the scan
    #[arg(long, value_delimiter = ',', default_values_t = LambdaScanConfig::default().lambdas)]
    pub scan_lambdas: Vec<f64>,
    #[arg(long, default_value_t = LambdaScanConfig::default().replicates)]
    pub replicates: usize,
    #[arg(long, default_value_t = LambdaScanConfig::default().steps)]
    pub scan_steps: usize,
    /// |u| level that counts as saturated
    #[arg(long, default_value_t = crate::configs::HardMoeConfig::default().saturation_level)]
    pub saturation_level: f64,
    #[command(flatten)]
    pub common: Common,
}
