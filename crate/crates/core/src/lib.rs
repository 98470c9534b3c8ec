//! A small laboratory for the adaptive two-expert softmax router.
//!
//! * [`model`]: closed-form field, potential and derivatives of the reduced system.
//! * [`bifurcation`]: equilibria, pitchfork/fold thresholds and cusp geometry.
//! * [`simulator`]: stochastic batch routing and the RK4 mean-field integrator.
//! * [`moe`]: trainable soft-mix and hard top-1 two-expert regressors.
//! * [`experiments`]: reproducible protocols that emit CSV tables.

pub mod bifurcation;
pub mod error;
pub mod experiments;
pub mod model;
pub mod moe;
pub mod simulator;

pub use bifurcation::{
    critical_feedback, cusp_normal_form, find_equilibria, fold_curve, hysteresis_boundary,
    CuspNormalForm, Equilibrium, EquilibriumSet, FoldCurvePoint, Regime, Stability,
};
pub use error::ParamError;
pub use model::{RouterParams, RouterState};
pub use simulator::{SimConfig, Trajectory};
