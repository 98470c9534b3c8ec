//! Equilibria, thresholds and the fold/cusp geometry of the reduced router.

use serde::{Deserialize, Serialize};

use crate::error::{non_negative, positive, ParamError, Result};
use crate::model::{vector_field, vector_field_derivatives, RouterParams};

/// Number of uniform sub-intervals scanned for sign changes.
pub const SCAN_INTERVALS: usize = 4096;
/// Roots are refined until `|F| < ROOT_TOL` (or the bracket hits machine precision).
pub const ROOT_TOL: f64 = 1e-12;
/// `|F_y|` below this is classified as nonhyperbolic.
pub const CLASSIFY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stability {
    Stable,
    Unstable,
    Nonhyperbolic,
}

impl Stability {
    pub fn classify(f_y: f64) -> Self {
        if f_y < -CLASSIFY_TOL {
            Stability::Stable
        } else if f_y > CLASSIFY_TOL {
            Stability::Unstable
        } else {
            Stability::Nonhyperbolic
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Stability::Stable => "stable",
            Stability::Unstable => "unstable",
            Stability::Nonhyperbolic => "nonhyperbolic",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    pub y: f64,
    pub stability: Stability,
    pub f_y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Monostable,
    Bistable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumSet {
    /// Sorted by ascending `y`.
    pub equilibria: Vec<Equilibrium>,
    pub regime: Regime,
}

impl EquilibriumSet {
    pub fn len(&self) -> usize {
        self.equilibria.len()
    }

    pub fn is_empty(&self) -> bool {
        self.equilibria.is_empty()
    }

    pub fn stable(&self) -> impl Iterator<Item = &Equilibrium> {
        self.equilibria
            .iter()
            .filter(|e| e.stability == Stability::Stable)
    }
}

/// Pitchfork threshold `a_c = 2 gamma T`.
pub fn critical_feedback(gamma: f64, temp: f64) -> f64 {
    2.0 * gamma * temp
}

/// Temperature at which the balanced state loses stability, `T_c = a / (2 gamma)`.
pub fn critical_temperature(a: f64, gamma: f64) -> f64 {
    a / (2.0 * gamma)
}

/// Half-width of an interval outside which `F` has a fixed sign.
///
/// For `|y| > (a + |h|)/gamma` we have `|a tanh + h| < gamma |y|`.
pub fn root_bracket(params: &RouterParams) -> f64 {
    (params.a() + params.h().abs()) / params.gamma() + 1.0
}

/// All equilibria of the reduced field, classified by the sign of `F_y`.
///
/// A sign-change scan over [`SCAN_INTERVALS`] uniform cells of the analytic
/// bracket followed by bisection. Exact tangencies (fold points) may be
/// reported as zero or two nearby roots.
pub fn find_equilibria(params: &RouterParams) -> EquilibriumSet {
    let half = root_bracket(params);
    let f = |y: f64| vector_field(y, params);
    let node = |k: usize| -half + 2.0 * half * (k as f64 / SCAN_INTERVALS as f64);

    let mut roots = Vec::with_capacity(3);
    let mut lo = node(0);
    let mut f_lo = f(lo);
    if f_lo == 0.0 {
        roots.push(lo);
    }
    for k in 1..=SCAN_INTERVALS {
        let hi = node(k);
        let f_hi = f(hi);
        if f_hi == 0.0 {
            roots.push(hi);
        } else if f_lo != 0.0 && (f_lo < 0.0) != (f_hi < 0.0) {
            roots.push(bisect(&f, lo, hi, f_lo));
        }
        lo = hi;
        f_lo = f_hi;
    }

    let equilibria: Vec<Equilibrium> = roots
        .into_iter()
        .map(|y| {
            let f_y = vector_field_derivatives(y, params).f_y;
            Equilibrium {
                y,
                stability: Stability::classify(f_y),
                f_y,
            }
        })
        .collect();
    let n_stable = equilibria
        .iter()
        .filter(|e| e.stability == Stability::Stable)
        .count();
    EquilibriumSet {
        regime: if n_stable >= 2 {
            Regime::Bistable
        } else {
            Regime::Monostable
        },
        equilibria,
    }
}

fn bisect(f: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, mut f_lo: f64) -> f64 {
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return mid;
        }
        let f_mid = f(mid);
        if f_mid.abs() < ROOT_TOL {
            return mid;
        }
        if (f_mid < 0.0) == (f_lo < 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
}

/// One point `(a(q), h(q))` of the parametric fold curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoldCurvePoint {
    pub q: f64,
    pub a: f64,
    pub h: f64,
}

/// Fold set `a(q) = 2 gamma T cosh^2 q`, `h(q) = 2 gamma T (q - sinh q cosh q)`.
pub fn fold_curve(q_grid: &[f64], gamma: f64, temp: f64) -> Result<Vec<FoldCurvePoint>> {
    positive("gamma", gamma)?;
    positive("temp", temp)?;
    let scale = critical_feedback(gamma, temp);
    Ok(q_grid
        .iter()
        .map(|&q| {
            let c = q.cosh();
            FoldCurvePoint {
                q,
                a: scale * c * c,
                h: -scale * sinh_cosh_minus_id(q),
            }
        })
        .collect())
}

/// `sinh q cosh q - q`, with a series branch near zero to avoid cancellation.
fn sinh_cosh_minus_id(q: f64) -> f64 {
    if q.abs() < 1e-3 {
        // (sinh 2q - 2q) / 2 = 2q^3/3 + 2q^5/15 + ...
        let q2 = q * q;
        q * q2 * (2.0 / 3.0 + q2 * (2.0 / 15.0 + q2 * (4.0 / 315.0)))
    } else {
        0.5 * (2.0 * q).sinh() - q
    }
}

/// Fold parameter `q_a = arcosh sqrt(a / 2 gamma T)` for `a >= 2 gamma T`.
///
/// Computed as `ln(x + sqrt(x^2 - 1))` with `x^2 - 1 = a/(2 gamma T) - 1`
/// clamped below by zero.
pub fn fold_parameter(a: f64, gamma: f64, temp: f64) -> f64 {
    let ratio = a / critical_feedback(gamma, temp);
    let excess = (ratio - 1.0).max(0.0);
    // Clamp absorbs rounding when a sits exactly on the threshold.
    if excess <= 1e-15 {
        return 0.0;
    }
    (ratio.sqrt() + excess.sqrt()).ln()
}

/// Half-width `H(a)` of the bistable band `|h| < H(a)`; zero for `a <= 2 gamma T`.
pub fn hysteresis_boundary(a: f64, gamma: f64, temp: f64) -> Result<f64> {
    non_negative("a", a)?;
    positive("gamma", gamma)?;
    positive("temp", temp)?;
    if a <= critical_feedback(gamma, temp) {
        return Ok(0.0);
    }
    let q = fold_parameter(a, gamma, temp);
    Ok(critical_feedback(gamma, temp) * sinh_cosh_minus_id(q))
}

/// Leading-order cusp asymptote `H ~ (4T / (3 sqrt(gamma))) mu^{3/2}`.
pub fn cusp_asymptote(mu: f64, gamma: f64, temp: f64) -> f64 {
    if mu <= 0.0 {
        return 0.0;
    }
    4.0 * temp / (3.0 * gamma.sqrt()) * mu.powf(1.5)
}

/// Unfolding coordinates near the cusp `(y, a, h) = (0, 2 gamma T, 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CuspNormalForm {
    /// `a/(2T) - gamma`
    pub mu: f64,
    /// `h`
    pub eps: f64,
    /// Coefficient of `y^3` in the local expansion, `-a/(24 T^3)`.
    pub cubic_coeff: f64,
}

pub fn cusp_normal_form(params: &RouterParams) -> CuspNormalForm {
    let (a, t) = (params.a(), params.temp());
    CuspNormalForm {
        mu: a / (2.0 * t) - params.gamma(),
        eps: params.h(),
        cubic_coeff: -a / (24.0 * t * t * t),
    }
}

impl CuspNormalForm {
    /// Nonzero symmetric equilibrium of the truncated cubic, `sqrt(-mu / cubic)`.
    pub fn branch_amplitude(&self) -> Option<f64> {
        (self.mu > 0.0).then(|| (-self.mu / self.cubic_coeff).sqrt())
    }
}

/// Contrast-mode eigenvalue `a/(N T) - gamma` of the N-expert field at the uniform state.
pub fn n_expert_contrast_eigenvalue(n: usize, a: f64, gamma: f64, temp: f64) -> Result<f64> {
    check_experts(n)?;
    positive("a", a)?;
    positive("gamma", gamma)?;
    positive("temp", temp)?;
    Ok(a / (n as f64 * temp) - gamma)
}

/// Feedback strength `a = N gamma T` at which the uniform state loses stability.
pub fn n_expert_threshold(n: usize, gamma: f64, temp: f64) -> Result<f64> {
    check_experts(n)?;
    Ok(n as f64 * positive("gamma", gamma)? * positive("temp", temp)?)
}

/// Uniform equilibrium score `a / (N gamma)` of the symmetric N-expert field.
pub fn n_expert_uniform_score(n: usize, a: f64, gamma: f64) -> Result<f64> {
    check_experts(n)?;
    Ok(a / (n as f64 * gamma))
}

/// Mean-field right-hand side `a p_i(r) - gamma r_i + b_i` for N experts.
pub fn n_expert_vector_field(r: &[f64], drifts: &[f64], a: f64, gamma: f64, temp: f64) -> Vec<f64> {
    assert_eq!(r.len(), drifts.len(), "one drift per expert");
    let max = r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = r.iter().map(|&ri| ((ri - max) / temp).exp()).collect();
    let total: f64 = weights.iter().sum();
    r.iter()
        .zip(drifts)
        .zip(&weights)
        .map(|((&ri, &bi), &w)| a * w / total - gamma * ri + bi)
        .collect()
}

fn check_experts(n: usize) -> Result<()> {
    if n < 2 {
        return Err(ParamError::TooSmall {
            name: "n",
            min: 2.0,
            value: n as f64,
        });
    }
    Ok(())
}
