//! Closed-form quantities of the two-expert adaptive softmax router.
//!
//! The reduced state is the score difference `y = r1 - r2`, which evolves as
//!
//! ```text
//! dy/dt = F(y) = a * tanh(y / 2T) - gamma * y + h
//! ```
//!
//! with potential `V(y) = (gamma/2) y^2 - 2aT log cosh(y/2T) - h y`, so that
//! `F = -dV/dy`. Everything here is pure and allocation free.

use serde::{Deserialize, Serialize};

use crate::error::{finite, non_negative, positive, ParamError, Result};

/// Model parameters `(a, gamma, T, b1, b2)`; the skew is `h = b1 - b2`.
///
/// `gamma` and `temp` are strictly positive; `a = 0` is accepted as the
/// reinforcement-free limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct RouterParams {
    a: f64,
    gamma: f64,
    temp: f64,
    b1: f64,
    b2: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct RawParams {
    a: f64,
    gamma: f64,
    temp: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    h: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    b1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    b2: Option<f64>,
}

impl TryFrom<RawParams> for RouterParams {
    type Error = ParamError;

    fn try_from(raw: RawParams) -> Result<Self> {
        match (raw.h, raw.b1, raw.b2) {
            (h, Some(b1), Some(b2)) => {
                let p = Self::with_drifts(raw.a, raw.gamma, raw.temp, b1, b2)?;
                if let Some(h) = h {
                    if (h - p.h()).abs() > 1e-12 * (1.0 + h.abs()) {
                        return Err(ParamError::Invalid(format!(
                            "h must equal b1 - b2 (h = {h}, b1 - b2 = {})",
                            p.h()
                        )));
                    }
                }
                Ok(p)
            }
            (h, None, None) => Self::new(raw.a, raw.gamma, raw.temp, h.unwrap_or(0.0)),
            _ => Err(ParamError::Invalid(
                "b1 and b2 must be given together".to_string(),
            )),
        }
    }
}

impl From<RouterParams> for RawParams {
    fn from(p: RouterParams) -> Self {
        RawParams {
            a: p.a,
            gamma: p.gamma,
            temp: p.temp,
            h: Some(p.h()),
            b1: Some(p.b1),
            b2: Some(p.b2),
        }
    }
}

impl RouterParams {
    /// Parameters with the skew split symmetrically, `b1 = h/2`, `b2 = -h/2`.
    pub fn new(a: f64, gamma: f64, temp: f64, h: f64) -> Result<Self> {
        finite("h", h)?;
        Self::with_drifts(a, gamma, temp, 0.5 * h, -0.5 * h)
    }

    pub fn with_drifts(a: f64, gamma: f64, temp: f64, b1: f64, b2: f64) -> Result<Self> {
        Ok(Self {
            a: non_negative("a", a)?,
            gamma: positive("gamma", gamma)?,
            temp: positive("temp", temp)?,
            b1: finite("b1", b1)?,
            b2: finite("b2", b2)?,
        })
    }

    pub fn with_h(self, h: f64) -> Result<Self> {
        Self::new(self.a, self.gamma, self.temp, h)
    }

    pub fn with_a(self, a: f64) -> Result<Self> {
        Self::with_drifts(a, self.gamma, self.temp, self.b1, self.b2)
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn temp(&self) -> f64 {
        self.temp
    }

    pub fn b1(&self) -> f64 {
        self.b1
    }

    pub fn b2(&self) -> f64 {
        self.b2
    }

    /// External skew `h = b1 - b2`.
    pub fn h(&self) -> f64 {
        self.b1 - self.b2
    }
}

/// Slow router scores of the two experts.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RouterState {
    pub r1: f64,
    pub r2: f64,
}

impl RouterState {
    pub fn new(r1: f64, r2: f64) -> Self {
        Self { r1, r2 }
    }

    /// Symmetric state with difference `y`: `r1 = y/2`, `r2 = -y/2`.
    pub fn from_difference(y: f64) -> Self {
        Self {
            r1: 0.5 * y,
            r2: -0.5 * y,
        }
    }

    pub fn y(&self) -> f64 {
        self.r1 - self.r2
    }
}

/// Two-expert softmax selection probabilities at temperature `temp`.
///
/// Evaluated through the logistic form of the score difference, so the
/// result is finite for any finite scores and `p1 + p2 == 1` up to rounding.
pub fn softmax_probs(state: RouterState, temp: f64) -> Result<(f64, f64)> {
    positive("temp", temp)?;
    let p1 = logistic(state.y() / temp);
    Ok((p1, 1.0 - p1))
}

/// `1 / (1 + exp(-z))` without overflow for large `|z|`.
pub fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Expected load difference `u = p1 - p2 = tanh(y / 2T)`.
pub fn load_difference(y: f64, temp: f64) -> f64 {
    (y / (2.0 * temp)).tanh()
}

/// The reduced vector field `F(y) = a tanh(y/2T) - gamma y + h`.
pub fn vector_field(y: f64, params: &RouterParams) -> f64 {
    params.a * load_difference(y, params.temp) - params.gamma * y + params.h()
}

/// Overflow-safe `log cosh x = |x| + log(1 + e^{-2|x|}) - log 2`.
pub fn log_cosh(x: f64) -> f64 {
    let ax = x.abs();
    ax + (-2.0 * ax).exp().ln_1p() - std::f64::consts::LN_2
}

/// Overflow-safe `sech^2 x = 4 e^{-2|x|} / (1 + e^{-2|x|})^2`.
pub fn sech2(x: f64) -> f64 {
    let e = (-2.0 * x.abs()).exp();
    4.0 * e / ((1.0 + e) * (1.0 + e))
}

/// Potential `V` with `F = -dV/dy`.
pub fn potential(y: f64, params: &RouterParams) -> f64 {
    let t = params.temp;
    0.5 * params.gamma * y * y - 2.0 * params.a * t * log_cosh(y / (2.0 * t)) - params.h() * y
}

/// First three `y`-derivatives of the vector field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldDerivatives {
    pub f_y: f64,
    pub f_yy: f64,
    pub f_yyy: f64,
}

pub fn vector_field_derivatives(y: f64, params: &RouterParams) -> FieldDerivatives {
    let (a, t) = (params.a, params.temp);
    let s = y / (2.0 * t);
    let sech2 = sech2(s);
    let tanh = s.tanh();
    FieldDerivatives {
        f_y: a / (2.0 * t) * sech2 - params.gamma,
        f_yy: -a / (2.0 * t * t) * sech2 * tanh,
        f_yyy: -a / (4.0 * t * t * t) * sech2 * (sech2 - 2.0 * tanh * tanh),
    }
}
