//! Scalar robust regression losses and their analytic gradients.
//!
//! Two kernels are provided, both with the transition point fixed at `|x| = 1`:
//!
//! ```text
//! dense point:  ω·ln(1 + x²)          |x| < 1
//!               ω·(|x| + ln 2 − 1)    otherwise,   0 < ω ≤ 1/2
//!
//! smooth-l1:    x²/2                  |x| < 1
//!               |x| − 1/2             otherwise
//! ```
//!
//! Both losses are even, continuous and non-decreasing in `|x|`. For every
//! admissible `ω` the dense point loss and the magnitude of its gradient are
//! bounded above by their Smooth-L1 counterparts, which is what makes it
//! tolerant of badly regressed points early in training.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scale factor of the dense point loss, restricted to `0 < omega <= 0.5`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct LossParams {
    omega: f64,
}

impl LossParams {
    pub const MAX_OMEGA: f64 = 0.5;

    pub fn new(omega: f64) -> Result<Self> {
        if !(omega > 0.0 && omega <= Self::MAX_OMEGA) {
            return Err(Error::invalid(
                "omega",
                format!("must satisfy 0 < omega <= 0.5, got {omega}"),
            ));
        }
        Ok(LossParams { omega })
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }
}

impl TryFrom<f64> for LossParams {
    type Error = Error;

    fn try_from(omega: f64) -> Result<Self> {
        LossParams::new(omega)
    }
}

impl From<LossParams> for f64 {
    fn from(p: LossParams) -> f64 {
        p.omega
    }
}

/// A signed, finite prediction-minus-target difference.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Residual(f64);

impl Residual {
    pub fn new(x: f64) -> Result<Self> {
        if !x.is_finite() {
            return Err(Error::NonFinite("residual"));
        }
        Ok(Residual(x))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Builds a batch of residuals, rejecting the whole batch if any entry is NaN or infinite.
    pub fn batch(xs: &[f64]) -> Result<Vec<Residual>> {
        xs.iter().map(|&x| Residual::new(x)).collect()
    }
}

impl TryFrom<f64> for Residual {
    type Error = Error;

    fn try_from(x: f64) -> Result<Self> {
        Residual::new(x)
    }
}

/// Which regression loss to apply.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossKind {
    DensePoint(LossParams),
    SmoothL1,
}

impl LossKind {
    pub fn dense_point(omega: f64) -> Result<Self> {
        LossParams::new(omega).map(LossKind::DensePoint)
    }

    pub fn loss(&self, x: Residual) -> f64 {
        match self {
            LossKind::DensePoint(p) => dp_loss(x, *p),
            LossKind::SmoothL1 => smooth_l1(x),
        }
    }

    pub fn grad(&self, x: Residual) -> f64 {
        match self {
            LossKind::DensePoint(p) => dp_grad(x, *p),
            LossKind::SmoothL1 => smooth_l1_grad(x),
        }
    }

    /// Short stable label, e.g. `dp(0.25)` or `smooth_l1`.
    pub fn label(&self) -> String {
        match self {
            LossKind::DensePoint(p) => format!("dp({})", p.omega()),
            LossKind::SmoothL1 => "smooth_l1".to_string(),
        }
    }
}

impl std::fmt::Display for LossKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.label())
    }
}

/// Dense point loss value.
pub fn dp_loss(x: Residual, p: LossParams) -> f64 {
    let x = x.0;
    let ax = x.abs();
    if ax < 1.0 {
        p.omega * (x * x).ln_1p()
    } else {
        p.omega * (ax + (LN_2 - 1.0))
    }
}

/// Exact derivative of [`dp_loss`]: `2ωx/(1+x²)` inside the unit band, `ω·sign(x)` outside.
pub fn dp_grad(x: Residual, p: LossParams) -> f64 {
    let x = x.0;
    if x.abs() < 1.0 {
        2.0 * p.omega * x / (1.0 + x * x)
    } else {
        p.omega * x.signum()
    }
}

/// The gradient expression exactly as typeset in the original write-up:
/// `ω|x|/(1+x²)` inside the unit band and the constant `ω` outside.
///
/// This is *not* the derivative of [`dp_loss`]: it lacks the factor 2 and
/// the sign, and it jumps from `ω/2` to `ω` at `|x| = 1`. Kept only so the
/// discrepancy can be tabulated and gradient-checked; never use it to train.
pub fn printed_dense_point_grad(x: Residual, p: LossParams) -> f64 {
    let x = x.0;
    let ax = x.abs();
    if ax < 1.0 {
        p.omega * ax / (1.0 + x * x)
    } else {
        p.omega
    }
}

pub fn smooth_l1(x: Residual) -> f64 {
    let ax = x.0.abs();
    if ax < 1.0 {
        0.5 * x.0 * x.0
    } else {
        ax - 0.5
    }
}

pub fn smooth_l1_grad(x: Residual) -> f64 {
    let x = x.0;
    if x.abs() < 1.0 {
        x
    } else {
        x.signum()
    }
}

/// The Smooth-L1 gradient magnitude as typeset (`|x|` inside, `1` outside).
pub fn printed_smooth_l1_grad(x: Residual) -> f64 {
    smooth_l1_grad(x).abs()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reduction {
    #[default]
    Mean,
    Sum,
}

/// Reduced loss over a batch and the gradient of that reduced value with
/// respect to every input residual.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchLossResult {
    pub value: f64,
    pub grads: Vec<f64>,
}

pub fn batch_loss(
    residuals: &[Residual],
    kind: LossKind,
    reduction: Reduction,
) -> Result<BatchLossResult> {
    if residuals.is_empty() {
        return Err(Error::EmptyInput("residual batch"));
    }
    let scale = match reduction {
        Reduction::Mean => 1.0 / residuals.len() as f64,
        Reduction::Sum => 1.0,
    };
    let mut sum = 0.0;
    let mut grads = Vec::with_capacity(residuals.len());
    for &r in residuals {
        sum += kind.loss(r);
        grads.push(kind.grad(r) * scale);
    }
    Ok(BatchLossResult {
        value: sum * scale,
        grads,
    })
}
