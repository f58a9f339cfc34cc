//! Loss functions with a declared, clipped output range `[a, b]`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LossKind {
    /// `sum_j (p_j - y_j)^2`.
    Squared,
    /// 1 when `p_1` and `y_1` fall on different sides of `threshold`.
    ZeroOne { threshold: f64 },
    /// `max(0, 1 - s * p_1)` with `s = sign(y_1)` (`+1` at zero).
    Hinge,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossSpec {
    pub kind: LossKind,
    /// Lower end `a` of the output range.
    pub low: f64,
    /// Upper end `b` of the output range.
    pub high: f64,
}

impl LossSpec {
    pub fn new(kind: LossKind, low: f64, high: f64) -> Result<Self> {
        let spec = Self { kind, low, high };
        spec.validate()?;
        Ok(spec)
    }

    pub fn squared(high: f64) -> Self {
        Self { kind: LossKind::Squared, low: 0.0, high }
    }

    pub fn zero_one(threshold: f64) -> Self {
        Self { kind: LossKind::ZeroOne { threshold }, low: 0.0, high: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.low.is_finite() && self.high.is_finite() && self.low < self.high) {
            return invalid(format!("loss range [{}, {}] must be finite with a < b", self.low, self.high));
        }
        if let LossKind::ZeroOne { threshold } = self.kind {
            if !threshold.is_finite() {
                return invalid("zero-one threshold must be finite");
            }
        }
        Ok(())
    }

    pub fn range(&self) -> (f64, f64) {
        (self.low, self.high)
    }

    /// Loss before clipping.
    pub fn raw(&self, pred: &[f64], target: &[f64]) -> f64 {
        match self.kind {
            LossKind::Squared => pred.iter().zip(target).map(|(p, y)| (p - y) * (p - y)).sum(),
            LossKind::ZeroOne { threshold } => {
                if (pred[0] > threshold) != (target[0] > threshold) {
                    1.0
                } else {
                    0.0
                }
            }
            LossKind::Hinge => {
                let s = if target[0] < 0.0 { -1.0 } else { 1.0 };
                (1.0 - s * pred[0]).max(0.0)
            }
        }
    }

    /// Loss clipped to `[a, b]`.
    pub fn eval(&self, pred: &[f64], target: &[f64]) -> f64 {
        self.raw(pred, target).clamp(self.low, self.high)
    }
}
