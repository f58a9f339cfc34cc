//! Loss-composed hypotheses `f(z) = l(g(x), y)` and function classes.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, VrmError};
use crate::loss::LossSpec;
use crate::sample::Split;

/// A real function of a joint point.
pub trait PointFunction: Sync {
    fn eval(&self, z: &[f64]) -> f64;
}

impl<F> PointFunction for F
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    fn eval(&self, z: &[f64]) -> f64 {
        self(z)
    }
}

/// A member `f` of a function class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Hypothesis {
    /// `g(x) = W x + c` with `W` stored row-major as `J x I`, composed with `loss`.
    Linear { weights: Vec<f64>, bias: Vec<f64>, loss: LossSpec },
    /// `f(z) = value` everywhere.
    Constant { value: f64 },
}

impl Hypothesis {
    /// Scalar-output linear model without intercept.
    pub fn linear(weights: Vec<f64>, loss: LossSpec) -> Self {
        Hypothesis::Linear { weights, bias: vec![0.0], loss }
    }

    pub fn constant(value: f64) -> Self {
        Hypothesis::Constant { value }
    }

    pub fn validate(&self, split: Split) -> Result<()> {
        match self {
            Hypothesis::Linear { weights, bias, loss } => {
                loss.validate()?;
                if bias.len() != split.output_dim {
                    return Err(VrmError::DimensionMismatch { expected: split.output_dim, found: bias.len() });
                }
                let expected = split.input_dim * split.output_dim;
                if weights.len() != expected {
                    return Err(VrmError::DimensionMismatch { expected, found: weights.len() });
                }
                if weights.iter().chain(bias).any(|w| !w.is_finite()) {
                    return invalid("hypothesis parameters must be finite");
                }
                Ok(())
            }
            Hypothesis::Constant { value } if value.is_finite() => Ok(()),
            Hypothesis::Constant { .. } => invalid("constant hypothesis must be finite"),
        }
    }

    /// Output range `[a, b]`.
    pub fn range(&self) -> (f64, f64) {
        match self {
            Hypothesis::Linear { loss, .. } => loss.range(),
            Hypothesis::Constant { value } => (*value, *value),
        }
    }

    /// Squared Euclidean norm of the weight matrix (intercept excluded).
    pub fn weight_norm_sq(&self) -> f64 {
        match self {
            Hypothesis::Linear { weights, .. } => weights.iter().map(|w| w * w).sum(),
            Hypothesis::Constant { .. } => 0.0,
        }
    }

    /// Prediction `g(x)` written into `out` (length `J`).
    fn predict_into(weights: &[f64], bias: &[f64], x: &[f64], out: &mut [f64]) {
        let i = x.len();
        for (j, o) in out.iter_mut().enumerate() {
            let row = &weights[j * i..(j + 1) * i];
            *o = bias[j] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        }
    }

    /// Loss before clipping; equal to [`PointFunction::eval`] for constants.
    pub fn raw(&self, z: &[f64]) -> f64 {
        match self {
            Hypothesis::Linear { weights, bias, loss } => {
                let j = bias.len();
                let i = weights.len() / j;
                let mut pred = [0.0; crate::sample::MAX_DIM];
                Self::predict_into(weights, bias, &z[..i], &mut pred[..j]);
                loss.raw(&pred[..j], &z[i..i + j])
            }
            Hypothesis::Constant { value } => *value,
        }
    }
}

impl PointFunction for Hypothesis {
    fn eval(&self, z: &[f64]) -> f64 {
        match self {
            Hypothesis::Linear { loss, .. } => self.raw(z).clamp(loss.low, loss.high),
            Hypothesis::Constant { value } => *value,
        }
    }
}

/// A hypothesis class `F`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FunctionClass {
    FiniteList {
        members: Vec<Hypothesis>,
    },
    /// Linear models with every weight in `[-weight_bound, weight_bound]`.
    LinearFamily {
        input_dim: usize,
        output_dim: usize,
        weight_bound: f64,
        #[serde(default)]
        fit_bias: bool,
        loss: LossSpec,
    },
}

impl FunctionClass {
    pub fn finite(members: Vec<Hypothesis>) -> Self {
        FunctionClass::FiniteList { members }
    }

    pub fn validate(&self, split: Split) -> Result<()> {
        match self {
            FunctionClass::FiniteList { members } => {
                if members.is_empty() {
                    return invalid("finite class must be non-empty");
                }
                members.iter().try_for_each(|m| m.validate(split))
            }
            FunctionClass::LinearFamily { input_dim, output_dim, weight_bound, loss, .. } => {
                loss.validate()?;
                if *input_dim != split.input_dim || *output_dim != split.output_dim {
                    return Err(VrmError::DimensionMismatch { expected: split.dim(), found: input_dim + output_dim });
                }
                if !(weight_bound.is_finite() && *weight_bound > 0.0) {
                    return invalid("weight bound must be positive");
                }
                Ok(())
            }
        }
    }

    /// Range `[a, b]` covering every member.
    pub fn range(&self) -> (f64, f64) {
        match self {
            FunctionClass::FiniteList { members } => members
                .iter()
                .map(Hypothesis::range)
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), (lo, hi)| (a.min(lo), b.max(hi))),
            FunctionClass::LinearFamily { loss, .. } => loss.range(),
        }
    }

    /// `b - a`; a class of constants with one shared value counts as width 1.
    pub fn range_width(&self) -> f64 {
        let (a, b) = self.range();
        if b > a {
            b - a
        } else {
            1.0
        }
    }

    /// `[a, b]` for the bound formulas, widened to `[a, a + 1]` when degenerate.
    pub fn bound_range(&self) -> (f64, f64) {
        let (a, _) = self.range();
        (a, a + self.range_width())
    }

    pub fn members(&self) -> Option<&[Hypothesis]> {
        match self {
            FunctionClass::FiniteList { members } => Some(members),
            FunctionClass::LinearFamily { .. } => None,
        }
    }

    /// Members of a finite class, or an error for parametric families.
    pub fn require_finite(&self) -> Result<&[Hypothesis]> {
        self.members().ok_or_else(|| VrmError::Precondition("operation requires a finite hypothesis list".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::LossSpec;

    #[test]
    fn linear_squared_loss() {
        let h = Hypothesis::linear(vec![1.0], LossSpec::squared(100.0));
        // points (x, y) = (0,0), (1,2), (2,2)
        assert_eq!(h.eval(&[0.0, 0.0]), 0.0);
        assert_eq!(h.eval(&[1.0, 2.0]), 1.0);
        assert_eq!(h.eval(&[2.0, 2.0]), 0.0);
        let clipped = Hypothesis::linear(vec![1.0], LossSpec::squared(0.5));
        assert_eq!(clipped.eval(&[1.0, 2.0]), 0.5);
        assert_eq!(clipped.raw(&[1.0, 2.0]), 1.0);
    }

    #[test]
    fn multi_output_prediction() {
        // W = [[1, 0], [0, 2]], c = (0, 1), x = (1, 1), y = (1, 3) -> loss 0
        let h = Hypothesis::Linear {
            weights: vec![1.0, 0.0, 0.0, 2.0],
            bias: vec![0.0, 1.0],
            loss: LossSpec::squared(10.0),
        };
        let split = Split::new(2, 2).unwrap();
        h.validate(split).unwrap();
        assert_eq!(h.eval(&[1.0, 1.0, 1.0, 3.0]), 0.0);
        assert!(h.validate(Split::new(1, 2).unwrap()).is_err());
    }

    #[test]
    fn class_range_and_validation() {
        let c = FunctionClass::finite(vec![
            Hypothesis::constant(0.2),
            Hypothesis::linear(vec![1.0], LossSpec::squared(1.0)),
        ]);
        assert_eq!(c.range(), (0.0, 1.0));
        c.validate(Split::new(1, 1).unwrap()).unwrap();
        assert!(FunctionClass::finite(vec![]).validate(Split::new(1, 1).unwrap()).is_err());
        let json = serde_json::to_string(&c).unwrap();
        let back: FunctionClass = serde_json::from_str(&json).unwrap();
        assert_eq!(back, c);
    }
}
