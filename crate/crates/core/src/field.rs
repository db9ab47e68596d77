//! Scalar fields on chart coordinates (conformal factors, test functions).

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::spline::{GridAxis, TensorSpline};

pub trait ScalarField: Send + Sync {
    fn value(&self, x: &[f64]) -> f64;

    fn name(&self) -> String {
        "field".into()
    }
}

/// Serializable description of the built-in fields.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum BuiltinField {
    Constant { value: f64 },
    /// `scale · exp(Σ c_i x_i)`.
    ExpLinear {
        coeffs: Vec<f64>,
        #[serde(default = "one")]
        scale: f64,
    },
    /// `base + amplitude · cos(x_axis)`.
    Cosine { axis: usize, base: f64, amplitude: f64 },
    /// `base + Σ c_i x_i²`.
    Quadratic { base: f64, coeffs: Vec<f64> },
    /// `scale · |x|^power`.
    RadialPower {
        power: f64,
        #[serde(default = "one")]
        scale: f64,
    },
    /// `scale / (1 + |x|²)`.
    InverseQuadratic {
        #[serde(default = "one")]
        scale: f64,
    },
    /// `exp(Σ_k a_k sin(w_k · x + p_k))`.
    LogFourier { terms: Vec<FourierTerm> },
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourierTerm {
    pub wave: Vec<f64>,
    pub amplitude: f64,
    pub phase: f64,
}

impl ScalarField for BuiltinField {
    fn value(&self, x: &[f64]) -> f64 {
        match self {
            BuiltinField::Constant { value } => *value,
            BuiltinField::ExpLinear { coeffs, scale } => {
                scale * coeffs.iter().zip(x).map(|(c, v)| c * v).sum::<f64>().exp()
            }
            BuiltinField::Cosine { axis, base, amplitude } => base + amplitude * x[*axis].cos(),
            BuiltinField::Quadratic { base, coeffs } => {
                base + coeffs.iter().zip(x).map(|(c, v)| c * v * v).sum::<f64>()
            }
            BuiltinField::RadialPower { power, scale } => {
                scale * x.iter().map(|v| v * v).sum::<f64>().powf(0.5 * power)
            }
            BuiltinField::InverseQuadratic { scale } => scale / (1.0 + x.iter().map(|v| v * v).sum::<f64>()),
            BuiltinField::LogFourier { terms } => terms
                .iter()
                .map(|t| {
                    let phase = t.wave.iter().zip(x).map(|(k, v)| k * v).sum::<f64>() + t.phase;
                    t.amplitude * phase.sin()
                })
                .sum::<f64>()
                .exp(),
        }
    }

    fn name(&self) -> String {
        format!("{self:?}")
    }
}

/// Field given by a closure.
pub struct FnField<F>(pub F);

impl<F: Fn(&[f64]) -> f64 + Send + Sync> ScalarField for FnField<F> {
    fn value(&self, x: &[f64]) -> f64 {
        (self.0)(x)
    }
}

/// Field interpolated from grid samples.
#[derive(Clone, Debug)]
pub struct TableField {
    spline: TensorSpline,
}

impl TableField {
    pub fn new(axes: Vec<GridAxis>, values: &[f64]) -> Result<Self> {
        Ok(TableField { spline: TensorSpline::new(axes, 1, values)? })
    }
}

impl ScalarField for TableField {
    fn value(&self, x: &[f64]) -> f64 {
        self.spline.eval(x)[0]
    }
    fn name(&self) -> String {
        "table".into()
    }
}

/// Product of fields.
pub struct ProductField(pub Vec<Arc<dyn ScalarField>>);

impl ScalarField for ProductField {
    fn value(&self, x: &[f64]) -> f64 {
        self.0.iter().map(|f| f.value(x)).product()
    }
}

/// Constant one.
pub fn unit_field() -> Arc<dyn ScalarField> {
    Arc::new(BuiltinField::Constant { value: 1.0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_values() {
        let f = BuiltinField::InverseQuadratic { scale: 2.0 };
        assert_eq!(f.value(&[0.0, 0.0]), 2.0);
        let e = BuiltinField::ExpLinear { coeffs: vec![1.0, 0.0], scale: 1.0 };
        assert!((e.value(&[1.0, 5.0]) - std::f64::consts::E).abs() < 1e-15);
        let json = serde_json::to_string(&e).unwrap();
        let back: BuiltinField = serde_json::from_str(&json).unwrap();
        assert_eq!(back, e);
    }
}
