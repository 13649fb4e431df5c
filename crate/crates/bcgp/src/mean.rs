//! Mean functions for the base process.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(
    tag = "kind",
    content = "params",
    rename_all = "kebab-case",
    deny_unknown_fields
)]
pub enum MeanFunction {
    Zero,
    Constant { value: f64 },
}

impl MeanFunction {
    pub fn eval(&self, _t: f64) -> f64 {
        match *self {
            MeanFunction::Zero => 0.0,
            MeanFunction::Constant { value } => value,
        }
    }

    pub fn eval_all(&self, t: &[f64]) -> DVector<f64> {
        DVector::from_iterator(t.len(), t.iter().map(|&ti| self.eval(ti)))
    }

    pub fn is_finite(&self) -> bool {
        match *self {
            MeanFunction::Zero => true,
            MeanFunction::Constant { value } => value.is_finite(),
        }
    }
}
