//! Hyperparameter search over an unconstrained parameter vector: Powell's
//! conjugate-direction method, finite-difference BFGS, the sequential
//! BFGS-Powell hybrid, and affine-invariant ensemble MCMC.
//!
//! Optimizers see a pure `&[f64] -> f64` objective; the model layer supplies
//! the warped NLL (for minimizers) or its negation plus a log-prior (for
//! MCMC). Non-finite objective values are treated as +inf so searches route
//! around invalid regions instead of crashing.

mod bfgs;
mod line_search;
mod mcmc;
mod powell;

pub use bfgs::{bfgs_minimize, bfgs_powell};
pub use mcmc::{
    chain_summary, ensemble_mcmc, flat_prior_log_prob, ChainSummary, InitBall, McmcChain,
    McmcConfig, ParamSummary, DEFAULT_PRIOR_BOUND,
};
pub use powell::powell_minimize;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OptimizeError {
    #[error("objective is not finite at the starting point")]
    NonFiniteStart,
    #[error("no walker has finite log-probability in the initial ensemble")]
    NoFiniteWalker,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// How a hyperparameter maps into the unconstrained optimizer space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Transform {
    /// Raw real value.
    Identity,
    /// Positive value optimized as its logarithm.
    Log,
}

/// Ordered view of model hyperparameters as an unconstrained real vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpace {
    entries: Vec<(String, Transform)>,
}

impl ParamSpace {
    pub fn new(entries: Vec<(String, Transform)>) -> Self {
        ParamSpace { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }

    pub fn transforms(&self) -> impl Iterator<Item = Transform> + '_ {
        self.entries.iter().map(|(_, t)| *t)
    }

    /// Natural values to unconstrained coordinates. Log-transformed entries
    /// must be nonnegative; exact zeros are clamped to the smallest positive
    /// double before taking the log.
    pub fn encode(&self, natural: &[f64]) -> Result<Vec<f64>, OptimizeError> {
        self.check_len(natural.len())?;
        self.entries
            .iter()
            .zip(natural)
            .map(|((name, transform), &v)| {
                if !v.is_finite() {
                    return Err(OptimizeError::InvalidArgument(format!(
                        "parameter '{name}' is not finite: {v}"
                    )));
                }
                match transform {
                    Transform::Identity => Ok(v),
                    Transform::Log => {
                        if v < 0.0 {
                            Err(OptimizeError::InvalidArgument(format!(
                                "parameter '{name}' must be nonnegative for log encoding, got {v}"
                            )))
                        } else {
                            Ok(v.max(f64::MIN_POSITIVE).ln())
                        }
                    }
                }
            })
            .collect()
    }

    /// Unconstrained coordinates back to natural values.
    pub fn decode(&self, theta: &[f64]) -> Result<Vec<f64>, OptimizeError> {
        self.check_len(theta.len())?;
        self.entries
            .iter()
            .zip(theta)
            .map(|((name, transform), &v)| {
                if v.is_nan() {
                    return Err(OptimizeError::InvalidArgument(format!(
                        "coordinate '{name}' is NaN"
                    )));
                }
                Ok(match transform {
                    Transform::Identity => v,
                    Transform::Log => v.exp(),
                })
            })
            .collect()
    }

    fn check_len(&self, got: usize) -> Result<(), OptimizeError> {
        if got != self.entries.len() {
            return Err(OptimizeError::InvalidArgument(format!(
                "expected {} coordinates, got {got}",
                self.entries.len()
            )));
        }
        Ok(())
    }
}

/// Why an optimizer stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    /// Relative improvement or gradient norm fell below tolerance.
    Converged,
    /// Iteration budget exhausted.
    MaxIterations,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryPoint {
    pub iteration: usize,
    pub value: f64,
}

/// Result of a minimization run. `best_value` is the lowest objective value
/// seen across all evaluations, including the starting point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptResult {
    pub best_params: Vec<f64>,
    pub best_value: f64,
    pub trajectory: Vec<TrajectoryPoint>,
    pub termination: Termination,
    pub evals: usize,
}

/// Objective wrapper: counts evaluations, maps non-finite values to +inf,
/// and tracks the best point seen.
pub(crate) struct Tracker<'a> {
    f: &'a (dyn Fn(&[f64]) -> f64 + 'a),
    pub evals: usize,
    pub best_params: Vec<f64>,
    pub best_value: f64,
}

impl<'a> Tracker<'a> {
    pub fn new(f: &'a (dyn Fn(&[f64]) -> f64 + 'a), x0: &[f64]) -> Self {
        Tracker {
            f,
            evals: 0,
            best_params: x0.to_vec(),
            best_value: f64::INFINITY,
        }
    }

    pub fn eval(&mut self, x: &[f64]) -> f64 {
        self.evals += 1;
        let raw = (self.f)(x);
        let v = if raw.is_finite() { raw } else { f64::INFINITY };
        if v < self.best_value {
            self.best_value = v;
            self.best_params = x.to_vec();
        }
        v
    }
}
