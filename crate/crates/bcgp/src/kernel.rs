//! Stationary covariance functions over scalar inputs.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::gp::GpError;

/// One component of a spectral mixture: a Gaussian bump of the spectral
/// density at `frequency` with width `variance` and mass `weight`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmComponent {
    pub weight: f64,
    pub frequency: f64,
    pub variance: f64,
}

/// A positive-definite stationary covariance function,
/// `k(t, t_bar) = k(t - t_bar)`.
///
/// Serialized as `{kind: ..., params: {...}}`, the schema shared with
/// warpings and mean functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    tag = "kind",
    content = "params",
    rename_all = "kebab-case",
    deny_unknown_fields
)]
pub enum Kernel {
    /// `variance * exp(-tau^2 / (2 lengthscale^2))`.
    SquaredExponential { variance: f64, lengthscale: f64 },
    /// `sum_q w_q exp(-2 pi^2 tau^2 v_q) cos(2 pi mu_q tau)`.
    SpectralMixture { components: Vec<SmComponent> },
    /// `variance` at tau = 0, zero elsewhere.
    WhiteNoise { variance: f64 },
    /// Sum of kernels.
    Sum { terms: Vec<Kernel> },
}

impl Kernel {
    /// Checks parameter ranges: variances and weights nonnegative,
    /// lengthscales and mixture bandwidths strictly positive, all finite.
    pub fn validate(&self) -> Result<(), GpError> {
        match self {
            Kernel::SquaredExponential {
                variance,
                lengthscale,
            } => {
                if !variance.is_finite() || *variance < 0.0 {
                    return Err(GpError::InvalidParameter(format!(
                        "squared-exponential variance must be finite and >= 0, got {variance}"
                    )));
                }
                if !lengthscale.is_finite() || *lengthscale <= 0.0 {
                    return Err(GpError::InvalidParameter(format!(
                        "squared-exponential lengthscale must be finite and > 0, got {lengthscale}"
                    )));
                }
            }
            Kernel::SpectralMixture { components } => {
                if components.is_empty() {
                    return Err(GpError::InvalidParameter(
                        "spectral mixture needs at least one component".into(),
                    ));
                }
                for (q, c) in components.iter().enumerate() {
                    if !c.weight.is_finite() || c.weight < 0.0 {
                        return Err(GpError::InvalidParameter(format!(
                            "component {q} weight must be finite and >= 0, got {}",
                            c.weight
                        )));
                    }
                    if !c.frequency.is_finite() || c.frequency < 0.0 {
                        return Err(GpError::InvalidParameter(format!(
                            "component {q} frequency must be finite and >= 0, got {}",
                            c.frequency
                        )));
                    }
                    if !c.variance.is_finite() || c.variance <= 0.0 {
                        return Err(GpError::InvalidParameter(format!(
                            "component {q} variance must be finite and > 0, got {}",
                            c.variance
                        )));
                    }
                }
            }
            Kernel::WhiteNoise { variance } => {
                if !variance.is_finite() || *variance < 0.0 {
                    return Err(GpError::InvalidParameter(format!(
                        "white-noise variance must be finite and >= 0, got {variance}"
                    )));
                }
            }
            Kernel::Sum { terms } => {
                if terms.is_empty() {
                    return Err(GpError::InvalidParameter(
                        "kernel sum needs at least one term".into(),
                    ));
                }
                for term in terms {
                    term.validate()?;
                }
            }
        }
        Ok(())
    }

    /// Evaluates the kernel at lag `tau = t - t_bar`. Uses `|tau|` so the
    /// Gram matrix is symmetric to the bit.
    pub fn eval_tau(&self, tau: f64) -> f64 {
        let tau = tau.abs();
        match self {
            Kernel::SquaredExponential {
                variance,
                lengthscale,
            } => {
                let r = tau / lengthscale;
                variance * (-0.5 * r * r).exp()
            }
            Kernel::SpectralMixture { components } => {
                let two_pi = 2.0 * std::f64::consts::PI;
                components
                    .iter()
                    .map(|c| {
                        c.weight
                            * (-2.0 * std::f64::consts::PI.powi(2) * tau * tau * c.variance).exp()
                            * (two_pi * c.frequency * tau).cos()
                    })
                    .sum()
            }
            Kernel::WhiteNoise { variance } => {
                if tau == 0.0 {
                    *variance
                } else {
                    0.0
                }
            }
            Kernel::Sum { terms } => terms.iter().map(|k| k.eval_tau(tau)).sum(),
        }
    }

    pub fn eval(&self, t: f64, t_bar: f64) -> f64 {
        self.eval_tau(t - t_bar)
    }

    /// Gram matrix with entry `(i, j) = k(t_i, t_bar_j)`.
    pub fn gram(&self, t: &[f64], t_bar: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(t.len(), t_bar.len(), |i, j| self.eval(t[i], t_bar[j]))
    }

    /// Diagonal of the square Gram matrix, `k(t_i, t_i)`.
    pub fn diag(&self, t: &[f64]) -> Vec<f64> {
        t.iter().map(|&ti| self.eval(ti, ti)).collect()
    }
}
