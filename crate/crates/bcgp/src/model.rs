//! The warped Gaussian-process model: warped negative log-likelihood for
//! training, closed-form median/interval/mode prediction, Gauss-Hermite
//! moment approximation, predictive densities, and path sampling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::ContinuousCDF;
use thiserror::Error;

use crate::gp::{self, GaussianPosterior, GpError};
use crate::kernel::Kernel;
use crate::mean::MeanFunction;
use crate::optimize::{ParamSpace, Transform};
use crate::quad::GaussHermite;
use crate::warping::{Stage, WarpError, Warping, LOG_BRANCH_LAMBDA};

const LN_2PI: f64 = 1.837_877_066_409_345_6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error(transparent)]
    Warp(#[from] WarpError),
    #[error(transparent)]
    Gp(#[from] GpError),
    /// A Gauss-Hermite node mapped outside the inverse-warping domain.
    /// Nodes are never clipped; that would bias the moments invisibly.
    #[error("quadrature node {node} (index {index}) outside the inverse-warping domain: {source}")]
    QuadratureNode {
        node: f64,
        index: usize,
        source: WarpError,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Per-test-point prediction summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictivePoint {
    pub t: f64,
    pub median: f64,
    pub lower: f64,
    pub upper: f64,
    /// Closed-form mode; absent for compositions with more than one
    /// Box-Cox stage, where no closed form exists.
    pub mode: Option<f64>,
    pub gh_mean: f64,
    pub gh_var: f64,
}

/// Predictions over a set of test inputs at a fixed percentile level and
/// Gauss-Hermite node count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictiveSummary {
    pub percentile: f64,
    pub gh_points: usize,
    pub points: Vec<PredictivePoint>,
}

impl PredictiveSummary {
    /// Writes the plot-ready CSV: `t,median,lower,upper,mode,gh_mean,gh_var`.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<(), csv::Error> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(["t", "median", "lower", "upper", "mode", "gh_mean", "gh_var"])?;
        for p in &self.points {
            out.write_record([
                p.t.to_string(),
                p.median.to_string(),
                p.lower.to_string(),
                p.upper.to_string(),
                p.mode.map(|m| m.to_string()).unwrap_or_default(),
                p.gh_mean.to_string(),
                p.gh_var.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

#[derive(Deserialize)]
struct RawModel {
    warping: Warping,
    mean: MeanFunction,
    kernel: Kernel,
    noise_variance: f64,
    t_train: Vec<f64>,
    y_train: Vec<f64>,
}

impl TryFrom<RawModel> for WarpedGpModel {
    type Error = ModelError;

    fn try_from(raw: RawModel) -> Result<Self, ModelError> {
        WarpedGpModel::new(
            raw.warping,
            raw.mean,
            raw.kernel,
            raw.noise_variance,
            raw.t_train,
            raw.y_train,
        )
    }
}

/// A base GP (mean, kernel, observation noise) paired with a warping and
/// training data. Immutable once constructed; every operation is pure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModel")]
pub struct WarpedGpModel {
    warping: Warping,
    mean: MeanFunction,
    kernel: Kernel,
    noise_variance: f64,
    t_train: Vec<f64>,
    y_train: Vec<f64>,
}

impl WarpedGpModel {
    /// Validates parameters and checks every training observation lies in
    /// the warping domain. An empty training set is allowed (prior-only
    /// model).
    pub fn new(
        warping: Warping,
        mean: MeanFunction,
        kernel: Kernel,
        noise_variance: f64,
        t_train: Vec<f64>,
        y_train: Vec<f64>,
    ) -> Result<Self, ModelError> {
        kernel.validate()?;
        if !mean.is_finite() {
            return Err(ModelError::InvalidArgument(
                "mean function must be finite".into(),
            ));
        }
        if !noise_variance.is_finite() || noise_variance < 0.0 {
            return Err(ModelError::InvalidArgument(format!(
                "noise variance must be finite and >= 0, got {noise_variance}"
            )));
        }
        if t_train.len() != y_train.len() {
            return Err(ModelError::InvalidArgument(format!(
                "training length mismatch: {} inputs vs {} observations",
                t_train.len(),
                y_train.len()
            )));
        }
        if t_train.iter().chain(y_train.iter()).any(|v| !v.is_finite()) {
            return Err(ModelError::InvalidArgument(
                "training data must be finite".into(),
            ));
        }
        for &y in &y_train {
            warping.forward(y)?;
            warping.log_abs_deriv(y)?;
        }
        Ok(WarpedGpModel {
            warping,
            mean,
            kernel,
            noise_variance,
            t_train,
            y_train,
        })
    }

    pub fn warping(&self) -> &Warping {
        &self.warping
    }

    pub fn mean(&self) -> &MeanFunction {
        &self.mean
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    pub fn train_inputs(&self) -> &[f64] {
        &self.t_train
    }

    pub fn train_observations(&self) -> &[f64] {
        &self.y_train
    }

    /// Warped negative log-likelihood: the Gaussian NLL of the warped
    /// observations minus the log-Jacobian of the warping. Equals the plain
    /// Gaussian NLL exactly under an identity warping.
    pub fn nll(&self) -> Result<f64, ModelError> {
        let x = self.warping.forward_all(&self.y_train)?;
        let gaussian = gp::nll_gaussian(
            &self.mean,
            &self.kernel,
            self.noise_variance,
            &self.t_train,
            &x,
        )?;
        let jacobian = self.warping.log_abs_deriv_sum(&self.y_train)?;
        Ok(gaussian - jacobian)
    }

    /// Latent posterior of the base process at `t_test`, conditioned on the
    /// warped training observations.
    pub fn posterior(&self, t_test: &[f64]) -> Result<GaussianPosterior, ModelError> {
        let x = self.warping.forward_all(&self.y_train)?;
        Ok(gp::posterior(
            &self.mean,
            &self.kernel,
            self.noise_variance,
            &self.t_train,
            &x,
            t_test,
        )?)
    }

    /// Per-point posterior-predictive marginals `(mean, variance)` in the
    /// warped space, observation noise included.
    pub fn predictive_marginals(&self, t_test: &[f64]) -> Result<Vec<(f64, f64)>, ModelError> {
        let post = self.posterior(t_test)?;
        Ok(post
            .mean
            .iter()
            .zip(post.variances())
            .map(|(&m, v)| (m, v + self.noise_variance))
            .collect())
    }

    /// Median, percentile interval, mode, and Gauss-Hermite moments at each
    /// test input. `percentile` is the two-sided interval level in (0, 1);
    /// `gh_points` the quadrature node count.
    pub fn predict(
        &self,
        t_test: &[f64],
        percentile: f64,
        gh_points: usize,
    ) -> Result<PredictiveSummary, ModelError> {
        if !(percentile > 0.0 && percentile < 1.0) {
            return Err(ModelError::InvalidArgument(format!(
                "percentile level must lie in (0, 1), got {percentile}"
            )));
        }
        if gh_points == 0 {
            return Err(ModelError::InvalidArgument("gh_points must be >= 1".into()));
        }
        let z = standard_normal_quantile(0.5 + percentile / 2.0);
        let quad = GaussHermite::new(gh_points);
        let marginals = self.predictive_marginals(t_test)?;

        let mut points = Vec::with_capacity(t_test.len());
        for (&t, &(m, v)) in t_test.iter().zip(&marginals) {
            let sd = v.sqrt();
            let median = self.warping.inverse(m)?;
            let a = self.warping.inverse(m - z * sd)?;
            let b = self.warping.inverse(m + z * sd)?;
            let (lower, upper) = if a <= b { (a, b) } else { (b, a) };
            let gh_mean = quad.try_expect_gaussian(m, v, |index, x| {
                self.warping
                    .inverse(x)
                    .map_err(|source| ModelError::QuadratureNode {
                        node: x,
                        index,
                        source,
                    })
            })?;
            let gh_second = quad.try_expect_gaussian(m, v, |index, x| {
                self.warping.inverse(x).map(|y| y * y).map_err(|source| {
                    ModelError::QuadratureNode {
                        node: x,
                        index,
                        source,
                    }
                })
            })?;
            points.push(PredictivePoint {
                t,
                median,
                lower,
                upper,
                mode: warped_gaussian_mode(&self.warping, m, v),
                gh_mean,
                gh_var: (gh_second - gh_mean * gh_mean).max(0.0),
            });
        }
        Ok(PredictiveSummary {
            percentile,
            gh_points,
            points,
        })
    }

    /// Log of the posterior-predictive marginal density at `(t, y)`:
    /// the warped-Gaussian density with observation noise included.
    pub fn predictive_log_density(&self, t: f64, y: f64) -> Result<f64, ModelError> {
        Ok(self.predictive_log_densities(&[t], &[y])?[0])
    }

    /// Batch variant of [`predictive_log_density`](Self::predictive_log_density)
    /// sharing one posterior factorization across all test points.
    pub fn predictive_log_densities(
        &self,
        t_test: &[f64],
        y_test: &[f64],
    ) -> Result<Vec<f64>, ModelError> {
        if t_test.len() != y_test.len() {
            return Err(ModelError::InvalidArgument(format!(
                "test length mismatch: {} inputs vs {} observations",
                t_test.len(),
                y_test.len()
            )));
        }
        let marginals = self.predictive_marginals(t_test)?;
        let mut out = Vec::with_capacity(t_test.len());
        for (&y, &(m, v)) in y_test.iter().zip(&marginals) {
            let x = self.warping.forward(y)?;
            let jac = self.warping.log_abs_deriv(y)?;
            let resid = x - m;
            out.push(-0.5 * (LN_2PI + v.ln() + resid * resid / v) + jac);
        }
        Ok(out)
    }

    /// Draws `n_paths` latent posterior realisations and maps each through
    /// the inverse warping; deterministic per seed.
    pub fn sample_paths(
        &self,
        t_test: &[f64],
        n_paths: usize,
        seed: u64,
    ) -> Result<Vec<Vec<f64>>, ModelError> {
        let post = self.posterior(t_test)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let draws = gp::sample_gaussian(&post.mean, &post.cov, n_paths, &mut rng)?;
        draws
            .into_iter()
            .map(|path| {
                path.into_iter()
                    .map(|x| self.warping.inverse(x).map_err(ModelError::from))
                    .collect()
            })
            .collect()
    }

    /// Ordered description of the hyperparameters seen by optimizers:
    /// kernel, noise, mean, then warping stage parameters. Positive
    /// quantities map through log.
    pub fn param_space(&self) -> ParamSpace {
        let mut defs = Vec::new();
        kernel_param_defs(&self.kernel, "kernel", &mut defs);
        defs.push(("noise.variance".to_string(), Transform::Log));
        if matches!(self.mean, MeanFunction::Constant { .. }) {
            defs.push(("mean.value".to_string(), Transform::Identity));
        }
        for (i, stage) in self.warping.stages().iter().enumerate() {
            match stage {
                Stage::BoxCox { .. } => {
                    defs.push((format!("warping[{i}].lambda"), Transform::Log));
                }
                Stage::Affine { .. } => {
                    defs.push((format!("warping[{i}].shift"), Transform::Identity));
                    defs.push((format!("warping[{i}].scale"), Transform::Identity));
                }
            }
        }
        ParamSpace::new(defs)
    }

    /// Hyperparameter values in natural space, ordered as
    /// [`param_space`](Self::param_space).
    pub fn natural_params(&self) -> Vec<f64> {
        let mut values = Vec::new();
        kernel_param_values(&self.kernel, &mut values);
        values.push(self.noise_variance);
        if let MeanFunction::Constant { value } = self.mean {
            values.push(value);
        }
        for stage in self.warping.stages() {
            match *stage {
                Stage::BoxCox { lambda } => values.push(lambda),
                Stage::Affine { shift, scale } => {
                    values.push(shift);
                    values.push(scale);
                }
            }
        }
        values
    }

    /// Hyperparameters in the unconstrained optimizer space.
    pub fn unconstrained_params(&self) -> Vec<f64> {
        self.param_space()
            .encode(&self.natural_params())
            .expect("own parameters encode")
    }

    /// Rebuilds the model with new natural-space hyperparameter values,
    /// keeping structure and training data.
    pub fn with_natural_params(&self, values: &[f64]) -> Result<Self, ModelError> {
        let expected = self.param_space().len();
        if values.len() != expected {
            return Err(ModelError::InvalidArgument(format!(
                "expected {expected} parameter values, got {}",
                values.len()
            )));
        }
        let mut it = values.iter().copied();
        let kernel = kernel_with_values(&self.kernel, &mut it);
        let noise_variance = it.next().unwrap();
        let mean = match self.mean {
            MeanFunction::Zero => MeanFunction::Zero,
            MeanFunction::Constant { .. } => MeanFunction::Constant {
                value: it.next().unwrap(),
            },
        };
        let stages = self
            .warping
            .stages()
            .iter()
            .map(|stage| match stage {
                Stage::BoxCox { .. } => Stage::BoxCox {
                    lambda: it.next().unwrap(),
                },
                Stage::Affine { .. } => Stage::Affine {
                    shift: it.next().unwrap(),
                    scale: it.next().unwrap(),
                },
            })
            .collect();
        let warping = Warping::compose(stages)?;
        WarpedGpModel::new(
            warping,
            mean,
            kernel,
            noise_variance,
            self.t_train.clone(),
            self.y_train.clone(),
        )
    }

    /// Rebuilds the model from an unconstrained parameter vector.
    pub fn with_unconstrained_params(&self, theta: &[f64]) -> Result<Self, ModelError> {
        let natural = self
            .param_space()
            .decode(theta)
            .map_err(|e| ModelError::InvalidArgument(e.to_string()))?;
        self.with_natural_params(&natural)
    }

    /// The objective handed to minimizers: unconstrained parameters to
    /// warped NLL, with every failure (domain violation, conditioning)
    /// mapped to +inf so searches route around invalid regions.
    pub fn nll_objective(&self) -> impl Fn(&[f64]) -> f64 + Sync + '_ {
        move |theta: &[f64]| match self.with_unconstrained_params(theta).and_then(|m| m.nll()) {
            Ok(v) if v.is_finite() => v,
            _ => f64::INFINITY,
        }
    }
}

/// Standard normal quantile, used for percentile intervals.
pub fn standard_normal_quantile(p: f64) -> f64 {
    statrs::distribution::Normal::standard().inverse_cdf(p)
}

/// Closed-form mode of the warped Gaussian `w^{-1}(X)`, `X ~ N(mean, variance)`.
///
/// Available when the composition contains at most one Box-Cox stage
/// (affine stages on either side are folded in exactly); `None` otherwise,
/// or when the mode expression has no real positive root.
pub fn warped_gaussian_mode(w: &Warping, mean: f64, variance: f64) -> Option<f64> {
    let mut m = mean;
    let mut k = variance;
    let mut stages: Vec<Stage> = w.stages().to_vec();
    // affine stages adjacent to the Gaussian side rescale (m, k) exactly
    while let Some(Stage::Affine { shift, scale }) = stages.last().copied() {
        stages.pop();
        m = (m - shift) / scale;
        k /= scale * scale;
    }
    let Some(last) = stages.pop() else {
        return Some(m); // pure affine chain: Gaussian mode pulled back
    };
    let Stage::BoxCox { lambda } = last else {
        unreachable!("trailing affines already folded");
    };
    if stages.iter().any(|s| matches!(s, Stage::BoxCox { .. })) {
        return None;
    }
    let u = box_cox_mode(lambda, m, k)?;
    // affine stages on the observation side commute with the mode
    let mut y = u;
    for stage in stages.iter().rev() {
        if let Stage::Affine { shift, scale } = *stage {
            y = (y - shift) / scale;
        }
    }
    Some(y)
}

fn box_cox_mode(lambda: f64, m: f64, k: f64) -> Option<f64> {
    if lambda < LOG_BRANCH_LAMBDA {
        // log-normal mode
        return Some((m - k).exp());
    }
    let lin = 1.0 + lambda * m;
    let disc = lin * lin + 4.0 * k * lambda * (lambda - 1.0);
    if disc < 0.0 {
        return None;
    }
    let base = 0.5 * (lin + disc.sqrt());
    if base <= 0.0 {
        return None;
    }
    Some(base.powf(1.0 / lambda))
}

fn kernel_param_defs(kernel: &Kernel, prefix: &str, defs: &mut Vec<(String, Transform)>) {
    match kernel {
        Kernel::SquaredExponential { .. } => {
            defs.push((format!("{prefix}.variance"), Transform::Log));
            defs.push((format!("{prefix}.lengthscale"), Transform::Log));
        }
        Kernel::SpectralMixture { components } => {
            for q in 0..components.len() {
                defs.push((format!("{prefix}.sm[{q}].weight"), Transform::Log));
                defs.push((format!("{prefix}.sm[{q}].frequency"), Transform::Log));
                defs.push((format!("{prefix}.sm[{q}].variance"), Transform::Log));
            }
        }
        Kernel::WhiteNoise { .. } => {
            defs.push((format!("{prefix}.variance"), Transform::Log));
        }
        Kernel::Sum { terms } => {
            for (i, term) in terms.iter().enumerate() {
                kernel_param_defs(term, &format!("{prefix}.sum[{i}]"), defs);
            }
        }
    }
}

fn kernel_param_values(kernel: &Kernel, values: &mut Vec<f64>) {
    match kernel {
        Kernel::SquaredExponential {
            variance,
            lengthscale,
        } => {
            values.push(*variance);
            values.push(*lengthscale);
        }
        Kernel::SpectralMixture { components } => {
            for c in components {
                values.push(c.weight);
                values.push(c.frequency);
                values.push(c.variance);
            }
        }
        Kernel::WhiteNoise { variance } => values.push(*variance),
        Kernel::Sum { terms } => {
            for term in terms {
                kernel_param_values(term, values);
            }
        }
    }
}

fn kernel_with_values(kernel: &Kernel, it: &mut impl Iterator<Item = f64>) -> Kernel {
    match kernel {
        Kernel::SquaredExponential { .. } => Kernel::SquaredExponential {
            variance: it.next().unwrap(),
            lengthscale: it.next().unwrap(),
        },
        Kernel::SpectralMixture { components } => Kernel::SpectralMixture {
            components: components
                .iter()
                .map(|_| crate::kernel::SmComponent {
                    weight: it.next().unwrap(),
                    frequency: it.next().unwrap(),
                    variance: it.next().unwrap(),
                })
                .collect(),
        },
        Kernel::WhiteNoise { .. } => Kernel::WhiteNoise {
            variance: it.next().unwrap(),
        },
        Kernel::Sum { terms } => Kernel::Sum {
            terms: terms.iter().map(|t| kernel_with_values(t, it)).collect(),
        },
    }
}
