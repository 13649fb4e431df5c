//! Warped Gaussian-process regression with compositional Box-Cox warpings.
//!
//! A warped GP models observations `y` through a strictly monotone map
//! `x = phi(y)` into a latent Gaussian process. Because the Box-Cox and
//! affine stages used here have closed-form inverses and derivatives,
//! training (via the warped likelihood) and prediction (median, percentile
//! bands, mode, Gauss-Hermite moments) stay fully analytic.
//!
//! Modules:
//! - [`warping`]: Box-Cox/affine stages, composition calculus, numeric
//!   inversion for cross-checks.
//! - [`kernel`], [`mean`], [`gp`]: the base-process machinery (spectral
//!   mixture and squared-exponential kernels, Cholesky conditioning).
//! - [`model`]: the warped GP itself.
//! - [`optimize`]: Powell, finite-difference BFGS, the BFGS-Powell hybrid,
//!   and affine-invariant ensemble MCMC over an unconstrained parameter
//!   vector.
//! - [`data`]: CSV ingestion, seeded splits, MAE/MSE/NLPD.

pub mod data;
pub mod gp;
pub mod kernel;
pub mod mean;
pub mod model;
pub mod optimize;
pub mod quad;
pub mod warping;

pub use data::{
    load_csv, score, split, DataError, Scores, Split, SplitMode, SplitSpec, TimeSeries,
};
pub use gp::{nll_gaussian, posterior, sample_prior, GaussianPosterior, GpError};
pub use kernel::{Kernel, SmComponent};
pub use mean::MeanFunction;
pub use model::{
    standard_normal_quantile, warped_gaussian_mode, ModelError, PredictivePoint, PredictiveSummary,
    WarpedGpModel,
};
pub use optimize::{
    bfgs_minimize, bfgs_powell, chain_summary, ensemble_mcmc, flat_prior_log_prob, powell_minimize,
    ChainSummary, InitBall, McmcChain, McmcConfig, OptResult, OptimizeError, ParamSpace,
    ParamSummary, Termination, TrajectoryPoint, Transform,
};
pub use quad::GaussHermite;
pub use warping::{invert_numeric, Stage, WarpError, Warping};
