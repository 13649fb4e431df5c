//! Exact Gaussian-process machinery: Cholesky-based conditioning, Gaussian
//! negative log-likelihood, and path sampling.
//!
//! All solves go through triangular substitution on a Cholesky factor; the
//! covariance is never inverted explicitly. When a factorization fails, a
//! relative jitter is added to the diagonal and escalated tenfold up to
//! `1e-4 * mean(diag)` before giving up.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::kernel::Kernel;
use crate::mean::MeanFunction;

const LN_2PI: f64 = 1.837_877_066_409_345_6;
const JITTER_START_REL: f64 = 1e-10;
const JITTER_MAX_REL: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GpError {
    /// Factorization failed even after jitter escalation; carries the
    /// absolute jitter levels that were attempted.
    #[error("covariance matrix not positive definite; attempted jitters {attempted:?}")]
    Conditioning { attempted: Vec<f64> },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Gaussian posterior over test inputs: mean vector and (latent,
/// noise-free) covariance, symmetrized with nonnegative diagonal.
#[derive(Debug, Clone)]
pub struct GaussianPosterior {
    pub t_test: Vec<f64>,
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl GaussianPosterior {
    /// Marginal latent variances (the covariance diagonal).
    pub fn variances(&self) -> Vec<f64> {
        (0..self.cov.nrows()).map(|i| self.cov[(i, i)]).collect()
    }
}

/// Cholesky factorization with escalating diagonal jitter.
pub(crate) fn cholesky_with_jitter(
    matrix: &DMatrix<f64>,
) -> Result<(Cholesky<f64, Dyn>, f64), GpError> {
    let n = matrix.nrows();
    let mean_diag = {
        let tr: f64 = (0..n).map(|i| matrix[(i, i)]).sum();
        let m = tr / n.max(1) as f64;
        if m > 0.0 && m.is_finite() {
            m
        } else {
            1.0
        }
    };
    let mut attempted = Vec::new();
    let mut rel = 0.0;
    loop {
        let jitter = rel * mean_diag;
        attempted.push(jitter);
        let candidate = if jitter == 0.0 {
            matrix.clone()
        } else {
            let mut m = matrix.clone();
            for i in 0..n {
                m[(i, i)] += jitter;
            }
            m
        };
        if let Some(chol) = Cholesky::new(candidate) {
            return Ok((chol, jitter));
        }
        rel = if rel == 0.0 {
            JITTER_START_REL
        } else {
            rel * 10.0
        };
        if rel > JITTER_MAX_REL {
            return Err(GpError::Conditioning { attempted });
        }
    }
}

fn validate_inputs(t: &[f64], x: &[f64], noise_variance: f64) -> Result<(), GpError> {
    if t.len() != x.len() {
        return Err(GpError::InvalidParameter(format!(
            "input/observation length mismatch: {} vs {}",
            t.len(),
            x.len()
        )));
    }
    if t.iter().chain(x.iter()).any(|v| !v.is_finite()) {
        return Err(GpError::InvalidParameter("inputs must be finite".into()));
    }
    if !noise_variance.is_finite() || noise_variance < 0.0 {
        return Err(GpError::InvalidParameter(format!(
            "noise variance must be finite and >= 0, got {noise_variance}"
        )));
    }
    Ok(())
}

fn training_gram(kernel: &Kernel, noise_variance: f64, t: &[f64]) -> DMatrix<f64> {
    let mut k = kernel.gram(t, t);
    for i in 0..t.len() {
        k[(i, i)] += noise_variance;
    }
    k
}

/// Gaussian negative log-likelihood of observations `x` at inputs `t` under
/// the given mean and kernel, with observation noise on the diagonal:
///
/// `(n/2) log 2pi + (1/2)(x - mu)' K^{-1} (x - mu) + (1/2) log |K|`
pub fn nll_gaussian(
    mean: &MeanFunction,
    kernel: &Kernel,
    noise_variance: f64,
    t: &[f64],
    x: &[f64],
) -> Result<f64, GpError> {
    validate_inputs(t, x, noise_variance)?;
    kernel.validate()?;
    let n = t.len();
    if n == 0 {
        return Ok(0.0);
    }
    let k = training_gram(kernel, noise_variance, t);
    let (chol, _) = cholesky_with_jitter(&k)?;
    let centered = DVector::from_column_slice(x) - mean.eval_all(t);
    let alpha = chol.solve(&centered);
    let log_det: f64 = chol
        .l_dirty()
        .diagonal()
        .iter()
        .map(|l| l.ln())
        .sum::<f64>()
        * 2.0;
    Ok(0.5 * (n as f64 * LN_2PI + centered.dot(&alpha) + log_det))
}

/// Posterior over `t_test` given training pairs. With no training points the
/// prior is returned. The returned covariance is the latent (noise-free)
/// posterior covariance; callers add `noise_variance` back where the
/// predictive marginal of a new observation is needed.
pub fn posterior(
    mean: &MeanFunction,
    kernel: &Kernel,
    noise_variance: f64,
    t_train: &[f64],
    x_train: &[f64],
    t_test: &[f64],
) -> Result<GaussianPosterior, GpError> {
    validate_inputs(t_train, x_train, noise_variance)?;
    kernel.validate()?;
    if t_test.iter().any(|v| !v.is_finite()) {
        return Err(GpError::InvalidParameter(
            "test inputs must be finite".into(),
        ));
    }

    let prior_mean = mean.eval_all(t_test);
    let prior_cov = kernel.gram(t_test, t_test);
    if t_train.is_empty() {
        return Ok(finish_posterior(t_test, prior_mean, prior_cov));
    }

    let k_train = training_gram(kernel, noise_variance, t_train);
    let (chol, _) = cholesky_with_jitter(&k_train)?;
    let cross = kernel.gram(t_train, t_test); // n_train x n_test
    let centered = DVector::from_column_slice(x_train) - mean.eval_all(t_train);
    let alpha = chol.solve(&centered);
    let mean_post = prior_mean + cross.transpose() * &alpha;
    let v = chol.solve(&cross);
    let cov_post = prior_cov - cross.transpose() * v;
    Ok(finish_posterior(t_test, mean_post, cov_post))
}

fn finish_posterior(
    t_test: &[f64],
    mean: DVector<f64>,
    mut cov: DMatrix<f64>,
) -> GaussianPosterior {
    // Symmetrize and clamp roundoff negatives on the diagonal.
    let n = cov.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let s = 0.5 * (cov[(i, j)] + cov[(j, i)]);
            cov[(i, j)] = s;
            cov[(j, i)] = s;
        }
        debug_assert!(
            cov[(i, i)] >= -1e-10,
            "posterior variance {} at {}",
            cov[(i, i)],
            i
        );
        if cov[(i, i)] < 0.0 {
            cov[(i, i)] = 0.0;
        }
    }
    GaussianPosterior {
        t_test: t_test.to_vec(),
        mean,
        cov,
    }
}

/// Draws `n_draws` joint samples `mu + L z` from `N(mean, cov)`, with `z`
/// standard normal from the provided generator. The factorization uses the
/// same jitter escalation as conditioning.
pub fn sample_gaussian(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    n_draws: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Vec<f64>>, GpError> {
    let n = mean.len();
    if n == 0 {
        return Ok(vec![Vec::new(); n_draws]);
    }
    let (chol, _) = cholesky_with_jitter(cov)?;
    let l = chol.l();
    let normal = StandardNormal;
    let mut draws = Vec::with_capacity(n_draws);
    for _ in 0..n_draws {
        let z = DVector::from_iterator(n, (0..n).map(|_| normal.sample(rng)));
        let path = mean + &l * z;
        draws.push(path.iter().copied().collect());
    }
    Ok(draws)
}

/// Draws one realisation of the prior process at `t`; deterministic given
/// the seed.
pub fn sample_prior(
    mean: &MeanFunction,
    kernel: &Kernel,
    t: &[f64],
    seed: u64,
) -> Result<Vec<f64>, GpError> {
    kernel.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = mean.eval_all(t);
    let k = kernel.gram(t, t);
    Ok(sample_gaussian(&m, &k, 1, &mut rng)?.pop().unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::SmComponent;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;

    fn se(variance: f64, lengthscale: f64) -> Kernel {
        Kernel::SquaredExponential {
            variance,
            lengthscale,
        }
    }

    #[test]
    fn nll_single_standard_normal() {
        let k = se(1.0, 1.0);
        let nll = nll_gaussian(&MeanFunction::Zero, &k, 0.0, &[0.0], &[0.0]).unwrap();
        assert_abs_diff_eq!(nll, HALF_LN_2PI, epsilon = 1e-12);
        let nll = nll_gaussian(&MeanFunction::Zero, &k, 0.0, &[0.0], &[1.0]).unwrap();
        assert_abs_diff_eq!(nll, HALF_LN_2PI + 0.5, epsilon = 1e-12);
    }

    #[test]
    fn nll_matches_dense_inverse_oracle() {
        // brute-force 2x2 evaluation via explicit inverse and determinant
        let kernel = se(1.3, 0.8);
        let noise = 0.2;
        let t = [0.0, 0.5];
        let x = [0.4, -1.1];
        let mean = MeanFunction::Constant { value: 0.3 };

        let k00 = kernel.eval(t[0], t[0]) + noise;
        let k01 = kernel.eval(t[0], t[1]);
        let k11 = kernel.eval(t[1], t[1]) + noise;
        let det = k00 * k11 - k01 * k01;
        let c = [x[0] - 0.3, x[1] - 0.3];
        let quad = (k11 * c[0] * c[0] - 2.0 * k01 * c[0] * c[1] + k00 * c[1] * c[1]) / det;
        let expected = 0.5 * (2.0 * LN_2PI + quad + det.ln());

        let nll = nll_gaussian(&mean, &kernel, noise, &t, &x).unwrap();
        assert_abs_diff_eq!(nll, expected, epsilon = 1e-10);
    }

    #[test]
    fn nll_invariant_under_joint_permutation() {
        let kernel = Kernel::SpectralMixture {
            components: vec![
                SmComponent {
                    weight: 1.0,
                    frequency: 0.2,
                    variance: 0.03,
                },
                SmComponent {
                    weight: 0.4,
                    frequency: 0.05,
                    variance: 0.01,
                },
            ],
        };
        let mean = MeanFunction::Constant { value: 0.5 };
        let t = [0.0, 1.0, 2.5, 3.1, 4.9];
        let x = [0.3, -0.2, 1.4, 0.9, -0.6];
        let perm = [3usize, 0, 4, 1, 2];
        let tp: Vec<f64> = perm.iter().map(|&i| t[i]).collect();
        let xp: Vec<f64> = perm.iter().map(|&i| x[i]).collect();
        let a = nll_gaussian(&mean, &kernel, 0.1, &t, &x).unwrap();
        let b = nll_gaussian(&mean, &kernel, 0.1, &tp, &xp).unwrap();
        assert_abs_diff_eq!(a, b, epsilon = 1e-9);
    }

    #[test]
    fn posterior_with_no_training_is_prior() {
        let kernel = se(2.0, 1.5);
        let mean = MeanFunction::Constant { value: 1.0 };
        let t_test = [0.0, 1.0];
        let post = posterior(&mean, &kernel, 0.1, &[], &[], &t_test).unwrap();
        assert_eq!(post.mean.as_slice(), &[1.0, 1.0]);
        for i in 0..2 {
            for j in 0..2 {
                assert_abs_diff_eq!(
                    post.cov[(i, j)],
                    kernel.eval(t_test[i], t_test[j]),
                    epsilon = 1e-14
                );
            }
        }
    }

    #[test]
    fn posterior_interpolates_noise_free_point() {
        let kernel = se(1.0, 1.0);
        let post = posterior(&MeanFunction::Zero, &kernel, 0.0, &[2.0], &[0.7], &[2.0]).unwrap();
        assert_abs_diff_eq!(post.mean[0], 0.7, epsilon = 1e-8);
        assert!(post.cov[(0, 0)] <= 1e-8);
    }

    #[test]
    fn posterior_matches_dense_oracle() {
        // 3 training points, explicit matrix-inverse oracle via LU
        let kernel = se(1.2, 0.9);
        let noise = 0.05;
        let mean = MeanFunction::Constant { value: -0.2 };
        let t_train = [0.0, 1.0, 2.2];
        let x_train = [0.5, -0.3, 0.8];
        let t_test = [0.4, 1.7];

        let k = training_gram(&kernel, noise, &t_train);
        let k_inv = k.clone().try_inverse().unwrap();
        let cross = kernel.gram(&t_train, &t_test);
        let centered = DVector::from_column_slice(&x_train) - mean.eval_all(&t_train);
        let mu = mean.eval_all(&t_test) + cross.transpose() * &k_inv * &centered;
        let cov = kernel.gram(&t_test, &t_test) - cross.transpose() * &k_inv * &cross;

        let post = posterior(&mean, &kernel, noise, &t_train, &x_train, &t_test).unwrap();
        for i in 0..2 {
            assert_abs_diff_eq!(post.mean[i], mu[i], epsilon = 1e-9);
            for j in 0..2 {
                assert_abs_diff_eq!(post.cov[(i, j)], cov[(i, j)], epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn posterior_variance_never_exceeds_prior() {
        let kernel = se(1.7, 1.1);
        let t_train = [0.0, 0.5, 1.5, 3.0];
        let x_train = [0.1, 0.4, -0.2, 0.6];
        let t_test: Vec<f64> = (0..50).map(|i| -1.0 + 0.1 * i as f64).collect();
        let post = posterior(
            &MeanFunction::Zero,
            &kernel,
            0.01,
            &t_train,
            &x_train,
            &t_test,
        )
        .unwrap();
        for (i, &ti) in t_test.iter().enumerate() {
            assert!(post.cov[(i, i)] <= kernel.eval(ti, ti) + 1e-10);
        }
    }

    #[test]
    fn jitter_recovers_rank_deficient_gram() {
        // duplicate inputs make the noise-free Gram exactly singular
        let kernel = se(1.0, 1.0);
        let nll = nll_gaussian(&MeanFunction::Zero, &kernel, 0.0, &[1.0, 1.0], &[0.2, 0.2]);
        assert!(nll.is_ok());
    }

    #[test]
    fn conditioning_failure_reports_attempted_jitters() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]); // indefinite
        let err = cholesky_with_jitter(&m).unwrap_err();
        match err {
            GpError::Conditioning { attempted } => {
                assert!(attempted.len() > 3);
                assert_eq!(attempted[0], 0.0);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn sample_prior_is_deterministic() {
        let kernel = se(1.0, 2.0);
        let t = [0.0, 1.0, 2.0];
        let a = sample_prior(&MeanFunction::Zero, &kernel, &t, 42).unwrap();
        let b = sample_prior(&MeanFunction::Zero, &kernel, &t, 42).unwrap();
        assert_eq!(a, b);
        let c = sample_prior(&MeanFunction::Zero, &kernel, &t, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn sample_moments_match_prior() {
        let kernel = se(1.5, 1.0);
        let mean = MeanFunction::Constant { value: 0.8 };
        let t = [0.0, 0.6, 2.0];
        let m = mean.eval_all(&t);
        let k = kernel.gram(&t, &t);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n_draws = 10_000;
        let draws = sample_gaussian(&m, &k, n_draws, &mut rng).unwrap();

        // sample mean within 4 sigma / sqrt(n) at a single point
        let mean0: f64 = draws.iter().map(|d| d[0]).sum::<f64>() / n_draws as f64;
        let tol = 4.0 * 1.5_f64.sqrt() / (n_draws as f64).sqrt();
        assert!((mean0 - 0.8).abs() < tol, "mean {mean0}");

        // sample covariance within 5% relative Frobenius of the Gram
        let mut cov = DMatrix::zeros(3, 3);
        for d in &draws {
            for i in 0..3 {
                for j in 0..3 {
                    cov[(i, j)] += (d[i] - m[i]) * (d[j] - m[j]);
                }
            }
        }
        cov /= n_draws as f64;
        let err = (&cov - &k).norm() / k.norm();
        assert!(err < 0.05, "relative Frobenius error {err}");
    }

    #[test]
    fn rejects_mismatched_and_nonfinite_inputs() {
        let kernel = se(1.0, 1.0);
        assert!(nll_gaussian(&MeanFunction::Zero, &kernel, 0.0, &[0.0], &[]).is_err());
        assert!(nll_gaussian(&MeanFunction::Zero, &kernel, 0.0, &[f64::NAN], &[0.0]).is_err());
        assert!(nll_gaussian(&MeanFunction::Zero, &kernel, -1.0, &[0.0], &[0.0]).is_err());
    }

    #[test]
    fn gram_symmetry_random_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let kernel = Kernel::SpectralMixture {
            components: vec![
                SmComponent {
                    weight: 0.9,
                    frequency: 0.4,
                    variance: 0.02,
                },
                SmComponent {
                    weight: 0.2,
                    frequency: 1.3,
                    variance: 0.5,
                },
            ],
        };
        let t: Vec<f64> = (0..20).map(|_| rng.random_range(-10.0..10.0)).collect();
        let g = kernel.gram(&t, &t);
        let max_asym = (&g - g.transpose()).abs().max();
        assert!(max_asym <= 1e-12);
    }
}
