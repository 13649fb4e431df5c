//! Quasi-Newton minimization with central finite-difference gradients, and
//! the sequential BFGS-Powell hybrid that alternates gradient refinement
//! with derivative-free escape cycles.

use nalgebra::{DMatrix, DVector};

use super::powell::powell_minimize;
use super::{OptResult, OptimizeError, Termination, Tracker, TrajectoryPoint};

const FD_STEP_REL: f64 = 1e-6;
const ARMIJO_C1: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 50;

/// Central finite-difference gradient with per-coordinate step
/// `1e-6 * max(1, |x_j|)`. Falls back to a one-sided difference when a
/// probe lands in an invalid region; a coordinate with both probes invalid
/// contributes zero.
fn fd_gradient(tracker: &mut Tracker, x: &[f64], fx: f64) -> DVector<f64> {
    let n = x.len();
    let mut g = DVector::zeros(n);
    let mut probe = x.to_vec();
    for j in 0..n {
        let h = FD_STEP_REL * x[j].abs().max(1.0);
        probe[j] = x[j] + h;
        let fp = tracker.eval(&probe);
        probe[j] = x[j] - h;
        let fm = tracker.eval(&probe);
        probe[j] = x[j];
        g[j] = match (fp.is_finite(), fm.is_finite()) {
            (true, true) => (fp - fm) / (2.0 * h),
            (true, false) => (fp - fx) / h,
            (false, true) => (fx - fm) / h,
            (false, false) => 0.0,
        };
    }
    g
}

/// BFGS with finite-difference gradients and Armijo backtracking.
/// Terminates on the gradient max-norm or on relative improvement below
/// `tol`.
pub fn bfgs_minimize(
    f: impl Fn(&[f64]) -> f64,
    x0: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<OptResult, OptimizeError> {
    let n = x0.len();
    if n == 0 {
        return Err(OptimizeError::InvalidArgument(
            "empty starting point".into(),
        ));
    }
    if !(tol > 0.0) {
        return Err(OptimizeError::InvalidArgument(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let obj = |x: &[f64]| f(x);
    let mut tracker = Tracker::new(&obj, x0);
    let mut x = DVector::from_column_slice(x0);
    let mut fx = tracker.eval(x.as_slice());
    if !fx.is_finite() {
        return Err(OptimizeError::NonFiniteStart);
    }

    let mut h_inv: DMatrix<f64> = DMatrix::identity(n, n);
    let mut g = fd_gradient(&mut tracker, x.as_slice(), fx);
    let mut trajectory = vec![TrajectoryPoint {
        iteration: 0,
        value: fx,
    }];
    let mut termination = Termination::MaxIterations;

    for iter in 1..=max_iter {
        if g.amax() <= tol {
            termination = Termination::Converged;
            break;
        }
        let mut p = -(&h_inv * &g);
        if p.dot(&g) >= 0.0 {
            // not a descent direction, reset curvature
            h_inv = DMatrix::identity(n, n);
            p = -g.clone();
        }

        // Armijo backtracking from a unit step
        let slope = g.dot(&p);
        let mut alpha = 1.0;
        let mut x_new = &x + alpha * &p;
        let mut f_new = tracker.eval(x_new.as_slice());
        let mut backtracks = 0;
        while f_new > fx + ARMIJO_C1 * alpha * slope && backtracks < MAX_BACKTRACKS {
            alpha *= 0.5;
            x_new = &x + alpha * &p;
            f_new = tracker.eval(x_new.as_slice());
            backtracks += 1;
        }
        if f_new > fx {
            // no progress along the quasi-Newton direction; retry once from
            // steepest descent before giving up
            if h_inv != DMatrix::identity(n, n) {
                h_inv = DMatrix::identity(n, n);
                continue;
            }
            termination = Termination::Converged;
            break;
        }

        let g_new = fd_gradient(&mut tracker, x_new.as_slice(), f_new);
        let s = &x_new - &x;
        let y = &g_new - &g;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            // inverse BFGS update
            let rho = 1.0 / sy;
            let i = DMatrix::identity(n, n);
            let left = &i - rho * &s * y.transpose();
            let right = &i - rho * &y * s.transpose();
            h_inv = left * h_inv * right + rho * &s * s.transpose();
        }

        let improvement = fx - f_new;
        x = x_new;
        fx = f_new;
        g = g_new;
        trajectory.push(TrajectoryPoint {
            iteration: iter,
            value: fx,
        });

        if 2.0 * improvement <= tol * (fx.abs() + (fx + improvement).abs()) + 1e-25 {
            termination = Termination::Converged;
            break;
        }
    }

    Ok(OptResult {
        best_params: tracker.best_params,
        best_value: tracker.best_value,
        trajectory,
        termination,
        evals: tracker.evals,
    })
}

/// The sequential hybrid: each round runs BFGS then Powell, warm-starting
/// every stage from the best point so far. The final value can never exceed
/// what plain BFGS reaches from the same start.
pub fn bfgs_powell(
    f: impl Fn(&[f64]) -> f64,
    x0: &[f64],
    rounds: usize,
    tol: f64,
    max_iter: usize,
) -> Result<OptResult, OptimizeError> {
    if rounds == 0 {
        return Err(OptimizeError::InvalidArgument("rounds must be >= 1".into()));
    }
    let mut current = x0.to_vec();
    let mut best_value = f64::INFINITY;
    let mut trajectory = Vec::new();
    let mut evals = 0;
    let mut offset = 0;
    let mut termination = Termination::MaxIterations;

    for _ in 0..rounds {
        for stage in 0..2 {
            let result = if stage == 0 {
                bfgs_minimize(&f, &current, tol, max_iter)?
            } else {
                powell_minimize(&f, &current, tol, max_iter)?
            };
            evals += result.evals;
            for point in &result.trajectory {
                trajectory.push(TrajectoryPoint {
                    iteration: offset + point.iteration,
                    value: point.value,
                });
            }
            offset = trajectory.last().map(|p| p.iteration + 1).unwrap_or(0);
            if result.best_value <= best_value {
                best_value = result.best_value;
                current = result.best_params;
            }
            termination = result.termination;
        }
    }

    Ok(OptResult {
        best_params: current,
        best_value,
        trajectory,
        termination,
        evals,
    })
}
