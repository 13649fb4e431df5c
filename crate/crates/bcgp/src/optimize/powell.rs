//! Powell's conjugate-direction method: derivative-free minimization by
//! successive line searches along an evolving direction set. The minimum of
//! a positive-definite quadratic is reached after at most n mutually
//! conjugate line-search cycles.

use super::line_search::{line_minimize, LINE_BUDGET};
use super::{OptResult, OptimizeError, Termination, Tracker, TrajectoryPoint};

/// Minimizes `f` from `x0`. A cycle runs one line search along each of the
/// `n` current directions, then possibly replaces the direction of largest
/// decrease with the cycle's composite displacement. Converges when a full
/// cycle improves the value by less than `tol` (relative).
pub fn powell_minimize(
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
    let mut x = x0.to_vec();
    let mut fx = tracker.eval(&x);
    if !fx.is_finite() {
        return Err(OptimizeError::NonFiniteStart);
    }

    // direction set starts as the coordinate axes
    let mut directions: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut d = vec![0.0; n];
            d[i] = 1.0;
            d
        })
        .collect();

    let mut trajectory = vec![TrajectoryPoint {
        iteration: 0,
        value: fx,
    }];
    let mut termination = Termination::MaxIterations;

    for cycle in 1..=max_iter {
        let x_old = x.clone();
        let f_old = fx;
        let mut biggest_drop = 0.0;
        let mut biggest_idx = 0;

        for (i, direction) in directions.iter().enumerate() {
            let f_before = fx;
            let (alpha, f_after) = line_minimize(
                |a| {
                    let trial: Vec<f64> = x
                        .iter()
                        .zip(direction)
                        .map(|(xi, di)| xi + a * di)
                        .collect();
                    tracker.eval(&trial)
                },
                fx,
                LINE_BUDGET,
            );
            if alpha != 0.0 {
                for (xi, di) in x.iter_mut().zip(direction) {
                    *xi += alpha * di;
                }
                fx = f_after;
            }
            if f_before - fx > biggest_drop {
                biggest_drop = f_before - fx;
                biggest_idx = i;
            }
        }

        trajectory.push(TrajectoryPoint {
            iteration: cycle,
            value: fx,
        });

        if 2.0 * (f_old - fx) <= tol * (f_old.abs() + fx.abs()) + 1e-25 {
            termination = Termination::Converged;
            break;
        }

        // composite direction of the cycle
        let composite: Vec<f64> = x.iter().zip(&x_old).map(|(a, b)| a - b).collect();
        let norm = composite.iter().map(|d| d * d).sum::<f64>().sqrt();
        if norm < 1e-14 {
            continue;
        }
        let extrapolated: Vec<f64> = x.iter().zip(&x_old).map(|(a, b)| 2.0 * a - b).collect();
        let f_ext = tracker.eval(&extrapolated);
        if f_ext >= f_old {
            continue;
        }
        let t = 2.0 * (f_old - 2.0 * fx + f_ext) * (f_old - fx - biggest_drop).powi(2)
            - biggest_drop * (f_old - f_ext).powi(2);
        if t >= 0.0 {
            continue;
        }
        let unit: Vec<f64> = composite.iter().map(|d| d / norm).collect();
        let (alpha, f_after) = line_minimize(
            |a| {
                let trial: Vec<f64> = x.iter().zip(&unit).map(|(xi, di)| xi + a * di).collect();
                tracker.eval(&trial)
            },
            fx,
            LINE_BUDGET,
        );
        if alpha != 0.0 {
            for (xi, di) in x.iter_mut().zip(&unit) {
                *xi += alpha * di;
            }
            fx = f_after;
        }
        directions[biggest_idx] = directions[n - 1].clone();
        directions[n - 1] = unit;
    }

    Ok(OptResult {
        best_params: tracker.best_params,
        best_value: tracker.best_value,
        trajectory,
        termination,
        evals: tracker.evals,
    })
}
