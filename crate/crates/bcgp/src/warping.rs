//! Invertible coordinate-wise transformations: Box-Cox, affine, and their
//! compositions, with exact forward, inverse, and log-derivative evaluation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Below this value of the power parameter the signed power form cancels
/// catastrophically, so evaluation branches to the exact log/exp limit.
pub const LOG_BRANCH_LAMBDA: f64 = 1e-7;

/// Affine scales with magnitude below this are treated as degenerate.
pub const MIN_AFFINE_SCALE: f64 = 1e-12;

/// Errors raised by warping evaluation and construction.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum WarpError {
    /// The input lies outside the transform's domain.
    #[error("value {value} outside warping domain: {reason}")]
    Domain { value: f64, reason: &'static str },
    /// The transform or its derivative is singular at the input.
    #[error("warping singular at {value}: {reason}")]
    Singular { value: f64, reason: &'static str },
    /// An invalid parameter was supplied at construction.
    #[error("invalid warping parameter: {0}")]
    InvalidParameter(String),
    /// A composition needs at least one stage.
    #[error("composition requires at least one stage")]
    EmptyComposition,
    /// Numeric inversion did not reach the requested tolerance.
    #[error("numeric inversion stopped after {iterations} iterations with residual {residual:e}")]
    NoConvergence { iterations: usize, residual: f64 },
}

fn sgn(y: f64) -> f64 {
    if y > 0.0 {
        1.0
    } else if y < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// An elementary stage of a composed warping.
///
/// Serialized as `{kind: "boxcox"|"affine", params: {...}}`, the schema
/// shared with the experiment config files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(
    tag = "kind",
    content = "params",
    rename_all = "lowercase",
    deny_unknown_fields
)]
pub enum Stage {
    /// Signed power transform `(sgn(y)|y|^lambda - 1)/lambda`, log for lambda = 0.
    BoxCox { lambda: f64 },
    /// `shift + scale * y`.
    Affine { shift: f64, scale: f64 },
}

impl Stage {
    fn validate(&self) -> Result<(), WarpError> {
        match *self {
            Stage::BoxCox { lambda } => {
                if !lambda.is_finite() || lambda < 0.0 {
                    return Err(WarpError::InvalidParameter(format!(
                        "box-cox lambda must be finite and nonnegative, got {lambda}"
                    )));
                }
            }
            Stage::Affine { shift, scale } => {
                if !shift.is_finite() || !scale.is_finite() {
                    return Err(WarpError::InvalidParameter(format!(
                        "affine parameters must be finite, got shift {shift}, scale {scale}"
                    )));
                }
                if scale.abs() < MIN_AFFINE_SCALE {
                    return Err(WarpError::InvalidParameter(format!(
                        "affine scale must satisfy |scale| >= {MIN_AFFINE_SCALE}, got {scale}"
                    )));
                }
            }
        }
        Ok(())
    }

    fn forward(&self, y: f64) -> Result<f64, WarpError> {
        match *self {
            Stage::BoxCox { lambda } => {
                if lambda < LOG_BRANCH_LAMBDA {
                    if y <= 0.0 {
                        return Err(WarpError::Domain {
                            value: y,
                            reason: "log warping requires y > 0",
                        });
                    }
                    Ok(y.ln())
                } else if lambda == 1.0 {
                    Ok(y - 1.0)
                } else if y > 0.0 {
                    // exp_m1 keeps the small-lambda limit accurate where
                    // |y|^lambda - 1 would cancel catastrophically
                    Ok((lambda * y.ln()).exp_m1() / lambda)
                } else {
                    Ok((sgn(y) * y.abs().powf(lambda) - 1.0) / lambda)
                }
            }
            Stage::Affine { shift, scale } => Ok(shift + scale * y),
        }
    }

    fn inverse(&self, x: f64) -> Result<f64, WarpError> {
        match *self {
            Stage::BoxCox { lambda } => {
                if lambda < LOG_BRANCH_LAMBDA {
                    Ok(x.exp())
                } else if lambda == 1.0 {
                    Ok(x + 1.0)
                } else {
                    let v = lambda * x;
                    let u = v + 1.0;
                    if u.abs() <= f64::EPSILON * (1.0 + v.abs()) {
                        return Err(WarpError::Singular {
                            value: x,
                            reason: "inverse singular where lambda*x + 1 = 0",
                        });
                    }
                    if u > 0.5 {
                        // ln_1p avoids amplifying the rounding of u by 1/lambda
                        Ok((v.ln_1p() / lambda).exp())
                    } else {
                        Ok(sgn(u) * u.abs().powf(1.0 / lambda))
                    }
                }
            }
            Stage::Affine { shift, scale } => Ok((x - shift) / scale),
        }
    }

    fn log_abs_deriv(&self, y: f64) -> Result<f64, WarpError> {
        match *self {
            Stage::BoxCox { lambda } => {
                if lambda < LOG_BRANCH_LAMBDA {
                    if y <= 0.0 {
                        return Err(WarpError::Domain {
                            value: y,
                            reason: "log warping requires y > 0",
                        });
                    }
                    Ok(-y.ln())
                } else if lambda == 1.0 {
                    // unit derivative everywhere, including y = 0
                    Ok(0.0)
                } else {
                    // d/dy = |y|^(lambda-1): undefined at 0 for lambda < 1,
                    // zero at 0 for lambda > 1
                    if y == 0.0 {
                        return Err(WarpError::Singular {
                            value: y,
                            reason: "box-cox derivative singular or zero at y = 0",
                        });
                    }
                    Ok((lambda - 1.0) * y.abs().ln())
                }
            }
            Stage::Affine { scale, .. } => Ok(scale.abs().ln()),
        }
    }

    fn is_decreasing(&self) -> bool {
        matches!(*self, Stage::Affine { scale, .. } if scale < 0.0)
    }
}

/// A composition of elementary warpings, applied first-to-last in the
/// forward direction. Immutable after construction; safe to share across
/// threads for read-only evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Stage>", into = "Vec<Stage>")]
pub struct Warping {
    stages: Vec<Stage>,
}

impl TryFrom<Vec<Stage>> for Warping {
    type Error = WarpError;

    fn try_from(stages: Vec<Stage>) -> Result<Self, WarpError> {
        Warping::compose(stages)
    }
}

impl From<Warping> for Vec<Stage> {
    fn from(w: Warping) -> Vec<Stage> {
        w.stages
    }
}

impl Warping {
    /// Composes a nonempty list of stages. Validates every stage.
    pub fn compose(stages: Vec<Stage>) -> Result<Self, WarpError> {
        if stages.is_empty() {
            return Err(WarpError::EmptyComposition);
        }
        for stage in &stages {
            stage.validate()?;
        }
        Ok(Warping { stages })
    }

    /// The identity warping, `y -> y`.
    pub fn identity() -> Self {
        Warping {
            stages: vec![Stage::Affine {
                shift: 0.0,
                scale: 1.0,
            }],
        }
    }

    /// A single Box-Cox stage.
    pub fn box_cox(lambda: f64) -> Result<Self, WarpError> {
        Warping::compose(vec![Stage::BoxCox { lambda }])
    }

    /// The logarithmic warping (Box-Cox with lambda = 0).
    pub fn log() -> Self {
        Warping {
            stages: vec![Stage::BoxCox { lambda: 0.0 }],
        }
    }

    /// A single affine stage `y -> shift + scale * y`.
    pub fn affine(shift: f64, scale: f64) -> Result<Self, WarpError> {
        Warping::compose(vec![Stage::Affine { shift, scale }])
    }

    /// Shift-then-log warping for data lower-bounded by `-shift`.
    pub fn shifted_log(shift: f64) -> Result<Self, WarpError> {
        Warping::compose(vec![
            Stage::Affine { shift, scale: 1.0 },
            Stage::BoxCox { lambda: 0.0 },
        ])
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    /// True when the composed map is strictly decreasing (odd number of
    /// negative affine scales; Box-Cox stages are always increasing).
    pub fn is_decreasing(&self) -> bool {
        self.stages.iter().filter(|s| s.is_decreasing()).count() % 2 == 1
    }

    /// Evaluates the composed forward transform.
    pub fn forward(&self, y: f64) -> Result<f64, WarpError> {
        let mut v = y;
        for stage in &self.stages {
            v = stage.forward(v)?;
        }
        Ok(v)
    }

    /// Evaluates the composed inverse: stage inverses in reverse order.
    pub fn inverse(&self, x: f64) -> Result<f64, WarpError> {
        let mut v = x;
        for stage in self.stages.iter().rev() {
            v = stage.inverse(v)?;
        }
        Ok(v)
    }

    /// Log of the absolute composed derivative at `y`: the chain-rule sum of
    /// stage log-derivatives evaluated at the running intermediate values.
    pub fn log_abs_deriv(&self, y: f64) -> Result<f64, WarpError> {
        let mut v = y;
        let mut total = 0.0;
        for stage in &self.stages {
            total += stage.log_abs_deriv(v)?;
            v = stage.forward(v)?;
        }
        Ok(total)
    }

    /// Forward transform applied to a slice.
    pub fn forward_all(&self, ys: &[f64]) -> Result<Vec<f64>, WarpError> {
        ys.iter().map(|&y| self.forward(y)).collect()
    }

    /// Inverse transform applied to a slice.
    pub fn inverse_all(&self, xs: &[f64]) -> Result<Vec<f64>, WarpError> {
        xs.iter().map(|&x| self.inverse(x)).collect()
    }

    /// Sum of `log_abs_deriv` over a slice (the Jacobian term of the
    /// warped likelihood).
    pub fn log_abs_deriv_sum(&self, ys: &[f64]) -> Result<f64, WarpError> {
        let mut total = 0.0;
        for &y in ys {
            total += self.log_abs_deriv(y)?;
        }
        Ok(total)
    }

    /// Signed derivative `d(forward)/dy`, used by the Newton inverter.
    fn signed_deriv(&self, y: f64) -> Result<f64, WarpError> {
        let mut v = y;
        let mut deriv = 1.0;
        for stage in &self.stages {
            let d = match *stage {
                Stage::Affine { scale, .. } => scale,
                Stage::BoxCox { .. } => stage.log_abs_deriv(v)?.exp(),
            };
            deriv *= d;
            v = stage.forward(v)?;
        }
        Ok(deriv)
    }
}

/// Inverts `w` at `x` by bracketing plus safeguarded Newton-Raphson.
///
/// This is the iterative counterpart to the closed-form [`Warping::inverse`],
/// kept for cross-checking and for measuring the cost of models whose
/// inverse is not available analytically. Returns `y` with
/// `|forward(y) - x| <= tol`.
pub fn invert_numeric(w: &Warping, x: f64, tol: f64, max_iter: usize) -> Result<f64, WarpError> {
    let sign = if w.is_decreasing() { -1.0 } else { 1.0 };
    // g(y) = sign * (forward(y) - x) is increasing on the domain.
    let g = |y: f64| -> Option<f64> { w.forward(y).ok().map(|v| sign * (v - x)) };

    // A finite starting point inside the domain.
    let candidates = [1.0, 0.0, -1.0, 2.0, 0.5, 10.0, -10.0, 100.0, 1e-3];
    let (y0, g0) = candidates
        .iter()
        .find_map(|&y| g(y).map(|v| (y, v)))
        .ok_or(WarpError::Domain {
            value: x,
            reason: "no finite starting point found for numeric inversion",
        })?;

    // Doubling search for a sign-changing bracket. Probes that leave the
    // domain are pulled back toward the last feasible point.
    let mut lo = y0;
    let mut hi = y0;
    let mut g_lo = g0;
    let mut g_hi = g0;
    let mut step = 1.0 + y0.abs();
    let mut expansions = 0usize;
    while g_lo > 0.0 || g_hi < 0.0 {
        if expansions > 200 {
            return Err(WarpError::NoConvergence {
                iterations: expansions,
                residual: g_lo.abs().min(g_hi.abs()),
            });
        }
        expansions += 1;
        if g_lo > 0.0 {
            let mut probe = lo - step;
            let mut tries = 0;
            loop {
                match g(probe) {
                    Some(v) => {
                        lo = probe;
                        g_lo = v;
                        break;
                    }
                    None => {
                        probe = (probe + lo) / 2.0;
                        tries += 1;
                        if tries > 80 {
                            return Err(WarpError::Domain {
                                value: x,
                                reason: "bracketing left the warping domain",
                            });
                        }
                    }
                }
            }
        }
        if g_hi < 0.0 {
            let mut probe = hi + step;
            let mut tries = 0;
            loop {
                match g(probe) {
                    Some(v) => {
                        hi = probe;
                        g_hi = v;
                        break;
                    }
                    None => {
                        probe = (probe + hi) / 2.0;
                        tries += 1;
                        if tries > 80 {
                            return Err(WarpError::Domain {
                                value: x,
                                reason: "bracketing left the warping domain",
                            });
                        }
                    }
                }
            }
        }
        step *= 2.0;
    }

    // Safeguarded Newton: bisect whenever the Newton step fails or exits
    // the bracket.
    let mut y = 0.5 * (lo + hi);
    let mut iterations = 0usize;
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        iterations += 1;
        let gy = match g(y) {
            Some(v) => v,
            None => {
                y = (lo + hi) / 2.0;
                continue;
            }
        };
        residual = gy.abs();
        if residual <= tol {
            return Ok(y);
        }
        if gy > 0.0 {
            hi = y;
        } else {
            lo = y;
        }
        let newton = w
            .signed_deriv(y)
            .ok()
            .filter(|d| d.abs() > 1e-300)
            .map(|d| y - (sign * gy) / d);
        y = match newton {
            Some(c) if c.is_finite() && c > lo && c < hi => c,
            _ => (lo + hi) / 2.0,
        };
    }
    let final_residual = g(y).map(|v| v.abs()).unwrap_or(residual);
    if final_residual <= tol {
        Ok(y)
    } else {
        Err(WarpError::NoConvergence {
            iterations,
            residual: final_residual,
        })
    }
}
