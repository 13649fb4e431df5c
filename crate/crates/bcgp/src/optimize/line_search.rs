//! One-dimensional minimization along a search direction: golden-ratio
//! bracketing followed by golden-section reduction to relative 1e-8, with a
//! fixed evaluation budget per line.

const GOLD: f64 = 1.618_033_988_749_895;
const GOLDEN_RATIO: f64 = 0.618_033_988_749_895;
const REL_TOL: f64 = 1e-8;
const ABS_TOL: f64 = 1e-14;

pub(crate) const LINE_BUDGET: usize = 100;

/// Minimizes `f` over the step parameter, given `f0 = f(0.0)` already
/// evaluated by the caller. Returns `(alpha, f(alpha))` with
/// `f(alpha) <= f0`; `alpha = 0` when no improvement was found.
pub(crate) fn line_minimize<F: FnMut(f64) -> f64>(mut f: F, f0: f64, budget: usize) -> (f64, f64) {
    let mut evals = 0usize;
    let mut best_alpha = 0.0;
    let mut best_value = f0;
    let mut eval = |alpha: f64, evals: &mut usize, best: &mut (f64, f64)| -> f64 {
        *evals += 1;
        let raw = f(alpha);
        let v = if raw.is_finite() { raw } else { f64::INFINITY };
        if v < best.1 {
            *best = (alpha, v);
        }
        v
    };
    let mut best = (best_alpha, best_value);

    // Bracket a minimum by golden-ratio expansion downhill.
    let mut ax = 0.0;
    let mut fa = f0;
    let mut bx = 1.0;
    let mut fb = eval(bx, &mut evals, &mut best);
    if fb > fa {
        std::mem::swap(&mut ax, &mut bx);
        std::mem::swap(&mut fa, &mut fb);
    }
    let mut cx = bx + GOLD * (bx - ax);
    let mut fc = eval(cx, &mut evals, &mut best);
    while fc < fb && evals < budget {
        ax = bx;
        fa = fb;
        bx = cx;
        fb = fc;
        cx = bx + GOLD * (bx - ax);
        fc = eval(cx, &mut evals, &mut best);
    }
    let _ = fa;

    // Golden-section reduction on the bracket (ax, bx, cx).
    let (mut x0, mut x3) = (ax, cx);
    let (mut x1, mut x2, mut f1, mut f2);
    if (cx - bx).abs() > (bx - ax).abs() {
        x1 = bx;
        f1 = fb;
        x2 = bx + (1.0 - GOLDEN_RATIO) * (cx - bx);
        f2 = eval(x2, &mut evals, &mut best);
    } else {
        x2 = bx;
        f2 = fb;
        x1 = bx - (1.0 - GOLDEN_RATIO) * (bx - ax);
        f1 = eval(x1, &mut evals, &mut best);
    }
    while (x3 - x0).abs() > REL_TOL * (x1.abs() + x2.abs()) + ABS_TOL && evals < budget {
        if f2 < f1 {
            x0 = x1;
            x1 = x2;
            f1 = f2;
            x2 = GOLDEN_RATIO * x2 + (1.0 - GOLDEN_RATIO) * x3;
            f2 = eval(x2, &mut evals, &mut best);
        } else {
            x3 = x2;
            x2 = x1;
            f2 = f1;
            x1 = GOLDEN_RATIO * x1 + (1.0 - GOLDEN_RATIO) * x0;
            f1 = eval(x1, &mut evals, &mut best);
        }
    }

    (best_alpha, best_value) = best;
    (best_alpha, best_value)
}
