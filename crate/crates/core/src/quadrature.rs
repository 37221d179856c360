//! Adaptive Simpson quadrature.

use crate::error::{Error, Result};

const MAX_DEPTH: u32 = 50;
const MAX_EVALUATIONS: usize = 2_000_000;

/// Integrates `f` over `[a, b]` to absolute tolerance `tol`, refining each
/// half-interval with Richardson extrapolation.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = simpson(a, b, fa, fm, fb);
    let mut budget = Budget {
        evaluations: 3,
        failed: false,
    };
    let value = refine(&f, a, b, fa, fm, fb, whole, tol, MAX_DEPTH, &mut budget);
    if budget.failed || !value.is_finite() {
        return Err(Error::Quadrature(format!(
            "no convergence on [{a}, {b}] to tolerance {tol}"
        )));
    }
    Ok(value)
}

struct Budget {
    evaluations: usize,
    failed: bool,
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn refine<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    budget: &mut Budget,
) -> f64 {
    if budget.failed {
        return f64::NAN;
    }
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    budget.evaluations += 2;
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if delta.is_finite() && delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    if !delta.is_finite() || depth == 0 || budget.evaluations > MAX_EVALUATIONS {
        budget.failed = true;
        return f64::NAN;
    }
    refine(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, budget)
        + refine(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, budget)
}
