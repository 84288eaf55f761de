//! One-dimensional minimization used for covariance parameter profiling.

const GOLDEN: f64 = 0.618_033_988_749_894_8;

/// Golden-section search for a minimum of `f` on `[lo, hi]`.
pub fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let mut x1 = hi - GOLDEN * (hi - lo);
    let mut x2 = lo + GOLDEN * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - GOLDEN * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + GOLDEN * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Evaluates `f` on `steps + 1` equispaced points of `[lo, hi]`, then refines
/// around the best one by golden-section search. Earlier grid points win ties.
pub fn grid_then_golden(f: impl Fn(f64) -> f64, lo: f64, hi: f64, steps: usize) -> (f64, f64) {
    let h = (hi - lo) / steps as f64;
    let (mut best_x, mut best_f) = (lo, f(lo));
    for i in 1..=steps {
        let x = lo + i as f64 * h;
        let fx = f(x);
        if fx < best_f {
            best_x = x;
            best_f = fx;
        }
    }
    let (a, b) = ((best_x - h).max(lo), (best_x + h).min(hi));
    let (x, fx) = golden_section(&f, a, b, 1e-6 * (hi - lo).max(1.0));
    if fx < best_f {
        (x, fx)
    } else {
        (best_x, best_f)
    }
}
