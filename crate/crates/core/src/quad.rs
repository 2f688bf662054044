//! Small numerical helpers: Gauss-Legendre rules, bisection.

use crate::scalar::Scalar;

/// Gauss-Legendre nodes and weights on [-1, 1], computed by Newton iteration in f64.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(order >= 1);
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { x } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * p - pm) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        if n == 1 {
            x = 0.0;
            dp = 1.0;
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n == 1 {
        weights[0] = 2.0;
    }
    (nodes, weights)
}

/// Composite Gauss-Legendre quadrature of `f` over `[a, b]`.
pub fn integrate<S: Scalar>(f: impl Fn(S) -> S, a: S, b: S, panels: usize, order: usize) -> S {
    let (xs, ws) = gauss_legendre(order);
    let h = (b - a) / S::of_usize(panels);
    let half = h / S::lit(2.0);
    let mut total = S::zero();
    for p in 0..panels {
        let mid = a + h * (S::of_usize(p) + S::lit(0.5));
        for (x, w) in xs.iter().zip(&ws) {
            total += S::lit(*w) * half * f(mid + half * S::lit(*x));
        }
    }
    total
}

/// Bisection for an increasing function: returns x in [lo, hi] with f(x) ≈ target.
/// Assumes f(lo) ≤ target ≤ f(hi); the answer is the left edge of any flat stretch.
pub fn bisect_increasing<S: Scalar>(f: impl Fn(S) -> S, target: S, mut lo: S, mut hi: S, tol: S) -> S {
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let mid = (lo + hi) / S::lit(2.0);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo + hi) / S::lit(2.0)
}
