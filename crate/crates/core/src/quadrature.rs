//! One-dimensional quadrature on geometrically graded partitions.
//!
//! The scale integrals this crate needs run over many decades of radius and
//! often carry integrable (or borderline non-integrable) power singularities
//! at zero, so the rules here grade geometrically toward the origin and close
//! the last gap with a fitted power-law tail instead of brute refinement.

/// Midpoint rule over a geometric partition of `[a, b]`, `0 < a < b`, with
/// `per_octave` sub-segments per factor of two.
pub fn geometric_midpoint(f: impl Fn(f64) -> f64, a: f64, b: f64, per_octave: usize) -> f64 {
    assert!(a > 0.0 && b > a && per_octave > 0, "need 0 < a < b and a positive density");
    let step = 0.5f64.powf(1.0 / per_octave as f64);
    let mut total = 0.0;
    let mut hi = b;
    while hi > a * (1.0 + 1e-14) {
        let lo = (hi * step).max(a);
        total += f(0.5 * (lo + hi)) * (hi - lo);
        hi = lo;
    }
    total
}

/// Integral of `f` over `(0, b]` for integrands behaving like a power of the
/// radius near zero: geometric midpoint rule down to `rho_min`, then an
/// analytic tail `f(rho_min) rho_min / (p + 1)` with the local log-log slope
/// `p`. Returns infinity when the fitted slope says the tail diverges.
pub fn graded_with_tail(f: impl Fn(f64) -> f64, b: f64, rho_min: f64, per_octave: usize) -> f64 {
    assert!(rho_min > 0.0 && b > rho_min);
    let main = geometric_midpoint(&f, rho_min, b, per_octave);
    let f1 = f(rho_min);
    let f2 = f(rho_min * 2.0f64.powf(1.0 / per_octave as f64));
    if !(f1 > 0.0) || !(f2 > 0.0) || !f1.is_finite() || !f2.is_finite() {
        // Flat or vanishing near zero: midpoint value over the remaining gap.
        return main + f1.max(0.0) * rho_min;
    }
    let p = (f1 / f2).ln() / (1.0f64 / 2.0f64.powf(1.0 / per_octave as f64)).ln();
    if p <= -1.0 + 1e-3 {
        return f64::INFINITY;
    }
    main + f1 * rho_min / (p + 1.0)
}

/// Composite Simpson rule with `n` (even) intervals.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    assert!(n >= 2 && n % 2 == 0);
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + k as f64 * h);
    }
    acc * h / 3.0
}
