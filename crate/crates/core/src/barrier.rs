//! Explicit super- and subsolution barriers on boundary boxes, certified
//! numerically against whole classes of elliptic operators.
//!
//! Both barriers have diagonal Hessians, so the worst operator in the
//! ellipticity class is known in closed form: pick `1/lambda` against
//! positive second derivatives and `lambda` against negative ones. The
//! certificate therefore carries two defects: one sampled with the concrete
//! operator field, one against that analytic extremal contraction. Validity
//! asks the extremal defect to stay nonnegative up to rounding.

use crate::geometry::CubeSpec;
use crate::grid::SampleField;
use crate::operator::EllipticOperatorField;
use crate::error::{Error, Result};
use serde::Serialize;

/// Geometry and exponents shared by both barriers.
///
/// `k_const` is the aspect constant `sqrt(n-1) (1 + 2 sqrt(n-1) / lambda)`;
/// the boxes are `Q[1 x sigma_tilde]` with `sigma_tilde = 1/k_const` for the
/// supersolution and `Q[k_const sigma x sigma]` with
/// `sigma = sigma_tilde / (2 k_const)` for the subsolution. `epsilon` is the
/// largest exponent keeping `(1+e)(2+e)(k_const-1)^e <= 4`, the inequality
/// that balances the vertical concavity against the lateral convexity.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BarrierParams {
    pub dim: usize,
    pub lambda: f64,
    pub k_const: f64,
    pub epsilon: f64,
    pub sigma_tilde: f64,
    pub sigma: f64,
}

/// Largest `e` with `(1+e)(2+e)(k-1)^e <= 4 - 1e-9`, by bisection. The
/// left-hand side is increasing in `e` whenever `k >= 2`, which holds for
/// every admissible `(dim, lambda)`.
fn choose_epsilon(k: f64) -> f64 {
    let f = |e: f64| (1.0 + e) * (2.0 + e) * (k - 1.0).powf(e) - (4.0 - 1e-9);
    let mut lo = 0.0f64;
    let mut hi = 3.0f64;
    if f(hi) <= 0.0 {
        return hi;
    }
    debug_assert!(f(lo) < 0.0);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if f(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

impl BarrierParams {
    pub fn new(dim: usize, lambda: f64) -> Result<BarrierParams> {
        if dim != 2 && dim != 3 {
            return Err(Error::InvalidParameter(format!("dim must be 2 or 3, got {dim}")));
        }
        if !(lambda > 0.0 && lambda <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "ellipticity lambda must lie in (0, 1], got {lambda}"
            )));
        }
        let m = (dim as f64 - 1.0).sqrt();
        let k_const = m * (1.0 + 2.0 * m / lambda);
        let sigma_tilde = 1.0 / k_const;
        let sigma = sigma_tilde / (2.0 * k_const);
        Ok(BarrierParams {
            dim,
            lambda,
            k_const,
            epsilon: choose_epsilon(k_const),
            sigma_tilde,
            sigma,
        })
    }

    /// Box carrying the given barrier.
    pub fn cube(&self, kind: BarrierKind) -> CubeSpec {
        match kind {
            BarrierKind::Super => CubeSpec::new(1.0, self.sigma_tilde),
            BarrierKind::Sub => CubeSpec::new(self.k_const * self.sigma, self.sigma),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BarrierKind {
    /// Upper barrier ("phi"): vertical concave profile plus lateral wells.
    Super,
    /// Lower barrier ("Phi"): vertical convex profile minus lateral wells.
    Sub,
}

impl BarrierKind {
    pub fn id(&self) -> &'static str {
        match self {
            BarrierKind::Super => "phi",
            BarrierKind::Sub => "Phi",
        }
    }
}

/// Pointwise barrier data; the Hessian is diagonal by construction.
#[derive(Debug, Clone, Copy)]
pub struct BarrierEval {
    pub value: f64,
    pub gradient: [f64; 3],
    pub hessian_diag: [f64; 3],
}

/// Evaluate the barrier of the given kind at `x`.
pub fn eval(params: &BarrierParams, kind: BarrierKind, x: [f64; 3]) -> BarrierEval {
    let n = params.dim;
    let v = n - 1;
    let lam2 = params.lambda * params.lambda;
    let e = params.epsilon;
    match kind {
        BarrierKind::Super => {
            let s = params.sigma_tilde;
            let t = x[v] / s;
            let c = lam2 / (2.0 * (n as f64 - 1.0));
            let mut value = 2.0 * t - t * t;
            let mut gradient = [0.0; 3];
            let mut hess = [0.0; 3];
            gradient[v] = (2.0 - 2.0 * t) / s;
            hess[v] = -2.0 / (s * s);
            for i in 0..v {
                let w = (x[i].abs() / s - 1.0).max(0.0);
                value += c * w.powf(2.0 + e);
                if w > 0.0 {
                    gradient[i] = c * (2.0 + e) * w.powf(1.0 + e) * x[i].signum() / s;
                    hess[i] = c * (2.0 + e) * (1.0 + e) * w.powf(e) / (s * s);
                }
            }
            BarrierEval { value, gradient, hessian_diag: hess }
        }
        BarrierKind::Sub => {
            let s = params.sigma;
            let t = x[v] / s;
            let c = lam2 / (4.0 * (n as f64 - 1.0));
            let mut value = 0.5 * (t + t * t);
            let mut gradient = [0.0; 3];
            let mut hess = [0.0; 3];
            gradient[v] = (0.5 + t) / s;
            hess[v] = 1.0 / (s * s);
            for i in 0..v {
                let w = (x[i].abs() / s - 1.0).max(0.0);
                value -= c * w.powf(2.0 + e);
                if w > 0.0 {
                    gradient[i] = -c * (2.0 + e) * w.powf(1.0 + e) * x[i].signum() / s;
                    hess[i] = -c * (2.0 + e) * (1.0 + e) * w.powf(e) / (s * s);
                }
            }
            BarrierEval { value, gradient, hessian_diag: hess }
        }
    }
}

/// The barrier as a sampled field (its value only).
pub struct BarrierField {
    pub params: BarrierParams,
    pub kind: BarrierKind,
}

impl SampleField for BarrierField {
    fn eval(&self, x: [f64; 3]) -> f64 {
        eval(&self.params, self.kind, x).value
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundaryCheck {
    pub face: String,
    pub constraint: String,
    pub observed: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct BarrierCertificate {
    pub barrier_id: String,
    pub params: BarrierParams,
    pub cube_half_width: f64,
    pub cube_height: f64,
    pub operator_samples: usize,
    /// Sign convention: `-b : D2(barrier)` for the upper barrier,
    /// `+b : D2(barrier)` for the lower one, so "valid" always means
    /// "defect nonnegative".
    pub min_defect: f64,
    /// Same margin against the analytic worst operator of the class.
    pub min_defect_extremal: f64,
    pub boundary_checks: Vec<BoundaryCheck>,
    pub valid: bool,
}

const DEFECT_SLACK: f64 = -1e-10;

fn defect_pair(
    params: &BarrierParams,
    kind: BarrierKind,
    operator: &EllipticOperatorField,
    x: [f64; 3],
) -> (f64, f64) {
    let hess = eval(params, kind, x).hessian_diag;
    let b = operator.at(x, params.dim);
    let sign = match kind {
        BarrierKind::Super => -1.0,
        BarrierKind::Sub => 1.0,
    };
    // Only the diagonal of b meets the diagonal Hessian.
    let mut actual = 0.0;
    let mut extremal = 0.0;
    for i in 0..params.dim {
        let h = sign * hess[i];
        actual += b.get(i, i) * h;
        // Worst admissible eigenvalue against this diagonal direction.
        extremal += if h >= 0.0 { params.lambda * h } else { h / params.lambda };
    }
    (actual, extremal)
}

/// Certify a barrier against an operator field on its own box.
///
/// Interior defects are sampled on a lattice; boundary clauses are sampled
/// on each face. The supersolution must stay nonnegative on the bottom and
/// reach 1 on the top and lateral faces; the subsolution must stay
/// nonpositive on the bottom and lateral faces and at most 1 on the top.
pub fn certify(
    params: &BarrierParams,
    kind: BarrierKind,
    operator: &EllipticOperatorField,
) -> BarrierCertificate {
    let cube = params.cube(kind);
    let n = params.dim;
    let m = 33usize;
    let mut min_defect = f64::INFINITY;
    let mut min_extremal = f64::INFINITY;
    let mut samples = 0usize;
    let counts = if n == 2 { [m, m, 1] } else { [m, m, m] };
    for k in 0..counts[2] {
        for j in 0..counts[1] {
            for i in 0..counts[0] {
                let f = [i, j, k];
                let mut x = [0.0; 3];
                for a in 0..n {
                    let t = f[a] as f64 / (m - 1) as f64;
                    x[a] = if a == n - 1 {
                        t * cube.height
                    } else {
                        (2.0 * t - 1.0) * cube.half_width
                    };
                }
                let (actual, extremal) = defect_pair(params, kind, operator, x);
                min_defect = min_defect.min(actual);
                min_extremal = min_extremal.min(extremal);
                samples += 1;
            }
        }
    }

    let mf = 65usize;
    let face_extreme = |fix_axis: usize, fix_val: f64, take_max: bool| -> f64 {
        let mut best = if take_max { f64::NEG_INFINITY } else { f64::INFINITY };
        let fcounts = if n == 2 { [mf, 1, 1] } else { [mf, mf, 1] };
        for jj in 0..fcounts[1] {
            for ii in 0..fcounts[0] {
                let f = [ii, jj];
                let mut x = [0.0; 3];
                let mut fi = 0;
                for a in 0..n {
                    if a == fix_axis {
                        x[a] = fix_val;
                    } else {
                        let t = f[fi] as f64 / (mf - 1) as f64;
                        fi += 1;
                        x[a] = if a == n - 1 {
                            t * cube.height
                        } else {
                            (2.0 * t - 1.0) * cube.half_width
                        };
                    }
                }
                let v = eval(params, kind, x).value;
                best = if take_max { best.max(v) } else { best.min(v) };
            }
        }
        best
    };

    let tol = 1e-9;
    let v_axis = n - 1;
    let mut boundary_checks = Vec::new();
    match kind {
        BarrierKind::Super => {
            let bottom = face_extreme(v_axis, 0.0, false);
            boundary_checks.push(BoundaryCheck {
                face: "bottom".into(),
                constraint: "min >= 0".into(),
                observed: bottom,
                pass: bottom >= -tol,
            });
            let top = face_extreme(v_axis, cube.height, false);
            boundary_checks.push(BoundaryCheck {
                face: "top".into(),
                constraint: "min >= 1".into(),
                observed: top,
                pass: top >= 1.0 - tol,
            });
            for a in 0..v_axis {
                for s in [-1.0, 1.0] {
                    let lat = face_extreme(a, s * cube.half_width, false);
                    boundary_checks.push(BoundaryCheck {
                        face: format!("lateral axis {a} sign {}", s as i8),
                        constraint: "min >= 1".into(),
                        observed: lat,
                        pass: lat >= 1.0 - tol,
                    });
                }
            }
        }
        BarrierKind::Sub => {
            let bottom = face_extreme(v_axis, 0.0, true);
            boundary_checks.push(BoundaryCheck {
                face: "bottom".into(),
                constraint: "max <= 0".into(),
                observed: bottom,
                pass: bottom <= tol,
            });
            let top = face_extreme(v_axis, cube.height, true);
            boundary_checks.push(BoundaryCheck {
                face: "top".into(),
                constraint: "max <= 1".into(),
                observed: top,
                pass: top <= 1.0 + tol,
            });
            let apex = eval(params, kind, {
                let mut x = [0.0; 3];
                x[v_axis] = cube.height;
                x
            })
            .value;
            boundary_checks.push(BoundaryCheck {
                face: "top center".into(),
                constraint: "value == 1".into(),
                observed: apex,
                pass: (apex - 1.0).abs() <= tol,
            });
            for a in 0..v_axis {
                for s in [-1.0, 1.0] {
                    let lat = face_extreme(a, s * cube.half_width, true);
                    boundary_checks.push(BoundaryCheck {
                        face: format!("lateral axis {a} sign {}", s as i8),
                        constraint: "max <= 0".into(),
                        observed: lat,
                        pass: lat <= tol,
                    });
                }
            }
        }
    }

    let valid = min_extremal >= DEFECT_SLACK
        && min_defect >= DEFECT_SLACK
        && boundary_checks.iter().all(|c| c.pass);
    BarrierCertificate {
        barrier_id: kind.id().into(),
        params: *params,
        cube_half_width: cube.half_width,
        cube_height: cube.height,
        operator_samples: samples,
        min_defect,
        min_defect_extremal: min_extremal,
        boundary_checks,
        valid,
    }
}
