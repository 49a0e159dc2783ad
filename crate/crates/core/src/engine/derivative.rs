//! Boundary-derivative extraction along a geometric scale ladder.
//!
//! The solution is first normalized so that `sup |w| + ||g|| <= 1` on the
//! base box. A scale modulus `psi` (boundary flatness plus source decay)
//! fixes the ladder `sigma_j = r_j sqrt(psi(r_j))`; at each rung a localized
//! companion problem is solved on the full box `Q[r_j x r_j]` with the
//! domain-gated trace of `w`, and its near-origin slope `a_j` is extracted
//! by least squares. The decay aggregate
//!
//! `C(r_j) = sup { c_loc sqrt(psi(r_i)) + G_i(sigma_i) + |a - a_i| : i >= j }`
//!
//! is non-increasing by construction; the differentiability verdict asks
//! that it actually collapses across the computed range.

use serde::Serialize;

use crate::barrier::BarrierParams;
use crate::calibration::frozen_constants;
use crate::engine::envelope::{run_oscillation_cascade, CascadeConfig, OscillationTrace};
use crate::engine::modulus::{scale_modulus, PsiFn, SourceScale};
use crate::engine::multiscale::{MultiscaleConfig, MultiscaleSolution};
use crate::error::{Error, Result};
use crate::geometry::{reduce_base_radius, solve_scale_equation, ConvexDomain, CubeSpec};
use crate::grid::SampleField;
use crate::operator::EllipticOperatorField;
use crate::rhs::RhsPreset;
use crate::solver::localized_solve;

#[derive(Debug, Clone, Copy)]
pub struct DerivativeConfig {
    /// Integrability exponent for the source norms, in `(n-1, n]`.
    pub q: f64,
    /// Scale-separation ratio between a localization radius and the scales
    /// probed inside it.
    pub lambda_big: f64,
    /// Number of ladder rungs.
    pub levels: usize,
    /// Telescope resolution (nodes per half-width at every level).
    pub nodes_half: usize,
    /// Cap on the localized-solve resolution.
    pub loc_cap: usize,
    /// Relative residual target for all linear solves.
    pub tol: f64,
    /// Hard cap on telescope depth.
    pub max_depth: usize,
    /// Oscillation-cascade length; `0` skips the cascade and the
    /// homogeneous companion run.
    pub cascade_levels: usize,
}

impl DerivativeConfig {
    /// Defaults sized for the given dimension; `q = n` (the borderline).
    pub fn for_dim(dim: usize) -> DerivativeConfig {
        if dim == 3 {
            DerivativeConfig {
                q: 3.0,
                lambda_big: 4.0,
                levels: 8,
                nodes_half: 16,
                loc_cap: 48,
                tol: 1e-10,
                max_depth: 40,
                cascade_levels: 6,
            }
        } else {
            DerivativeConfig {
                q: 2.0,
                lambda_big: 4.0,
                levels: 8,
                nodes_half: 64,
                loc_cap: 320,
                tol: 1e-12,
                max_depth: 44,
                cascade_levels: 8,
            }
        }
    }
}

impl Default for DerivativeConfig {
    fn default() -> DerivativeConfig {
        DerivativeConfig::for_dim(2)
    }
}

/// One rung of the ladder. Slopes `a_j` are in the original (unnormalized)
/// units; `g_j`, `c_j`, `c_of_r`, the claim gaps and `linear_dev` are in
/// normalized units.
#[derive(Debug, Clone, Serialize)]
pub struct ScaleRow {
    pub j: usize,
    /// Localization radius `r_j`.
    pub r: f64,
    /// Probe scale `sigma_j = r_j sqrt(psi(r_j))`.
    pub sigma: f64,
    pub psi: f64,
    /// Localized-solve resolution (nodes per half-width).
    pub n_loc: usize,
    /// Near-origin slope of the localized solution.
    pub a_j: f64,
    /// Scale modulus `G_j(sigma_j)`.
    pub g_j: f64,
    /// Aggregate term `c_loc sqrt(psi) + G_j(sigma_j) + |a - a_j|`.
    pub c_j: f64,
    /// Suffix supremum of `c_j` (the decay function evaluated at `r_j`).
    pub c_of_r: f64,
    /// Extremes of `w_j - w` over the shared nodes (localization sandwich).
    pub gap_min: f64,
    pub gap_max: f64,
    /// `sup |w - a x_n| / r_j` over the box `Q[r_j x r_j]`.
    pub linear_dev: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayReport {
    pub dim: usize,
    pub q: f64,
    pub lambda_big: f64,
    pub beta: f64,
    /// `sup |w|` over the base box, original units.
    pub w_sup: f64,
    /// `||g||_{L^q}` on the base box, original units.
    pub source_base: f64,
    /// `s = 1 / (w_sup + source_base)`; the ladder runs on `s w`, `s g`.
    pub normalization: f64,
    /// Modulus at the chart scale, after normalization.
    pub psi_chart: f64,
    /// Reduced base radius and the number of halvings that produced it.
    pub r0: f64,
    pub reductions: usize,
    pub rows: Vec<ScaleRow>,
    /// Boundary derivative: the slope at the finest rung, original units.
    pub a: f64,
    pub differentiable: bool,
    /// Oscillation cascade on the normalized solution.
    pub trace: Option<OscillationTrace>,
    /// Decay exponent of the source-free companion.
    pub gamma_homogeneous: Option<f64>,
}

struct Scaled<'a> {
    inner: &'a MultiscaleSolution,
    factor: f64,
}

impl SampleField for Scaled<'_> {
    fn eval(&self, x: [f64; 3]) -> f64 {
        self.factor * self.inner.eval(x)
    }
}

/// Through-origin quadratic least squares `v ~ a x + b x^2`.
pub(crate) fn slope_fit(samples: &[(f64, f64)]) -> (f64, f64) {
    let (mut s2, mut s3, mut s4) = (0.0f64, 0.0f64, 0.0f64);
    let (mut t1, mut t2) = (0.0f64, 0.0f64);
    for &(x, v) in samples {
        let x2 = x * x;
        s2 += x2;
        s3 += x2 * x;
        s4 += x2 * x2;
        t1 += x * v;
        t2 += x2 * v;
    }
    let det = s2 * s4 - s3 * s3;
    if det <= 1e-14 * s2 * s4 || !det.is_finite() {
        // One distinct abscissa (or none): fall back to the linear fit.
        return if s2 > 0.0 { (t1 / s2, 0.0) } else { (0.0, 0.0) };
    }
    ((t1 * s4 - t2 * s3) / det, (s2 * t2 - s3 * t1) / det)
}

/// Slope of `w` against `x_n` over the slab `{0 < x_n <= half, |x'| <= half}`
/// of the grid that `values` lives on.
fn slab_slope(values: &crate::grid::GridFunction, dim: usize, half: f64) -> (f64, f64) {
    let grid = &values.grid;
    let lim = half * (1.0 + 1e-12);
    let mut samples = Vec::new();
    for idx in grid.nodes() {
        let x = grid.pos(idx);
        let xn = x[dim - 1];
        if xn <= 0.0 || xn > lim {
            continue;
        }
        if x[..dim - 1].iter().any(|c| c.abs() > lim) {
            continue;
        }
        samples.push((xn, values.get(idx)));
    }
    slope_fit(&samples)
}

/// Slope of the telescope near the origin, sampled on a slab lattice.
pub(crate) fn telescope_slope(w: &MultiscaleSolution, dim: usize, half: f64) -> f64 {
    let n_side = if dim == 2 { 17 } else { 9 };
    let n_up = 16;
    let counts = if dim == 2 { [n_side, 1] } else { [n_side, n_side] };
    let mut samples = Vec::new();
    for j in 0..counts[1] {
        for i in 0..counts[0] {
            let mut x = [0.0f64; 3];
            x[0] = (2.0 * i as f64 / (n_side - 1) as f64 - 1.0) * half;
            if dim == 3 {
                x[1] = (2.0 * j as f64 / (n_side - 1) as f64 - 1.0) * half;
            }
            for k in 1..=n_up {
                x[dim - 1] = half * k as f64 / n_up as f64;
                if w.domain().margin(x, dim) > 0.0 {
                    samples.push((x[dim - 1], w.eval(x)));
                }
            }
        }
    }
    slope_fit(&samples).0
}

/// `sup |w - a x_n| / r` over a lattice on `Q[r x r]` intersect the domain.
pub(crate) fn linear_deviation(w: &MultiscaleSolution, dim: usize, r: f64, a: f64) -> f64 {
    let n_side = if dim == 2 { 33 } else { 13 };
    let n_up = 32;
    let counts = if dim == 2 { [n_side, 1] } else { [n_side, n_side] };
    let mut sup = 0.0f64;
    for j in 0..counts[1] {
        for i in 0..counts[0] {
            let mut x = [0.0f64; 3];
            x[0] = (2.0 * i as f64 / (n_side - 1) as f64 - 1.0) * r;
            if dim == 3 {
                x[1] = (2.0 * j as f64 / (n_side - 1) as f64 - 1.0) * r;
            }
            for k in 0..=n_up {
                x[dim - 1] = r * k as f64 / n_up as f64;
                if w.domain().margin(x, dim) <= 0.0 {
                    continue;
                }
                sup = sup.max((w.eval(x) - a * x[dim - 1]).abs());
            }
        }
    }
    sup / r
}

fn trivial_report(dim: usize, cfg: &DerivativeConfig, beta: f64) -> DecayReport {
    DecayReport {
        dim,
        q: cfg.q,
        lambda_big: cfg.lambda_big,
        beta,
        w_sup: 0.0,
        source_base: 0.0,
        normalization: 1.0,
        psi_chart: 0.0,
        r0: 1.0,
        reductions: 0,
        rows: Vec::new(),
        a: 0.0,
        differentiable: true,
        trace: None,
        gamma_homogeneous: None,
    }
}

/// Run the full ladder for the problem `-b : D^2 w = g` on
/// `domain intersect Q[1 x 1]` with trace `outer` on the box faces.
///
/// The returned slope `a` is the boundary derivative at the origin in the
/// original units of `w`; the verdict asks the decay aggregate to drop to a
/// tenth of its initial value across the ladder.
pub fn boundary_derivative(
    operator: &EllipticOperatorField,
    domain: &ConvexDomain,
    rhs: &RhsPreset,
    outer: &dyn SampleField,
    dim: usize,
    cfg: &DerivativeConfig,
) -> Result<DecayReport> {
    domain.validate(dim)?;
    let n = dim as f64;
    if !(cfg.q > n - 1.0 && cfg.q <= n + 1e-12) {
        return Err(Error::InvalidParameter(format!(
            "q must lie in (n-1, n], got q = {} for n = {dim}",
            cfg.q
        )));
    }
    if !(cfg.lambda_big > 1.0) || cfg.levels == 0 {
        return Err(Error::InvalidParameter(
            "need lambda_big > 1 and at least one ladder level".into(),
        ));
    }
    let frozen = frozen_constants(dim, operator.lambda());
    let beta = frozen.beta;
    let rhs_field = rhs.field(dim);

    let ms_cfg = MultiscaleConfig {
        base_radius: 1.0,
        nodes_half: cfg.nodes_half,
        tol: cfg.tol,
    };
    let mut w = MultiscaleSolution::build(operator, domain, &rhs_field, outer, dim, ms_cfg, 6)?;

    let w_sup = w.base_sup();
    let mut source = SourceScale::build(rhs, domain, dim, cfg.q, 1e-30, cfg.lambda_big, 1600);
    let source_base = source.eval(1.0);
    let denom = w_sup + source_base;
    if denom <= 1e-300 {
        return Ok(trivial_report(dim, cfg, beta));
    }
    let s = 1.0 / denom;
    source.scale = s;
    let w_sup_n = s * w_sup;

    let g0 = |t: f64| scale_modulus(&source, w_sup_n, beta, cfg.lambda_big, 1.0, t).total();
    let psi = PsiFn::build(domain, dim, g0, 1.0, cfg.lambda_big, 1600);
    let psi_chart = psi.eval(1.0);
    if psi_chart <= 1e-14 {
        // Flat boundary and no source price at any scale: one fine fit.
        w.extend_to(&rhs_field, 12.min(cfg.max_depth))?;
        let a = telescope_slope(&w, dim, 2.0f64.powi(-9));
        let mut rep = trivial_report(dim, cfg, beta);
        rep.w_sup = w_sup;
        rep.source_base = source_base;
        rep.normalization = s;
        rep.a = a;
        return Ok(rep);
    }

    let psi_of = |r: f64| psi.eval(r);
    let (r0, reductions) = reduce_base_radius(&psi_of, 1.0, cfg.lambda_big)?;
    let schedule = solve_scale_equation(&psi_of, r0, cfg.lambda_big, cfg.levels)?;
    let sigma_min = *schedule.sigma.last().expect("levels >= 1");

    let mut depth = ((2.0 / sigma_min).log2().ceil() as usize + 1).max(6);
    let cascade_sigma = BarrierParams::new(dim, operator.lambda())?.sigma;
    if cfg.cascade_levels > 0 {
        let d = (cfg.cascade_levels as f64 * (1.0 / cascade_sigma).log2()).ceil() as usize + 2;
        depth = depth.max(d);
    }
    w.extend_to(&rhs_field, depth.min(cfg.max_depth))?;

    let n_floor = if dim == 2 { 64 } else { 32 };
    let loc_cap = cfg.loc_cap.max(n_floor);
    let mut rows = Vec::with_capacity(cfg.levels);
    for j in 0..cfg.levels {
        let r_j = schedule.r[j];
        let sigma_j = schedule.sigma[j];
        let psi_j = psi.eval(r_j);
        let wanted = (16.0 / psi_j.sqrt()).min(1e7).ceil() as usize;
        let n_loc = wanted.next_multiple_of(16).clamp(n_floor, loc_cap);
        let h_loc = r_j / n_loc as f64;

        let loc = localized_solve(
            operator,
            domain,
            CubeSpec::square(r_j),
            dim,
            h_loc,
            &rhs_field,
            &w,
            cfg.tol,
        )?;

        let half = (sigma_j / 4.0).max(4.5 * h_loc);
        let a_j = slab_slope(&loc.solution, dim, half).0;

        let mut gap_min = f64::INFINITY;
        let mut gap_max = f64::NEG_INFINITY;
        let grid = &loc.solution.grid;
        for idx in grid.nodes() {
            let x = grid.pos(idx);
            if domain.margin(x, dim) <= 0.0 || x[dim - 1] <= 0.0 {
                continue;
            }
            let d = s * (loc.solution.get(idx) - w.eval(x));
            gap_min = gap_min.min(d);
            gap_max = gap_max.max(d);
        }

        let g_j = scale_modulus(
            &source,
            s * w.sup_on_cube(r_j),
            beta,
            cfg.lambda_big,
            r_j,
            sigma_j,
        )
        .total();

        rows.push(ScaleRow {
            j,
            r: r_j,
            sigma: sigma_j,
            psi: psi_j,
            n_loc,
            a_j,
            g_j,
            c_j: 0.0,
            c_of_r: 0.0,
            gap_min,
            gap_max,
            linear_dev: 0.0,
        });
    }

    let a = rows.last().expect("levels >= 1").a_j;
    let mut suffix = f64::NEG_INFINITY;
    for row in rows.iter_mut().rev() {
        row.c_j = frozen.c_loc * row.psi.sqrt() + row.g_j + s * (a - row.a_j).abs();
        suffix = suffix.max(row.c_j);
        row.c_of_r = suffix;
        row.linear_dev = s * linear_deviation(&w, dim, row.r, a);
    }
    let differentiable = {
        let first = rows.first().expect("levels >= 1").c_of_r;
        let last = rows.last().expect("levels >= 1").c_of_r;
        last <= 0.1 * first
    };

    let mut trace = None;
    let mut gamma_homogeneous = None;
    if cfg.cascade_levels > 0 {
        let cascade_cfg = CascadeConfig {
            sigma: cascade_sigma,
            levels: cfg.cascade_levels,
            k1: frozen.c_abp,
            eta: frozen.eta,
            k2: frozen.k2,
        };
        let scaled = Scaled { inner: &w, factor: s };
        let price = |t: f64| t.powf(1.0 - n / cfg.q) * source.eval(t);
        trace = Some(run_oscillation_cascade(
            &scaled,
            domain,
            dim,
            &price,
            &cascade_cfg,
        )?);

        let mut comp = w.companion()?;
        comp.extend_homogeneous(depth.min(cfg.max_depth))?;
        let comp_sup = comp.base_sup();
        if comp_sup > 1e-300 {
            let comp_scaled = Scaled { inner: &comp, factor: 1.0 / comp_sup };
            let free = run_oscillation_cascade(
                &comp_scaled,
                domain,
                dim,
                &|_| 0.0,
                &cascade_cfg,
            )?;
            gamma_homogeneous = Some(free.gamma);
        }
    }

    Ok(DecayReport {
        dim,
        q: cfg.q,
        lambda_big: cfg.lambda_big,
        beta,
        w_sup,
        source_base,
        normalization: s,
        psi_chart,
        r0,
        reductions,
        rows,
        a,
        differentiable,
        trace,
        gamma_homogeneous,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{FieldFn, ZeroField};
    use approx::assert_abs_diff_eq;

    fn small_cfg() -> DerivativeConfig {
        DerivativeConfig {
            nodes_half: 16,
            loc_cap: 64,
            levels: 4,
            tol: 1e-12,
            cascade_levels: 2,
            ..DerivativeConfig::for_dim(2)
        }
    }

    #[test]
    fn slope_fit_recovers_quadratics() {
        let samples: Vec<(f64, f64)> =
            (1..=20).map(|k| (k as f64 * 0.01, 0.7 * k as f64 * 0.01 - 3.0 * (k as f64 * 0.01).powi(2))).collect();
        let (a, b) = slope_fit(&samples);
        assert_abs_diff_eq!(a, 0.7, epsilon = 1e-10);
        assert_abs_diff_eq!(b, -3.0, epsilon = 1e-8);
        // Single abscissa: the linear fallback.
        let (a, b) = slope_fit(&[(0.5, 1.0), (0.5, 1.0)]);
        assert_abs_diff_eq!(a, 2.0, epsilon = 1e-12);
        assert_eq!(b, 0.0);
    }

    #[test]
    fn zero_problem_short_circuits() {
        let rep = boundary_derivative(
            &EllipticOperatorField::Identity,
            &ConvexDomain::HalfSpace,
            &RhsPreset::Zero,
            &ZeroField,
            2,
            &small_cfg(),
        )
        .unwrap();
        assert!(rep.differentiable);
        assert_eq!(rep.a, 0.0);
        assert!(rep.rows.is_empty());
        assert_eq!(rep.normalization, 1.0);
    }

    #[test]
    fn linear_trace_gives_unit_slope_at_every_rung() {
        // w = x_n solves the homogeneous problem exactly, so every localized
        // solve reproduces it nodally and all slopes are 1.
        let data = FieldFn(|x: [f64; 3]| x[1]);
        let rep = boundary_derivative(
            &EllipticOperatorField::Identity,
            &ConvexDomain::HalfSpace,
            &RhsPreset::Zero,
            &data,
            2,
            &small_cfg(),
        )
        .unwrap();
        assert_abs_diff_eq!(rep.a, 1.0, epsilon = 1e-8);
        for row in &rep.rows {
            assert_abs_diff_eq!(row.a_j, 1.0, epsilon = 1e-8);
            assert!(row.gap_min >= -1e-8 && row.gap_max <= 1e-8);
        }
        // c_of_r is a suffix supremum, hence non-increasing.
        for pair in rep.rows.windows(2) {
            assert!(pair[1].c_of_r <= pair[0].c_of_r + 1e-15);
        }
        let trace = rep.trace.expect("cascade requested");
        assert!(trace.levels.iter().all(|l| l.osc <= 1e-7));
    }

    #[test]
    fn manufactured_quadratic_recovers_the_unit_derivative() {
        let data = FieldFn(|x: [f64; 3]| RhsPreset::ManufacturedQuadratic.w_exact(x, 2).unwrap());
        let rep = boundary_derivative(
            &EllipticOperatorField::Identity,
            &ConvexDomain::HalfSpace,
            &RhsPreset::ManufacturedQuadratic,
            &data,
            2,
            &small_cfg(),
        )
        .unwrap();
        assert_abs_diff_eq!(rep.a, 1.0, epsilon = 2e-2);
        let scale = 1e-6 * rep.w_sup;
        for pair in rep.rows.windows(2) {
            assert!(
                pair[1].a_j <= pair[0].a_j + scale,
                "slopes increased: {} -> {}",
                pair[0].a_j,
                pair[1].a_j
            );
        }
        assert!(rep.gamma_homogeneous.is_some());
    }
}
