//! The scale modulus driving the boundary-derivative extraction.
//!
//! All source bookkeeping runs through `R(rho) = ||g||_{L^q}` on the cube of
//! radius `rho` intersected with the domain. Those norms are expensive, so
//! they are sampled once on a logarithmic lattice and interpolated; the
//! lattice spans thirty-plus decades because the rho-integrals reach down to
//! geometric tails of the smallest scheduled scale.

use crate::geometry::ConvexDomain;
use crate::quadrature::{geometric_midpoint, graded_with_tail};
use crate::rhs::RhsPreset;

/// Memoized `rho -> ||g||_{L^q(domain cap Q[rho x rho])}`, linear in
/// `ln rho` between samples, constant beyond the sampled range.
pub struct SourceScale {
    lnr: Vec<f64>,
    val: Vec<f64>,
    /// Multiplies every stored norm (solution-side normalization).
    pub scale: f64,
    pub q: f64,
}

impl SourceScale {
    pub fn build(
        rhs: &RhsPreset,
        domain: &ConvexDomain,
        dim: usize,
        q: f64,
        r_min: f64,
        r_max: f64,
        count: usize,
    ) -> SourceScale {
        let lo = r_min.ln();
        let hi = r_max.ln();
        let mut lnr = Vec::with_capacity(count);
        let mut val = Vec::with_capacity(count);
        for i in 0..count {
            let t = lo + (hi - lo) * i as f64 / (count - 1) as f64;
            lnr.push(t);
            val.push(rhs.norm_on_cube(domain, t.exp(), dim, q));
        }
        SourceScale { lnr, val, scale: 1.0, q }
    }

    pub fn eval(&self, rho: f64) -> f64 {
        let t = rho.max(1e-300).ln();
        let n = self.lnr.len();
        if t <= self.lnr[0] {
            // Below the lattice the norm decays at least linearly in rho
            // (the source presets are q-integrable), so a linear extension
            // keeps rho -> R(rho)/rho integrable without touching any
            // scheduled scale: the floor sits thirty decades under them.
            return self.scale * self.val[0] * (rho.max(0.0) / self.lnr[0].exp());
        }
        if t >= self.lnr[n - 1] {
            return self.scale * self.val[n - 1];
        }
        let step = (self.lnr[n - 1] - self.lnr[0]) / (n - 1) as f64;
        let k = (((t - self.lnr[0]) / step) as usize).min(n - 2);
        let u = (t - self.lnr[k]) / step;
        self.scale * (self.val[k] * (1.0 - u) + self.val[k + 1] * u)
    }
}

/// Nondecreasing envelope of a sampled function on a log lattice.
pub struct MonotoneEnvelope {
    lnr: Vec<f64>,
    val: Vec<f64>,
}

impl MonotoneEnvelope {
    pub fn build(f: impl Fn(f64) -> f64, r_min: f64, r_max: f64, count: usize) -> MonotoneEnvelope {
        let lo = r_min.ln();
        let hi = r_max.ln();
        let mut lnr = Vec::with_capacity(count);
        let mut val = Vec::with_capacity(count);
        let mut running = 0.0f64;
        for i in 0..count {
            let t = lo + (hi - lo) * i as f64 / (count - 1) as f64;
            running = running.max(f(t.exp()));
            lnr.push(t);
            val.push(running);
        }
        MonotoneEnvelope { lnr, val }
    }

    pub fn eval(&self, r: f64) -> f64 {
        let t = r.max(1e-300).ln();
        let n = self.lnr.len();
        if t <= self.lnr[0] {
            return self.val[0];
        }
        if t >= self.lnr[n - 1] {
            return self.val[n - 1];
        }
        let step = (self.lnr[n - 1] - self.lnr[0]) / (n - 1) as f64;
        let k = (((t - self.lnr[0]) / step) as usize).min(n - 2);
        let u = (t - self.lnr[k]) / step;
        self.val[k] * (1.0 - u) + self.val[k + 1] * u
    }
}

/// The geometric-plus-source modulus `psi`, built once at chart scale.
pub struct PsiFn {
    geom: MonotoneEnvelope,
    source: MonotoneEnvelope,
    /// Source branch is frozen below `chart / lambda_big`.
    pub source_cap: f64,
}

impl PsiFn {
    /// `psi(r) = max(geometry(r), source_envelope(min(r, cap)))` where the
    /// geometry part is the boundary-graph modulus and the source part is
    /// the monotone envelope of the base-scale modulus `t -> G_0(t)`.
    pub fn build(
        domain: &ConvexDomain,
        dim: usize,
        g0: impl Fn(f64) -> f64,
        chart: f64,
        lambda_big: f64,
        count: usize,
    ) -> PsiFn {
        let cap = chart / lambda_big;
        let geom = MonotoneEnvelope::build(
            |r| domain.graph_modulus(dim, r),
            chart * 1e-30,
            chart,
            count,
        );
        let source = MonotoneEnvelope::build(g0, chart * 1e-30, cap, count);
        PsiFn { geom, source, source_cap: cap }
    }

    pub fn eval(&self, r: f64) -> f64 {
        self.geom.eval(r).max(self.source.eval(r.min(self.source_cap)))
    }
}

/// Term-by-term value of the five-part scale modulus.
#[derive(Debug, Clone, Copy)]
pub struct ModulusTerms {
    pub local_profile: f64,
    pub local_source: f64,
    pub graded_tail: f64,
    pub dini_tail: f64,
    pub cube_norm: f64,
}

impl ModulusTerms {
    pub fn total(&self) -> f64 {
        self.local_profile + self.local_source + self.graded_tail + self.dini_tail + self.cube_norm
    }
}

/// Five-term modulus at scale `r` below the localization radius `r_j`:
///
/// `G_j(r) = (r^b / r_j^(1+b)) sup|w| + (r/r_j)^b R(r_j)
///         + r^b Int_r^{r_j} R(rho) / rho^(1+b) drho
///         + Int_0^{Lr} R(rho) / rho drho + R(Lr)`
///
/// with `b = beta`, `L = lambda_big`, `R` the source norms and `sup|w|`
/// taken over the localization box. Requires `r <= r_j / lambda_big`.
pub fn scale_modulus(
    source: &SourceScale,
    w_sup_local: f64,
    beta: f64,
    lambda_big: f64,
    r_j: f64,
    r: f64,
) -> ModulusTerms {
    debug_assert!(r <= r_j / lambda_big * (1.0 + 1e-9), "r={r} beyond r_j/Lambda");
    let rb = r.powf(beta);
    let local_profile = rb / r_j.powf(1.0 + beta) * w_sup_local;
    let local_source = (r / r_j).powf(beta) * source.eval(r_j);
    let graded_tail =
        rb * geometric_midpoint(|rho| source.eval(rho) / rho.powf(1.0 + beta), r, r_j, 16);
    let top = lambda_big * r;
    let dini_tail = graded_with_tail(
        |rho| source.eval(rho) / rho,
        top,
        top * 0.5f64.powi(40),
        16,
    );
    let cube_norm = source.eval(top);
    ModulusTerms { local_profile, local_source, graded_tail, dini_tail, cube_norm }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn constant_source() -> SourceScale {
        // ||c||_{L^q(halfspace cap Q_rho)} = c (2 rho^2 / 2 ... ) closed
        // form; build against the real norm code so interpolation error is
        // what gets measured.
        SourceScale::build(
            &RhsPreset::Constant { value: 2.0 },
            &ConvexDomain::HalfSpace,
            2,
            2.0,
            1e-30,
            4.0,
            600,
        )
    }

    #[test]
    fn source_lattice_matches_closed_form() {
        let s = constant_source();
        for &rho in &[1e-20f64, 1e-9, 1e-3, 0.5, 2.0] {
            let exact = 2.0 * (2.0 * rho * rho).sqrt();
            assert_relative_eq!(s.eval(rho), exact, max_relative = 2e-3);
        }
    }

    #[test]
    fn envelope_is_monotone_and_tight() {
        let env = MonotoneEnvelope::build(|r| (1.0 - r).abs(), 1e-6, 4.0, 300);
        let mut prev = 0.0;
        for i in 0..100 {
            let r = 1e-6 * (4e6f64).powf(i as f64 / 99.0);
            let v = env.eval(r);
            assert!(v >= prev - 1e-12);
            assert!(v >= (1.0 - r).abs() - 2e-2);
            prev = v;
        }
        assert_relative_eq!(env.eval(4.0), 3.0, max_relative = 1e-6);
    }

    #[test]
    fn constant_source_modulus_scales_linearly() {
        // For R(rho) ~ c rho every term of the modulus is positively
        // homogeneous of degree one in (r, r_j) jointly scaled.
        let s = constant_source();
        let beta = 0.75;
        let a = scale_modulus(&s, 0.1, beta, 4.0, 0.5, 0.05);
        let b = scale_modulus(&s, 0.05, beta, 4.0, 0.25, 0.025);
        assert_relative_eq!(a.total(), 2.0 * b.total(), max_relative = 2e-2);
    }

    #[test]
    fn beyond_dini_tail_decays_along_dyadic_scales() {
        // g_beta with beta = 2 has a convergent Dini part, so the modulus at
        // fixed r_j decreases along r in dyadic steps.
        let s = SourceScale::build(
            &RhsPreset::GBeta { beta: 2.0 },
            &ConvexDomain::HalfSpace,
            2,
            2.0,
            1e-30,
            4.0,
            400,
        );
        let mut prev = f64::INFINITY;
        for k in 4..=10 {
            let r = 0.5f64.powi(k);
            let g = scale_modulus(&s, 0.3, 0.75, 4.0, 0.5, r).total();
            assert!(g < prev, "G(2^-{k}) = {g} did not decrease (prev {prev})");
            prev = g;
        }
    }

    #[test]
    fn psi_combines_geometry_and_source() {
        let dom = ConvexDomain::Graph {
            graph: crate::geometry::GraphFn::PowerAbs { coef: 1.0, exponent: 2.0 },
        };
        let psi = PsiFn::build(&dom, 2, |_| 0.25, 1.0, 4.0, 300);
        // Geometry branch: graph modulus of |x'|^2 is r; source branch is
        // the constant 1/4.
        assert_relative_eq!(psi.eval(0.5), 0.5, max_relative = 2e-2);
        assert_relative_eq!(psi.eval(0.125), 0.25, max_relative = 2e-2);
    }
}

