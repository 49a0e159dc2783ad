//! Acceptance gate: one check per shipped guarantee, one printed line each.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see every line;
//! under the default harness the lines surface only for failing checks.

use borderlab::barrier::{certify, BarrierKind, BarrierParams};
use borderlab::engine::{
    boundary_derivative, log_lip_induction, run_oscillation_cascade, CascadeConfig,
    DerivativeConfig, LogLipConfig, MultiscaleConfig, MultiscaleSolution,
};
use borderlab::frozen_constants;
use borderlab::geometry::{ConvexDomain, CubeSpec, GraphFn, Region};
use borderlab::grid::{FieldFn, SampleField, ZeroField};
use borderlab::lorentz::{lorentz_norm, rearrange, unit_ball_volume, LorentzIndex};
use borderlab::operator::EllipticOperatorField;
use borderlab::quadrature::{geometric_midpoint, graded_with_tail};
use borderlab::rhs::RhsPreset;
use borderlab::solver::{harmonic_replacement, solve, DirichletProblem};

fn gate(number: usize, name: &str, pass: bool, detail: &str) {
    println!("criterion {number:02} ({name}): {} - {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {number:02} ({name}) failed: {detail}");
}

/// Max-norm error of a half-space Dirichlet solve against the exact profile.
fn manufactured_error(rhs: &RhsPreset, nodes_half: usize) -> f64 {
    let h = 0.5 / nodes_half as f64;
    let region =
        Region::new(ConvexDomain::HalfSpace, CubeSpec::new(0.5, 1.0), 2, h).expect("aligned box");
    let rhs_field = rhs.field(2);
    let data = FieldFn(|x: [f64; 3]| rhs.w_exact(x, 2).unwrap());
    let mut p = DirichletProblem::new(&EllipticOperatorField::Identity, &region, &rhs_field, &data);
    p.tol = 1e-12;
    let rep = solve(&p).expect("solve");
    let mut err = 0.0f64;
    for idx in region.non_exterior_nodes() {
        let x = rep.solution.grid.pos(idx);
        err = err.max((rep.solution.get(idx) - rhs.w_exact(x, 2).unwrap()).abs());
    }
    err
}

#[test]
fn criterion_01_solver_order() {
    // The quadratic profile sits in the stencil's null space of truncation
    // error, so its error measures solver exactness rather than order; the
    // quartic companion carries genuine fourth derivatives and exposes the
    // h^2 rate.
    let exact_32 = manufactured_error(&RhsPreset::ManufacturedQuadratic, 16);
    let exact_64 = manufactured_error(&RhsPreset::ManufacturedQuadratic, 32);
    let coarse = manufactured_error(&RhsPreset::ManufacturedQuartic, 16);
    let fine = manufactured_error(&RhsPreset::ManufacturedQuartic, 32);
    let ratio = coarse / fine;
    let pass = exact_32 <= 1e-8 && exact_64 <= 1e-8 && (3.2..=4.8).contains(&ratio);
    gate(
        1,
        "solver second order",
        pass,
        &format!(
            "quadratic exact to {exact_32:.2e}/{exact_64:.2e}, quartic error ratio {ratio:.3}"
        ),
    );
}

#[test]
fn criterion_02_barrier_certificates() {
    let mut worst = f64::INFINITY;
    let mut certs = 0usize;
    let mut pass = true;
    for dim in [2usize, 3] {
        for lambda in [1.0f64, 0.5] {
            let params = BarrierParams::new(dim, lambda).unwrap();
            for seed in 0..100u64 {
                let op = EllipticOperatorField::RandomCells { lambda, size: 0.11, seed };
                for kind in [BarrierKind::Super, BarrierKind::Sub] {
                    let cert = certify(&params, kind, &op);
                    worst = worst.min(cert.min_defect.min(cert.min_defect_extremal));
                    pass &= cert.valid && cert.min_defect >= -1e-10;
                    certs += 1;
                }
            }
        }
    }
    gate(
        2,
        "barrier certificates",
        pass,
        &format!("{certs} certificates, worst defect {worst:.3e}"),
    );
}

#[test]
fn criterion_03_epsilon_selection() {
    let params = BarrierParams::new(2, 1.0).unwrap();
    let k = params.k_const;
    let e = params.epsilon;
    let lhs = |e: f64| (1.0 + e) * (2.0 + e) * (k - 1.0).powf(e);
    let pass = (k - 3.0).abs() < 1e-12
        && e > 0.3
        && e < 0.4
        && lhs(e) <= 4.0
        && lhs(e + 0.05) > 4.0;
    gate(
        3,
        "epsilon selection",
        pass,
        &format!("K = {k}, epsilon = {e:.6}, product {:.6} -> {:.6}", lhs(e), lhs(e + 0.05)),
    );
}

#[test]
fn criterion_04_lorentz_indicator() {
    let n = 512usize;
    let h = 2.0 / n as f64;
    let cell = h * h;
    let mut worst_rel = 0.0f64;
    for r in [0.35f64, 0.7] {
        let mut values = Vec::with_capacity(n * n);
        for j in 0..n {
            for i in 0..n {
                let x = -1.0 + (i as f64 + 0.5) * h;
                let y = -1.0 + (j as f64 + 0.5) * h;
                values.push(if x * x + y * y <= r * r { 1.0 } else { 0.0 });
            }
        }
        let profile = rearrange(&values, cell);
        let norm = lorentz_norm(&profile, LorentzIndex::n1(2));
        let exact = (unit_ball_volume(2) * r * r).sqrt();
        worst_rel = worst_rel.max((norm - exact).abs() / exact);
    }

    // Equimeasurability on cell data: the profile must reproduce the exact
    // super-level measures of the sampled field.
    let m = 128usize;
    let hq = 2.0 / m as f64;
    let mut values = Vec::with_capacity(m * m);
    for j in 0..m {
        for i in 0..m {
            let x = [-1.0 + (i as f64 + 0.5) * hq, -1.0 + (j as f64 + 0.5) * hq, 0.0];
            values.push(RhsPreset::GBeta { beta: 1.2 }.eval(x, 2));
        }
    }
    let profile = rearrange(&values, hq * hq);
    let mut equi_ok = true;
    for level in [0.5f64, 1.0, 2.0, 5.0] {
        let direct = values.iter().filter(|v| **v > level).count() as f64 * hq * hq;
        let from_profile: f64 =
            profile.steps().iter().filter(|(_, v)| *v > level).map(|(m, _)| m).sum();
        equi_ok &= (direct - from_profile).abs() <= 1e-9 * direct.max(1.0);
    }

    let pass = worst_rel <= 0.01 && equi_ok;
    gate(
        4,
        "lorentz indicator norm",
        pass,
        &format!("worst relative gap {worst_rel:.4e}, equimeasurable = {equi_ok}"),
    );
}

#[test]
fn criterion_05_borderline_discrimination() {
    // Radial reduction on B_1 in the plane: the (2,1)-norm of the radial
    // g_beta is sqrt(pi) * int g(r) dr, so the truncated integral down to a
    // grid's innermost sample radius is the oracle a grid norm must track.
    let lorentz_true = |beta: f64, floor: f64| {
        unit_ball_volume(2).sqrt()
            * geometric_midpoint(|r| RhsPreset::GBeta { beta }.eval([r, 0.0, 0.0], 2), floor, 1.0, 32)
    };
    let grid_norm = |beta: f64, n: usize| {
        let h = 2.0 / n as f64;
        let mut values = Vec::new();
        for j in 0..n {
            for i in 0..n {
                let x = [-1.0 + (i as f64 + 0.5) * h, -1.0 + (j as f64 + 0.5) * h, 0.0];
                if x[0] * x[0] + x[1] * x[1] <= 1.0 {
                    values.push(RhsPreset::GBeta { beta }.eval(x, 2));
                }
            }
        }
        lorentz_norm(&rearrange(&values, h * h), LorentzIndex::n1(2))
    };
    let floor = |n: usize| std::f64::consts::SQRT_2 / n as f64;

    let mut detail = String::new();
    let mut pass = true;

    // beta = 2: strictly increasing values trapped between the truncated
    // oracle and the closed-form limit sqrt(pi) * int_0^1 g_2 dr, with
    // shrinking refinement increments. The increments of this log family
    // decay quadratically in the octave count rather than geometrically,
    // so the Cauchy signature at desk scale is "smaller, not halved".
    let res = [128usize, 256, 512];
    let c2: Vec<f64> = res.iter().map(|&n| grid_norm(2.0, n)).collect();
    let limit2 = unit_ball_volume(2).sqrt();
    let mut settled = c2[1] > c2[0] && c2[2] > c2[1];
    settled &= (limit2 - c2[1]) < (limit2 - c2[0]) && (limit2 - c2[2]) < (limit2 - c2[1]);
    settled &= (limit2 - c2[2]) <= 0.8 * (limit2 - c2[0]);
    for (k, &n) in res.iter().enumerate() {
        let oracle = lorentz_true(2.0, floor(n));
        settled &= c2[k] >= oracle && c2[k] <= 1.05 * limit2;
        settled &= (c2[k] - oracle) <= 0.20 * oracle;
    }
    pass &= settled;
    detail.push_str(&format!(
        "beta=2: {:.4}/{:.4}/{:.4} vs limit {:.4} (settling = {settled}); ",
        c2[0], c2[1], c2[2], limit2
    ));

    // beta = 1: values climb past a truncated oracle that itself diverges.
    let c1: Vec<f64> = res.iter().map(|&n| grid_norm(1.0, n)).collect();
    let e1 = c1[1] - c1[0];
    let e2 = c1[2] - c1[1];
    let mut climbing = e1 > 0.05 && e2 > 0.05 && e2 >= 0.5 * e1;
    for (k, &n) in res.iter().enumerate() {
        let oracle = lorentz_true(1.0, floor(n));
        climbing &= c1[k] >= 0.95 * oracle && (c1[k] - oracle) <= 0.30 * oracle;
    }
    pass &= climbing;
    detail.push_str(&format!("beta=1 climbs {:.4}/{:.4}/{:.4}; ", c1[0], c1[1], c1[2]));

    // Dini integral of the cube-scale L^2 norm, R(rho) ~ ln(e/rho) to the
    // power (1-2b)/2. The quadrature's tail fit reads the local slope at
    // rho_min, and the logarithmic correction fades like 1/ln(1/rho_min),
    // so the divergent case is only recognized near the normal-float floor.
    let dini = |beta: f64, rho_min: f64| {
        let c = (2.0 * std::f64::consts::PI / (2.0 * beta - 1.0)).sqrt();
        graded_with_tail(
            |rho| c * (1.0 - rho.ln()).powf((1.0 - 2.0 * beta) / 2.0) / rho,
            1.0,
            rho_min,
            8,
        )
    };
    let d12 = dini(1.2, 1e-307);
    let d20 = dini(2.0, 1e-307);
    let d20_shallow = dini(2.0, 1e-200);
    let stable = (d20 - d20_shallow).abs() <= 0.02 * d20;
    pass &= d12.is_infinite() && d20.is_finite() && stable;
    detail.push_str(&format!("dini(1.2) = {d12}, dini(2.0) = {d20:.4} (stable = {stable})"));

    gate(5, "borderline discrimination", pass, &detail);
}

#[test]
fn criterion_06_halfspace_derivative() {
    let cfg = DerivativeConfig {
        nodes_half: 32,
        loc_cap: 128,
        levels: 8,
        cascade_levels: 0,
        ..DerivativeConfig::for_dim(2)
    };
    let data = FieldFn(|x: [f64; 3]| RhsPreset::ManufacturedQuadratic.w_exact(x, 2).unwrap());
    let rep = boundary_derivative(
        &EllipticOperatorField::Identity,
        &ConvexDomain::HalfSpace,
        &RhsPreset::ManufacturedQuadratic,
        &data,
        2,
        &cfg,
    )
    .expect("extraction");
    let slack = 1e-6 * rep.w_sup;
    let mut monotone = true;
    for pair in rep.rows.windows(2) {
        monotone &= pair[1].a_j <= pair[0].a_j + slack;
    }
    let pass = (rep.a - 1.0).abs() <= 0.02 && monotone;
    gate(
        6,
        "half-space derivative",
        pass,
        &format!("a = {:.6}, slopes monotone within {slack:.1e} = {monotone}", rep.a),
    );
}

#[test]
fn criterion_07_beyond_dini_verdict() {
    let domain = ConvexDomain::Graph { graph: GraphFn::PowerAbs { coef: 1.0, exponent: 2.0 } };
    let cfg = DerivativeConfig {
        q: 1.2,
        levels: 24,
        nodes_half: 32,
        loc_cap: 160,
        cascade_levels: 0,
        ..DerivativeConfig::for_dim(2)
    };
    let rep = boundary_derivative(
        &EllipticOperatorField::Identity,
        &domain,
        &RhsPreset::GBeta { beta: 1.2 },
        &ZeroField,
        2,
        &cfg,
    )
    .expect("extraction");

    let c: Vec<f64> = rep.rows.iter().map(|r| r.c_of_r).collect();
    let mut monotone = true;
    for pair in c.windows(2) {
        monotone &= pair[1] <= pair[0] * (1.0 + 1e-12);
    }
    let decade = *c.last().unwrap() <= 0.1 * c[0];

    let mut halves = true;
    let mut worst_half = 0.0f64;
    for j in 0..rep.rows.len() - 6 {
        let q = rep.rows[j + 6].g_j / rep.rows[j].g_j;
        worst_half = worst_half.max(q);
        halves &= q <= 0.5;
    }
    let pass = monotone && decade && halves && rep.differentiable;
    gate(
        7,
        "beyond-Dini differentiability",
        pass,
        &format!(
            "C(r): {:.3e} -> {:.3e}, monotone = {monotone}, six-level modulus ratio {worst_half:.3}",
            c[0],
            c.last().unwrap()
        ),
    );
}

#[test]
fn criterion_08_max_principle_constant() {
    let frozen = frozen_constants(2, 0.5);
    let rhs = RhsPreset::Constant { value: 2.0 };
    let data = FieldFn(|x: [f64; 3]| 0.25 * x[0]);
    let h = 1.0 / 32.0;
    let region = Region::new(ConvexDomain::HalfSpace, CubeSpec::square(1.0), 2, h).unwrap();
    let g_norm = rhs.norm_on_cube(&ConvexDomain::HalfSpace, 1.0, 2, 2.0);
    let rhs_field = rhs.field(2);
    let mut worst = 0.0f64;
    for seed in 0..20u64 {
        let op = EllipticOperatorField::RandomCells { lambda: 0.5, size: 0.11, seed };
        let full = solve(&DirichletProblem::new(&op, &region, &rhs_field, &data)).unwrap();
        let plain = harmonic_replacement(&op, &region, &data, 1e-10).unwrap();
        let mut dev = 0.0f64;
        for idx in region.non_exterior_nodes() {
            dev = dev.max((full.solution.get(idx) - plain.solution.get(idx)).abs());
        }
        worst = worst.max(dev / g_norm);
    }

    let op = EllipticOperatorField::RandomCells { lambda: 0.5, size: 0.11, seed: 3 };
    let mut zero_case = DirichletProblem::new(&op, &region, &ZeroField, &data);
    zero_case.tol = 1e-12;
    let w0 = solve(&zero_case).unwrap();
    let u0 = harmonic_replacement(&op, &region, &data, 1e-12).unwrap();
    let mut zero_dev = 0.0f64;
    for idx in region.non_exterior_nodes() {
        zero_dev = zero_dev.max((w0.solution.get(idx) - u0.solution.get(idx)).abs());
    }

    let pass = worst <= frozen.c_abp && zero_dev <= 1e-8;
    gate(
        8,
        "maximum-principle constant",
        pass,
        &format!(
            "worst deviation ratio {worst:.4} vs frozen {:.2}, zero-source gap {zero_dev:.2e}",
            frozen.c_abp
        ),
    );
}

#[test]
fn criterion_09_loglip_dichotomy() {
    // Borderline source in L^n only: sup/r climbs while sup/(r log(1/r))
    // stays inside a factor-two band across dyadic scales.
    let rhs = RhsPreset::GBeta { beta: 0.6 };
    let rhs_field = rhs.field(2);
    let cfg = MultiscaleConfig { base_radius: 1.0, nodes_half: 32, tol: 1e-12 };
    let mut w = MultiscaleSolution::build(
        &EllipticOperatorField::Identity,
        &ConvexDomain::HalfSpace,
        &rhs_field,
        &ZeroField,
        2,
        cfg,
        1,
    )
    .unwrap();
    w.extend_to(&rhs_field, 12).unwrap();
    let mut raw = Vec::new();
    let mut banded = Vec::new();
    for k in 2..=8u32 {
        let r = 0.5f64.powi(k as i32);
        let sup = w.sup_on_ball(r);
        raw.push(sup / r);
        banded.push(sup / (r * (k as f64 * std::f64::consts::LN_2)));
    }
    let grows = raw.windows(2).all(|p| p[1] > p[0]);
    let band =
        banded.iter().cloned().fold(f64::MIN, f64::max) / banded.iter().cloned().fold(f64::MAX, f64::min);
    let band_ok = band <= 2.0;

    // Smooth case: the per-scale linear fit must track w to rho^k depth.
    let data = FieldFn(|x: [f64; 3]| RhsPreset::ManufacturedQuadratic.w_exact(x, 2).unwrap());
    let g = RhsPreset::ManufacturedQuadratic;
    let g_field = g.field(2);
    let mut smooth = MultiscaleSolution::build(
        &EllipticOperatorField::Identity,
        &ConvexDomain::HalfSpace,
        &g_field,
        &data,
        2,
        MultiscaleConfig { base_radius: 1.0, nodes_half: 16, tol: 1e-13 },
        1,
    )
    .unwrap();
    smooth.extend_to(&g_field, 12).unwrap();
    let g_norm = g.norm_on_cube(&ConvexDomain::HalfSpace, 1.0, 2, 2.0);
    let c_abp = frozen_constants(2, 1.0).c_abp;
    let induction = log_lip_induction(
        &smooth,
        g_norm,
        c_abp,
        &LogLipConfig { rho: 0.5, steps: 8 },
    )
    .unwrap();

    let pass = grows && band_ok && induction.holds;
    gate(
        9,
        "log-lipschitz dichotomy",
        pass,
        &format!(
            "sup/r {:.3} -> {:.3}, band factor {band:.3}, induction to depth 8 = {}",
            raw[0],
            raw.last().unwrap(),
            induction.holds
        ),
    );
}

#[test]
fn criterion_10_cascade_contraction() {
    let frozen = frozen_constants(2, 1.0);
    let sigma = BarrierParams::new(2, 1.0).unwrap().sigma;
    let depth = (8.0 * (1.0 / sigma).log2()).ceil() as usize + 2;

    // Source-free cascade on a homogeneous solution with curved trace.
    let data = FieldFn(|x: [f64; 3]| x[1] + 0.3 * x[0] * x[0] - 0.1 * x[0]);
    let mut hom = MultiscaleSolution::build(
        &EllipticOperatorField::Identity,
        &ConvexDomain::HalfSpace,
        &ZeroField,
        &data,
        2,
        MultiscaleConfig { base_radius: 1.0, nodes_half: 16, tol: 1e-12 },
        1,
    )
    .unwrap();
    hom.extend_homogeneous(depth).unwrap();
    let sup = hom.base_sup();
    let hom_scaled = FieldFn(|x| hom.eval(x) / sup);
    let trace = run_oscillation_cascade(
        &hom_scaled,
        &ConvexDomain::HalfSpace,
        2,
        &|_| 0.0,
        &CascadeConfig { sigma, levels: 8, k1: 0.0, eta: frozen.eta, k2: frozen.k2 },
    )
    .unwrap();
    let contracting = trace.fitted_ratio < 1.0 && trace.fitted_ratio > 0.0;

    // Doubling the solution and the source must double every envelope bit
    // for bit: the cascade is linear in (w, g).
    let quad = FieldFn(|x: [f64; 3]| RhsPreset::ManufacturedQuadratic.w_exact(x, 2).unwrap());
    let g_field = RhsPreset::ManufacturedQuadratic.field(2);
    let mut src = MultiscaleSolution::build(
        &EllipticOperatorField::Identity,
        &ConvexDomain::HalfSpace,
        &g_field,
        &quad,
        2,
        MultiscaleConfig { base_radius: 1.0, nodes_half: 16, tol: 1e-12 },
        1,
    )
    .unwrap();
    src.extend_to(&g_field, depth).unwrap();
    let base = FieldFn(|x| src.eval(x));
    let doubled = FieldFn(|x| 2.0 * src.eval(x));
    let price = |t: f64| 2.0 * std::f64::consts::SQRT_2 * t;
    let price2 = |t: f64| 2.0 * (2.0 * std::f64::consts::SQRT_2 * t);
    let run = |w: &dyn SampleField, s: &dyn Fn(f64) -> f64| {
        run_oscillation_cascade(
            w,
            &ConvexDomain::HalfSpace,
            2,
            s,
            &CascadeConfig { sigma, levels: 8, k1: frozen.c_abp, eta: frozen.eta, k2: frozen.k2 },
        )
        .unwrap()
    };
    let one = run(&base, &price);
    let two = run(&doubled, &price2);
    let mut bitwise = true;
    for (a, b) in one.levels.iter().zip(two.levels.iter()).skip(1) {
        bitwise &= (2.0 * a.lower).to_bits() == b.lower.to_bits()
            && (2.0 * a.upper).to_bits() == b.upper.to_bits()
            && (2.0 * a.defect).to_bits() == b.defect.to_bits()
            && (2.0 * a.osc).to_bits() == b.osc.to_bits();
    }

    let pass = contracting && bitwise;
    gate(
        10,
        "cascade contraction",
        pass,
        &format!("fitted ratio {:.4}, doubling bitwise = {bitwise}", trace.fitted_ratio),
    );
}
