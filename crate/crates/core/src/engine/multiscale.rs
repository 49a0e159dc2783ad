//! Telescoping dyadic re-solves.
//!
//! A single grid cannot resolve boundary behaviour across thirty dyadic
//! scales, so the solution is rebuilt on a nested family of boxes
//! `Q[R/2^l x R/2^l]`, each solved at a fixed node count with Dirichlet data
//! interpolated from the previous level. Interpolation is tensor-quadratic,
//! so the telescope is nodally exact on quadratic solutions and keeps a
//! scale-relative accuracy of order `(1/nodes_half)^2` per level.

use crate::error::Result;
use crate::geometry::{ConvexDomain, CubeSpec, Region};
use crate::grid::{GridFunction, SampleField, ZeroField};
use crate::operator::EllipticOperatorField;
use crate::solver::{solve, DirichletProblem};

#[derive(Debug, Clone, Copy)]
pub struct MultiscaleConfig {
    /// Radius of the outermost box.
    pub base_radius: f64,
    /// Grid nodes per half axis at every level.
    pub nodes_half: usize,
    /// Relative residual target for each level solve.
    pub tol: f64,
}

impl Default for MultiscaleConfig {
    fn default() -> MultiscaleConfig {
        MultiscaleConfig { base_radius: 1.0, nodes_half: 64, tol: 1e-12 }
    }
}

struct Level {
    radius: f64,
    values: GridFunction,
    sup: f64,
}

pub struct MultiscaleSolution {
    operator: EllipticOperatorField,
    domain: ConvexDomain,
    dim: usize,
    cfg: MultiscaleConfig,
    levels: Vec<Level>,
}

fn solve_level(
    operator: &EllipticOperatorField,
    domain: &ConvexDomain,
    dim: usize,
    cfg: &MultiscaleConfig,
    radius: f64,
    rhs: &dyn SampleField,
    data: &dyn SampleField,
) -> Result<Level> {
    let h = radius / cfg.nodes_half as f64;
    let region = Region::new(domain.clone(), CubeSpec::square(radius), dim, h)?;
    let mut p = DirichletProblem::new(operator, &region, rhs, data);
    p.tol = cfg.tol;
    let report = solve(&p)?;
    let sup = report.solution.sup_abs();
    Ok(Level { radius, values: report.solution, sup })
}

impl MultiscaleSolution {
    /// Solve the outermost box with the given face data and refine down to
    /// `depth` levels (so the finest box has radius `base / 2^(depth-1)`).
    /// Pass `ZeroField` for the reference problem `w = 0` on the whole
    /// boundary of `domain` intersect the base box.
    pub fn build(
        operator: &EllipticOperatorField,
        domain: &ConvexDomain,
        rhs: &dyn SampleField,
        outer: &dyn SampleField,
        dim: usize,
        cfg: MultiscaleConfig,
        depth: usize,
    ) -> Result<MultiscaleSolution> {
        let base = solve_level(
            operator,
            domain,
            dim,
            &cfg,
            cfg.base_radius,
            rhs,
            outer,
        )?;
        let mut ms = MultiscaleSolution {
            operator: operator.clone(),
            domain: domain.clone(),
            dim,
            cfg,
            levels: vec![base],
        };
        ms.extend_to(rhs, depth)?;
        Ok(ms)
    }

    /// Append levels until the telescope holds `depth` of them.
    pub fn extend_to(&mut self, rhs: &dyn SampleField, depth: usize) -> Result<()> {
        while self.levels.len() < depth {
            let prev = self.levels.last().unwrap();
            let radius = prev.radius * 0.5;
            let data = prev.values.quadratic();
            let level = solve_level(
                &self.operator,
                &self.domain,
                self.dim,
                &self.cfg,
                radius,
                rhs,
                &data,
            )?;
            self.levels.push(level);
        }
        Ok(())
    }

    /// Homogeneous companion: same operator and domain, zero right-hand
    /// side, boundary data read from this telescope on the faces of the
    /// half-radius box. The parent's own outer data lives on the full box,
    /// so halving is what makes the companion's trace nontrivial.
    pub fn companion(&self) -> Result<MultiscaleSolution> {
        let mut cfg = self.cfg;
        cfg.base_radius = self.cfg.base_radius * 0.5;
        let base = solve_level(
            &self.operator,
            &self.domain,
            self.dim,
            &cfg,
            cfg.base_radius,
            &ZeroField,
            self,
        )?;
        Ok(MultiscaleSolution {
            operator: self.operator.clone(),
            domain: self.domain.clone(),
            dim: self.dim,
            cfg,
            levels: vec![base],
        })
    }

    /// Extend a companion (or any telescope) with zero right-hand side.
    pub fn extend_homogeneous(&mut self, depth: usize) -> Result<()> {
        self.extend_to(&ZeroField, depth)
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> &ConvexDomain {
        &self.domain
    }

    pub fn base_radius(&self) -> f64 {
        self.cfg.base_radius
    }

    pub fn level_radius(&self, level: usize) -> f64 {
        self.levels[level].radius
    }

    pub fn base_sup(&self) -> f64 {
        self.levels[0].sup
    }

    /// Finest level whose box still surrounds scale `s` with a factor-two
    /// margin, so interpolation never happens near a box face.
    pub fn level_for_scale(&self, s: f64) -> usize {
        let mut l = 0;
        while l + 1 < self.levels.len() && self.levels[l + 1].radius >= 2.0 * s {
            l += 1;
        }
        l
    }

    /// Sup of |w| over `Q[r x r]` intersected with the domain.
    pub fn sup_on_cube(&self, r: f64) -> f64 {
        let d = self.dim;
        self.sup_within(r, move |x| {
            let mut m = x[d - 1];
            for c in &x[..d - 1] {
                m = m.max(c.abs());
            }
            m <= r * (1.0 + 1e-12)
        })
    }

    /// Sup of |w| over the Euclidean ball of radius `r`.
    pub fn sup_on_ball(&self, r: f64) -> f64 {
        self.sup_within(r, move |x| {
            (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt() <= r * (1.0 + 1e-12)
        })
    }

    /// Sampled on a fixed normalized lattice scaled by `r` and read through
    /// the level interpolants, so the sample set moves continuously with the
    /// radius instead of jumping with the node census of whichever level
    /// happens to cover the cube. Suprema at nearby radii stay comparable.
    fn sup_within(&self, r: f64, keep: impl Fn([f64; 3]) -> bool) -> f64 {
        let m: i64 = if self.dim == 2 { 64 } else { 20 };
        let side: Vec<f64> = (-m..=m).map(|i| r * i as f64 / m as f64).collect();
        let vert: Vec<f64> = (0..=m).map(|i| r * i as f64 / m as f64).collect();
        let mut sup = 0.0f64;
        let mut probe = |x: [f64; 3]| {
            if keep(x) {
                sup = sup.max(self.eval(x).abs());
            }
        };
        if self.dim == 2 {
            for &a in &side {
                for &v in &vert {
                    probe([a, v, 0.0]);
                }
            }
        } else {
            for &a in &side {
                for &b in &side {
                    for &v in &vert {
                        probe([a, b, v]);
                    }
                }
            }
        }
        sup
    }
}

impl SampleField for MultiscaleSolution {
    fn eval(&self, x: [f64; 3]) -> f64 {
        if self.domain.margin(x, self.dim) <= 0.0 {
            return 0.0;
        }
        let mut s = x[self.dim - 1].max(0.0);
        for c in x.iter().take(self.dim - 1) {
            s = s.max(c.abs());
        }
        let level = &self.levels[self.level_for_scale(s)];
        level.values.quadratic().eval(x)
    }
}
