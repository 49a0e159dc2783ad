//! Convex domains touching the origin, node classification with boundary
//! cuts, cone openings, and the dyadic scale schedule.
//!
//! All domains contain the upward axis near the origin and have the origin on
//! their boundary. The vertical axis is `dim - 1`; the remaining axes are
//! horizontal. Margins are positive inside, negative outside, and concave
//! along segments, so a sign change along a grid edge brackets exactly one
//! boundary crossing.

use crate::error::{Error, Result};
use crate::grid::Grid;

pub fn horizontal_radius(x: [f64; 3], dim: usize) -> f64 {
    if dim == 2 {
        x[0].abs()
    } else {
        x[0].hypot(x[1])
    }
}

/// Radial convex profile `l(|x'|)` with `l(0) = 0`, graphed by the boundary.
#[derive(Debug, Clone, PartialEq)]
pub enum GraphFn {
    /// `l = 0`.
    Flat,
    /// `l(r) = coef * r^exponent`, `exponent >= 1`.
    PowerAbs { coef: f64, exponent: f64 },
    /// `l(r) = slope * max(0, r - offset)`: flat cap, then a cone.
    MaxAffine { slope: f64, offset: f64 },
}

impl GraphFn {
    pub fn eval(&self, r: f64) -> f64 {
        match *self {
            GraphFn::Flat => 0.0,
            GraphFn::PowerAbs { coef, exponent } => coef * r.powf(exponent),
            GraphFn::MaxAffine { slope, offset } => slope * (r - offset).max(0.0),
        }
    }

    /// Profile of the blow-up `x -> x / rho`: `l_rho(r) = l(rho r) / rho`.
    pub fn rescale(&self, rho: f64) -> GraphFn {
        match *self {
            GraphFn::Flat => GraphFn::Flat,
            GraphFn::PowerAbs { coef, exponent } => GraphFn::PowerAbs {
                coef: coef * rho.powf(exponent - 1.0),
                exponent,
            },
            GraphFn::MaxAffine { slope, offset } => GraphFn::MaxAffine {
                slope,
                offset: offset / rho,
            },
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            GraphFn::Flat => true,
            GraphFn::PowerAbs { coef, exponent } => {
                coef >= 0.0 && coef.is_finite() && exponent >= 1.0 && exponent.is_finite()
            }
            GraphFn::MaxAffine { slope, offset } => {
                slope >= 0.0 && slope.is_finite() && offset >= 0.0 && offset.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("degenerate boundary profile {self:?}")))
        }
    }
}

/// An open convex domain with the origin on its boundary and the upward
/// vertical direction pointing inside (strictly, except for the half-space
/// degenerations that report an undefined opening).
#[derive(Debug, Clone, PartialEq)]
pub enum ConvexDomain {
    /// `{ x_n > 0 }`.
    HalfSpace,
    /// `{ x_n > slope * |x'| }`.
    Cone { slope: f64 },
    /// Intersection of half-spaces `{ normal . x > 0 }` through the origin.
    PolyhedralCone { normals: Vec<[f64; 3]> },
    /// `{ x_n > l(|x'|) }`.
    Graph { graph: GraphFn },
}

impl ConvexDomain {
    /// Positive inside, negative outside, concave along segments.
    pub fn margin(&self, x: [f64; 3], dim: usize) -> f64 {
        let v = dim - 1;
        match self {
            ConvexDomain::HalfSpace => x[v],
            ConvexDomain::Cone { slope } => x[v] - slope * horizontal_radius(x, dim),
            ConvexDomain::PolyhedralCone { normals } => normals
                .iter()
                .map(|n| (0..dim).map(|a| n[a] * x[a]).sum::<f64>())
                .fold(f64::INFINITY, f64::min),
            ConvexDomain::Graph { graph } => x[v] - graph.eval(horizontal_radius(x, dim)),
        }
    }

    pub fn contains(&self, x: [f64; 3], dim: usize) -> bool {
        self.margin(x, dim) > 0.0
    }

    /// Height of the boundary over the horizontal point `xp` (vertical
    /// component of `xp` is ignored). Infinite where the domain has a
    /// vertical wall and no graph representation.
    pub fn boundary_height(&self, xp: [f64; 3], dim: usize) -> f64 {
        let r = horizontal_radius(xp, dim);
        match self {
            ConvexDomain::HalfSpace => 0.0,
            ConvexDomain::Cone { slope } => slope * r,
            ConvexDomain::Graph { graph } => graph.eval(r),
            ConvexDomain::PolyhedralCone { normals } => {
                let v = dim - 1;
                let mut h = f64::NEG_INFINITY;
                for n in normals {
                    let horiz: f64 = (0..v).map(|a| n[a] * xp[a]).sum();
                    if n[v] > 1e-12 {
                        h = h.max(-horiz / n[v]);
                    } else if horiz <= 0.0 {
                        return f64::INFINITY;
                    }
                }
                if h.is_finite() {
                    h
                } else {
                    0.0
                }
            }
        }
    }

    /// Blow-up `x -> x / rho`; cones are invariant, graphs steepen.
    pub fn rescale(&self, rho: f64) -> ConvexDomain {
        match self {
            ConvexDomain::Graph { graph } => ConvexDomain::Graph { graph: graph.rescale(rho) },
            other => other.clone(),
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        match self {
            ConvexDomain::HalfSpace => Ok(()),
            ConvexDomain::Cone { slope } => {
                if *slope >= 0.0 && slope.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(format!("cone slope {slope} must be >= 0")))
                }
            }
            ConvexDomain::PolyhedralCone { normals } => {
                if normals.is_empty() {
                    return Err(Error::InvalidParameter("polyhedral cone needs normals".into()));
                }
                let e_n = {
                    let mut e = [0.0; 3];
                    e[dim - 1] = 1.0;
                    e
                };
                if self.margin(e_n, dim) <= 0.0 {
                    return Err(Error::InvalidParameter(
                        "polyhedral cone must contain the upward axis".into(),
                    ));
                }
                Ok(())
            }
            ConvexDomain::Graph { graph } => graph.validate(),
        }
    }

    /// Largest `nu` such that the unit-length cone `{ x_n > |x'| / nu }`
    /// fits inside the domain, found by bisecting the ray angle from the
    /// vertical. Cones give `nu = 1 / slope`; domains that contain a full
    /// flat unit disc report [`Error::OpeningUndefined`].
    pub fn cone_opening(&self, dim: usize) -> Result<f64> {
        self.validate(dim)?;
        let v = dim - 1;
        let dirs: Vec<[f64; 3]> = if dim == 2 {
            vec![[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]]
        } else {
            (0..128)
                .map(|k| {
                    let t = 2.0 * std::f64::consts::PI * k as f64 / 128.0;
                    [t.cos(), t.sin(), 0.0]
                })
                .collect()
        };
        // Convexity makes margin(s * d) / s nonincreasing in s, so rays of
        // length one only need their endpoint checked.
        let inside = |alpha: f64| {
            dirs.iter().all(|e| {
                let mut p = [0.0; 3];
                for a in 0..v {
                    p[a] = alpha.sin() * e[a];
                }
                p[v] = alpha.cos();
                self.margin(p, dim) > 0.0
            })
        };
        let mut lo = 1e-9;
        let mut hi = std::f64::consts::FRAC_PI_2 - 1e-9;
        if !inside(lo) {
            return Ok(0.0);
        }
        if inside(hi) {
            return Err(Error::OpeningUndefined);
        }
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if inside(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(lo.tan())
    }

    /// `sup |l(x')| / |x'|` over horizontal points with `0 < |x'| <= r`,
    /// sampled on a log lattice of radii and directions. Infinite for
    /// domains with vertical walls inside the sampled ball.
    pub fn graph_modulus(&self, dim: usize, r: f64) -> f64 {
        if matches!(self, ConvexDomain::HalfSpace) {
            return 0.0;
        }
        let dirs: Vec<[f64; 3]> = if dim == 2 {
            vec![[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]]
        } else {
            (0..64)
                .map(|k| {
                    let t = 2.0 * std::f64::consts::PI * k as f64 / 64.0;
                    [t.cos(), t.sin(), 0.0]
                })
                .collect()
        };
        let mut sup: f64 = 0.0;
        for j in 0..=120 {
            let rho = r * 0.5f64.powf(j as f64 / 4.0);
            for e in &dirs {
                let xp = [rho * e[0], rho * e[1], 0.0];
                let h = self.boundary_height(xp, dim);
                if !h.is_finite() {
                    return f64::INFINITY;
                }
                sup = sup.max(h.abs() / rho);
            }
        }
        sup
    }
}

/// Axis-aligned box `(-half_width, half_width)^{n-1} x (0, height)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubeSpec {
    pub half_width: f64,
    pub height: f64,
}

impl CubeSpec {
    pub fn new(half_width: f64, height: f64) -> CubeSpec {
        CubeSpec { half_width, height }
    }

    /// `Q[r x r]`.
    pub fn square(r: f64) -> CubeSpec {
        CubeSpec { half_width: r, height: r }
    }

    pub fn margin(&self, x: [f64; 3], dim: usize) -> f64 {
        let v = dim - 1;
        let mut m = f64::min(x[v], self.height - x[v]);
        for a in 0..v {
            m = m.min(self.half_width - x[a].abs());
        }
        m
    }
}

/// Role of a grid node in a Dirichlet solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeClass {
    /// Equation is imposed here; value is an unknown.
    Interior,
    /// On the domain boundary: homogeneous Dirichlet value.
    BoundaryZero,
    /// On a box face strictly inside the domain: value from the data field.
    BoundaryData,
    Exterior,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CutKind {
    Zero,
    Data,
}

/// A stencil arm truncated by the boundary: the crossing sits at fraction
/// `theta` of the full step, at `point`, and carries a zero or sampled value.
#[derive(Debug, Clone, Copy)]
pub struct Cut {
    pub theta: f64,
    pub point: [f64; 3],
    pub kind: CutKind,
}

/// A grid covering a box, with every node classified against
/// `domain intersect box`.
#[derive(Debug, Clone)]
pub struct Region {
    pub grid: Grid,
    pub domain: ConvexDomain,
    pub cube: CubeSpec,
    pub class: Vec<NodeClass>,
}

impl Region {
    pub fn new(domain: ConvexDomain, cube: CubeSpec, dim: usize, h: f64) -> Result<Region> {
        domain.validate(dim)?;
        let m = (cube.half_width / h).round();
        if m < 1.0 || (m * h - cube.half_width).abs() > 1e-9 * cube.half_width.max(1.0) {
            return Err(Error::GridMisaligned(format!(
                "half-width {} is not a multiple of h = {h}",
                cube.half_width
            )));
        }
        let mv = (cube.height / h).round();
        if mv < 1.0 || (mv * h - cube.height).abs() > 1e-9 * cube.height.max(1.0) {
            return Err(Error::GridMisaligned(format!(
                "height {} is not a multiple of h = {h}",
                cube.height
            )));
        }
        let (m, mv) = (m as usize, mv as usize);
        let (shape, origin) = if dim == 2 {
            ([2 * m + 1, mv + 1, 1], [-cube.half_width, 0.0, 0.0])
        } else {
            ([2 * m + 1, 2 * m + 1, mv + 1], [-cube.half_width, -cube.half_width, 0.0])
        };
        let grid = Grid::new(dim, shape, origin, h)?;
        let tol = 1e-7 * h;
        let class = (0..grid.len())
            .map(|l| {
                let x = grid.pos(grid.idx(l));
                let dm = domain.margin(x, dim);
                let cm = cube.margin(x, dim);
                let m = dm.min(cm);
                if m > tol {
                    NodeClass::Interior
                } else if m >= -tol {
                    if dm <= tol {
                        NodeClass::BoundaryZero
                    } else {
                        NodeClass::BoundaryData
                    }
                } else {
                    NodeClass::Exterior
                }
            })
            .collect();
        let region = Region { grid, domain, cube, class };
        if region.interior_count() == 0 {
            return Err(Error::EmptyInterior);
        }
        Ok(region)
    }

    pub fn dim(&self) -> usize {
        self.grid.dim
    }

    pub fn class_at(&self, idx: [usize; 3]) -> NodeClass {
        self.class[self.grid.lin(idx)]
    }

    pub fn is_interior(&self, idx: [usize; 3]) -> bool {
        self.class_at(idx) == NodeClass::Interior
    }

    pub fn interior_count(&self) -> usize {
        self.class.iter().filter(|c| **c == NodeClass::Interior).count()
    }

    pub fn margin(&self, x: [f64; 3]) -> f64 {
        self.domain.margin(x, self.dim()).min(self.cube.margin(x, self.dim()))
    }

    pub fn interior_nodes(&self) -> impl Iterator<Item = [usize; 3]> + '_ {
        self.grid
            .nodes()
            .filter(move |&idx| self.class[self.grid.lin(idx)] == NodeClass::Interior)
    }

    pub fn non_exterior_nodes(&self) -> impl Iterator<Item = [usize; 3]> + '_ {
        self.grid
            .nodes()
            .filter(move |&idx| self.class[self.grid.lin(idx)] != NodeClass::Exterior)
    }

    /// Boundary crossing along the axis arm from an interior node, or `None`
    /// when the neighbour is itself interior (regular stencil arm).
    pub fn cut_to(&self, idx: [usize; 3], axis: usize, dir: isize) -> Option<Cut> {
        debug_assert!(self.is_interior(idx));
        let nb = self
            .grid
            .step(idx, axis, dir)
            .expect("interior nodes sit strictly inside the grid box");
        if self.is_interior(nb) {
            return None;
        }
        Some(self.bisect_cut(self.grid.pos(idx), self.grid.pos(nb)))
    }

    /// Boundary crossing along a diagonal arm (for mixed-derivative
    /// stencils), or `None` when the diagonal neighbour is interior.
    pub fn diag_cut(
        &self,
        idx: [usize; 3],
        a: usize,
        sa: isize,
        b: usize,
        sb: isize,
    ) -> Option<Cut> {
        let nb = self.grid.step(idx, a, sa).and_then(|i| self.grid.step(i, b, sb));
        match nb {
            Some(nb) if self.is_interior(nb) => None,
            Some(nb) => Some(self.bisect_cut(self.grid.pos(idx), self.grid.pos(nb))),
            None => {
                // Diagonal leaves the grid box entirely; the box face is the
                // crossing, so walk toward the face corner.
                let mut to = self.grid.pos(idx);
                to[a] += sa as f64 * self.grid.h;
                to[b] += sb as f64 * self.grid.h;
                Some(self.bisect_cut(self.grid.pos(idx), to))
            }
        }
    }

    fn bisect_cut(&self, from: [f64; 3], to: [f64; 3]) -> Cut {
        let tol = 1e-6 * self.grid.h;
        let mut lo = 0.0f64;
        let mut hi = 1.0f64;
        let at = |t: f64| {
            [
                from[0] + t * (to[0] - from[0]),
                from[1] + t * (to[1] - from[1]),
                from[2] + t * (to[2] - from[2]),
            ]
        };
        if self.margin(to) >= -tol {
            // Neighbour is on (or numerically on) the boundary: full step.
            let kind = if self.domain.margin(to, self.dim()) <= tol {
                CutKind::Zero
            } else {
                CutKind::Data
            };
            return Cut { theta: 1.0, point: to, kind };
        }
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if self.margin(at(mid)) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let theta = 0.5 * (lo + hi);
        let point = at(theta);
        let kind = if self.domain.margin(point, self.dim()) <= tol {
            CutKind::Zero
        } else {
            CutKind::Data
        };
        Cut { theta, point, kind }
    }
}

/// Dyadic scale ladder: `sigma_j = r0 psi(r0) / 2^j` with matching radii
/// `r_j` solving `r sqrt(psi(r)) = sigma_j`.
#[derive(Debug, Clone)]
pub struct ScaleSchedule {
    pub r0: f64,
    pub psi0: f64,
    pub lambda_big: f64,
    pub sigma: Vec<f64>,
    pub r: Vec<f64>,
}

impl ScaleSchedule {
    pub fn levels(&self) -> usize {
        self.sigma.len()
    }
}

/// Halve the base radius until `sqrt(psi(r0)) <= 1 / lambda_big`. Returns the
/// reduced radius and the number of halvings.
pub fn reduce_base_radius(
    psi: &dyn Fn(f64) -> f64,
    r_start: f64,
    lambda_big: f64,
) -> Result<(f64, usize)> {
    if !(r_start > 0.0) || !(lambda_big > 1.0) {
        return Err(Error::InvalidParameter(format!(
            "need r_start > 0 and lambda_big > 1, got {r_start}, {lambda_big}"
        )));
    }
    let mut r0 = r_start;
    let mut halvings = 0usize;
    while psi(r0).max(0.0).sqrt() > 1.0 / lambda_big {
        r0 *= 0.5;
        halvings += 1;
        if halvings > 80 {
            return Err(Error::ReductionFailed(
                "psi stays above 1/Lambda^2 after 80 halvings; the domain keeps a conical \
                 profile at every scale, so the opening-based Lipschitz estimate applies \
                 instead of the oscillation cascade"
                    .into(),
            ));
        }
    }
    Ok((r0, halvings))
}

/// Build the scale ladder below an already-reduced base radius.
///
/// `psi` must be nonnegative and nondecreasing with `sqrt(psi(r0))` at most
/// `1 / lambda_big`; each `r_j` is the smallest root of
/// `r sqrt(psi(r)) = sigma_j` in `(0, r0]`.
pub fn solve_scale_equation(
    psi: &dyn Fn(f64) -> f64,
    r0: f64,
    lambda_big: f64,
    levels: usize,
) -> Result<ScaleSchedule> {
    let psi0 = psi(r0);
    if !(psi0 > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "psi(r0) = {psi0}; the flat/zero-modulus case has no scale ladder"
        )));
    }
    if psi0.sqrt() > 1.0 / lambda_big + 1e-12 || levels == 0 {
        return Err(Error::InvalidParameter(format!(
            "scale ladder needs sqrt(psi(r0)) <= 1/Lambda and levels >= 1, got \
             sqrt(psi) = {:.3e}, levels = {levels}",
            psi0.sqrt()
        )));
    }
    let f = |r: f64| r * psi(r).max(0.0).sqrt();
    let mut sigma = Vec::with_capacity(levels);
    let mut radii = Vec::with_capacity(levels);
    for j in 0..levels {
        let s = r0 * psi0 * 0.5f64.powi(j as i32);
        let hi0 = r0;
        if f(hi0) < s {
            return Err(Error::RootBracketing(format!(
                "r sqrt(psi) never reaches sigma_{j} = {s:.3e} below r0"
            )));
        }
        let mut lo = s.min(0.5 * r0);
        let mut guard = 0;
        while f(lo) >= s {
            lo *= 0.5;
            guard += 1;
            if guard > 1000 {
                return Err(Error::RootBracketing(format!(
                    "no lower bracket for sigma_{j} = {s:.3e}"
                )));
            }
        }
        let mut hi = hi0;
        for _ in 0..200 {
            if (hi - lo) <= 1e-13 * hi {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if f(mid) >= s {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        sigma.push(s);
        radii.push(hi);
    }
    Ok(ScaleSchedule { r0, psi0, lambda_big, sigma, r: radii })
}
