//! Right-hand-side presets, their manufactured solutions and their `L^q`
//! norms over boundary boxes.
//!
//! The borderline family `g_beta = |x|^{-1} log^{-beta}(e/|x|)` is the
//! interesting one: beta > 1 keeps it Dini-integrable in the scale sense,
//! beta = 1 lands exactly on the Log-Lipschitz edge, and the norms below are
//! computed radially so the singularity at the origin is integrated
//! analytically instead of being sampled.

use crate::geometry::{ConvexDomain, CubeSpec};
use crate::grid::{FieldFn, SampleField};
use crate::quadrature::{graded_with_tail, simpson};

#[derive(Debug, Clone, PartialEq)]
pub enum RhsPreset {
    Zero,
    Constant { value: f64 },
    /// `w = x_n (1 - x_n)`, `g = 2` (for the Laplacian).
    ManufacturedQuadratic,
    /// `w = x_n (1 - x_n)(1 + x_n^2)`, `g = 2 - 6 x_n + 12 x_n^2`.
    ManufacturedQuartic,
    /// `g = |x|^{-1} log^{-beta}(e / |x|)`.
    GBeta { beta: f64 },
}

fn radius(x: [f64; 3], dim: usize) -> f64 {
    if dim == 2 {
        x[0].hypot(x[1])
    } else {
        (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()
    }
}

impl RhsPreset {
    pub fn eval(&self, x: [f64; 3], dim: usize) -> f64 {
        let v = dim - 1;
        match self {
            RhsPreset::Zero => 0.0,
            RhsPreset::Constant { value } => *value,
            RhsPreset::ManufacturedQuadratic => 2.0,
            RhsPreset::ManufacturedQuartic => {
                let t = x[v];
                2.0 - 6.0 * t + 12.0 * t * t
            }
            RhsPreset::GBeta { beta } => Self::g_beta_radial(radius(x, dim), *beta),
        }
    }

    fn g_beta_radial(r: f64, beta: f64) -> f64 {
        let r = r.clamp(1e-300, 2.5);
        let u = 1.0 - r.ln(); // log(e / r), positive for r < e
        u.powf(-beta) / r
    }

    /// Exact solution for the manufactured presets (Laplacian, half-space).
    pub fn w_exact(&self, x: [f64; 3], dim: usize) -> Option<f64> {
        let t = x[dim - 1];
        match self {
            RhsPreset::ManufacturedQuadratic => Some(t * (1.0 - t)),
            RhsPreset::ManufacturedQuartic => Some(t * (1.0 - t) * (1.0 + t * t)),
            _ => None,
        }
    }

    pub fn field(&self, dim: usize) -> impl SampleField + '_ {
        FieldFn(move |x| self.eval(x, dim))
    }

    /// `(average of |g|^q over the cell of side h at `center`)^{1/q}`.
    ///
    /// Away from the origin a midpoint value is enough; cells touching the
    /// singularity of `GBeta` are split into an inscribed ball (integrated
    /// radially) and a subsampled remainder.
    pub fn cell_mean_q(&self, center: [f64; 3], h: f64, dim: usize, q: f64) -> f64 {
        let singular = matches!(self, RhsPreset::GBeta { .. });
        let d = radius(center, dim);
        if !singular || d >= 4.0 * h {
            return self.eval(center, dim).abs();
        }
        let half = 0.5 * h;
        let r_in: f64 = (0..dim).map(|a| half - center[a].abs()).fold(half, f64::min);
        let sub = if dim == 2 { 48usize } else { 16 };
        let zs = if dim == 2 { 1 } else { sub };
        let subvol = (h / sub as f64).powi(dim as i32);
        let mut acc = 0.0;
        let use_ball = r_in > h / 16.0;
        if use_ball {
            let beta = match self {
                RhsPreset::GBeta { beta } => *beta,
                _ => unreachable!(),
            };
            let sphere = if dim == 2 { 2.0 * std::f64::consts::PI } else { 4.0 * std::f64::consts::PI };
            let f = |s: f64| {
                s.powi(dim as i32 - 1) * Self::g_beta_radial(s, beta).powf(q)
            };
            acc += sphere * graded_with_tail(f, r_in, r_in * 0.5f64.powi(45), 16);
        }
        for sz in 0..zs {
            for sy in 0..sub {
                for sx in 0..sub {
                    let offs = [sx, sy, sz];
                    let mut p = [0.0; 3];
                    for a in 0..dim {
                        p[a] = center[a] - half + (offs[a] as f64 + 0.5) * h / sub as f64;
                    }
                    if use_ball && radius(p, dim) <= r_in {
                        continue;
                    }
                    acc += self.eval(p, dim).abs().powf(q) * subvol;
                }
            }
        }
        (acc / h.powi(dim as i32)).powf(1.0 / q)
    }

    /// `L^q` norm over `domain intersect Q[r x r]`.
    pub fn norm_on_cube(&self, domain: &ConvexDomain, r: f64, dim: usize, q: f64) -> f64 {
        let n = dim as f64;
        match self {
            RhsPreset::Zero => 0.0,
            RhsPreset::Constant { value } => {
                if matches!(domain, ConvexDomain::HalfSpace) {
                    value.abs() * (2.0f64.powi(dim as i32 - 1) * r.powf(n)).powf(1.0 / q)
                } else {
                    value.abs() * Self::lattice_volume(domain, r, dim).powf(1.0 / q)
                }
            }
            RhsPreset::ManufacturedQuadratic | RhsPreset::ManufacturedQuartic => {
                if matches!(domain, ConvexDomain::HalfSpace) {
                    let line = simpson(
                        |t| self.eval([0.0, t, t], dim).abs().powf(q),
                        0.0,
                        r,
                        512,
                    );
                    (line * (2.0 * r).powi(dim as i32 - 1)).powf(1.0 / q)
                } else {
                    self.lattice_norm(domain, r, dim, q)
                }
            }
            RhsPreset::GBeta { beta } => Self::radial_norm(domain, r, dim, q, *beta),
        }
    }

    /// Midpoint-lattice integral of `f` over `domain intersect Q[r x r]`.
    fn lattice_integral(
        domain: &ConvexDomain,
        r: f64,
        dim: usize,
        f: impl Fn([f64; 3]) -> f64,
    ) -> f64 {
        let cube = CubeSpec::square(r);
        let m = if dim == 2 { 512usize } else { 96 };
        let h = 2.0 * r / m as f64;
        // Horizontal axes span (-r, r); the vertical axis spans (0, r).
        let counts = if dim == 2 { [m, m / 2, 1] } else { [m, m, m / 2] };
        let mut acc = 0.0;
        for k in 0..counts[2] {
            for j in 0..counts[1] {
                for i in 0..counts[0] {
                    let f_idx = [i, j, k];
                    let mut x = [0.0; 3];
                    for a in 0..dim {
                        let start = if a == dim - 1 { 0.0 } else { -r };
                        x[a] = start + (f_idx[a] as f64 + 0.5) * h;
                    }
                    if domain.margin(x, dim) > 0.0 && cube.margin(x, dim) > 0.0 {
                        acc += f(x) * h.powi(dim as i32);
                    }
                }
            }
        }
        acc
    }

    fn lattice_volume(domain: &ConvexDomain, r: f64, dim: usize) -> f64 {
        Self::lattice_integral(domain, r, dim, |_| 1.0)
    }

    fn lattice_norm(&self, domain: &ConvexDomain, r: f64, dim: usize, q: f64) -> f64 {
        Self::lattice_integral(domain, r, dim, |x| self.eval(x, dim).abs().powf(q))
            .powf(1.0 / q)
    }

    /// Radial-angular norm for the singular family: integrates
    /// `s^{n-1} |g(s)|^q sigma(s)` where `sigma(s)` is the solid angle of
    /// directions whose point `s omega` lies in `domain intersect Q[r x r]`.
    fn radial_norm(domain: &ConvexDomain, r: f64, dim: usize, q: f64, beta: f64) -> f64 {
        let cube = CubeSpec::square(r);
        let dirs: Vec<([f64; 3], f64)> = if dim == 2 {
            let m = 1024usize;
            (0..m)
                .map(|k| {
                    let t = 2.0 * std::f64::consts::PI * (k as f64 + 0.5) / m as f64;
                    ([t.cos(), t.sin(), 0.0], 2.0 * std::f64::consts::PI / m as f64)
                })
                .collect()
        } else {
            let (mt, mp) = (48usize, 96usize);
            let mut d = Vec::with_capacity(mt * mp);
            for a in 0..mt {
                let th = std::f64::consts::PI * (a as f64 + 0.5) / mt as f64;
                let wt = th.sin() * std::f64::consts::PI / mt as f64 * 2.0
                    * std::f64::consts::PI
                    / mp as f64;
                for b in 0..mp {
                    let ph = 2.0 * std::f64::consts::PI * (b as f64 + 0.5) / mp as f64;
                    d.push(([th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()], wt));
                }
            }
            d
        };
        let s_max = r * (dim as f64).sqrt();
        let sigma = |s: f64| {
            dirs.iter()
                .map(|(e, w)| {
                    let x = [s * e[0], s * e[1], s * e[2]];
                    if domain.margin(x, dim) > 0.0 && cube.margin(x, dim) > 0.0 {
                        *w
                    } else {
                        0.0
                    }
                })
                .sum::<f64>()
        };
        let integrand = |s: f64| {
            let sg = sigma(s);
            if sg == 0.0 {
                0.0
            } else {
                s.powi(dim as i32 - 1) * Self::g_beta_radial(s, beta).powf(q) * sg
            }
        };
        graded_with_tail(integrand, s_max, s_max * 0.5f64.powi(40), 16).powf(1.0 / q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn quartic_rhs_is_minus_second_derivative() {
        let p = RhsPreset::ManufacturedQuartic;
        let d = 1e-5;
        for &t in &[0.1, 0.37, 0.8] {
            let w = |s: f64| p.w_exact([0.0, s, 0.0], 2).unwrap();
            let second = (w(t + d) - 2.0 * w(t) + w(t - d)) / (d * d);
            assert_relative_eq!(-second, p.eval([0.0, t, 0.0], 2), max_relative = 1e-5);
        }
    }

    #[test]
    fn constant_norm_closed_form_matches_lattice() {
        let c = RhsPreset::Constant { value: 3.0 };
        let exact = c.norm_on_cube(&ConvexDomain::HalfSpace, 0.5, 2, 2.0);
        assert_relative_eq!(exact, 3.0 * (2.0 * 0.5f64.powi(2)).sqrt(), max_relative = 1e-14);
        // A zero-slope cone is the half-space but routes through the lattice.
        let lattice = c.norm_on_cube(&ConvexDomain::Cone { slope: 0.0 }, 0.5, 2, 2.0);
        assert_relative_eq!(lattice, exact, max_relative = 1e-2);
    }

    #[test]
    fn gbeta_norm_matches_dense_lattice_at_mild_exponent() {
        let g = RhsPreset::GBeta { beta: 1.0 };
        let q = 1.5;
        let r = 0.5;
        let radial = g.norm_on_cube(&ConvexDomain::HalfSpace, r, 2, q);
        // Independent check: dense Cartesian midpoint sum; the singular cell
        // contributes O(h^{2-q}) and is negligible at this resolution.
        let m = 2048usize;
        let h = 2.0 * r / m as f64;
        let mut acc = 0.0;
        for j in 0..m / 2 {
            for i in 0..m {
                let x = [-r + (i as f64 + 0.5) * h, (j as f64 + 0.5) * h, 0.0];
                acc += g.eval(x, 2).abs().powf(q) * h * h;
            }
        }
        assert_relative_eq!(radial, acc.powf(1.0 / q), max_relative = 2e-2);
    }

    #[test]
    fn singular_cell_mean_matches_refined_subdivision() {
        let g = RhsPreset::GBeta { beta: 2.0 };
        let q = 1.5;
        let h = 1.0 / 64.0;
        let got = g.cell_mean_q([0.0, 0.0, 0.0], h, 2, q);
        // Oracle: dyadically graded subdivision around the singularity.
        let mut acc = 0.0;
        let mut scale = h;
        for _ in 0..60 {
            // annulus between scale/2 and scale boxes, 64x64 samples
            let m = 64;
            let hh = scale / m as f64;
            for j in 0..m {
                for i in 0..m {
                    let x = [-scale / 2.0 + (i as f64 + 0.5) * hh, -scale / 2.0 + (j as f64 + 0.5) * hh, 0.0];
                    if x[0].abs().max(x[1].abs()) > scale / 4.0 {
                        acc += g.eval(x, 2).abs().powf(q) * hh * hh;
                    }
                }
            }
            scale /= 2.0;
        }
        let oracle = (acc / (h * h)).powf(1.0 / q);
        assert_relative_eq!(got, oracle, max_relative = 2e-2);
    }

    #[test]
    fn gbeta_grows_toward_origin_and_beta_orders_it() {
        let g1 = RhsPreset::GBeta { beta: 1.0 };
        let g2 = RhsPreset::GBeta { beta: 2.0 };
        let near = g1.eval([1e-6, 0.0, 0.0], 2);
        let far = g1.eval([0.1, 0.0, 0.0], 2);
        assert!(near > far);
        // Larger beta damps the singularity (log factor > 1 near zero).
        assert!(g2.eval([1e-6, 0.0, 0.0], 2) < near);
        assert_abs_diff_eq!(RhsPreset::Zero.eval([0.3, 0.3, 0.0], 2), 0.0);
    }
}
