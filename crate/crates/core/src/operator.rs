//! Symmetric elliptic coefficient fields `b(x)` with eigenvalues pinned to
//! `[lambda, 1/lambda]`.
//!
//! Randomized fields hash cell coordinates with splitmix64 instead of
//! carrying generator state, so a field is a pure function of `(seed, x)`
//! and every run is reproducible regardless of evaluation order.

use crate::error::{Error, Result};

/// Dense symmetric matrix, stored 3x3 with the unused block zeroed in 2-d.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymMat {
    pub dim: usize,
    pub a: [[f64; 3]; 3],
}

impl SymMat {
    pub fn identity(dim: usize) -> SymMat {
        let mut a = [[0.0; 3]; 3];
        for i in 0..dim {
            a[i][i] = 1.0;
        }
        SymMat { dim, a }
    }

    pub fn diagonal(dim: usize, d: [f64; 3]) -> SymMat {
        let mut a = [[0.0; 3]; 3];
        for i in 0..dim {
            a[i][i] = d[i];
        }
        SymMat { dim, a }
    }

    /// Rotation of `diag(e0, e1)` by `theta` in the `(axes.0, axes.1)` plane;
    /// remaining axis (in 3-d) keeps eigenvalue `e_rest`.
    pub fn from_rotation(
        dim: usize,
        axes: (usize, usize),
        theta: f64,
        eigs: (f64, f64),
        e_rest: f64,
    ) -> SymMat {
        let (c, s) = (theta.cos(), theta.sin());
        let (i, j) = axes;
        let mut m = SymMat::identity(dim);
        for k in 0..dim {
            m.a[k][k] = e_rest;
        }
        m.a[i][i] = eigs.0 * c * c + eigs.1 * s * s;
        m.a[j][j] = eigs.0 * s * s + eigs.1 * c * c;
        m.a[i][j] = (eigs.0 - eigs.1) * c * s;
        m.a[j][i] = m.a[i][j];
        m
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i][j]
    }

    /// Extreme eigenvalues: closed form in 2-d, cyclic Jacobi in 3-d.
    pub fn eig_bounds(&self) -> (f64, f64) {
        if self.dim == 2 {
            let (a, b, c) = (self.a[0][0], self.a[0][1], self.a[1][1]);
            let mean = 0.5 * (a + c);
            let rad = (0.25 * (a - c) * (a - c) + b * b).sqrt();
            return (mean - rad, mean + rad);
        }
        let mut m = self.a;
        for _ in 0..40 {
            let mut off = 0.0;
            for i in 0..3 {
                for j in (i + 1)..3 {
                    off += m[i][j] * m[i][j];
                }
            }
            if off < 1e-30 {
                break;
            }
            for p in 0..3 {
                for q in (p + 1)..3 {
                    if m[p][q].abs() < 1e-300 {
                        continue;
                    }
                    let tau = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                    let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = t * c;
                    let mut rot = [[0.0f64; 3]; 3];
                    for i in 0..3 {
                        rot[i][i] = 1.0;
                    }
                    rot[p][p] = c;
                    rot[q][q] = c;
                    rot[p][q] = s;
                    rot[q][p] = -s;
                    let mut tmp = [[0.0f64; 3]; 3];
                    for i in 0..3 {
                        for j in 0..3 {
                            tmp[i][j] = (0..3).map(|k| rot[k][i] * m[k][j]).sum();
                        }
                    }
                    for i in 0..3 {
                        for j in 0..3 {
                            m[i][j] = (0..3).map(|k| tmp[i][k] * rot[k][j]).sum();
                        }
                    }
                }
            }
        }
        let d = [m[0][0], m[1][1], m[2][2]];
        (
            d.iter().cloned().fold(f64::INFINITY, f64::min),
            d.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        )
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform value in `[0, 1)` hashed from a seed, a per-use salt and integer
/// cell coordinates.
fn cell_unit(seed: u64, salt: u64, cell: [i64; 3]) -> f64 {
    let mut h = splitmix64(seed ^ salt.wrapping_mul(0xA076_1D64_78BD_642F));
    for c in cell {
        h = splitmix64(h ^ (c as u64));
    }
    (h >> 11) as f64 / (1u64 << 53) as f64
}

/// Coefficient field presets.
#[derive(Debug, Clone, PartialEq)]
pub enum EllipticOperatorField {
    /// The Laplacian, `b = I`.
    Identity,
    /// Rotation of `diag(1, lambda)` by the smoothly varying angle
    /// `(pi/6) x_0 x_{n-1}`; carries mixed second derivatives.
    SmoothAnisotropic { lambda: f64 },
    /// Isotropic coefficient jumping between `lambda` and `1` on a
    /// checkerboard of side `size`.
    Checkerboard { lambda: f64, size: f64 },
    /// Independent per-cell coefficients hashed from the seed: rotated
    /// `diag(e0, e1)` in 2-d, diagonal in 3-d, eigenvalues in `[lambda, 1]`.
    RandomCells { lambda: f64, size: f64, seed: u64 },
    /// Blow-up of another field: `b_rho(x) = b(rho x)`.
    Scaled { inner: Box<EllipticOperatorField>, rho: f64 },
}

impl EllipticOperatorField {
    pub fn at(&self, x: [f64; 3], dim: usize) -> SymMat {
        let v = dim - 1;
        match self {
            EllipticOperatorField::Identity => SymMat::identity(dim),
            EllipticOperatorField::SmoothAnisotropic { lambda } => {
                let theta = std::f64::consts::FRAC_PI_6 * x[0] * x[v];
                SymMat::from_rotation(dim, (0, v), theta, (1.0, *lambda), 1.0)
            }
            EllipticOperatorField::Checkerboard { lambda, size } => {
                let mut parity = 0i64;
                for a in 0..dim {
                    parity += (x[a] / size).floor() as i64;
                }
                let e = if parity.rem_euclid(2) == 0 { 1.0 } else { *lambda };
                SymMat::diagonal(dim, [e, e, e])
            }
            EllipticOperatorField::RandomCells { lambda, size, seed } => {
                let mut cell = [0i64; 3];
                for a in 0..dim {
                    cell[a] = (x[a] / size).floor() as i64;
                }
                let unit = |salt: u64| cell_unit(*seed, salt, cell);
                let span = 1.0 - lambda;
                if dim == 2 {
                    let theta = std::f64::consts::PI * unit(1);
                    let e0 = lambda + span * unit(2);
                    let e1 = lambda + span * unit(3);
                    SymMat::from_rotation(2, (0, 1), theta, (e0, e1), 1.0)
                } else {
                    SymMat::diagonal(
                        3,
                        [
                            lambda + span * unit(1),
                            lambda + span * unit(2),
                            lambda + span * unit(3),
                        ],
                    )
                }
            }
            EllipticOperatorField::Scaled { inner, rho } => {
                inner.at([rho * x[0], rho * x[1], rho * x[2]], dim)
            }
        }
    }

    /// Whether any evaluation can produce off-diagonal entries.
    pub fn has_mixed(&self, dim: usize) -> bool {
        match self {
            EllipticOperatorField::Identity | EllipticOperatorField::Checkerboard { .. } => false,
            EllipticOperatorField::SmoothAnisotropic { .. } => true,
            EllipticOperatorField::RandomCells { .. } => dim == 2,
            EllipticOperatorField::Scaled { inner, .. } => inner.has_mixed(dim),
        }
    }

    /// Nominal ellipticity constant of the preset.
    pub fn lambda(&self) -> f64 {
        match self {
            EllipticOperatorField::Identity => 1.0,
            EllipticOperatorField::SmoothAnisotropic { lambda }
            | EllipticOperatorField::Checkerboard { lambda, .. }
            | EllipticOperatorField::RandomCells { lambda, .. } => *lambda,
            EllipticOperatorField::Scaled { inner, .. } => inner.lambda(),
        }
    }

    /// Blow-up `x -> x / rho` of the coefficient field.
    pub fn rescale(&self, rho: f64) -> EllipticOperatorField {
        match self {
            EllipticOperatorField::Identity => EllipticOperatorField::Identity,
            EllipticOperatorField::Scaled { inner, rho: r0 } => EllipticOperatorField::Scaled {
                inner: inner.clone(),
                rho: r0 * rho,
            },
            other => EllipticOperatorField::Scaled { inner: Box::new(other.clone()), rho },
        }
    }

    /// Verify the eigenvalue window at one point.
    pub fn validate_at(&self, x: [f64; 3], dim: usize) -> Result<()> {
        let lambda = self.lambda();
        let (lo, hi) = self.at(x, dim).eig_bounds();
        let slack = 1e-9;
        if lo < lambda - slack || hi > 1.0 / lambda + slack {
            let eig = if lo < lambda - slack { lo } else { hi };
            return Err(Error::EllipticityViolated { eig, lo: lambda, hi: 1.0 / lambda });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn rotation_preserves_spectrum() {
        let m = SymMat::from_rotation(2, (0, 1), 0.7, (1.0, 0.25), 1.0);
        let (lo, hi) = m.eig_bounds();
        assert_relative_eq!(lo, 0.25, max_relative = 1e-12);
        assert_relative_eq!(hi, 1.0, max_relative = 1e-12);
        assert!(m.a[0][1].abs() > 0.1);
    }

    #[test]
    fn jacobi_finds_3d_spectrum() {
        let m = SymMat::from_rotation(3, (0, 2), 1.1, (0.5, 0.9), 0.7);
        let (lo, hi) = m.eig_bounds();
        assert_relative_eq!(lo, 0.5, max_relative = 1e-10);
        assert_relative_eq!(hi, 0.9, max_relative = 1e-10);
    }

    #[test]
    fn random_cells_are_reproducible_and_elliptic() {
        let field = EllipticOperatorField::RandomCells { lambda: 0.5, size: 0.125, seed: 42 };
        let a = field.at([0.3, 0.44, 0.0], 2);
        let b = field.at([0.31, 0.45, 0.0], 2); // same cell
        assert_eq!(a, b);
        let other = EllipticOperatorField::RandomCells { lambda: 0.5, size: 0.125, seed: 43 };
        assert_ne!(a, other.at([0.3, 0.44, 0.0], 2));
        for k in 0..50 {
            let x = [0.05 * k as f64 - 1.2, 0.033 * k as f64, 0.0];
            field.validate_at(x, 2).unwrap();
        }
    }

    #[test]
    fn scaled_field_samples_blown_up_points() {
        let inner = EllipticOperatorField::Checkerboard { lambda: 0.5, size: 0.25 };
        let scaled = inner.rescale(0.5);
        let x = [0.3, 0.4, 0.0];
        assert_eq!(scaled.at(x, 2), inner.at([0.15, 0.2, 0.0], 2));
        let twice = scaled.rescale(0.5);
        assert_eq!(twice.at(x, 2), inner.at([0.075, 0.1, 0.0], 2));
        assert_abs_diff_eq!(twice.lambda(), 0.5);
    }
}
