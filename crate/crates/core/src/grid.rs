//! Uniform grids in two or three dimensions and functions sampled on them.
//!
//! A [`Grid`] is a tensor lattice `origin + h * (i, j, k)`. Two-dimensional
//! grids are stored with `shape[2] == 1` so that all downstream code can be
//! written once over `[usize; 3]` indices. The vertical axis (the one the
//! Dirichlet boundary graphs over) is always axis `dim - 1`.

use crate::error::{Error, Result};

/// A uniform node-centred lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub dim: usize,
    /// Node counts per axis; `shape[2] == 1` in dimension 2.
    pub shape: [usize; 3],
    /// Position of node `(0, 0, 0)`.
    pub origin: [f64; 3],
    /// Mesh width, shared by all axes.
    pub h: f64,
}

impl Grid {
    pub fn new(dim: usize, shape: [usize; 3], origin: [f64; 3], h: f64) -> Result<Grid> {
        if dim != 2 && dim != 3 {
            return Err(Error::InvalidParameter(format!("dim must be 2 or 3, got {dim}")));
        }
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidParameter(format!("mesh width must be positive, got {h}")));
        }
        if dim == 2 && shape[2] != 1 {
            return Err(Error::InvalidParameter(format!(
                "2-d grid must have shape[2] == 1, got {}",
                shape[2]
            )));
        }
        for a in 0..dim {
            if shape[a] < 2 {
                return Err(Error::InvalidParameter(format!(
                    "axis {a} needs at least 2 nodes, got {}",
                    shape[a]
                )));
            }
        }
        Ok(Grid { dim, shape, origin, h })
    }

    pub fn len(&self) -> usize {
        self.shape[0] * self.shape[1] * self.shape[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Linear index with axis 0 fastest.
    pub fn lin(&self, idx: [usize; 3]) -> usize {
        debug_assert!(idx[0] < self.shape[0] && idx[1] < self.shape[1] && idx[2] < self.shape[2]);
        (idx[2] * self.shape[1] + idx[1]) * self.shape[0] + idx[0]
    }

    pub fn idx(&self, lin: usize) -> [usize; 3] {
        let i = lin % self.shape[0];
        let rest = lin / self.shape[0];
        [i, rest % self.shape[1], rest / self.shape[1]]
    }

    pub fn pos(&self, idx: [usize; 3]) -> [f64; 3] {
        [
            self.origin[0] + self.h * idx[0] as f64,
            self.origin[1] + self.h * idx[1] as f64,
            self.origin[2] + self.h * idx[2] as f64,
        ]
    }

    /// Iterate over all node indices, axis 0 fastest.
    pub fn nodes(&self) -> impl Iterator<Item = [usize; 3]> + '_ {
        (0..self.len()).map(move |l| self.idx(l))
    }

    /// Largest coordinate along each axis (`origin + h * (shape - 1)`).
    pub fn upper(&self) -> [f64; 3] {
        let mut u = self.origin;
        for a in 0..3 {
            u[a] += self.h * (self.shape[a] - 1) as f64;
        }
        u
    }

    /// Whether `x` lies inside the closed bounding box, with slack `tol`.
    pub fn covers(&self, x: [f64; 3], tol: f64) -> bool {
        let u = self.upper();
        (0..self.dim).all(|a| x[a] >= self.origin[a] - tol && x[a] <= u[a] + tol)
    }

    pub fn step(&self, idx: [usize; 3], axis: usize, dir: isize) -> Option<[usize; 3]> {
        let mut out = idx;
        let v = idx[axis] as isize + dir;
        if v < 0 || v as usize >= self.shape[axis] {
            return None;
        }
        out[axis] = v as usize;
        Some(out)
    }
}

/// Anything that can be evaluated at a point of the plane or space.
///
/// Implemented by analytic fields, grid interpolants and the multiscale
/// solution object, so that boundary data for a solve can come from any of
/// them interchangeably.
pub trait SampleField: Sync {
    fn eval(&self, x: [f64; 3]) -> f64;
}

impl<'a, T: SampleField + ?Sized> SampleField for &'a T {
    fn eval(&self, x: [f64; 3]) -> f64 {
        (**self).eval(x)
    }
}

/// A field defined by a closure.
pub struct FieldFn<F: Fn([f64; 3]) -> f64 + Sync>(pub F);

impl<F: Fn([f64; 3]) -> f64 + Sync> SampleField for FieldFn<F> {
    fn eval(&self, x: [f64; 3]) -> f64 {
        (self.0)(x)
    }
}

/// The zero field.
pub struct ZeroField;

impl SampleField for ZeroField {
    fn eval(&self, _x: [f64; 3]) -> f64 {
        0.0
    }
}

/// Values attached to the nodes of a [`Grid`].
#[derive(Debug, Clone)]
pub struct GridFunction {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn zeros(grid: Grid) -> GridFunction {
        let n = grid.len();
        GridFunction { grid, values: vec![0.0; n] }
    }

    pub fn from_fn(grid: Grid, f: impl Fn([f64; 3]) -> f64) -> GridFunction {
        let values = (0..grid.len()).map(|l| f(grid.pos(grid.idx(l)))).collect();
        GridFunction { grid, values }
    }

    pub fn get(&self, idx: [usize; 3]) -> f64 {
        self.values[self.grid.lin(idx)]
    }

    pub fn set(&mut self, idx: [usize; 3], v: f64) {
        let l = self.grid.lin(idx);
        self.values[l] = v;
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Multilinear interpolant, clamped to the bounding box.
    pub fn linear(&self) -> Interp<'_> {
        Interp { f: self, order: 1 }
    }

    /// Tensor-quadratic interpolant, exact on quadratic polynomials.
    pub fn quadratic(&self) -> Interp<'_> {
        Interp { f: self, order: 2 }
    }
}

/// Interpolating view of a [`GridFunction`].
pub struct Interp<'a> {
    f: &'a GridFunction,
    order: usize,
}

/// Per-axis stencil: up to three node indices with Lagrange weights.
fn axis_weights(t: f64, n: usize, order: usize) -> ([usize; 3], [f64; 3]) {
    if n == 1 {
        return ([0, 0, 0], [1.0, 0.0, 0.0]);
    }
    if order == 1 || n == 2 {
        let i = (t.floor() as isize).clamp(0, n as isize - 2) as usize;
        let d = t - i as f64;
        return ([i, i + 1, i + 1], [1.0 - d, d, 0.0]);
    }
    // Centre the 3-point stencil on the nearest node, shifted inward at the
    // edges. The Lagrange weights on offsets {-1, 0, 1} stay exact on
    // quadratics for any offset, including the mild extrapolation the shift
    // introduces.
    let c = (t.round() as isize).clamp(1, n as isize - 2) as usize;
    let d = t - c as f64;
    let w = [0.5 * d * (d - 1.0), 1.0 - d * d, 0.5 * d * (d + 1.0)];
    ([c - 1, c, c + 1], w)
}

impl<'a> SampleField for Interp<'a> {
    fn eval(&self, x: [f64; 3]) -> f64 {
        let g = &self.f.grid;
        let mut ids = [[0usize; 3]; 3];
        let mut wts = [[0f64; 3]; 3];
        for a in 0..3 {
            let t = (x[a] - g.origin[a]) / g.h;
            let (i, w) = axis_weights(t, g.shape[a], self.order);
            ids[a] = i;
            wts[a] = w;
        }
        let mut acc = 0.0;
        for (kz, &wz) in wts[2].iter().enumerate() {
            if wz == 0.0 {
                continue;
            }
            for (ky, &wy) in wts[1].iter().enumerate() {
                let wyz = wy * wz;
                if wyz == 0.0 {
                    continue;
                }
                for (kx, &wx) in wts[0].iter().enumerate() {
                    if wx == 0.0 {
                        continue;
                    }
                    acc += wx * wyz * self.f.get([ids[0][kx], ids[1][ky], ids[2][kz]]);
                }
            }
        }
        acc
    }
}
