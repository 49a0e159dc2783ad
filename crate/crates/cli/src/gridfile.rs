//! Right-hand sides sampled from a grid CSV.
//!
//! The accepted layout is the one `solve.csv` is written in: header
//! `x1,xn,w` (2-d) or `x1,x2,xn,w` (3-d), one node per row, uniform spacing.
//! The field evaluates by linear interpolation and is zero outside the
//! sampled box.

use anyhow::{bail, Context, Result};
use borderlab::grid::SampleField;
use borderlab::{Grid, GridFunction};

pub struct GridFileField {
    values: GridFunction,
    dim: usize,
}

/// Sorted deduplicated axis coordinates, with duplicates collapsed at a
/// spacing-relative tolerance.
fn axis_coords(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| a.total_cmp(b));
    let mut out: Vec<f64> = Vec::with_capacity(v.len());
    for x in v {
        if out.last().map_or(true, |&l| x - l > 1e-12 * (1.0 + x.abs())) {
            out.push(x);
        }
    }
    out
}

fn uniform_spacing(coords: &[f64], axis: &str) -> Result<f64> {
    if coords.len() < 2 {
        bail!("axis {axis} needs at least two distinct coordinates");
    }
    let h = (coords[coords.len() - 1] - coords[0]) / (coords.len() - 1) as f64;
    for (i, pair) in coords.windows(2).enumerate() {
        let d = pair[1] - pair[0];
        if (d - h).abs() > 1e-6 * h {
            bail!("axis {axis} is not uniformly spaced at row gap {i}: {d} vs {h}");
        }
    }
    Ok(h)
}

impl GridFileField {
    pub fn load(text: &str, dim: usize) -> Result<GridFileField> {
        let mut lines = text.lines();
        let header = lines.next().context("empty grid file")?;
        let expected = if dim == 2 { "x1,xn,w" } else { "x1,x2,xn,w" };
        if header.trim() != expected {
            bail!("expected header {expected:?} for n = {dim}, got {:?}", header.trim());
        }
        let cols = dim + 1;
        let mut points: Vec<([f64; 3], f64)> = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != cols {
                bail!("row {}: expected {cols} columns, got {}", i + 2, fields.len());
            }
            let mut x = [0.0f64; 3];
            for (a, f) in fields[..dim].iter().enumerate() {
                x[a] = f.parse().with_context(|| format!("row {}: bad number {f:?}", i + 2))?;
            }
            let w: f64 =
                fields[dim].parse().with_context(|| format!("row {}: bad value", i + 2))?;
            points.push((x, w));
        }
        if points.is_empty() {
            bail!("grid file has no data rows");
        }

        let mut shape = [1usize; 3];
        let mut origin = [0.0f64; 3];
        let mut h = f64::NAN;
        for a in 0..dim {
            let coords = axis_coords(points.iter().map(|(x, _)| x[a]).collect());
            let ha = uniform_spacing(&coords, &format!("{}", a + 1))?;
            if h.is_nan() {
                h = ha;
            } else if (ha - h).abs() > 1e-6 * h {
                bail!("axes disagree on spacing: {ha} vs {h}");
            }
            shape[a] = coords.len();
            origin[a] = coords[0];
        }
        let grid = Grid::new(dim, shape, origin, h)?;
        if points.len() != grid.len() {
            bail!("grid is {} nodes but the file has {} rows", grid.len(), points.len());
        }
        let mut values = GridFunction::zeros(grid);
        for (x, w) in points {
            let mut idx = [0usize; 3];
            for a in 0..dim {
                let t = (x[a] - origin[a]) / h;
                let i = t.round();
                if (t - i).abs() > 1e-6 {
                    bail!("node {x:?} is off-lattice");
                }
                idx[a] = i as usize;
            }
            values.set(idx, w);
        }
        Ok(GridFileField { values, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

impl SampleField for GridFileField {
    fn eval(&self, x: [f64; 3]) -> f64 {
        if !self.values.grid.covers(x, 1e-9) {
            return 0.0;
        }
        self.values.linear().eval(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three_by_two() -> String {
        let mut s = String::from("x1,xn,w\n");
        for j in 0..2 {
            for i in 0..3 {
                let x = -0.5 + 0.5 * i as f64;
                let y = 0.5 * j as f64;
                s.push_str(&format!("{x:e},{y:e},{:e}\n", x + 2.0 * y));
            }
        }
        s
    }

    #[test]
    fn round_trips_nodes_and_interpolates_between() {
        let f = GridFileField::load(&three_by_two(), 2).unwrap();
        assert_eq!(f.dim(), 2);
        assert_eq!(f.eval([0.0, 0.5, 0.0]), 1.0);
        // Linear data is reproduced exactly between nodes.
        assert!((f.eval([0.25, 0.25, 0.0]) - 0.75).abs() < 1e-12);
        // Outside the sampled box the field vanishes.
        assert_eq!(f.eval([2.0, 0.0, 0.0]), 0.0);
    }

    #[test]
    fn header_and_shape_mismatches_are_reported() {
        assert!(GridFileField::load("x,y,w\n0,0,0\n", 2).is_err());
        let mut s = three_by_two();
        s.push_str("9e0,9e0,0e0\n");
        let e = GridFileField::load(&s, 2).unwrap_err().to_string();
        assert!(e.contains("rows") || e.contains("spaced"), "{e}");
    }
}
