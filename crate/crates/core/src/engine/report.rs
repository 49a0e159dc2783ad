//! Flat-file emission of pipeline reports.
//!
//! All floats are written as `{:.12e}` so that reruns of a deterministic
//! pipeline produce byte-identical files.

use std::fs;
use std::path::Path;

use crate::engine::derivative::DecayReport;
use crate::engine::envelope::OscillationTrace;
use crate::engine::loglip::LogLipReport;
use crate::error::Result;
use crate::grid::GridFunction;

pub fn fmt_f(x: f64) -> String {
    format!("{x:.12e}")
}

/// Write a CSV table with LF line endings.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn write_decay_csv(path: &Path, rep: &DecayReport) -> Result<()> {
    let rows: Vec<Vec<String>> = rep
        .rows
        .iter()
        .map(|r| {
            vec![
                r.j.to_string(),
                fmt_f(r.r),
                fmt_f(r.sigma),
                fmt_f(r.a_j),
                fmt_f(r.g_j),
                fmt_f(r.c_j),
                fmt_f(r.c_of_r),
            ]
        })
        .collect();
    write_csv(path, &["j", "r_j", "sigma_j", "a_j", "G_j", "C_j", "C_of_r"], &rows)
}

pub fn write_c_of_r_csv(path: &Path, rep: &DecayReport) -> Result<()> {
    let rows: Vec<Vec<String>> =
        rep.rows.iter().map(|r| vec![fmt_f(r.r), fmt_f(r.c_of_r)]).collect();
    write_csv(path, &["r", "C_of_r"], &rows)
}

pub fn write_loglip_csv(path: &Path, rep: &LogLipReport) -> Result<()> {
    let rows: Vec<Vec<String>> = rep
        .steps
        .iter()
        .map(|s| {
            vec![
                s.k.to_string(),
                fmt_f(s.radius),
                fmt_f(s.sup_u),
                fmt_f(s.slope),
                fmt_f(s.residual),
                fmt_f(s.bound),
                s.ok.to_string(),
            ]
        })
        .collect();
    write_csv(path, &["k", "radius", "sup_u", "slope", "residual", "bound", "ok"], &rows)
}

pub fn write_cascade_csv(path: &Path, trace: &OscillationTrace) -> Result<()> {
    let rows: Vec<Vec<String>> = trace
        .levels
        .iter()
        .map(|l| {
            vec![
                l.level.to_string(),
                fmt_f(l.radius),
                fmt_f(l.lower),
                fmt_f(l.upper),
                fmt_f(l.defect),
                fmt_f(l.osc),
                l.contraction_ok.to_string(),
            ]
        })
        .collect();
    write_csv(
        path,
        &["level", "radius", "lower", "upper", "defect", "osc", "contraction_ok"],
        &rows,
    )
}

/// Dump a grid function as one row per node (exterior nodes included, value
/// zero there by the solver's extension convention).
pub fn write_grid_csv(path: &Path, f: &GridFunction, dim: usize) -> Result<()> {
    let mut rows = Vec::with_capacity(f.grid.len());
    for idx in f.grid.nodes() {
        let x = f.grid.pos(idx);
        let mut row = Vec::with_capacity(dim + 1);
        for c in x.iter().take(dim) {
            row.push(fmt_f(*c));
        }
        row.push(fmt_f(f.get(idx)));
        rows.push(row);
    }
    let header: &[&str] = if dim == 2 { &["x1", "xn", "w"] } else { &["x1", "x2", "xn", "w"] };
    write_csv(path, header, &rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_is_deterministic_and_lf_terminated() {
        let dir = std::env::temp_dir().join("borderlab-report-test");
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("t.csv");
        let rows = vec![vec![fmt_f(1.0), fmt_f(-0.125)], vec![fmt_f(3e-7), fmt_f(0.0)]];
        write_csv(&path, &["a", "b"], &rows).unwrap();
        let first = fs::read(&path).unwrap();
        write_csv(&path, &["a", "b"], &rows).unwrap();
        let second = fs::read(&path).unwrap();
        assert_eq!(first, second);
        let text = String::from_utf8(first).unwrap();
        assert!(text.ends_with('\n') && !text.contains('\r'));
        assert!(text.starts_with("a,b\n1.000000000000e0,-1.250000000000e-1\n"));
        fs::remove_file(&path).ok();
    }
}
