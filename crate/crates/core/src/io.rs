//! Plain-text serialization.
//!
//! Matrix text:
//!
//! ```text
//! <dim>
//! re,im,re,im,...   (one line per row, dim pairs)
//! ```
//!
//! Phase-space field CSV:
//!
//! ```text
//! nx,np,x_extent,p_extent,hbar
//! <nx>,<np>,<x_extent>,<p_extent>,<hbar>
//! re,im,re,im,...   (one line per x index, np pairs; row-major)
//! ```
//!
//! All CSV floats are written with 17 significant digits so a read-back is
//! bit-exact.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::algebra::AlgebraElement;
use crate::dynamics::{Flatten, Trajectory};
use crate::fluid::CorrespondenceReport;
use crate::grid::SpatialGrid;
use crate::weyl::{PhaseSpaceGrid, WignerField};
use crate::{Error, Result, C64};

/// `{:.16e}`: 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn parse_f64(field: &str, line: usize) -> Result<f64> {
    field
        .trim()
        .parse()
        .map_err(|_| parse_err(line, format!("invalid number `{}`", field.trim())))
}

/// Parses a line of `re,im` pairs; `line` is 1-based for messages.
fn parse_pairs(text: &str, expected: usize, line: usize) -> Result<Vec<C64>> {
    let nums = text.split(',').map(|f| parse_f64(f, line)).collect::<Result<Vec<_>>>()?;
    if nums.len() != 2 * expected {
        return Err(parse_err(line, format!("expected {} numbers, found {}", 2 * expected, nums.len())));
    }
    Ok(nums.chunks(2).map(|c| C64::new(c[0], c[1])).collect())
}

fn write_pairs(out: &mut String, row: impl Iterator<Item = C64>) {
    let fields: Vec<String> = row.flat_map(|z| [fmt_f64(z.re), fmt_f64(z.im)]).collect();
    out.push_str(&fields.join(","));
    out.push('\n');
}

/// Non-empty lines with their 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

pub fn matrix_to_text(a: &AlgebraElement) -> String {
    let n = a.dim();
    let mut out = format!("{n}\n");
    for i in 0..n {
        write_pairs(&mut out, (0..n).map(|j| a.get(i, j)));
    }
    out
}

pub fn matrix_from_text(text: &str) -> Result<AlgebraElement> {
    let mut lines = content_lines(text);
    let (l0, head) = lines.next().ok_or_else(|| parse_err(1, "empty input"))?;
    let n: usize = head
        .parse()
        .map_err(|_| parse_err(l0, format!("invalid dimension `{head}`")))?;
    if n == 0 {
        return Err(parse_err(l0, "dimension must be positive"));
    }
    let mut entries = Vec::with_capacity(n * n);
    for _ in 0..n {
        let (ln, row) = lines
            .next()
            .ok_or_else(|| parse_err(l0 + n, format!("expected {n} matrix rows")))?;
        entries.extend(parse_pairs(row, n, ln)?);
    }
    if let Some((ln, _)) = lines.next() {
        return Err(parse_err(ln, "trailing content after matrix"));
    }
    AlgebraElement::from_rows(n, &entries)
}

/// CSV with header `t,<columns>` and one row per sample.
pub fn trajectory_to_csv<T: Flatten>(traj: &Trajectory<T>) -> String {
    let mut out = String::from("t");
    if let Some(first) = traj.values().first() {
        for c in first.column_names() {
            out.push(',');
            out.push_str(&c);
        }
    }
    out.push('\n');
    for (t, v) in traj.iter() {
        out.push_str(&fmt_f64(t));
        for x in v.flatten() {
            out.push(',');
            out.push_str(&fmt_f64(x));
        }
        out.push('\n');
    }
    out
}

pub fn wigner_to_csv(w: &WignerField) -> String {
    let g = w.grid();
    let mut out = String::from("nx,np,x_extent,p_extent,hbar\n");
    let _ = writeln!(
        out,
        "{},{},{},{},{}",
        g.nx(),
        g.np(),
        fmt_f64(g.x_extent()),
        fmt_f64(g.p_extent()),
        fmt_f64(g.hbar())
    );
    for j in 0..g.nx() {
        write_pairs(&mut out, (0..g.np()).map(|m| w.values()[(j, m)]));
    }
    out
}

/// Reads a field written by [`wigner_to_csv`]. The result is a sampled
/// field; any polynomial form is not stored.
pub fn wigner_from_csv(text: &str) -> Result<WignerField> {
    let mut lines = content_lines(text);
    let (l0, header) = lines.next().ok_or_else(|| parse_err(1, "empty input"))?;
    let names: Vec<&str> = header.split(',').map(str::trim).collect();
    if names != ["nx", "np", "x_extent", "p_extent", "hbar"] {
        return Err(parse_err(l0, format!("unexpected header `{header}`")));
    }
    let (l1, meta) = lines.next().ok_or_else(|| parse_err(l0 + 1, "missing grid line"))?;
    let fields: Vec<&str> = meta.split(',').collect();
    if fields.len() != 5 {
        return Err(parse_err(l1, "grid line needs 5 fields"));
    }
    let size = |f: &str| -> Result<usize> {
        f.trim()
            .parse()
            .map_err(|_| parse_err(l1, format!("invalid size `{}`", f.trim())))
    };
    let (nx, np) = (size(fields[0])?, size(fields[1])?);
    let grid = PhaseSpaceGrid::new(
        nx,
        np,
        parse_f64(fields[2], l1)?,
        parse_f64(fields[3], l1)?,
        parse_f64(fields[4], l1)?,
    )?;
    let mut values = DMatrix::zeros(nx, np);
    for j in 0..nx {
        let (ln, row) = lines
            .next()
            .ok_or_else(|| parse_err(l1 + j + 1, format!("expected {nx} value rows")))?;
        for (m, z) in parse_pairs(row, np, ln)?.into_iter().enumerate() {
            values[(j, m)] = z;
        }
    }
    if let Some((ln, _)) = lines.next() {
        return Err(parse_err(ln, "trailing content after field"));
    }
    WignerField::from_values(grid, values)
}

/// Snapshot CSV `x,rho,S`.
pub fn fluid_snapshot_csv(grid: &SpatialGrid, rho: &[f64], s: &[f64]) -> Result<String> {
    if rho.len() != grid.n() || s.len() != grid.n() {
        return Err(Error::DimensionError(rho.len().max(s.len()), grid.n()));
    }
    let mut out = String::from("x,rho,S\n");
    for ((x, r), s) in grid.points().into_iter().zip(rho).zip(s) {
        let _ = writeln!(out, "{},{},{}", fmt_f64(x), fmt_f64(*r), fmt_f64(*s));
    }
    Ok(out)
}

/// Report CSV `hbar,sup_gap_rho,sup_gap_S`.
pub fn correspondence_csv(report: &CorrespondenceReport) -> String {
    let mut out = String::from("hbar,sup_gap_rho,sup_gap_S\n");
    for r in &report.rows {
        let _ = writeln!(out, "{},{},{}", fmt_f64(r.hbar), fmt_f64(r.sup_gap_rho), fmt_f64(r.sup_gap_s));
    }
    out
}

/// Writes `contents` to `path`, creating parent directories.
pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    let io_err = |e: std::io::Error| Error::InvalidInput(format!("{}: {e}", path.display()));
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err)?;
    }
    fs::write(path, contents).map_err(io_err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::PhasePoint;
    use crate::I;

    #[test]
    fn matrix_round_trip_is_exact() {
        let a = AlgebraElement::from_fn(3, |i, j| C64::new(0.1 * i as f64 - 1.0 / 3.0, (j as f64).sqrt() * 1e-300));
        let text = matrix_to_text(&a);
        assert!(text.starts_with("3\n"));
        assert_eq!(matrix_from_text(&text).unwrap(), a);
    }

    #[test]
    fn matrix_parse_errors_carry_lines() {
        assert!(matches!(matrix_from_text(""), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(matrix_from_text("2\n1,0,0,0\n0,0,x,0\n"), Err(Error::Parse { line: 3, .. })));
        assert!(matches!(matrix_from_text("2\n1,0,0,0\n0,0\n"), Err(Error::Parse { line: 3, .. })));
        assert!(matches!(matrix_from_text("1\n1,0\n5\n"), Err(Error::Parse { line: 3, .. })));
        let ok = matrix_from_text("2\n1,0,0,-1\n0,1,2.5,0\n").unwrap();
        assert_eq!(ok.get(0, 1), -I);
        assert_eq!(ok.get(1, 0), I);
    }

    #[test]
    fn trajectory_csv_layout() {
        let traj = Trajectory::new(vec![0.0, 0.5], vec![PhasePoint::one(1.0, 2.0), PhasePoint::one(3.0, 4.0)]).unwrap();
        let csv = trajectory_to_csv(&traj);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "t,q0,p0");
        assert_eq!(lines.len(), 3);
        let row: Vec<f64> = lines[2].split(',').map(|f| f.parse().unwrap()).collect();
        assert_eq!(row, vec![0.5, 3.0, 4.0]);
    }

    #[test]
    fn wigner_round_trip_is_exact() {
        let grid = PhaseSpaceGrid::new(4, 8, 2.0, 3.0, 0.7).unwrap();
        let w = WignerField::from_fn(grid, |x, p| C64::new((x * p).sin() / 3.0, x - p / 7.0));
        let back = wigner_from_csv(&wigner_to_csv(&w)).unwrap();
        assert_eq!(back.grid(), w.grid());
        assert_eq!(back.values(), w.values());
        let bad = wigner_to_csv(&w).replace("nx,np", "nx,n_p");
        assert!(matches!(wigner_from_csv(&bad), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn fluid_csv_layout() {
        let grid = SpatialGrid::new(4, 1.0).unwrap();
        let csv = fluid_snapshot_csv(&grid, &[0.0, 1.0, 0.5, 0.0], &[0.0; 4]).unwrap();
        assert!(csv.starts_with("x,rho,S\n-1.0000000000000000e0,"));
        assert_eq!(csv.lines().count(), 5);
        assert!(fluid_snapshot_csv(&grid, &[0.0; 3], &[0.0; 4]).is_err());
    }
}
