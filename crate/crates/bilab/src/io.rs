//! Field persistence: CSV with a two-line header carrying the grid shape and
//! spacings, then one `i,j,value` row per node in row-major order.  Values
//! are printed with 17 significant digits so a save/load round trip
//! reproduces every bit.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{DomainGrid, GridRef, ScalarField};

/// Render a field in the CSV layout.
pub fn field_to_csv(field: &ScalarField) -> String {
    let g = field.grid();
    let mut out = String::new();
    let _ = writeln!(out, "# {},{}", g.nx(), g.ny());
    let _ = writeln!(out, "# {:.17e},{:.17e}", g.hx(), g.hy());
    for j in 0..g.ny() {
        for i in 0..g.nx() {
            let _ = writeln!(out, "{},{},{:.17e}", i, j, field.at(i, j));
        }
    }
    out
}

pub fn save_field(path: &Path, field: &ScalarField) -> Result<()> {
    std::fs::write(path, field_to_csv(field))?;
    Ok(())
}

fn malformed(line: usize, message: impl Into<String>) -> Error {
    Error::FieldFormat {
        line,
        message: message.into(),
    }
}

/// Parse a field from the CSV layout.
pub fn field_from_csv(text: &str) -> Result<ScalarField> {
    let mut lines = text.lines().enumerate();
    let (_, first) = lines
        .next()
        .ok_or_else(|| malformed(1, "empty file, expected `# nx,ny`"))?;
    let shape = first
        .strip_prefix("# ")
        .ok_or_else(|| malformed(1, "expected `# nx,ny` header"))?;
    let mut it = shape.split(',');
    let nx: usize = it
        .next()
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| malformed(1, "could not parse nx"))?;
    let ny: usize = it
        .next()
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| malformed(1, "could not parse ny"))?;
    if it.next().is_some() {
        return Err(malformed(1, "trailing fields after `# nx,ny`"));
    }

    let (_, second) = lines
        .next()
        .ok_or_else(|| malformed(2, "missing `# hx,hy` header"))?;
    let spacing = second
        .strip_prefix("# ")
        .ok_or_else(|| malformed(2, "expected `# hx,hy` header"))?;
    let mut it = spacing.split(',');
    let hx: f64 = it
        .next()
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| malformed(2, "could not parse hx"))?;
    let hy: f64 = it
        .next()
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| malformed(2, "could not parse hy"))?;
    if it.next().is_some() {
        return Err(malformed(2, "trailing fields after `# hx,hy`"));
    }

    let grid = DomainGrid::new(nx, ny)?;
    let expect = |claim: f64, actual: f64, what: &str| -> Result<()> {
        if (claim - actual).abs() > 1e-12 * actual.abs() {
            return Err(malformed(
                2,
                format!("{what} {claim} does not match grid value {actual}"),
            ));
        }
        Ok(())
    };
    expect(hx, grid.hx(), "hx")?;
    expect(hy, grid.hy(), "hy")?;

    let mut values = vec![0.0f64; nx * ny];
    let mut seen = vec![false; nx * ny];
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut it = line.split(',');
        let i: usize = it
            .next()
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| malformed(lineno, "could not parse column index"))?;
        let j: usize = it
            .next()
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| malformed(lineno, "could not parse row index"))?;
        let v: f64 = it
            .next()
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| malformed(lineno, "could not parse value"))?;
        if it.next().is_some() {
            return Err(malformed(lineno, "trailing fields after value"));
        }
        if i >= nx || j >= ny {
            return Err(malformed(
                lineno,
                format!("node ({i}, {j}) outside {nx}x{ny} grid"),
            ));
        }
        let k = j * nx + i;
        if seen[k] {
            return Err(malformed(lineno, format!("duplicate node ({i}, {j})")));
        }
        seen[k] = true;
        values[k] = v;
    }
    if let Some(k) = seen.iter().position(|&s| !s) {
        let (i, j) = (k % nx, k / nx);
        return Err(malformed(0, format!("missing node ({i}, {j})")));
    }
    ScalarField::from_values(&grid, values)
}

pub fn load_field(path: &Path) -> Result<ScalarField> {
    let text = std::fs::read_to_string(path)?;
    field_from_csv(&text)
}

/// Load a field and insist it lives on a particular grid.
pub fn load_field_on(path: &Path, grid: &GridRef) -> Result<ScalarField> {
    let f = load_field(path)?;
    if !grid.same_grid(f.grid()) {
        return Err(Error::Shape(format!(
            "field in {} is {}x{}, expected {}x{}",
            path.display(),
            f.grid().nx(),
            f.grid().ny(),
            grid.nx(),
            grid.ny()
        )));
    }
    Ok(f)
}

/// Write a generic CSV table: a `# `-prefixed header line, then rows.
pub fn save_table(path: &Path, header: &str, rows: &[Vec<String>]) -> Result<()> {
    let mut out = String::new();
    let _ = writeln!(out, "# {header}");
    for row in rows {
        let _ = writeln!(out, "{}", row.join(","));
    }
    std::fs::write(path, out)?;
    Ok(())
}
