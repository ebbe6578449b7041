//! Field snapshots as CSV with columns `x[, y], u, v`, one row per node in
//! storage order, every number written with 17 significant digits.

use std::path::Path;

use chemotaxis_core::{Error, Grid, Result, ScalarField};

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

pub fn write(path: &Path, u: &ScalarField, v: &ScalarField) -> Result<()> {
    let grid = u.grid();
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    let header: &[&str] = if grid.dim() == 1 { &["x", "u", "v"] } else { &["x", "y", "u", "v"] };
    w.write_record(header).map_err(csv_err(path))?;
    for k in 0..grid.len() {
        let c = grid.coords(k);
        let mut row: Vec<String> = c[..grid.dim()].iter().map(|&x| num(x)).collect();
        row.push(num(u.values()[k]));
        row.push(num(v.values()[k]));
        w.write_record(&row).map_err(csv_err(path))?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads the `u` column of a snapshot taken on `grid`. Node coordinates must
/// match the grid.
pub fn read_u(path: &Path, grid: Grid) -> Result<ScalarField> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let headers = r.headers().map_err(csv_err(path))?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let u_col = col("u").ok_or_else(|| Error::Parse {
        line: 1,
        message: format!("{}: no `u` column", path.display()),
    })?;
    let coord_cols: Vec<usize> = ["x", "y"][..grid.dim()]
        .iter()
        .map(|c| {
            col(c).ok_or_else(|| Error::Parse {
                line: 1,
                message: format!("{}: no `{c}` column for a {}-dimensional grid", path.display(), grid.dim()),
            })
        })
        .collect::<Result<_>>()?;
    let tol = 1e-9 * grid.lengths().iter().copied().fold(0.0, f64::max);
    let mut values = Vec::with_capacity(grid.len());
    for (k, record) in r.records().enumerate() {
        let record = record.map_err(csv_err(path))?;
        let line = k + 2;
        if k >= grid.len() {
            return Err(Error::Parse {
                line,
                message: format!("{}: more rows than the {} grid nodes", path.display(), grid.len()),
            });
        }
        let field = |c: usize| -> Result<f64> {
            record.get(c).and_then(|s| s.trim().parse().ok()).ok_or_else(|| Error::Parse {
                line,
                message: format!("{}: column {} is not a number", path.display(), c + 1),
            })
        };
        let expect = grid.coords(k);
        for (axis, &c) in coord_cols.iter().enumerate() {
            if (field(c)? - expect[axis]).abs() > tol {
                return Err(Error::Parse {
                    line,
                    message: format!("{}: node coordinates do not match the configured grid", path.display()),
                });
            }
        }
        values.push(field(u_col)?);
    }
    if values.len() != grid.len() {
        return Err(Error::Parse {
            line: values.len() + 1,
            message: format!("{}: {} rows for {} grid nodes", path.display(), values.len(), grid.len()),
        });
    }
    ScalarField::new(grid, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chemotaxis_core::solve_helmholtz;

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        for grid in [Grid::line(1.3, 17).unwrap(), Grid::rect([1.0, 2.0], [9, 11]).unwrap()] {
            let u = ScalarField::from_fn(grid, |x| (x[0] * 7.1).sin().exp() + x[1] / 3.0);
            let v = solve_helmholtz(&u);
            let path = dir.path().join(format!("snap{}.csv", grid.dim()));
            write(&path, &u, &v).unwrap();
            assert_eq!(read_u(&path, grid).unwrap(), u);
        }
    }

    #[test]
    fn mismatched_grid_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let grid = Grid::line(1.0, 16).unwrap();
        let u = ScalarField::constant(grid, 1.0);
        let path = dir.path().join("s.csv");
        write(&path, &u, &u).unwrap();
        assert!(read_u(&path, Grid::line(2.0, 16).unwrap()).is_err());
        assert!(read_u(&path, Grid::line(1.0, 17).unwrap()).is_err());
        assert!(read_u(&path, Grid::line(1.0, 15).unwrap()).is_err());
    }
}
