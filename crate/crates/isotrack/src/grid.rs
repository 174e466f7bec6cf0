//! Plain-text grid format: a `GRID nx ny x0 y0 dx dy` header followed by `ny`
//! rows of `nx` values, row `j` lying at `y0 + j*dy`. Lines starting with `#`
//! are comments.

use std::fs;
use std::path::Path;

use isotrack_core::field::Grid;

use crate::output::{sig9, write_atomic};
use crate::{Error, Result};

fn parse_num<T: std::str::FromStr>(token: &str, line: usize, what: &str) -> Result<T> {
    token.parse().map_err(|_| Error::Parse {
        line,
        message: format!("{what} is not a valid number: `{token}`"),
    })
}

pub fn parse_grid(text: &str) -> Result<Grid> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (hline, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        message: "missing GRID header".into(),
    })?;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    if tokens.first() != Some(&"GRID") || tokens.len() != 7 {
        return Err(Error::Parse {
            line: hline,
            message: "header must read `GRID nx ny x0 y0 dx dy`".into(),
        });
    }
    let nx: usize = parse_num(tokens[1], hline, "nx")?;
    let ny: usize = parse_num(tokens[2], hline, "ny")?;
    let x0: f64 = parse_num(tokens[3], hline, "x0")?;
    let y0: f64 = parse_num(tokens[4], hline, "y0")?;
    let dx: f64 = parse_num(tokens[5], hline, "dx")?;
    let dy: f64 = parse_num(tokens[6], hline, "dy")?;

    let mut values = Vec::with_capacity(nx.saturating_mul(ny).min(1 << 24));
    let mut rows = 0;
    let mut last = hline;
    for (line, row) in lines {
        if rows == ny {
            return Err(Error::DimensionMismatch {
                line,
                message: format!("expected {ny} rows, found more"),
            });
        }
        let before = values.len();
        for token in row.split_whitespace() {
            values.push(parse_num::<f64>(token, line, "grid value")?);
        }
        if values.len() - before != nx {
            return Err(Error::DimensionMismatch {
                line,
                message: format!("expected {nx} values, found {}", values.len() - before),
            });
        }
        rows += 1;
        last = line;
    }
    if rows != ny {
        return Err(Error::DimensionMismatch {
            line: last,
            message: format!("expected {ny} rows, found {rows}"),
        });
    }
    Grid::new(nx, ny, x0, y0, dx, dy, values).map_err(|e| Error::Parse {
        line: hline,
        message: e.to_string(),
    })
}

pub fn load_grid(path: &Path) -> Result<Grid> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_grid(&text)
}

pub fn format_grid(grid: &Grid) -> String {
    let (x0, y0) = grid.origin();
    let (dx, dy) = grid.spacing();
    let mut out = format!(
        "GRID {} {} {} {} {} {}\n",
        grid.nx(),
        grid.ny(),
        sig9(x0),
        sig9(y0),
        sig9(dx),
        sig9(dy)
    );
    for row in grid.values().chunks(grid.nx()) {
        let cells: Vec<String> = row.iter().map(|&v| sig9(v)).collect();
        out.push_str(&cells.join(" "));
        out.push('\n');
    }
    out
}

pub fn save_grid(grid: &Grid, path: &Path) -> Result<()> {
    write_atomic(path, format_grid(grid).as_bytes())
}
