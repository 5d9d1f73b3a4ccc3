//! ESRI ASCII grid reader and writer.
//!
//! ```text
//! ncols         4
//! nrows         3
//! xllcorner     500000.0
//! yllcorner     4200000.0
//! cellsize      0.05
//! NODATA_value  -9999
//! 0.12 0.13 0.11 0.10
//! ...
//! ```
//!
//! Header keys are case-insensitive. `xllcenter`/`yllcenter` are accepted and
//! converted to corner coordinates. Each data line must hold exactly `ncols`
//! values. Values are written with Rust's shortest round-trip float format, so
//! a write followed by a read reproduces every finite value bit-exactly.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::grid::{GridGeometry, RasterGrid};
use crate::error::{Error, Result};

pub const DEFAULT_NODATA: f64 = -9999.0;

#[derive(Default)]
struct Header {
    ncols: Option<usize>,
    nrows: Option<usize>,
    xll: Option<(f64, bool)>,
    yll: Option<(f64, bool)>,
    cellsize: Option<f64>,
    nodata: Option<f64>,
}

pub fn load_raster(path: impl AsRef<Path>) -> Result<RasterGrid> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_ascii_grid(file)
}

pub fn save_raster(grid: &RasterGrid, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_ascii_grid(grid, &mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_ascii_grid<R: Read>(reader: R) -> Result<RasterGrid> {
    let reader = BufReader::new(reader);
    let mut header = Header::default();
    let mut values: Vec<f64> = Vec::new();
    let mut rows_seen = 0usize;
    let mut in_body = false;

    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::parse(lineno, e.to_string()))?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let mut tokens = trimmed.split_whitespace();
        let first = tokens.next().unwrap_or_default();

        if !in_body && first.starts_with(|c: char| c.is_ascii_alphabetic()) {
            let key = first.to_ascii_lowercase();
            let value = tokens
                .next()
                .ok_or_else(|| Error::parse(lineno, format!("header `{first}` has no value")))?;
            if tokens.next().is_some() {
                return Err(Error::parse(lineno, format!("header `{first}` has extra tokens")));
            }
            let num = |what: &str| -> Result<f64> {
                value
                    .parse::<f64>()
                    .map_err(|_| Error::parse(lineno, format!("{what}: `{value}` is not a number")))
            };
            let count = |what: &str| -> Result<usize> {
                value
                    .parse::<usize>()
                    .map_err(|_| Error::parse(lineno, format!("{what}: `{value}` is not a count")))
            };
            match key.as_str() {
                "ncols" => header.ncols = Some(count("ncols")?),
                "nrows" => header.nrows = Some(count("nrows")?),
                "xllcorner" => header.xll = Some((num("xllcorner")?, false)),
                "yllcorner" => header.yll = Some((num("yllcorner")?, false)),
                "xllcenter" => header.xll = Some((num("xllcenter")?, true)),
                "yllcenter" => header.yll = Some((num("yllcenter")?, true)),
                "cellsize" => header.cellsize = Some(num("cellsize")?),
                "nodata_value" => header.nodata = Some(num("NODATA_value")?),
                _ => return Err(Error::parse(lineno, format!("unknown header key `{first}`"))),
            }
            continue;
        }

        if !in_body {
            in_body = true;
            let ncols = header.ncols.ok_or_else(|| Error::parse(lineno, "missing ncols"))?;
            let nrows = header.nrows.ok_or_else(|| Error::parse(lineno, "missing nrows"))?;
            if header.xll.is_none() || header.yll.is_none() || header.cellsize.is_none() {
                return Err(Error::parse(
                    lineno,
                    "header requires xllcorner, yllcorner and cellsize",
                ));
            }
            values.reserve(ncols * nrows);
        }

        let ncols = header.ncols.unwrap_or_default();
        let before = values.len();
        for tok in trimmed.split_whitespace() {
            let v = tok
                .parse::<f64>()
                .map_err(|_| Error::parse(lineno, format!("`{tok}` is not a number")))?;
            values.push(v);
        }
        let got = values.len() - before;
        if got != ncols {
            return Err(Error::parse(
                lineno,
                format!("expected {ncols} values in row, found {got}"),
            ));
        }
        rows_seen += 1;
    }

    let ncols = header.ncols.ok_or_else(|| Error::parse(0, "missing ncols"))?;
    let nrows = header.nrows.ok_or_else(|| Error::parse(0, "missing nrows"))?;
    if rows_seen != nrows {
        return Err(Error::parse(
            0,
            format!("expected {nrows} data rows, found {rows_seen}"),
        ));
    }
    let cellsize = header.cellsize.ok_or_else(|| Error::parse(0, "missing cellsize"))?;
    let (mut x, x_center) = header.xll.ok_or_else(|| Error::parse(0, "missing xllcorner"))?;
    let (mut y, y_center) = header.yll.ok_or_else(|| Error::parse(0, "missing yllcorner"))?;
    if x_center {
        x -= cellsize / 2.0;
    }
    if y_center {
        y -= cellsize / 2.0;
    }
    let geometry = GridGeometry::new(ncols, nrows, cellsize, x, y)
        .map_err(|e| Error::parse(0, e.to_string()))?;
    RasterGrid::new(geometry, header.nodata.unwrap_or(DEFAULT_NODATA), values)
}

pub fn write_ascii_grid<W: Write>(grid: &RasterGrid, w: &mut W) -> std::io::Result<()> {
    let g = grid.geometry();
    writeln!(w, "ncols {}", g.n_cols)?;
    writeln!(w, "nrows {}", g.n_rows)?;
    writeln!(w, "xllcorner {}", g.origin_x)?;
    writeln!(w, "yllcorner {}", g.origin_y)?;
    writeln!(w, "cellsize {}", g.cell_size)?;
    writeln!(w, "NODATA_value {}", grid.nodata())?;
    for row in grid.values().chunks(g.n_cols) {
        let mut first = true;
        for v in row {
            if !first {
                w.write_all(b" ")?;
            }
            first = false;
            write!(w, "{v}")?;
        }
        w.write_all(b"\n")?;
    }
    Ok(())
}
