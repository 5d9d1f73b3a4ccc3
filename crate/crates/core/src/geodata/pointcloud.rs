use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::grid::{GridGeometry, RasterGrid};
use super::ascii::DEFAULT_NODATA;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    pub points: Vec<Point3>,
}

impl PointCloud {
    pub fn new(points: Vec<Point3>) -> Self {
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

pub fn load_point_cloud(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_point_cloud(file)
}

/// Reads whitespace-delimited `x y z` lines. Blank lines and lines starting
/// with `#` are skipped; columns after the third are ignored.
pub fn read_point_cloud<R: Read>(reader: R) -> Result<PointCloud> {
    let mut points = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::parse(lineno, e.to_string()))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut coords = [0.0f64; 3];
        let mut fields = trimmed.split_whitespace();
        for (k, slot) in coords.iter_mut().enumerate() {
            let tok = fields
                .next()
                .ok_or_else(|| Error::parse(lineno, format!("expected 3 fields, found {k}")))?;
            *slot = tok
                .parse()
                .map_err(|_| Error::parse(lineno, format!("`{tok}` is not a number")))?;
        }
        let p = Point3::new(coords[0], coords[1], coords[2]);
        if !p.is_finite() {
            return Err(Error::parse(lineno, "non-finite coordinate"));
        }
        points.push(p);
    }
    if points.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(PointCloud { points })
}

pub fn write_point_cloud<W: Write>(cloud: &PointCloud, w: &mut W) -> std::io::Result<()> {
    for p in &cloud.points {
        writeln!(w, "{} {} {}", p.x, p.y, p.z)?;
    }
    Ok(())
}

pub fn save_point_cloud(cloud: &PointCloud, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_point_cloud(cloud, &mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElevationAggregator {
    Min,
    Max,
    Mean,
}

impl std::str::FromStr for ElevationAggregator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "min" => Ok(Self::Min),
            "max" => Ok(Self::Max),
            "mean" => Ok(Self::Mean),
            other => Err(Error::invalid(format!("unknown aggregator `{other}`"))),
        }
    }
}

/// Grid covering the bounding box of `cloud`, snapped outward to multiples of
/// `cell_size`. Cells are half-open `[lo, hi)` so a point on the far edge
/// gets a cell of its own.
pub fn cloud_geometry(cloud: &PointCloud, cell_size: f64) -> Result<GridGeometry> {
    if cloud.is_empty() {
        return Err(Error::EmptyInput);
    }
    if !(cell_size.is_finite() && cell_size > 0.0) {
        return Err(Error::invalid(format!("cell size must be > 0, got {cell_size}")));
    }
    let mut min_x = f64::INFINITY;
    let mut min_y = f64::INFINITY;
    let mut max_x = f64::NEG_INFINITY;
    let mut max_y = f64::NEG_INFINITY;
    for p in &cloud.points {
        if !p.is_finite() {
            return Err(Error::invalid(format!("non-finite point {p:?}")));
        }
        min_x = min_x.min(p.x);
        min_y = min_y.min(p.y);
        max_x = max_x.max(p.x);
        max_y = max_y.max(p.y);
    }
    let ox = (min_x / cell_size).floor() * cell_size;
    let oy = (min_y / cell_size).floor() * cell_size;
    let n_cols = ((max_x - ox) / cell_size).floor() as usize + 1;
    let n_rows = ((max_y - oy) / cell_size).floor() as usize + 1;
    GridGeometry::new(n_cols, n_rows, cell_size, ox, oy)
}

/// Builds a DSM/DEM style elevation grid from a point cloud.
pub fn rasterize_elevation(
    cloud: &PointCloud,
    cell_size: f64,
    aggregator: ElevationAggregator,
) -> Result<RasterGrid> {
    let geometry = cloud_geometry(cloud, cell_size)?;
    rasterize_elevation_onto(cloud, &geometry, aggregator)
}

/// Like [`rasterize_elevation`] but onto a caller-supplied geometry; points
/// outside it are ignored. Cells with no points hold nodata.
///
/// Per-cell elevations are sorted before aggregation, which makes the result
/// bit-identical under any permutation of the input points.
pub fn rasterize_elevation_onto(
    cloud: &PointCloud,
    geometry: &GridGeometry,
    aggregator: ElevationAggregator,
) -> Result<RasterGrid> {
    if cloud.is_empty() {
        return Err(Error::EmptyInput);
    }
    let cs = geometry.cell_size;
    let mut binned: Vec<(usize, f64)> = Vec::with_capacity(cloud.len());
    for p in &cloud.points {
        if !p.is_finite() {
            return Err(Error::invalid(format!("non-finite point {p:?}")));
        }
        let cf = ((p.x - geometry.origin_x) / cs).floor();
        let rf = ((p.y - geometry.origin_y) / cs).floor();
        if cf < 0.0 || rf < 0.0 {
            continue;
        }
        let (col, row_from_bottom) = (cf as usize, rf as usize);
        if col >= geometry.n_cols || row_from_bottom >= geometry.n_rows {
            continue;
        }
        let row = geometry.n_rows - 1 - row_from_bottom;
        binned.push((geometry.index(row, col), p.z));
    }
    binned.sort_unstable_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));

    let mut values = vec![DEFAULT_NODATA; geometry.len()];
    for group in binned.chunk_by(|a, b| a.0 == b.0) {
        let idx = group[0].0;
        values[idx] = match aggregator {
            ElevationAggregator::Min => group[0].1,
            ElevationAggregator::Max => group[group.len() - 1].1,
            ElevationAggregator::Mean => {
                group.iter().map(|g| g.1).sum::<f64>() / group.len() as f64
            }
        };
    }
    RasterGrid::new(*geometry, DEFAULT_NODATA, values)
}
