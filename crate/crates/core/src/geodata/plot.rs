use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use super::grid::RasterGrid;
use crate::error::{Error, Result};

/// Axis-aligned bounding box `(min_x, min_y, max_x, max_y)`.
pub type Bounds = (f64, f64, f64, f64);

/// Anything that can decide whether a point belongs to it.
pub trait Region {
    fn contains(&self, x: f64, y: f64) -> bool;

    fn bounds(&self) -> Bounds;

    /// Label used in error messages.
    fn label(&self) -> &str;
}

/// A field plot: a simple polygon plus identity metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotGeometry {
    plot_id: String,
    germplasm_id: String,
    vertices: Vec<(f64, f64)>,
    bounds: Bounds,
}

impl PlotGeometry {
    /// Validates the ring: at least three distinct vertices, finite
    /// coordinates, no self-intersections and non-zero area. A closing vertex
    /// equal to the first one is dropped.
    pub fn new(
        plot_id: impl Into<String>,
        germplasm_id: impl Into<String>,
        mut vertices: Vec<(f64, f64)>,
    ) -> Result<Self> {
        let plot_id = plot_id.into();
        if vertices.len() > 1 && vertices.first() == vertices.last() {
            vertices.pop();
        }
        if vertices.len() < 3 {
            return Err(Error::invalid(format!(
                "plot `{plot_id}` needs at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        if vertices.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(Error::invalid(format!("plot `{plot_id}` has non-finite vertices")));
        }
        if signed_area(&vertices).abs() <= 0.0 {
            return Err(Error::invalid(format!("plot `{plot_id}` has zero area")));
        }
        if !is_simple(&vertices) {
            return Err(Error::invalid(format!("plot `{plot_id}` is self-intersecting")));
        }
        let bounds = vertices.iter().fold(
            (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
            |(a, b, c, d), &(x, y)| (a.min(x), b.min(y), c.max(x), d.max(y)),
        );
        Ok(Self {
            plot_id,
            germplasm_id: germplasm_id.into(),
            vertices,
            bounds,
        })
    }

    /// Convenience constructor for axis-aligned rectangular plots.
    pub fn rectangle(
        plot_id: impl Into<String>,
        germplasm_id: impl Into<String>,
        min: (f64, f64),
        max: (f64, f64),
    ) -> Result<Self> {
        Self::new(
            plot_id,
            germplasm_id,
            vec![min, (max.0, min.1), max, (min.0, max.1)],
        )
    }

    pub fn plot_id(&self) -> &str {
        &self.plot_id
    }

    pub fn germplasm_id(&self) -> &str {
        &self.germplasm_id
    }

    pub fn vertices(&self) -> &[(f64, f64)] {
        &self.vertices
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices).abs()
    }

    fn edges(&self) -> impl Iterator<Item = ((f64, f64), (f64, f64))> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// Euclidean distance from `(x, y)` to the nearest point on the boundary.
    pub fn boundary_distance(&self, x: f64, y: f64) -> f64 {
        self.edges()
            .map(|(a, b)| segment_distance((x, y), a, b))
            .fold(f64::INFINITY, f64::min)
    }
}

impl Region for PlotGeometry {
    /// Crossing-number test; points on the boundary count as inside.
    fn contains(&self, x: f64, y: f64) -> bool {
        let (x0, y0, x1, y1) = self.bounds;
        if x < x0 || x > x1 || y < y0 || y > y1 {
            return false;
        }
        let mut inside = false;
        for (a, b) in self.edges() {
            if on_segment((x, y), a, b) {
                return true;
            }
            if (a.1 > y) != (b.1 > y) {
                let t = (y - a.1) / (b.1 - a.1);
                if x < a.0 + t * (b.0 - a.0) {
                    inside = !inside;
                }
            }
        }
        inside
    }

    fn bounds(&self) -> Bounds {
        self.bounds
    }

    fn label(&self) -> &str {
        &self.plot_id
    }
}

/// The band of ground outside a plot whose distance to the plot boundary lies
/// in `(inner, outer]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BufferRing {
    plot: PlotGeometry,
    inner: f64,
    outer: f64,
}

impl BufferRing {
    pub fn inner(&self) -> f64 {
        self.inner
    }

    pub fn outer(&self) -> f64 {
        self.outer
    }

    pub fn plot(&self) -> &PlotGeometry {
        &self.plot
    }
}

pub fn buffer_ring(plot: &PlotGeometry, inner: f64, outer: f64) -> Result<BufferRing> {
    if !(inner.is_finite() && outer.is_finite()) || inner < 0.0 || inner >= outer {
        return Err(Error::invalid(format!(
            "ring widths must satisfy 0 <= inner < outer, got ({inner}, {outer})"
        )));
    }
    Ok(BufferRing {
        plot: plot.clone(),
        inner,
        outer,
    })
}

impl Region for BufferRing {
    fn contains(&self, x: f64, y: f64) -> bool {
        let (x0, y0, x1, y1) = self.bounds();
        if x < x0 || x > x1 || y < y0 || y > y1 || self.plot.contains(x, y) {
            return false;
        }
        let d = self.plot.boundary_distance(x, y);
        d > self.inner && d <= self.outer
    }

    fn bounds(&self) -> Bounds {
        let (a, b, c, d) = self.plot.bounds;
        (a - self.outer, b - self.outer, c + self.outer, d + self.outer)
    }

    fn label(&self) -> &str {
        &self.plot.plot_id
    }
}

/// Union of two regions.
pub struct Union<'a, A: Region + ?Sized, B: Region + ?Sized>(pub &'a A, pub &'a B);

impl<A: Region + ?Sized, B: Region + ?Sized> Region for Union<'_, A, B> {
    fn contains(&self, x: f64, y: f64) -> bool {
        self.0.contains(x, y) || self.1.contains(x, y)
    }

    fn bounds(&self) -> Bounds {
        let (a0, a1, a2, a3) = self.0.bounds();
        let (b0, b1, b2, b3) = self.1.bounds();
        (a0.min(b0), a1.min(b1), a2.max(b2), a3.max(b3))
    }

    fn label(&self) -> &str {
        self.0.label()
    }
}

/// Row-major indices of the cells of `grid` whose centers fall in `region`,
/// in ascending order. Only the region's bounding box is scanned.
pub fn region_cells<R: Region + ?Sized>(grid: &RasterGrid, region: &R) -> Vec<usize> {
    let g = grid.geometry();
    let (x0, y0, x1, y1) = region.bounds();
    let cs = g.cell_size;
    // Cell-center coordinate ranges, widened by one cell to absorb rounding.
    let col_lo = (((x0 - g.origin_x) / cs - 0.5).floor() - 1.0).max(0.0) as usize;
    let col_hi = (((x1 - g.origin_x) / cs - 0.5).ceil() + 1.0).min(g.n_cols as f64 - 1.0);
    let rb_lo = (((y0 - g.origin_y) / cs - 0.5).floor() - 1.0).max(0.0) as usize;
    let rb_hi = (((y1 - g.origin_y) / cs - 0.5).ceil() + 1.0).min(g.n_rows as f64 - 1.0);
    if col_hi < 0.0 || rb_hi < 0.0 {
        return Vec::new();
    }
    let (col_hi, rb_hi) = (col_hi as usize, rb_hi as usize);
    if col_lo > col_hi || rb_lo > rb_hi {
        return Vec::new();
    }
    let row_lo = g.n_rows - 1 - rb_hi;
    let row_hi = g.n_rows - 1 - rb_lo;
    let mut cells = Vec::new();
    for row in row_lo..=row_hi {
        for col in col_lo..=col_hi {
            let (x, y) = g.cell_center(row, col);
            if region.contains(x, y) {
                cells.push(g.index(row, col));
            }
        }
    }
    cells
}

/// Binary mask (1 inside, 0 outside) sharing the georeferencing of `grid`.
pub fn region_mask<R: Region + ?Sized>(grid: &RasterGrid, region: &R) -> Result<RasterGrid> {
    let cells = region_cells(grid, region);
    if cells.is_empty() {
        return Err(Error::EmptyPlot(region.label().to_string()));
    }
    let mut values = vec![0.0; grid.geometry().len()];
    for i in cells {
        values[i] = 1.0;
    }
    RasterGrid::new(*grid.geometry(), grid.nodata(), values)
}

pub fn plot_mask(grid: &RasterGrid, plot: &PlotGeometry) -> Result<RasterGrid> {
    region_mask(grid, plot)
}

#[derive(Debug, Deserialize)]
struct VertexRow {
    plot_id: String,
    germplasm_id: String,
    vertex_index: usize,
    x: f64,
    y: f64,
}

/// Reads plot polygons from a CSV with columns
/// `plot_id, germplasm_id, vertex_index, x, y`. Plots are returned in order
/// of first appearance; vertices are ordered by `vertex_index`.
pub fn read_plots<R: std::io::Read>(reader: R) -> Result<Vec<PlotGeometry>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut order: Vec<String> = Vec::new();
    let mut rows: BTreeMap<String, (String, Vec<(usize, f64, f64)>)> = BTreeMap::new();
    for (i, rec) in rdr.deserialize::<VertexRow>().enumerate() {
        let row = rec.map_err(|e| Error::parse(i + 2, e.to_string()))?;
        let entry = rows.entry(row.plot_id.clone()).or_insert_with(|| {
            order.push(row.plot_id.clone());
            (row.germplasm_id.clone(), Vec::new())
        });
        if entry.0 != row.germplasm_id {
            return Err(Error::parse(
                i + 2,
                format!("plot `{}` lists two germplasm ids", row.plot_id),
            ));
        }
        entry.1.push((row.vertex_index, row.x, row.y));
    }
    if order.is_empty() {
        return Err(Error::EmptyInput);
    }
    order
        .into_iter()
        .map(|id| {
            let (germplasm, mut verts) = rows.remove(&id).unwrap_or_default();
            verts.sort_by_key(|v| v.0);
            if verts.windows(2).any(|w| w[0].0 == w[1].0) {
                return Err(Error::invalid(format!("plot `{id}` repeats a vertex index")));
            }
            PlotGeometry::new(id, germplasm, verts.into_iter().map(|v| (v.1, v.2)).collect())
        })
        .collect()
}

pub fn load_plots(path: impl AsRef<Path>) -> Result<Vec<PlotGeometry>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_plots(file)
}

fn signed_area(v: &[(f64, f64)]) -> f64 {
    let n = v.len();
    (0..n)
        .map(|i| {
            let (a, b) = (v[i], v[(i + 1) % n]);
            a.0 * b.1 - b.0 * a.1
        })
        .sum::<f64>()
        / 2.0
}

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

fn on_segment(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> bool {
    let len2 = (b.0 - a.0).powi(2) + (b.1 - a.1).powi(2);
    let c = cross(a, b, p);
    if c.abs() > 1e-12 * len2.max(1e-300) {
        return false;
    }
    p.0 >= a.0.min(b.0) && p.0 <= a.0.max(b.0) && p.1 >= a.1.min(b.1) && p.1 <= a.1.max(b.1)
}

fn segments_intersect(p1: (f64, f64), p2: (f64, f64), q1: (f64, f64), q2: (f64, f64)) -> bool {
    let d1 = cross(q1, q2, p1);
    let d2 = cross(q1, q2, p2);
    let d3 = cross(p1, p2, q1);
    let d4 = cross(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(p1, q1, q2))
        || (d2 == 0.0 && on_segment(p2, q1, q2))
        || (d3 == 0.0 && on_segment(q1, p1, p2))
        || (d4 == 0.0 && on_segment(q2, p1, p2))
}

fn is_simple(v: &[(f64, f64)]) -> bool {
    let n = v.len();
    if (0..n).any(|i| v[i] == v[(i + 1) % n]) {
        return false;
    }
    for i in 0..n {
        let (a1, a2) = (v[i], v[(i + 1) % n]);
        for j in (i + 1)..n {
            // adjacent edges share a vertex by construction
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            let (b1, b2) = (v[j], v[(j + 1) % n]);
            if segments_intersect(a1, a2, b1, b2) {
                return false;
            }
        }
    }
    true
}

fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    };
    let (cx, cy) = (a.0 + t * dx, a.1 + t * dy);
    ((p.0 - cx).powi(2) + (p.1 - cy).powi(2)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodata::GridGeometry;

    fn grid(n: usize, cs: f64) -> RasterGrid {
        RasterGrid::filled(GridGeometry::new(n, n, cs, 0.0, 0.0).unwrap(), -9999.0, 0.0)
    }

    #[test]
    fn square_covering_four_centers() {
        // centers at 0.5, 1.5, 2.5, 3.5; the square [1, 3]^2 holds 1.5 and 2.5
        let plot = PlotGeometry::rectangle("p", "g", (1.0, 1.0), (3.0, 3.0)).unwrap();
        let mask = plot_mask(&grid(4, 1.0), &plot).unwrap();
        assert_eq!(mask.values().iter().filter(|&&v| v == 1.0).count(), 4);
        assert_eq!(mask.get(1, 1), 1.0);
        assert_eq!(mask.get(0, 0), 0.0);
    }

    #[test]
    fn boundary_counts_as_inside() {
        let plot = PlotGeometry::rectangle("p", "g", (0.5, 0.5), (1.5, 1.5)).unwrap();
        assert!(plot.contains(0.5, 0.5));
        assert!(plot.contains(1.0, 1.5));
        let mask = plot_mask(&grid(4, 1.0), &plot).unwrap();
        assert_eq!(mask.values().iter().filter(|&&v| v == 1.0).count(), 4);
    }

    #[test]
    fn plot_outside_grid() {
        let plot = PlotGeometry::rectangle("far", "g", (100.0, 100.0), (101.0, 101.0)).unwrap();
        assert!(matches!(plot_mask(&grid(4, 1.0), &plot), Err(Error::EmptyPlot(id)) if id == "far"));
    }

    #[test]
    fn invalid_polygons() {
        assert!(PlotGeometry::new("a", "g", vec![(0.0, 0.0), (1.0, 0.0)]).is_err());
        assert!(PlotGeometry::new("a", "g", vec![(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)]).is_err());
        // bow tie
        let bow = vec![(0.0, 0.0), (1.0, 1.0), (1.0, 0.0), (0.0, 1.0)];
        assert!(PlotGeometry::new("a", "g", bow).is_err());
    }

    #[test]
    fn closing_vertex_is_dropped() {
        let p = PlotGeometry::new("a", "g", vec![(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 0.0)])
            .unwrap();
        assert_eq!(p.vertices().len(), 3);
        assert_eq!(p.area(), 0.5);
    }

    #[test]
    fn ring_widths_validated() {
        let plot = PlotGeometry::rectangle("p", "g", (0.0, 0.0), (1.0, 1.0)).unwrap();
        assert!(matches!(buffer_ring(&plot, 0.1, 0.1), Err(Error::InvalidInput(_))));
        assert!(matches!(buffer_ring(&plot, 0.2, 0.1), Err(Error::InvalidInput(_))));
        assert!(matches!(buffer_ring(&plot, -0.1, 0.1), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn ring_membership() {
        let plot = PlotGeometry::rectangle("p", "g", (0.0, 0.0), (1.0, 1.0)).unwrap();
        let ring = buffer_ring(&plot, 0.1, 0.2).unwrap();
        assert!(ring.contains(1.15, 0.5));
        assert!(!ring.contains(1.05, 0.5));
        assert!(!ring.contains(1.25, 0.5));
        assert!(!ring.contains(0.5, 0.5));
    }

    #[test]
    fn ring_area_matches_offset_formula() {
        let plot = PlotGeometry::rectangle("p", "g", (0.0, 0.0), (1.0, 1.0)).unwrap();
        let ring = buffer_ring(&plot, 0.0, 0.1).unwrap();
        let cs = 0.002;
        let n = 700;
        let g = RasterGrid::filled(GridGeometry::new(n, n, cs, -0.2, -0.2).unwrap(), -9999.0, 0.0);
        let area = region_cells(&g, &ring).len() as f64 * cs * cs;
        let expected = 4.0 * 0.1 + std::f64::consts::PI * 0.01;
        assert!((area - expected).abs() / expected < 0.01, "{area} vs {expected}");
    }

    #[test]
    fn reads_plot_csv() {
        let text = "plot_id,germplasm_id,vertex_index,x,y\n\
                    b,G2,1,1,0\nb,G2,0,0,0\nb,G2,2,1,1\nb,G2,3,0,1\n\
                    a,G1,0,2,0\na,G1,1,3,0\na,G1,2,3,1\n";
        let plots = read_plots(text.as_bytes()).unwrap();
        assert_eq!(plots.len(), 2);
        assert_eq!(plots[0].plot_id(), "b");
        assert_eq!(plots[0].vertices()[0], (0.0, 0.0));
        assert_eq!(plots[1].germplasm_id(), "G1");
    }
}
