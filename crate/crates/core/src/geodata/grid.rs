use crate::error::{Error, Result};

/// Georeferencing shared by every layer that takes part in one computation.
///
/// `origin_x`/`origin_y` locate the lower-left corner of the grid. Row 0 is
/// the top (northernmost) row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridGeometry {
    pub n_cols: usize,
    pub n_rows: usize,
    pub cell_size: f64,
    pub origin_x: f64,
    pub origin_y: f64,
}

impl GridGeometry {
    pub fn new(
        n_cols: usize,
        n_rows: usize,
        cell_size: f64,
        origin_x: f64,
        origin_y: f64,
    ) -> Result<Self> {
        if n_cols == 0 || n_rows == 0 {
            return Err(Error::invalid("grid must have at least one row and column"));
        }
        if !(cell_size.is_finite() && cell_size > 0.0) {
            return Err(Error::invalid(format!("cell size must be > 0, got {cell_size}")));
        }
        if !(origin_x.is_finite() && origin_y.is_finite()) {
            return Err(Error::invalid("grid origin must be finite"));
        }
        Ok(Self {
            n_cols,
            n_rows,
            cell_size,
            origin_x,
            origin_y,
        })
    }

    pub fn len(&self) -> usize {
        self.n_cols * self.n_rows
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_area(&self) -> f64 {
        self.cell_size * self.cell_size
    }

    pub fn max_x(&self) -> f64 {
        self.origin_x + self.n_cols as f64 * self.cell_size
    }

    pub fn max_y(&self) -> f64 {
        self.origin_y + self.n_rows as f64 * self.cell_size
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.n_cols + col
    }

    /// Center of the cell at `(row, col)`.
    #[inline]
    pub fn cell_center(&self, row: usize, col: usize) -> (f64, f64) {
        let x = self.origin_x + (col as f64 + 0.5) * self.cell_size;
        let y = self.origin_y + ((self.n_rows - row) as f64 - 0.5) * self.cell_size;
        (x, y)
    }

    /// Fails with `GeometryMismatch` unless both geometries are identical.
    pub fn ensure_aligned(&self, other: &GridGeometry, what: &str) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GeometryMismatch(format!(
                "{what}: {self:?} vs {other:?}"
            )))
        }
    }
}

/// A georeferenced 2-D grid of scalar values stored row-major, top row first.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterGrid {
    geometry: GridGeometry,
    nodata: f64,
    values: Vec<f64>,
}

impl RasterGrid {
    pub fn new(geometry: GridGeometry, nodata: f64, values: Vec<f64>) -> Result<Self> {
        if values.len() != geometry.len() {
            return Err(Error::invalid(format!(
                "expected {} values for a {}x{} grid, got {}",
                geometry.len(),
                geometry.n_cols,
                geometry.n_rows,
                values.len()
            )));
        }
        Ok(Self {
            geometry,
            nodata,
            values,
        })
    }

    pub fn filled(geometry: GridGeometry, nodata: f64, value: f64) -> Self {
        Self {
            geometry,
            nodata,
            values: vec![value; geometry.len()],
        }
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn nodata(&self) -> f64 {
        self.nodata
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[self.geometry.index(row, col)]
    }

    /// NaN is always treated as missing, in addition to the sentinel.
    #[inline]
    pub fn is_nodata(&self, value: f64) -> bool {
        value == self.nodata || value.is_nan()
    }

    /// The value at `index`, or `None` if it is nodata.
    #[inline]
    pub fn value_at(&self, index: usize) -> Option<f64> {
        let v = self.values[index];
        (!self.is_nodata(v)).then_some(v)
    }

    /// Builds a new grid with the same georeferencing by mapping each cell.
    pub fn map_cells(&self, f: impl Fn(Option<f64>) -> Option<f64>) -> RasterGrid {
        let values = (0..self.values.len())
            .map(|i| f(self.value_at(i)).unwrap_or(self.nodata))
            .collect();
        RasterGrid {
            geometry: self.geometry,
            nodata: self.nodata,
            values,
        }
    }

    /// Checks that every defined value is a reflectance in `[0, 1]`.
    pub fn validate_reflectance(&self) -> Result<()> {
        for (i, &v) in self.values.iter().enumerate() {
            if !self.is_nodata(v) && !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(format!(
                    "reflectance {v} at cell {i} is outside [0, 1]"
                )));
            }
        }
        Ok(())
    }

    /// Checks that every value is 0, 1 or nodata.
    pub fn validate_mask(&self) -> Result<()> {
        for &v in &self.values {
            if !self.is_nodata(v) && v != 0.0 && v != 1.0 {
                return Err(Error::InvalidMask(v));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_centers_follow_top_row_first() {
        let g = GridGeometry::new(2, 2, 0.5, 10.0, 20.0).unwrap();
        assert_eq!(g.cell_center(0, 0), (10.25, 20.75));
        assert_eq!(g.cell_center(1, 1), (10.75, 20.25));
    }

    #[test]
    fn rejects_wrong_value_count() {
        let g = GridGeometry::new(2, 2, 1.0, 0.0, 0.0).unwrap();
        assert!(RasterGrid::new(g, -9999.0, vec![1.0; 3]).is_err());
    }

    #[test]
    fn rejects_nonpositive_cell_size() {
        assert!(GridGeometry::new(2, 2, 0.0, 0.0, 0.0).is_err());
        assert!(GridGeometry::new(2, 2, -1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn mask_validation() {
        let g = GridGeometry::new(3, 1, 1.0, 0.0, 0.0).unwrap();
        let ok = RasterGrid::new(g, -1.0, vec![0.0, 1.0, -1.0]).unwrap();
        assert!(ok.validate_mask().is_ok());
        let bad = RasterGrid::new(g, -1.0, vec![0.0, 0.5, 1.0]).unwrap();
        assert!(matches!(bad.validate_mask(), Err(Error::InvalidMask(v)) if v == 0.5));
    }
}
