//! Rasters, point clouds and plot polygons.
//!
//! Every layer that enters a per-plot computation must share its
//! [`GridGeometry`] exactly; nothing here resamples.

mod ascii;
mod grid;
mod plot;
mod pointcloud;

pub use ascii::{load_raster, read_ascii_grid, save_raster, write_ascii_grid, DEFAULT_NODATA};
pub use grid::{GridGeometry, RasterGrid};
pub use plot::{
    buffer_ring, load_plots, plot_mask, read_plots, region_cells, region_mask, Bounds,
    BufferRing, PlotGeometry, Region, Union,
};
pub use pointcloud::{
    cloud_geometry, load_point_cloud, rasterize_elevation, rasterize_elevation_onto,
    read_point_cloud, save_point_cloud, write_point_cloud, ElevationAggregator, Point3,
    PointCloud,
};
