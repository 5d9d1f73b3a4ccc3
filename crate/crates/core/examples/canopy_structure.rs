//! Canopy height model from DSM and DEM point clouds, then per-plot height,
//! volume and wheat-head density.
//!
//! ```text
//! cargo run --example canopy_structure
//! ```

use std::path::PathBuf;

use breedkit::geodata::{load_plots, load_point_cloud, load_raster, rasterize_elevation_onto, ElevationAggregator};
use breedkit::structural::{canopy_height_model, canopy_volume, plot_canopy_height, wheat_head_density};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/scene");
    let geometry = *load_raster(dir.join("ms_red.asc"))?.geometry();
    let dsm = rasterize_elevation_onto(&load_point_cloud(dir.join("dsm.xyz"))?, &geometry, ElevationAggregator::Max)?;
    let dem = rasterize_elevation_onto(&load_point_cloud(dir.join("dem.xyz"))?, &geometry, ElevationAggregator::Min)?;
    let chm = canopy_height_model(&dsm, &dem, 0.05)?;

    // 3 m flight, square 18.92 degree field of view: roughly 1 m² per image
    let counts = [48.0, 52.0, 50.0];
    let wh = wheat_head_density(&counts, 3.0, 18.924644416051237, 18.924644416051237)?;
    println!("wheat heads: {:.1} per image over {:.3} m² = {:.1} /m²", wh.heads_per_image, wh.ground_area, wh.density);

    println!("{:<6}{:>10}{:>12}{:>12}{:>12}", "plot", "CH p90", "V lowest", "V mean", "CV");
    for plot in load_plots(dir.join("plots.csv"))? {
        let ch = plot_canopy_height(&chm, &plot, 0.9)?;
        let v = canopy_volume(&chm.grid, &plot)?;
        println!(
            "{:<6}{:>10.3}{:>12.3}{:>12.3}{:>12.3}",
            plot.plot_id(),
            ch.value,
            v.volume_lowest_plane,
            v.volume_mean_plane,
            v.volume
        );
    }
    Ok(())
}
