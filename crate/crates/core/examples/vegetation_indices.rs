//! Vegetation index maps and plot means from the bundled multispectral bands.
//!
//! ```text
//! cargo run --example vegetation_indices
//! ```

use std::collections::BTreeMap;
use std::path::PathBuf;

use breedkit::geodata::{load_plots, load_raster};
use breedkit::spectral::{plot_statistic, vi_map, Band, BandSet, IndexParams, SensorKind, VegetationIndex};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/scene");
    let mut bands = BTreeMap::new();
    for (name, nm) in [("blue", 450.0), ("green", 560.0), ("red", 650.0), ("red_edge", 730.0), ("nir", 840.0)] {
        let grid = load_raster(dir.join(format!("ms_{name}.asc")))?;
        bands.insert(name.to_string(), Band { grid, wavelength_nm: nm });
    }
    let ms = BandSet::new(SensorKind::Multispectral, bands)?;
    let plots = load_plots(dir.join("plots.csv"))?;

    let params = IndexParams::default();
    print!("{:<6}", "plot");
    let maps: Vec<_> = VegetationIndex::ALL
        .iter()
        .map(|&i| vi_map(&ms, i, &params))
        .collect::<Result<_, _>>()?;
    for m in &maps {
        print!("{:>12}", m.feature_name());
    }
    println!();
    for plot in &plots {
        print!("{:<6}", plot.plot_id());
        for m in &maps {
            let s = plot_statistic(&m.feature_name(), &m.grid, plot, None)?;
            print!("{:>12.4}", s.value);
        }
        println!();
    }
    Ok(())
}
