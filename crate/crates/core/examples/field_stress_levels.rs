//! Lodging and weed levels from classified masks, plus the threshold tables.
//!
//! ```text
//! cargo run --example field_stress_levels
//! ```

use std::path::PathBuf;

use breedkit::geodata::{buffer_ring, load_plots, load_raster};
use breedkit::structural::{classify_lodging, classify_weed, lodging_level, weed_level, Level};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    println!("{:>6}  {:<12}{:<10}", "ratio", "lodging", "weeds");
    for r in [0.0, 0.05, 0.1, 0.25, 0.4, 0.45, 0.5, 0.6, 0.7, 0.85, 1.0] {
        println!(
            "{r:>6.2}  {:<12}{:<10}",
            Level::Lodging(lodging_level(r, false)).label(),
            Level::Weed(weed_level(r)).label()
        );
    }

    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/scene");
    let lodging = load_raster(dir.join("lodging_mask.asc"))?;
    let weeds = load_raster(dir.join("weed_mask.asc"))?;
    println!();
    for plot in load_plots(dir.join("plots.csv"))? {
        let pl = classify_lodging(&lodging, &plot, false)?;
        let ring = buffer_ring(&plot, 0.0, 0.5)?;
        let wl = classify_weed(&weeds, &plot, &ring)?;
        println!(
            "{}: lodging {:.3} ({}), weeds {:.3} ({})",
            plot.plot_id(),
            pl.ratio,
            pl.level.label(),
            wl.ratio,
            wl.level.label()
        );
    }
    Ok(())
}
