//! Canopy structure, lodging, weed pressure and wheat-head density.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodata::{region_cells, BufferRing, PlotGeometry, RasterGrid, Union};
use crate::spectral::{mask_ratio, PlotStatistic};

/// Negative DSM − DEM differences within this distance of zero are clamped
/// to 0; anything lower is treated as a registration error.
pub const DEFAULT_NOISE_FLOOR: f64 = 0.05;

pub const DEFAULT_HEIGHT_PERCENTILE: f64 = 0.95;

/// Default weed ring around each plot, meters from the plot edge.
pub const DEFAULT_WEED_RING: (f64, f64) = (0.10, 0.20);

#[derive(Debug, Clone, PartialEq)]
pub struct CanopyHeightModel {
    pub grid: RasterGrid,
}

pub fn canopy_height_model(
    dsm: &RasterGrid,
    dem: &RasterGrid,
    noise_floor: f64,
) -> Result<CanopyHeightModel> {
    if !(noise_floor.is_finite() && noise_floor >= 0.0) {
        return Err(Error::invalid(format!("noise floor must be >= 0, got {noise_floor}")));
    }
    dsm.geometry().ensure_aligned(dem.geometry(), "DSM vs DEM")?;
    let nodata = dsm.nodata();
    let values = (0..dsm.values().len())
        .map(|i| match (dsm.value_at(i), dem.value_at(i)) {
            (Some(s), Some(e)) => {
                let h = s - e;
                if h >= 0.0 {
                    h
                } else if h >= -noise_floor {
                    0.0
                } else {
                    nodata
                }
            }
            _ => nodata,
        })
        .collect();
    Ok(CanopyHeightModel {
        grid: RasterGrid::new(*dsm.geometry(), nodata, values)?,
    })
}

fn defined_values(grid: &RasterGrid, plot: &PlotGeometry) -> Result<Vec<f64>> {
    let vals: Vec<f64> = region_cells(grid, plot)
        .into_iter()
        .filter_map(|i| grid.value_at(i))
        .collect();
    if vals.is_empty() {
        return Err(Error::EmptyPlot(plot.plot_id().to_string()));
    }
    Ok(vals)
}

/// Nearest-rank percentile: the `ceil(p n)`-th smallest value (1-based).
pub fn nearest_rank(sorted: &[f64], percentile: f64) -> f64 {
    let n = sorted.len();
    let rank = (percentile * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

/// Plot canopy height as a nearest-rank percentile of the CHM cells.
pub fn plot_canopy_height(
    chm: &CanopyHeightModel,
    plot: &PlotGeometry,
    percentile: f64,
) -> Result<PlotStatistic> {
    if !(0.0..=1.0).contains(&percentile) {
        return Err(Error::invalid(format!("percentile must be in [0, 1], got {percentile}")));
    }
    let mut vals = defined_values(&chm.grid, plot)?;
    vals.sort_by(f64::total_cmp);
    Ok(PlotStatistic {
        plot_id: plot.plot_id().to_string(),
        feature_name: "CH".to_string(),
        value: nearest_rank(&vals, percentile),
        n_cells: vals.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CanopyVolumeResult {
    pub volume_lowest_plane: f64,
    pub volume_mean_plane: f64,
    pub volume: f64,
}

/// Cut-and-fill volume of the surface inside the plot relative to two
/// horizontal reference planes, at the lowest cell and at the mean elevation,
/// averaged.
pub fn canopy_volume(surface: &RasterGrid, plot: &PlotGeometry) -> Result<CanopyVolumeResult> {
    let vals = defined_values(surface, plot)?;
    let area = surface.geometry().cell_area();
    let lowest = vals.iter().copied().fold(f64::INFINITY, f64::min);
    // Mean as lowest + mean offset, so a flat surface gets exactly its own height.
    let mean = lowest + vals.iter().map(|z| z - lowest).sum::<f64>() / vals.len() as f64;
    let cut_fill = |plane: f64| vals.iter().map(|z| (z - plane).abs()).sum::<f64>() * area;
    let volume_lowest_plane = cut_fill(lowest);
    let volume_mean_plane = cut_fill(mean);
    Ok(CanopyVolumeResult {
        volume_lowest_plane,
        volume_mean_plane,
        volume: (volume_lowest_plane + volume_mean_plane) / 2.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LodgingLevel {
    NoLodging,
    Slight,
    Severe,
    Special,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeedLevel {
    NoWeeds,
    Slight,
    Moderate,
    Severe,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Level {
    Lodging(LodgingLevel),
    Weed(WeedLevel),
}

impl Level {
    pub fn label(&self) -> &'static str {
        match self {
            Level::Lodging(LodgingLevel::NoLodging) => "no_lodging",
            Level::Lodging(LodgingLevel::Slight) => "slight",
            Level::Lodging(LodgingLevel::Severe) => "severe",
            Level::Lodging(LodgingLevel::Special) => "special",
            Level::Weed(WeedLevel::NoWeeds) => "no_weeds",
            Level::Weed(WeedLevel::Slight) => "slight",
            Level::Weed(WeedLevel::Moderate) => "moderate",
            Level::Weed(WeedLevel::Severe) => "severe",
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CategoricalLevel {
    pub ratio: f64,
    pub level: Level,
}

/// Intervals are `(a, b]`, with a ratio of exactly 0 in the lowest class.
pub fn lodging_level(ratio: f64, special: bool) -> LodgingLevel {
    if special {
        LodgingLevel::Special
    } else if ratio <= 0.0 {
        LodgingLevel::NoLodging
    } else if ratio <= 0.5 {
        LodgingLevel::Slight
    } else {
        LodgingLevel::Severe
    }
}

pub fn weed_level(ratio: f64) -> WeedLevel {
    if ratio <= 0.10 {
        WeedLevel::NoWeeds
    } else if ratio <= 0.40 {
        WeedLevel::Slight
    } else if ratio <= 0.70 {
        WeedLevel::Moderate
    } else {
        WeedLevel::Severe
    }
}

pub fn classify_lodging(
    lodging_mask: &RasterGrid,
    plot: &PlotGeometry,
    special: bool,
) -> Result<CategoricalLevel> {
    let (ratio, _) = mask_ratio(lodging_mask, plot)?;
    Ok(CategoricalLevel {
        ratio,
        level: Level::Lodging(lodging_level(ratio, special)),
    })
}

/// Weed ratio over the plot together with its surrounding ring.
pub fn classify_weed(
    weed_mask: &RasterGrid,
    plot: &PlotGeometry,
    ring: &BufferRing,
) -> Result<CategoricalLevel> {
    let region = Union(plot, ring);
    let (ratio, _) = mask_ratio(weed_mask, &region)?;
    Ok(CategoricalLevel {
        ratio,
        level: Level::Weed(weed_level(ratio)),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WheatHeadDensity {
    pub heads_per_image: f64,
    pub ground_area: f64,
    pub density: f64,
}

/// Ground footprint of a nadir image over flat ground.
pub fn image_footprint(altitude: f64, fov_h_deg: f64, fov_v_deg: f64) -> Result<f64> {
    if !(altitude.is_finite() && altitude > 0.0) {
        return Err(Error::invalid(format!("altitude must be > 0, got {altitude}")));
    }
    for fov in [fov_h_deg, fov_v_deg] {
        if !(fov.is_finite() && fov > 0.0 && fov < 180.0) {
            return Err(Error::invalid(format!("field of view must be in (0, 180), got {fov}")));
        }
    }
    let w = 2.0 * altitude * (fov_h_deg.to_radians() / 2.0).tan();
    let h = 2.0 * altitude * (fov_v_deg.to_radians() / 2.0).tan();
    Ok(w * h)
}

pub fn wheat_head_density(
    head_counts: &[f64],
    altitude: f64,
    fov_h_deg: f64,
    fov_v_deg: f64,
) -> Result<WheatHeadDensity> {
    if head_counts.is_empty() {
        return Err(Error::invalid("no head counts"));
    }
    if head_counts.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
        return Err(Error::invalid("head counts must be non-negative"));
    }
    let ground_area = image_footprint(altitude, fov_h_deg, fov_v_deg)?;
    let heads_per_image = head_counts.iter().sum::<f64>() / head_counts.len() as f64;
    Ok(WheatHeadDensity {
        heads_per_image,
        ground_area,
        density: heads_per_image / ground_area,
    })
}
