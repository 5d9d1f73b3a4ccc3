//! Spectral plot features: vegetation indices from multispectral (MS) and
//! hyperspectral (HS) band sets, plus fractional vegetation cover.

pub mod formulas;

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodata::{region_cells, GridGeometry, PlotGeometry, RasterGrid};

/// Band names every multispectral set must provide.
pub const MS_BANDS: [&str; 5] = ["blue", "green", "red", "red_edge", "nir"];

/// Center wavelengths (nm) of the five-band multispectral camera. Used to pick
/// the matching hyperspectral channels for the red, green and NIR terms.
pub const MS_CENTERS_NM: [(&str, f64); 5] = [
    ("blue", 450.0),
    ("green", 560.0),
    ("red", 650.0),
    ("red_edge", 730.0),
    ("nir", 840.0),
];

/// Hyperspectral channels feeding the senescence index.
pub const PSRI_HS_TARGETS_NM: (f64, f64, f64) = (680.0, 500.0, 750.0);

/// Maximum distance between a target wavelength and the channel chosen for it.
pub const HS_BAND_TOLERANCE_NM: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SensorKind {
    #[serde(rename = "MS")]
    Multispectral,
    #[serde(rename = "HS")]
    Hyperspectral,
}

impl SensorKind {
    pub fn suffix(self) -> &'static str {
        match self {
            SensorKind::Multispectral => "MS",
            SensorKind::Hyperspectral => "HS",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Band {
    pub grid: RasterGrid,
    pub wavelength_nm: f64,
}

/// Co-registered reflectance bands from one sensor.
#[derive(Debug, Clone)]
pub struct BandSet {
    sensor: SensorKind,
    bands: BTreeMap<String, Band>,
    geometry: GridGeometry,
}

impl BandSet {
    /// Validates alignment, reflectance range and the required band list.
    pub fn new(sensor: SensorKind, bands: BTreeMap<String, Band>) -> Result<Self> {
        let first = bands
            .values()
            .next()
            .ok_or_else(|| Error::invalid("band set is empty"))?;
        let geometry = *first.grid.geometry();
        for (name, band) in &bands {
            geometry.ensure_aligned(band.grid.geometry(), &format!("band `{name}`"))?;
            band.grid.validate_reflectance()?;
            if !(band.wavelength_nm.is_finite() && band.wavelength_nm > 0.0) {
                return Err(Error::invalid(format!(
                    "band `{name}` has invalid wavelength {}",
                    band.wavelength_nm
                )));
            }
        }
        match sensor {
            SensorKind::Multispectral => {
                for required in MS_BANDS {
                    if !bands.contains_key(required) {
                        return Err(Error::MissingBand(required.to_string()));
                    }
                }
            }
            SensorKind::Hyperspectral => {
                if bands.len() < 2 {
                    return Err(Error::invalid(
                        "hyperspectral set needs at least two bands",
                    ));
                }
            }
        }
        Ok(Self {
            sensor,
            bands,
            geometry,
        })
    }

    pub fn sensor(&self) -> SensorKind {
        self.sensor
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn bands(&self) -> &BTreeMap<String, Band> {
        &self.bands
    }

    pub fn band(&self, name: &str) -> Result<&Band> {
        self.bands
            .get(name)
            .ok_or_else(|| Error::MissingBand(name.to_string()))
    }

    /// The channel whose center is nearest `target_nm`, ties going to the
    /// shorter wavelength. Fails if nothing lies within the tolerance.
    pub fn nearest_band(&self, target_nm: f64) -> Result<&Band> {
        let mut best: Option<&Band> = None;
        for band in self.bands.values() {
            let d = (band.wavelength_nm - target_nm).abs();
            if d > HS_BAND_TOLERANCE_NM {
                continue;
            }
            best = match best {
                None => Some(band),
                Some(b) => {
                    let bd = (b.wavelength_nm - target_nm).abs();
                    if d < bd || (d == bd && band.wavelength_nm < b.wavelength_nm) {
                        Some(band)
                    } else {
                        Some(b)
                    }
                }
            };
        }
        best.ok_or_else(|| Error::MissingBand(format!("{target_nm} nm")))
    }

    /// Resolves a broad-band role (`red`, `green`, `nir`, ...) to a grid: by
    /// name for MS sets, by nearest center wavelength for HS sets.
    pub fn role(&self, name: &str) -> Result<&RasterGrid> {
        match self.sensor {
            SensorKind::Multispectral => Ok(&self.band(name)?.grid),
            SensorKind::Hyperspectral => {
                let target = MS_CENTERS_NM
                    .iter()
                    .find(|(n, _)| *n == name)
                    .map(|(_, nm)| *nm)
                    .ok_or_else(|| Error::MissingBand(name.to_string()))?;
                Ok(&self.nearest_band(target)?.grid)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum VegetationIndex {
    #[serde(rename = "NDVI")]
    Ndvi,
    #[serde(rename = "SAVI")]
    Savi,
    #[serde(rename = "kNDVI")]
    Kndvi,
    #[serde(rename = "NIRv")]
    Nirv,
    #[serde(rename = "PSRI")]
    Psri,
}

impl VegetationIndex {
    pub const ALL: [VegetationIndex; 5] = [
        VegetationIndex::Ndvi,
        VegetationIndex::Savi,
        VegetationIndex::Kndvi,
        VegetationIndex::Nirv,
        VegetationIndex::Psri,
    ];

    pub fn name(self) -> &'static str {
        match self {
            VegetationIndex::Ndvi => "NDVI",
            VegetationIndex::Savi => "SAVI",
            VegetationIndex::Kndvi => "kNDVI",
            VegetationIndex::Nirv => "NIRv",
            VegetationIndex::Psri => "PSRI",
        }
    }
}

impl fmt::Display for VegetationIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Tunable constants of the index formulas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexParams {
    /// SAVI soil brightness correction.
    pub savi_l: f64,
    /// kNDVI length scale; `None` selects `0.5 (NIR + R)`.
    pub kndvi_sigma: Option<f64>,
}

impl Default for IndexParams {
    fn default() -> Self {
        Self {
            savi_l: 0.5,
            kndvi_sigma: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VegetationIndexMap {
    pub index: VegetationIndex,
    pub sensor: SensorKind,
    pub grid: RasterGrid,
}

impl VegetationIndexMap {
    /// Feature name such as `NDVI_MS`.
    pub fn feature_name(&self) -> String {
        format!("{}_{}", self.index.name(), self.sensor.suffix())
    }
}

fn combine(
    inputs: &[&RasterGrid],
    f: impl Fn(&[f64]) -> Option<f64> + Sync,
) -> RasterGrid {
    let out = inputs[0];
    let nodata = out.nodata();
    let values: Vec<f64> = (0..out.geometry().len())
        .into_par_iter()
        .map(|i| {
            let mut px = [0.0f64; 3];
            for (k, g) in inputs.iter().enumerate() {
                match g.value_at(i) {
                    Some(v) => px[k] = v,
                    None => return nodata,
                }
            }
            match f(&px[..inputs.len()]) {
                Some(v) if v.is_finite() => v,
                _ => nodata,
            }
        })
        .collect();
    RasterGrid::new(*out.geometry(), nodata, values).expect("geometry preserved")
}

/// Computes one vegetation index over a band set. For hyperspectral sets,
/// `Psri` uses the 680/500/750 nm channels (see [`psri_hs`]).
pub fn vi_map(
    bands: &BandSet,
    index: VegetationIndex,
    params: &IndexParams,
) -> Result<VegetationIndexMap> {
    if let Some(s) = params.kndvi_sigma {
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::invalid(format!("kNDVI sigma must be > 0, got {s}")));
        }
    }
    if index == VegetationIndex::Psri && bands.sensor() == SensorKind::Hyperspectral {
        return psri_hs(bands);
    }
    let nir = bands.role("nir")?;
    let red = bands.role("red")?;
    let l = params.savi_l;
    let sigma = params.kndvi_sigma;
    let grid = match index {
        VegetationIndex::Ndvi => combine(&[nir, red], |p| formulas::ndvi(p[0], p[1])),
        VegetationIndex::Savi => combine(&[nir, red], |p| formulas::savi(p[0], p[1], l)),
        VegetationIndex::Kndvi => combine(&[nir, red], |p| formulas::kndvi(p[0], p[1], sigma)),
        VegetationIndex::Nirv => combine(&[nir, red], |p| formulas::nirv(p[0], p[1])),
        VegetationIndex::Psri => {
            let green = bands.role("green")?;
            combine(&[red, green, nir], |p| formulas::psri(p[0], p[1], p[2]))
        }
    };
    Ok(VegetationIndexMap {
        index,
        sensor: bands.sensor(),
        grid,
    })
}

/// Hyperspectral PSRI `(R680 - R500) / R750` from the nearest channels.
pub fn psri_hs(bands: &BandSet) -> Result<VegetationIndexMap> {
    if bands.sensor() != SensorKind::Hyperspectral {
        return Err(Error::invalid("psri_hs requires a hyperspectral band set"));
    }
    let (r, b, n) = PSRI_HS_TARGETS_NM;
    let nir = &bands.nearest_band(n)?.grid;
    let red = &bands.nearest_band(r)?.grid;
    let blue = &bands.nearest_band(b)?.grid;
    Ok(VegetationIndexMap {
        index: VegetationIndex::Psri,
        sensor: SensorKind::Hyperspectral,
        grid: combine(&[red, blue, nir], |p| formulas::psri(p[0], p[1], p[2])),
    })
}

/// One aggregated feature value for one plot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotStatistic {
    pub plot_id: String,
    pub feature_name: String,
    pub value: f64,
    pub n_cells: usize,
}

/// Cells of `plot` in `grid`, optionally intersected with a binary mask.
pub(crate) fn selected_cells(
    grid: &RasterGrid,
    plot: &PlotGeometry,
    restrict_to: Option<&RasterGrid>,
) -> Result<Vec<usize>> {
    let mut cells = region_cells(grid, plot);
    if let Some(mask) = restrict_to {
        grid.geometry()
            .ensure_aligned(mask.geometry(), "restriction mask")?;
        mask.validate_mask()?;
        cells.retain(|&i| mask.value_at(i) == Some(1.0));
    }
    Ok(cells)
}

/// Mean of the defined cells of `grid` inside `plot`.
pub fn plot_statistic(
    feature_name: &str,
    grid: &RasterGrid,
    plot: &PlotGeometry,
    restrict_to: Option<&RasterGrid>,
) -> Result<PlotStatistic> {
    let cells = selected_cells(grid, plot, restrict_to)?;
    let mut sum = 0.0;
    let mut n = 0usize;
    for i in cells {
        if let Some(v) = grid.value_at(i) {
            sum += v;
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::EmptyPlot(plot.plot_id().to_string()));
    }
    Ok(PlotStatistic {
        plot_id: plot.plot_id().to_string(),
        feature_name: feature_name.to_string(),
        value: sum / n as f64,
        n_cells: n,
    })
}

/// Fraction of plot cells flagged as vegetation. Nodata cells count toward
/// the plot total as non-vegetation.
pub fn fvc(vegetation_mask: &RasterGrid, plot: &PlotGeometry) -> Result<PlotStatistic> {
    let (ratio, n) = mask_ratio(vegetation_mask, plot)?;
    Ok(PlotStatistic {
        plot_id: plot.plot_id().to_string(),
        feature_name: "FVC".to_string(),
        value: ratio,
        n_cells: n,
    })
}

/// `(ones / all cells, all cells)` of a binary mask over a region.
pub(crate) fn mask_ratio<R: crate::geodata::Region + ?Sized>(
    mask: &RasterGrid,
    region: &R,
) -> Result<(f64, usize)> {
    mask.validate_mask()?;
    let cells = region_cells(mask, region);
    if cells.is_empty() {
        return Err(Error::EmptyPlot(region.label().to_string()));
    }
    let ones = cells.iter().filter(|&&i| mask.value_at(i) == Some(1.0)).count();
    Ok((ones as f64 / cells.len() as f64, cells.len()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom(n: usize) -> GridGeometry {
        GridGeometry::new(n, n, 1.0, 0.0, 0.0).unwrap()
    }

    fn ms_set(nir: f64, red: f64, green: f64) -> BandSet {
        let g = geom(2);
        let mut bands = BTreeMap::new();
        for (name, nm) in MS_CENTERS_NM {
            let v = match name {
                "nir" => nir,
                "red" => red,
                "green" => green,
                _ => 0.05,
            };
            bands.insert(
                name.to_string(),
                Band {
                    grid: RasterGrid::filled(g, -9999.0, v),
                    wavelength_nm: nm,
                },
            );
        }
        BandSet::new(SensorKind::Multispectral, bands).unwrap()
    }

    fn hs_set(channels: &[(f64, f64)]) -> BandSet {
        let g = geom(2);
        let bands = channels
            .iter()
            .map(|&(nm, v)| {
                (
                    format!("b{nm}"),
                    Band {
                        grid: RasterGrid::filled(g, -9999.0, v),
                        wavelength_nm: nm,
                    },
                )
            })
            .collect();
        BandSet::new(SensorKind::Hyperspectral, bands).unwrap()
    }

    #[test]
    fn ndvi_and_savi_worked_examples() {
        let set = ms_set(0.5, 0.1, 0.1);
        let p = IndexParams::default();
        let ndvi = vi_map(&set, VegetationIndex::Ndvi, &p).unwrap();
        assert!((ndvi.grid.values()[0] - 0.666_666_666_666_666_6).abs() < 1e-12);
        let savi = vi_map(&set, VegetationIndex::Savi, &p).unwrap();
        assert!((savi.grid.values()[0] - 0.545_454_545_454_545_4).abs() < 1e-12);
        assert_eq!(ndvi.feature_name(), "NDVI_MS");
    }

    #[test]
    fn psri_ms_worked_example() {
        let set = ms_set(0.5, 0.2, 0.1);
        let m = vi_map(&set, VegetationIndex::Psri, &IndexParams::default()).unwrap();
        assert!((m.grid.values()[0] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn missing_band() {
        let g = geom(2);
        let mut bands = BTreeMap::new();
        bands.insert(
            "nir".to_string(),
            Band {
                grid: RasterGrid::filled(g, -9999.0, 0.4),
                wavelength_nm: 840.0,
            },
        );
        assert!(matches!(
            BandSet::new(SensorKind::Multispectral, bands),
            Err(Error::MissingBand(_))
        ));
    }

    #[test]
    fn misaligned_bands() {
        let mut bands = BTreeMap::new();
        for (i, (name, nm)) in MS_CENTERS_NM.iter().enumerate() {
            let n = if i == 0 { 3 } else { 2 };
            bands.insert(
                name.to_string(),
                Band {
                    grid: RasterGrid::filled(geom(n), -9999.0, 0.1),
                    wavelength_nm: *nm,
                },
            );
        }
        assert!(matches!(
            BandSet::new(SensorKind::Multispectral, bands),
            Err(Error::GeometryMismatch(_))
        ));
    }

    #[test]
    fn reflectance_out_of_range_rejected() {
        let g = geom(1);
        let mut bands = BTreeMap::new();
        bands.insert("a".into(), Band { grid: RasterGrid::filled(g, -9999.0, 1.5), wavelength_nm: 500.0 });
        bands.insert("b".into(), Band { grid: RasterGrid::filled(g, -9999.0, 0.5), wavelength_nm: 600.0 });
        assert!(matches!(
            BandSet::new(SensorKind::Hyperspectral, bands),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn psri_hs_exact_channels() {
        let set = hs_set(&[(500.0, 0.1), (680.0, 0.3), (750.0, 0.4)]);
        let m = psri_hs(&set).unwrap();
        assert!((m.grid.values()[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn nearest_band_ties_go_low() {
        let set = hs_set(&[(678.0, 0.2), (682.0, 0.3)]);
        assert_eq!(set.nearest_band(680.0).unwrap().wavelength_nm, 678.0);
    }

    #[test]
    fn psri_hs_missing_target() {
        let chans: Vec<(f64, f64)> = (0..=50).map(|i| (450.0 + 4.0 * i as f64, 0.2)).collect();
        let set = hs_set(&chans);
        match psri_hs(&set) {
            Err(Error::MissingBand(what)) => assert_eq!(what, "750 nm"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn zero_denominator_becomes_nodata() {
        let set = ms_set(0.0, 0.0, 0.1);
        let m = vi_map(&set, VegetationIndex::Ndvi, &IndexParams::default()).unwrap();
        assert!(m.grid.value_at(0).is_none());
        let m = vi_map(&set, VegetationIndex::Psri, &IndexParams::default()).unwrap();
        assert!(m.grid.value_at(0).is_none());
    }

    #[test]
    fn plot_mean_of_two_cells() {
        let g = GridGeometry::new(2, 1, 1.0, 0.0, 0.0).unwrap();
        let grid = RasterGrid::new(g, -9999.0, vec![0.2, 0.4]).unwrap();
        let plot = PlotGeometry::rectangle("p", "g", (0.0, 0.0), (2.0, 1.0)).unwrap();
        let s = plot_statistic("NDVI_MS", &grid, &plot, None).unwrap();
        assert!((s.value - 0.3).abs() < 1e-15);
        assert_eq!(s.n_cells, 2);
    }

    #[test]
    fn all_nodata_plot() {
        let g = GridGeometry::new(2, 1, 1.0, 0.0, 0.0).unwrap();
        let grid = RasterGrid::filled(g, -9999.0, -9999.0);
        let plot = PlotGeometry::rectangle("p", "g", (0.0, 0.0), (2.0, 1.0)).unwrap();
        assert!(matches!(plot_statistic("x", &grid, &plot, None), Err(Error::EmptyPlot(_))));
    }

    #[test]
    fn restricted_mean() {
        let g = GridGeometry::new(2, 1, 1.0, 0.0, 0.0).unwrap();
        let grid = RasterGrid::new(g, -9999.0, vec![0.2, 0.4]).unwrap();
        let mask = RasterGrid::new(g, -9999.0, vec![0.0, 1.0]).unwrap();
        let plot = PlotGeometry::rectangle("p", "g", (0.0, 0.0), (2.0, 1.0)).unwrap();
        let s = plot_statistic("x", &grid, &plot, Some(&mask)).unwrap();
        assert_eq!(s.value, 0.4);
        assert_eq!(s.n_cells, 1);
    }

    #[test]
    fn fvc_cases() {
        let g = GridGeometry::new(2, 2, 1.0, 0.0, 0.0).unwrap();
        let plot = PlotGeometry::rectangle("p", "g", (0.0, 0.0), (2.0, 2.0)).unwrap();
        let one = RasterGrid::new(g, -9999.0, vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(fvc(&one, &plot).unwrap().value, 0.25);
        let all = RasterGrid::filled(g, -9999.0, 1.0);
        assert_eq!(fvc(&all, &plot).unwrap().value, 1.0);
        let none = RasterGrid::filled(g, -9999.0, 0.0);
        assert_eq!(fvc(&none, &plot).unwrap().value, 0.0);
        let with_nodata = RasterGrid::new(g, -9999.0, vec![1.0, -9999.0, 1.0, 0.0]).unwrap();
        assert_eq!(fvc(&with_nodata, &plot).unwrap().value, 0.5);
        let bad = RasterGrid::new(g, -9999.0, vec![1.0, 0.3, 1.0, 0.0]).unwrap();
        assert!(matches!(fvc(&bad, &plot), Err(Error::InvalidMask(_))));
    }
}
