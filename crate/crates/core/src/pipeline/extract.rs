use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;
use std::path::Path;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::fusion::{PlotFeatureRecord, PHENOTYPING_FEATURES};
use crate::geodata::{
    buffer_ring, load_point_cloud, load_raster, rasterize_elevation_onto, ElevationAggregator,
    GridGeometry, PlotGeometry, RasterGrid,
};
use crate::spectral::{fvc, plot_statistic, vi_map, BandSet, IndexParams, VegetationIndex, VegetationIndexMap};
use crate::structural::{
    canopy_height_model, canopy_volume, classify_lodging, classify_weed, plot_canopy_height,
    wheat_head_density, CanopyHeightModel,
};

/// Nadir camera used for the wheat-head images.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Camera {
    pub altitude_m: f64,
    pub fov_h_deg: f64,
    pub fov_v_deg: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractParams {
    pub index: IndexParams,
    pub ch_percentile: f64,
    pub noise_floor: f64,
    pub weed_ring: (f64, f64),
    pub vi_vegetation_only: bool,
    pub camera: Option<Camera>,
}

impl Default for ExtractParams {
    fn default() -> Self {
        Self {
            index: IndexParams::default(),
            ch_percentile: crate::structural::DEFAULT_HEIGHT_PERCENTILE,
            noise_floor: crate::structural::DEFAULT_NOISE_FLOOR,
            weed_ring: crate::structural::DEFAULT_WEED_RING,
            vi_vegetation_only: false,
            camera: None,
        }
    }
}

/// Measured values for one plot from the field team.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GroundTruth {
    pub features: BTreeMap<String, f64>,
    pub yield_kg_ha: Option<f64>,
}

/// Loaded layers of one acquisition. All grids must share the MS geometry.
#[derive(Debug, Clone)]
pub struct Scene {
    pub plots: Vec<PlotGeometry>,
    pub ms: BandSet,
    pub hs: BandSet,
    pub dsm: RasterGrid,
    pub dem: RasterGrid,
    pub vegetation_mask: RasterGrid,
    pub lodging_mask: RasterGrid,
    pub weed_mask: RasterGrid,
    pub special_plots: BTreeSet<String>,
    pub head_counts: BTreeMap<String, Vec<f64>>,
    pub ground_truth: BTreeMap<String, GroundTruth>,
    pub date: NaiveDate,
    pub site: String,
}

/// Reads an elevation layer: `.asc` grids as-is, anything else as a point
/// cloud rasterized onto `geometry`.
pub fn load_elevation(path: &Path, geometry: &GridGeometry, agg: ElevationAggregator) -> Result<RasterGrid> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("asc")) {
        load_raster(path)
    } else {
        rasterize_elevation_onto(&load_point_cloud(path)?, geometry, agg)
    }
}

#[derive(Deserialize)]
struct CountRow {
    plot_id: String,
    #[allow(dead_code)]
    image_id: String,
    count: f64,
}

/// `plot_id, image_id, count` rows grouped per plot.
pub fn read_head_counts<R: Read>(reader: R) -> Result<BTreeMap<String, Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (i, row) in rdr.deserialize::<CountRow>().enumerate() {
        let row = row.map_err(|e| Error::parse(i + 2, e.to_string()))?;
        out.entry(row.plot_id).or_default().push(row.count);
    }
    Ok(out)
}

/// `plot_id` plus any of the phenotyping columns and `yield_kg_ha`.
pub fn read_ground_truth<R: Read>(reader: R) -> Result<BTreeMap<String, GroundTruth>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let plot_col = headers
        .iter()
        .position(|h| h == "plot_id")
        .ok_or_else(|| Error::parse(1, "missing plot_id column"))?;
    for h in headers.iter() {
        if h != "plot_id" && h != "yield_kg_ha" && !PHENOTYPING_FEATURES.contains(&h) {
            return Err(Error::UnknownField(h.to_string()));
        }
    }
    let mut out = BTreeMap::new();
    for (i, row) in rdr.records().enumerate() {
        let line = i + 2;
        let row = row?;
        let mut gt = GroundTruth::default();
        for (c, h) in headers.iter().enumerate() {
            let raw = row.get(c).unwrap_or("");
            if c == plot_col || raw.is_empty() {
                continue;
            }
            let v: f64 = raw
                .parse()
                .map_err(|_| Error::parse(line, format!("{h}: `{raw}` is not a number")))?;
            if h == "yield_kg_ha" {
                gt.yield_kg_ha = Some(v);
            } else {
                gt.features.insert(h.to_string(), v);
            }
        }
        let id = row.get(plot_col).unwrap_or("").to_string();
        if out.insert(id.clone(), gt).is_some() {
            return Err(Error::parse(line, format!("plot `{id}` listed twice")));
        }
    }
    Ok(out)
}

fn plot_features(
    scene: &Scene,
    params: &ExtractParams,
    maps: &[VegetationIndexMap],
    chm: &CanopyHeightModel,
    plot: &PlotGeometry,
) -> Result<PlotFeatureRecord> {
    let mut rec = PlotFeatureRecord::new(plot.plot_id(), plot.germplasm_id(), scene.date);
    rec.site = scene.site.clone();
    let restrict = params.vi_vegetation_only.then_some(&scene.vegetation_mask);
    for m in maps {
        let name = m.feature_name();
        let s = plot_statistic(&name, &m.grid, plot, restrict)?;
        rec.features.insert(name, s.value);
    }
    rec.features
        .insert("CH".into(), plot_canopy_height(chm, plot, params.ch_percentile)?.value);
    rec.features.insert("CV".into(), canopy_volume(&chm.grid, plot)?.volume);
    rec.features
        .insert("FVC".into(), fvc(&scene.vegetation_mask, plot)?.value);
    let special = scene.special_plots.contains(plot.plot_id());
    let pl = classify_lodging(&scene.lodging_mask, plot, special)?;
    rec.features.insert("PL_ratio".into(), pl.ratio);
    rec.labels.insert("PL_level".into(), pl.level.label().into());
    let ring = buffer_ring(plot, params.weed_ring.0, params.weed_ring.1)?;
    let wl = classify_weed(&scene.weed_mask, plot, &ring)?;
    rec.features.insert("WL_ratio".into(), wl.ratio);
    rec.labels.insert("WL_level".into(), wl.level.label().into());
    if let (Some(counts), Some(cam)) = (scene.head_counts.get(plot.plot_id()), params.camera) {
        let wh = wheat_head_density(counts, cam.altitude_m, cam.fov_h_deg, cam.fov_v_deg)?;
        rec.features.insert("WH_density".into(), wh.density);
    }
    if let Some(gt) = scene.ground_truth.get(plot.plot_id()) {
        rec.features.extend(gt.features.iter().map(|(k, v)| (k.clone(), *v)));
        rec.yield_kg_ha = gt.yield_kg_ha;
    }
    Ok(rec)
}

/// One feature record per plot, in plot order.
pub fn extract_features(scene: &Scene, params: &ExtractParams) -> Result<Vec<PlotFeatureRecord>> {
    let geometry = scene.ms.geometry();
    for (what, g) in [
        ("HS bands", scene.hs.geometry()),
        ("DSM", scene.dsm.geometry()),
        ("DEM", scene.dem.geometry()),
        ("vegetation mask", scene.vegetation_mask.geometry()),
        ("lodging mask", scene.lodging_mask.geometry()),
        ("weed mask", scene.weed_mask.geometry()),
    ] {
        geometry.ensure_aligned(g, what)?;
    }
    if !scene.head_counts.is_empty() && params.camera.is_none() {
        return Err(Error::invalid("head counts given without camera altitude and field of view"));
    }
    let mut maps = Vec::with_capacity(2 * VegetationIndex::ALL.len());
    for bands in [&scene.ms, &scene.hs] {
        for idx in VegetationIndex::ALL {
            maps.push(vi_map(bands, idx, &params.index)?);
        }
    }
    let chm = canopy_height_model(&scene.dsm, &scene.dem, params.noise_floor)?;
    scene
        .plots
        .par_iter()
        .map(|p| plot_features(scene, params, &maps, &chm, p))
        .collect()
}
