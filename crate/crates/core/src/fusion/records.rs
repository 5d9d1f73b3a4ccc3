use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Remote-sensing plot features in output column order.
pub const RS_FEATURES: [&str; 16] = [
    "NDVI_MS", "SAVI_MS", "kNDVI_MS", "NIRv_MS", "PSRI_MS", "NDVI_HS", "SAVI_HS", "kNDVI_HS",
    "NIRv_HS", "PSRI_HS", "CH", "CV", "FVC", "PL_ratio", "WL_ratio", "WH_density",
];

/// Ground-truth phenotyping measurements.
pub const PHENOTYPING_FEATURES: [&str; 3] = ["SPAD", "LAI", "measured_CH"];

/// Label columns carried next to the numeric features.
pub const LABEL_COLUMNS: [&str; 2] = ["PL_level", "WL_level"];

const IDENTITY_COLUMNS: [&str; 4] = ["plot_id", "germplasm_id", "site", "date"];
const YIELD_COLUMN: &str = "yield_kg_ha";

/// Site used when a record does not name one.
pub const DEFAULT_SITE: &str = "default";

/// One plot on one date: every extracted feature plus optional yield.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotFeatureRecord {
    pub plot_id: String,
    pub germplasm_id: String,
    /// Weather station the plot draws its season summary from.
    pub site: String,
    pub date: NaiveDate,
    pub features: BTreeMap<String, f64>,
    pub labels: BTreeMap<String, String>,
    pub yield_kg_ha: Option<f64>,
}

impl PlotFeatureRecord {
    pub fn new(plot_id: &str, germplasm_id: &str, date: NaiveDate) -> Self {
        Self {
            plot_id: plot_id.to_string(),
            germplasm_id: germplasm_id.to_string(),
            site: DEFAULT_SITE.to_string(),
            date,
            features: BTreeMap::new(),
            labels: BTreeMap::new(),
            yield_kg_ha: None,
        }
    }
}

/// Feature columns in canonical order: known RS then phenotyping names,
/// then anything else alphabetically.
pub fn feature_columns(records: &[PlotFeatureRecord]) -> Vec<String> {
    let present: BTreeSet<&str> = records
        .iter()
        .flat_map(|r| r.features.keys().map(String::as_str))
        .collect();
    let mut cols: Vec<String> = RS_FEATURES
        .iter()
        .chain(PHENOTYPING_FEATURES.iter())
        .filter(|c| present.contains(*c))
        .map(|c| c.to_string())
        .collect();
    for c in &present {
        if !RS_FEATURES.contains(c) && !PHENOTYPING_FEATURES.contains(c) {
            cols.push(c.to_string());
        }
    }
    cols
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes the wide plot-feature CSV. Missing values are empty cells.
pub fn write_plot_features<W: Write>(records: &[PlotFeatureRecord], w: W) -> Result<()> {
    let cols = feature_columns(records);
    let labels: Vec<&str> = LABEL_COLUMNS
        .iter()
        .copied()
        .filter(|l| records.iter().any(|r| r.labels.contains_key(*l)))
        .collect();
    let mut wtr = csv::Writer::from_writer(w);
    let mut header: Vec<&str> = IDENTITY_COLUMNS.to_vec();
    header.extend(cols.iter().map(String::as_str));
    header.extend(labels.iter().copied());
    header.push(YIELD_COLUMN);
    wtr.write_record(&header)?;
    for r in records {
        let mut row = vec![
            r.plot_id.clone(),
            r.germplasm_id.clone(),
            r.site.clone(),
            r.date.to_string(),
        ];
        row.extend(cols.iter().map(|c| fmt_opt(r.features.get(c).copied())));
        row.extend(labels.iter().map(|l| r.labels.get(*l).cloned().unwrap_or_default()));
        row.push(fmt_opt(r.yield_kg_ha));
        wtr.write_record(&row)?;
    }
    wtr.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn read_plot_features<R: Read>(reader: R) -> Result<Vec<PlotFeatureRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let plot_col = find("plot_id").ok_or_else(|| Error::parse(1, "missing plot_id column"))?;
    let germ_col = find("germplasm_id").ok_or_else(|| Error::parse(1, "missing germplasm_id column"))?;
    let date_col = find("date").ok_or_else(|| Error::parse(1, "missing date column"))?;
    let site_col = find("site");
    let yield_col = find(YIELD_COLUMN);
    let mut seen = BTreeSet::new();
    for h in headers.iter() {
        if !seen.insert(h) {
            return Err(Error::parse(1, format!("duplicate column `{h}`")));
        }
    }

    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let line = i + 2;
        let row = row?;
        let date_raw = row.get(date_col).unwrap_or("");
        let date: NaiveDate = date_raw
            .parse()
            .map_err(|_| Error::parse(line, format!("bad date `{date_raw}`")))?;
        let mut rec = PlotFeatureRecord::new(
            row.get(plot_col).unwrap_or(""),
            row.get(germ_col).unwrap_or(""),
            date,
        );
        if rec.plot_id.is_empty() {
            return Err(Error::parse(line, "empty plot_id"));
        }
        if let Some(site) = site_col.and_then(|c| row.get(c)).filter(|s| !s.is_empty()) {
            rec.site = site.to_string();
        }
        for (c, name) in headers.iter().enumerate() {
            let raw = row.get(c).unwrap_or("");
            if IDENTITY_COLUMNS.contains(&name) || raw.is_empty() {
                continue;
            }
            if LABEL_COLUMNS.contains(&name) {
                rec.labels.insert(name.to_string(), raw.to_string());
                continue;
            }
            let v: f64 = raw
                .parse()
                .map_err(|_| Error::parse(line, format!("{name}: `{raw}` is not a number")))?;
            if !v.is_finite() {
                return Err(Error::parse(line, format!("{name} is not finite")));
            }
            if Some(c) == yield_col {
                if v < 0.0 {
                    return Err(Error::parse(line, "yield must be non-negative"));
                }
                rec.yield_kg_ha = Some(v);
            } else {
                rec.features.insert(name.to_string(), v);
            }
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn load_plot_features(path: impl AsRef<Path>) -> Result<Vec<PlotFeatureRecord>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_plot_features(file)
}

/// Daily weather at one site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeatherRecord {
    pub site: String,
    pub date: NaiveDate,
    /// °C
    pub t_mean: f64,
    /// °C
    pub dew_point: f64,
    /// mm
    pub precip: f64,
    /// W/m²
    pub net_radiation: f64,
    /// m/s
    pub wind_speed: f64,
}

pub fn read_weather<R: Read>(reader: R) -> Result<Vec<WeatherRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for (i, rec) in rdr.deserialize::<WeatherRecord>().enumerate() {
        let r = rec.map_err(|e| Error::parse(i + 2, e.to_string()))?;
        if !(r.precip >= 0.0 && r.wind_speed >= 0.0) {
            return Err(Error::parse(i + 2, "precipitation and wind speed must be >= 0"));
        }
        out.push(r);
    }
    Ok(out)
}

pub fn load_weather(path: impl AsRef<Path>) -> Result<Vec<WeatherRecord>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_weather(file)
}

/// Yield in kg/ha corrected to 12.5% grain moisture.
pub fn standardize_yield(raw_mass_kg: f64, plot_area_ha: f64, moisture: f64) -> Result<f64> {
    if !(plot_area_ha.is_finite() && plot_area_ha > 0.0) {
        return Err(Error::invalid(format!("plot area must be > 0, got {plot_area_ha}")));
    }
    if !(0.0..1.0).contains(&moisture) {
        return Err(Error::invalid(format!("moisture must be in [0, 1), got {moisture}")));
    }
    if !(raw_mass_kg.is_finite() && raw_mass_kg >= 0.0) {
        return Err(Error::invalid(format!("raw mass must be >= 0, got {raw_mass_kg}")));
    }
    Ok(raw_mass_kg / plot_area_ha * (1.0 - moisture) / (1.0 - 0.125))
}
