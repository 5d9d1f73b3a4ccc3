use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::kb::{GermplasmRecord, ScreeningDefaults, ScreeningTarget};

use super::matrix::{Column, Domain, DroppedRow, FeatureMatrix};
use super::records::{feature_columns, PlotFeatureRecord, WeatherRecord, PHENOTYPING_FEATURES};

/// Season summary column names, in output order.
pub const WEATHER_COLUMNS: [&str; 5] = [
    "weather_t_mean",
    "weather_dew_point",
    "weather_precip_total",
    "weather_net_radiation",
    "weather_wind_speed",
];

/// Growing-season weather summary at one site up to a date: means of
/// temperature, dew point, radiation and wind, total precipitation.
pub fn weather_summary(
    weather: &[WeatherRecord],
    site: &str,
    until: chrono::NaiveDate,
) -> Option<[f64; 5]> {
    let days: Vec<&WeatherRecord> = weather
        .iter()
        .filter(|w| w.site == site && w.date <= until)
        .collect();
    if days.is_empty() {
        return None;
    }
    let n = days.len() as f64;
    let mean = |f: fn(&WeatherRecord) -> f64| days.iter().map(|w| f(w)).sum::<f64>() / n;
    Some([
        mean(|w| w.t_mean),
        mean(|w| w.dew_point),
        days.iter().map(|w| w.precip).sum(),
        mean(|w| w.net_radiation),
        mean(|w| w.wind_speed),
    ])
}

fn germplasm_column(t: ScreeningTarget) -> String {
    format!("germplasm_{}", t.code())
}

/// Which domain a plot-feature column belongs to.
pub fn feature_domain(name: &str) -> Domain {
    if PHENOTYPING_FEATURES.contains(&name) {
        Domain::Phenotyping
    } else {
        Domain::RemoteSensing
    }
}

/// Builds the design matrix: one row per plot (its latest-dated record),
/// columns limited to `domains`. Rows lacking yield or any selected value are
/// dropped and listed in [`FeatureMatrix::dropped`].
pub fn assemble(
    records: &[PlotFeatureRecord],
    weather: &[WeatherRecord],
    germplasm: &[GermplasmRecord],
    screening: &ScreeningDefaults,
    domains: &[Domain],
) -> Result<FeatureMatrix> {
    if domains.is_empty() {
        return Err(Error::invalid("at least one domain must be selected"));
    }

    let mut latest: BTreeMap<&str, &PlotFeatureRecord> = BTreeMap::new();
    let mut order: Vec<&str> = Vec::new();
    for r in records {
        match latest.get(r.plot_id.as_str()) {
            None => {
                order.push(&r.plot_id);
                latest.insert(&r.plot_id, r);
            }
            Some(prev) if r.date > prev.date => {
                latest.insert(&r.plot_id, r);
            }
            Some(_) => {}
        }
    }
    let chosen: Vec<&PlotFeatureRecord> = order.iter().map(|p| latest[p]).collect();
    let owned: Vec<PlotFeatureRecord> = chosen.iter().map(|r| (*r).clone()).collect();

    let mut columns: Vec<Column> = feature_columns(&owned)
        .into_iter()
        .map(|name| {
            let domain = feature_domain(&name);
            Column { name, domain }
        })
        .filter(|c| domains.contains(&c.domain))
        .collect();
    let use_weather = domains.contains(&Domain::Weather);
    let use_germplasm = domains.contains(&Domain::Germplasm);
    if use_weather {
        columns.extend(WEATHER_COLUMNS.iter().map(|n| Column {
            name: n.to_string(),
            domain: Domain::Weather,
        }));
    }
    if use_germplasm {
        columns.extend(ScreeningTarget::ALL.iter().map(|&t| Column {
            name: germplasm_column(t),
            domain: Domain::Germplasm,
        }));
    }
    if columns.is_empty() {
        return Err(Error::invalid("no feature columns in the selected domains"));
    }

    let by_variety: BTreeMap<&str, &GermplasmRecord> =
        germplasm.iter().map(|g| (g.variety_name.as_str(), g)).collect();

    let (mut plot_ids, mut germplasm_ids, mut x, mut y) = (vec![], vec![], vec![], vec![]);
    let mut dropped = Vec::new();
    'rows: for r in chosen {
        let drop = |reason: String| DroppedRow { plot_id: r.plot_id.clone(), reason };
        let Some(target) = r.yield_kg_ha else {
            dropped.push(drop("missing yield".into()));
            continue;
        };
        let mut row = Vec::with_capacity(columns.len());
        for c in columns.iter().filter(|c| matches!(c.domain, Domain::RemoteSensing | Domain::Phenotyping)) {
            match r.features.get(&c.name) {
                Some(v) => row.push(*v),
                None => {
                    dropped.push(drop(format!("missing {}", c.name)));
                    continue 'rows;
                }
            }
        }
        if use_weather {
            match weather_summary(weather, &r.site, r.date) {
                Some(s) => row.extend(s),
                None => {
                    dropped.push(drop(format!("no weather for site `{}`", r.site)));
                    continue 'rows;
                }
            }
        }
        if use_germplasm {
            let Some(g) = by_variety.get(r.germplasm_id.as_str()) else {
                dropped.push(drop(format!("germplasm `{}` not in knowledge base", r.germplasm_id)));
                continue 'rows;
            };
            let flags = screening.flags(g)?;
            row.extend(ScreeningTarget::ALL.iter().map(|t| if flags[t] { 1.0 } else { 0.0 }));
        }
        plot_ids.push(r.plot_id.clone());
        germplasm_ids.push(r.germplasm_id.clone());
        x.extend(row);
        y.push(target);
    }
    for d in &dropped {
        log::warn!("dropping plot {}: {}", d.plot_id, d.reason);
    }
    if y.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(FeatureMatrix::new(plot_ids, germplasm_ids, columns, x, y)?.with_dropped(dropped))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::read_germplasm;

    fn d(s: &str) -> chrono::NaiveDate {
        s.parse().unwrap()
    }

    fn fixture() -> (Vec<PlotFeatureRecord>, Vec<WeatherRecord>, Vec<GermplasmRecord>) {
        let mut a = PlotFeatureRecord::new("p1", "Alpha", d("2024-05-01"));
        a.site = "s".into();
        a.features.insert("NDVI_MS".into(), 0.7);
        a.features.insert("CH".into(), 0.8);
        a.features.insert("SPAD".into(), 45.0);
        a.features.insert("LAI".into(), 4.0);
        a.yield_kg_ha = Some(6000.0);
        let mut b = PlotFeatureRecord::new("p2", "Beta", d("2024-05-01"));
        b.site = "s".into();
        b.features.insert("NDVI_MS".into(), 0.6);
        b.features.insert("CH".into(), 0.7);
        b.features.insert("SPAD".into(), 41.0);
        b.features.insert("LAI".into(), 3.5);
        b.yield_kg_ha = Some(5500.0);
        let mut stale = a.clone();
        stale.date = d("2024-04-01");
        stale.features.insert("NDVI_MS".into(), 0.1);

        let weather = vec![
            WeatherRecord { site: "s".into(), date: d("2024-03-01"), t_mean: 10.0, dew_point: 2.0, precip: 5.0, net_radiation: 100.0, wind_speed: 2.0 },
            WeatherRecord { site: "s".into(), date: d("2024-04-01"), t_mean: 14.0, dew_point: 6.0, precip: 0.0, net_radiation: 140.0, wind_speed: 4.0 },
            WeatherRecord { site: "s".into(), date: d("2024-06-01"), t_mean: 30.0, dew_point: 20.0, precip: 50.0, net_radiation: 300.0, wind_speed: 9.0 },
        ];
        let germ = "variety_name,crude_protein,sedimentation_value,stripe_rust,leaf_rust,powdery_mildew,drought,maturity,plant_height\n\
                    Alpha,15,45,R,MR,HR,2,early,78\n\
                    Beta,12,30,S,S,S,4,late,90\n";
        (vec![stale, a, b], weather, read_germplasm(germ.as_bytes()).unwrap())
    }

    #[test]
    fn two_plot_matrix_matches_hand_assembly() {
        let (recs, weather, germ) = fixture();
        let m = assemble(&recs, &weather, &germ, &ScreeningDefaults::default(), &Domain::ALL).unwrap();
        assert_eq!(
            m.column_names(),
            vec![
                "NDVI_MS", "CH", "SPAD", "LAI",
                "weather_t_mean", "weather_dew_point", "weather_precip_total",
                "weather_net_radiation", "weather_wind_speed",
                "germplasm_HQ", "germplasm_DS", "germplasm_DR", "germplasm_MP", "germplasm_AM",
            ]
        );
        assert_eq!(m.plot_ids(), &["p1".to_string(), "p2".to_string()]);
        assert_eq!(
            m.row(0),
            &[0.7, 0.8, 45.0, 4.0, 12.0, 4.0, 5.0, 120.0, 3.0, 1.0, 1.0, 1.0, 1.0, 1.0]
        );
        assert_eq!(
            m.row(1),
            &[0.6, 0.7, 41.0, 3.5, 12.0, 4.0, 5.0, 120.0, 3.0, 0.0, 0.0, 0.0, 0.0, 0.0]
        );
        assert_eq!(m.y(), &[6000.0, 5500.0]);
        assert!(m.dropped().is_empty());
    }

    #[test]
    fn rs_only_excludes_other_domains() {
        let (recs, weather, germ) = fixture();
        let m = assemble(&recs, &weather, &germ, &ScreeningDefaults::default(), &[Domain::RemoteSensing]).unwrap();
        assert_eq!(m.column_names(), vec!["NDVI_MS", "CH"]);
        for c in m.columns() {
            assert_eq!(c.domain, Domain::RemoteSensing);
        }
    }

    #[test]
    fn missing_lai_drops_row_and_reports_it() {
        let (mut recs, weather, germ) = fixture();
        recs[2].features.remove("LAI");
        let m = assemble(&recs, &weather, &germ, &ScreeningDefaults::default(), &[Domain::Phenotyping]).unwrap();
        assert_eq!(m.n_rows(), 1);
        assert_eq!(m.dropped().len(), 1);
        assert_eq!(m.dropped()[0].plot_id, "p2");
        assert!(m.dropped()[0].reason.contains("LAI"));
        let rs = assemble(&recs, &weather, &germ, &ScreeningDefaults::default(), &[Domain::RemoteSensing]).unwrap();
        assert_eq!(rs.n_rows(), 2);
    }

    #[test]
    fn empty_dataset() {
        let (mut recs, weather, germ) = fixture();
        for r in &mut recs {
            r.yield_kg_ha = None;
        }
        let err = assemble(&recs, &weather, &germ, &ScreeningDefaults::default(), &Domain::ALL).unwrap_err();
        assert!(matches!(err, Error::EmptyDataset));
        assert!(assemble(&recs, &weather, &germ, &ScreeningDefaults::default(), &[]).is_err());
    }
}
