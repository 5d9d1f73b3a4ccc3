use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::deviation::within_ten_percent;
use crate::error::{Error, Result};

/// Maximum gap between a queried date and the record used to answer it.
pub const PRICE_DATE_WINDOW_DAYS: i64 = 31;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceRecord {
    pub observation_point: String,
    pub variety_name: String,
    /// currency per bag
    pub price: f64,
    /// kg per bag
    pub specification: f64,
    pub planting_area: String,
    pub date: NaiveDate,
}

/// Reads `prices.csv` with columns `observation_point, variety_name, price,
/// specification, planting_area, date` (ISO dates).
pub fn read_prices<R: std::io::Read>(reader: R) -> Result<Vec<PriceRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for (i, rec) in rdr.deserialize::<PriceRecord>().enumerate() {
        let r = rec.map_err(|e| Error::parse(i + 2, e.to_string()))?;
        if !(r.price.is_finite() && r.price > 0.0) {
            return Err(Error::parse(i + 2, format!("price must be > 0, got {}", r.price)));
        }
        if !(r.specification.is_finite() && r.specification > 0.0) {
            return Err(Error::parse(
                i + 2,
                format!("specification must be > 0, got {}", r.specification),
            ));
        }
        out.push(r);
    }
    Ok(out)
}

pub fn load_prices(path: impl AsRef<Path>) -> Result<Vec<PriceRecord>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_prices(file)
}

/// Price observations at `observation_point` on the recorded date nearest to
/// `date` (within ±31 days, ties to the earlier date), optionally for one
/// variety. Results are ordered by variety name.
///
/// An empty answer is `Error::NotFound`; nothing is ever interpolated.
pub fn query_price(
    records: &[PriceRecord],
    observation_point: &str,
    date: NaiveDate,
    variety: Option<&str>,
) -> Result<Vec<PriceRecord>> {
    let candidates: Vec<&PriceRecord> = records
        .iter()
        .filter(|r| r.observation_point == observation_point)
        .filter(|r| variety.is_none_or(|v| r.variety_name == v))
        .filter(|r| (r.date - date).num_days().abs() <= PRICE_DATE_WINDOW_DAYS)
        .collect();
    let best = candidates
        .iter()
        .map(|r| r.date)
        .min_by_key(|d| ((*d - date).num_days().abs(), *d));
    let Some(best) = best else {
        return Err(Error::NotFound(format!(
            "no price at `{observation_point}` within {PRICE_DATE_WINDOW_DAYS} days of {date}"
        )));
    };
    let mut hits: Vec<PriceRecord> = candidates
        .into_iter()
        .filter(|r| r.date == best)
        .cloned()
        .collect();
    hits.sort_by(|a, b| a.variety_name.cmp(&b.variety_name));
    Ok(hits)
}

/// Whether an answered price agrees with the knowledge base within ±10%.
pub fn price_consistent(answer_price: f64, record: &PriceRecord) -> bool {
    within_ten_percent(answer_price, record.price)
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIXTURE: &str = "\
observation_point,variety_name,price,specification,planting_area,date
Miyun District,Nongda 3486,150,25,Beijing,2024-06-01
Miyun District,Jimai 22,120,25,Beijing,2024-06-01
Miyun District,Nongda 3486,145,25,Beijing,2024-05-01
Shunyi District,Nongda 3486,155,25,Beijing,2024-06-01
";

    fn d(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    #[test]
    fn exact_query_returns_the_record() {
        let recs = read_prices(FIXTURE.as_bytes()).unwrap();
        let hits = query_price(&recs, "Miyun District", d("2024-06-01"), Some("Nongda 3486")).unwrap();
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].price, 150.0);
        assert_eq!(hits[0].specification, 25.0);
    }

    #[test]
    fn nearest_date_within_window() {
        let recs = read_prices(FIXTURE.as_bytes()).unwrap();
        let hits = query_price(&recs, "Miyun District", d("2024-06-15"), Some("Nongda 3486")).unwrap();
        assert_eq!(hits[0].date, d("2024-06-01"));
        let hits = query_price(&recs, "Miyun District", d("2024-05-16"), Some("Nongda 3486")).unwrap();
        assert_eq!(hits[0].date, d("2024-05-01"));
        let tie = "observation_point,variety_name,price,specification,planting_area,date\n\
                   P,V,100,25,A,2024-06-01\nP,V,110,25,A,2024-06-11\n";
        let tie = read_prices(tie.as_bytes()).unwrap();
        let hits = query_price(&tie, "P", d("2024-06-06"), None).unwrap();
        assert_eq!(hits[0].date, d("2024-06-01"));
        let all = query_price(&recs, "Miyun District", d("2024-06-03"), None).unwrap();
        assert_eq!(all.len(), 2);
        assert_eq!(all[0].variety_name, "Jimai 22");
    }

    #[test]
    fn not_found_cases() {
        let recs = read_prices(FIXTURE.as_bytes()).unwrap();
        assert!(matches!(
            query_price(&recs, "Haidian District", d("2024-06-01"), None),
            Err(Error::NotFound(_))
        ));
        assert!(matches!(
            query_price(&recs, "Miyun District", d("2024-08-15"), None),
            Err(Error::NotFound(_))
        ));
    }

    #[test]
    fn never_crosses_observation_points() {
        let recs = read_prices(FIXTURE.as_bytes()).unwrap();
        for point in ["Miyun District", "Shunyi District"] {
            for r in query_price(&recs, point, d("2024-06-01"), None).unwrap() {
                assert_eq!(r.observation_point, point);
            }
        }
    }

    #[test]
    fn consistency_boundaries() {
        let recs = read_prices(FIXTURE.as_bytes()).unwrap();
        assert!(price_consistent(150.0, &recs[0]));
        assert!(price_consistent(165.0, &recs[0]));
        assert!(!price_consistent(166.0, &recs[0]));
    }

    #[test]
    fn rejects_nonpositive_price() {
        let text = "observation_point,variety_name,price,specification,planting_area,date\nA,B,0,25,C,2024-01-01\n";
        assert!(read_prices(text.as_bytes()).is_err());
    }
}
