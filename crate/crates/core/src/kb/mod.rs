//! Structured knowledge base: germplasm traits, cultivation and plant
//! protection documents, and seed price observations.
//!
//! All string fields are opaque (Chinese or English); matching is exact
//! string or numeric comparison.

mod germplasm;
mod price;

pub use germplasm::{
    load_germplasm, read_germplasm, screen_germplasm, CompareOp, GermplasmRecord, Predicate,
    ScreeningDefaults, ScreeningTarget, TraitValue, GERMPLASM_FIELDS,
};
pub use price::{
    load_prices, price_consistent, query_price, read_prices, PriceRecord, PRICE_DATE_WINDOW_DAYS,
};

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DocCategory {
    Cultivation,
    PlantProtection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocRecord {
    pub doc_id: String,
    pub category: DocCategory,
    pub title: String,
    pub body: String,
    pub source: String,
}

pub fn read_docs<R: std::io::Read>(reader: R) -> Result<Vec<DocRecord>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut docs = Vec::new();
    for (i, rec) in rdr.deserialize::<DocRecord>().enumerate() {
        let doc = rec.map_err(|e| Error::parse(i + 2, e.to_string()))?;
        if doc.body.trim().is_empty() {
            return Err(Error::parse(i + 2, format!("document `{}` has an empty body", doc.doc_id)));
        }
        docs.push(doc);
    }
    Ok(docs)
}

pub fn load_docs(path: impl AsRef<Path>) -> Result<Vec<DocRecord>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_docs(file)
}

/// Documents of one category whose title or body contains `keyword`
/// verbatim, ordered by `doc_id`.
pub fn find_docs<'a>(
    docs: &'a [DocRecord],
    category: DocCategory,
    keyword: &str,
) -> Vec<&'a DocRecord> {
    let mut hits: Vec<&DocRecord> = docs
        .iter()
        .filter(|d| d.category == category && (d.title.contains(keyword) || d.body.contains(keyword)))
        .collect();
    hits.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
    hits
}
