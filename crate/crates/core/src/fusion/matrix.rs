use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Data source a feature column comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Domain {
    #[serde(rename = "RS")]
    RemoteSensing,
    #[serde(rename = "phenotyping")]
    Phenotyping,
    #[serde(rename = "weather")]
    Weather,
    #[serde(rename = "germplasm")]
    Germplasm,
}

impl Domain {
    pub const ALL: [Domain; 4] = [
        Domain::RemoteSensing,
        Domain::Phenotyping,
        Domain::Weather,
        Domain::Germplasm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Domain::RemoteSensing => "RS",
            Domain::Phenotyping => "phenotyping",
            Domain::Weather => "weather",
            Domain::Germplasm => "germplasm",
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Domain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Domain::ALL
            .into_iter()
            .find(|d| d.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::invalid(format!("unknown domain `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub domain: Domain,
}

/// A row that did not make it into the matrix and why.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DroppedRow {
    pub plot_id: String,
    pub reason: String,
}

/// Dense, fully populated design matrix with a yield target.
///
/// `x` is row-major, `n_rows × columns.len()`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    plot_ids: Vec<String>,
    germplasm_ids: Vec<String>,
    columns: Vec<Column>,
    x: Vec<f64>,
    y: Vec<f64>,
    dropped: Vec<DroppedRow>,
}

impl FeatureMatrix {
    pub fn new(
        plot_ids: Vec<String>,
        germplasm_ids: Vec<String>,
        columns: Vec<Column>,
        x: Vec<f64>,
        y: Vec<f64>,
    ) -> Result<Self> {
        let n = plot_ids.len();
        if germplasm_ids.len() != n || y.len() != n || x.len() != n * columns.len() {
            return Err(Error::invalid(format!(
                "matrix shape mismatch: {n} plots, {} germplasm ids, {} targets, {} cells for {} columns",
                germplasm_ids.len(),
                y.len(),
                x.len(),
                columns.len()
            )));
        }
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        if let Some(v) = x.iter().chain(&y).find(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("matrix contains non-finite value {v}")));
        }
        for (i, c) in columns.iter().enumerate() {
            if columns[..i].iter().any(|o| o.name == c.name) {
                return Err(Error::invalid(format!("duplicate column `{}`", c.name)));
            }
        }
        Ok(Self {
            plot_ids,
            germplasm_ids,
            columns,
            x,
            y,
            dropped: Vec::new(),
        })
    }

    pub fn with_dropped(mut self, dropped: Vec<DroppedRow>) -> Self {
        self.dropped = dropped;
        self
    }

    pub fn n_rows(&self) -> usize {
        self.y.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column_names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn domain_of(&self, column: &str) -> Option<Domain> {
        self.columns.iter().find(|c| c.name == column).map(|c| c.domain)
    }

    pub fn plot_ids(&self) -> &[String] {
        &self.plot_ids
    }

    pub fn germplasm_ids(&self) -> &[String] {
        &self.germplasm_ids
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.n_cols();
        &self.x[i * p..(i + 1) * p]
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.x[row * self.n_cols() + col]
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.n_rows()).map(|i| self.get(i, col)).collect()
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn dropped(&self) -> &[DroppedRow] {
        &self.dropped
    }

    /// Same rows, keeping only columns from `domains`.
    pub fn select_domains(&self, domains: &[Domain]) -> Result<FeatureMatrix> {
        let keep: Vec<usize> = (0..self.n_cols())
            .filter(|&j| domains.contains(&self.columns[j].domain))
            .collect();
        if keep.is_empty() {
            return Err(Error::invalid("no columns in the selected domains"));
        }
        let x = (0..self.n_rows())
            .flat_map(|i| keep.iter().map(move |&j| (i, j)))
            .map(|(i, j)| self.get(i, j))
            .collect();
        let columns = keep.iter().map(|&j| self.columns[j].clone()).collect();
        Ok(FeatureMatrix {
            plot_ids: self.plot_ids.clone(),
            germplasm_ids: self.germplasm_ids.clone(),
            columns,
            x,
            y: self.y.clone(),
            dropped: self.dropped.clone(),
        })
    }

    /// Subset of rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            plot_ids: rows.iter().map(|&i| self.plot_ids[i].clone()).collect(),
            germplasm_ids: rows.iter().map(|&i| self.germplasm_ids[i].clone()).collect(),
            columns: self.columns.clone(),
            x: rows.iter().flat_map(|&i| self.row(i).iter().copied()).collect(),
            y: rows.iter().map(|&i| self.y[i]).collect(),
            dropped: Vec::new(),
        }
    }

    /// Applies `f` to every value of one column.
    pub fn map_column(&mut self, col: usize, f: impl Fn(f64) -> f64) {
        let p = self.n_cols();
        for i in 0..self.n_rows() {
            self.x[i * p + col] = f(self.x[i * p + col]);
        }
    }
}
