use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::matrix::FeatureMatrix;
use super::ridge::{fit_ridge, metrics, rmse, Metrics};

/// Provincial reference yield (kg/ha); predictions above it are flagged.
pub const REFERENCE_YIELD_KG_HA: f64 = 4230.2;

pub fn exceeds_reference_yield(predicted: f64) -> bool {
    predicted > REFERENCE_YIELD_KG_HA
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    /// `None` when the held-out targets are constant.
    pub r2: Option<f64>,
    pub rmse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OofPrediction {
    pub plot_id: String,
    pub germplasm_id: String,
    pub fold: usize,
    pub measured: f64,
    pub predicted: f64,
    pub exceeds_4230_2: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub k: usize,
    pub lambda: f64,
    pub seed: u64,
    pub per_fold: Vec<FoldReport>,
    pub pooled: Metrics,
    /// Out-of-fold predictions in matrix row order.
    pub predictions: Vec<OofPrediction>,
}

/// Seeded fold index for every row. The first `n % k` folds hold `⌈n/k⌉`
/// rows, the rest `⌊n/k⌋`.
pub fn fold_assignment(n: usize, k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::invalid(format!("k must be >= 2, got {k}")));
    }
    if k > n {
        return Err(Error::invalid(format!("k = {k} exceeds the {n} available rows")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (base, extra) = (n / k, n % k);
    let mut fold_of = vec![0; n];
    let mut pos = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        for &row in &order[pos..pos + size] {
            fold_of[row] = f;
        }
        pos += size;
    }
    Ok(fold_of)
}

/// k-fold cross-validated ridge regression. Each fold's model, including its
/// normalization constants, sees only that fold's training rows.
pub fn kfold_cv(m: &FeatureMatrix, k: usize, lambda: f64, seed: u64) -> Result<CvReport> {
    let n = m.n_rows();
    let fold_of = fold_assignment(n, k, seed)?;

    let per_fold: Vec<(Vec<usize>, Vec<f64>, usize)> = (0..k)
        .into_par_iter()
        .map(|f| {
            let (test, train): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| fold_of[i] == f);
            let model = fit_ridge(&m.select_rows(&train), lambda)?;
            let pred = test.iter().map(|&i| model.predict_row(m.row(i))).collect();
            Ok((test, pred, train.len()))
        })
        .collect::<Result<_>>()?;

    let mut predicted = vec![f64::NAN; n];
    let mut folds = Vec::with_capacity(k);
    for (f, (test, pred, n_train)) in per_fold.into_iter().enumerate() {
        let truth: Vec<f64> = test.iter().map(|&i| m.y()[i]).collect();
        let r2 = match metrics(&truth, &pred) {
            Ok(mt) => Some(mt.r2),
            Err(Error::UndefinedR2) => None,
            Err(e) => return Err(e),
        };
        folds.push(FoldReport {
            fold: f,
            n_train,
            n_test: test.len(),
            r2,
            rmse: rmse(&truth, &pred)?,
        });
        for (&i, p) in test.iter().zip(pred) {
            predicted[i] = p;
        }
    }
    if let Some(i) = predicted.iter().position(|p| !p.is_finite()) {
        return Err(Error::invalid(format!("non-finite prediction for plot {}", m.plot_ids()[i])));
    }

    let pooled = metrics(m.y(), &predicted)?;
    let predictions = (0..n)
        .map(|i| OofPrediction {
            plot_id: m.plot_ids()[i].clone(),
            germplasm_id: m.germplasm_ids()[i].clone(),
            fold: fold_of[i],
            measured: m.y()[i],
            predicted: predicted[i],
            exceeds_4230_2: exceeds_reference_yield(predicted[i]),
        })
        .collect();
    Ok(CvReport {
        k,
        lambda,
        seed,
        per_fold: folds,
        pooled,
        predictions,
    })
}

/// Writes `plot_id, germplasm_id, measured, predicted, exceeds_4230_2`.
pub fn write_scatter_csv<W: Write>(report: &CvReport, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["plot_id", "germplasm_id", "measured", "predicted", "exceeds_4230_2"])?;
    for p in &report.predictions {
        wtr.write_record([
            p.plot_id.clone(),
            p.germplasm_id.clone(),
            p.measured.to_string(),
            p.predicted.to_string(),
            p.exceeds_4230_2.to_string(),
        ])?;
    }
    wtr.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// `{per_fold: [...], pooled: {r2, rmse}, k, lambda, seed}`.
pub fn metrics_json(report: &CvReport) -> serde_json::Value {
    serde_json::json!({
        "k": report.k,
        "lambda": report.lambda,
        "seed": report.seed,
        "per_fold": report.per_fold,
        "pooled": report.pooled,
    })
}
