use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::matrix::FeatureMatrix;

/// Ridge regression on z-scored columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeModel {
    /// Names of every input column the model expects, in order.
    pub columns: Vec<String>,
    /// Indices into `columns` that carry a weight; constant columns are left out.
    pub retained: Vec<usize>,
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub column_means: Vec<f64>,
    pub column_stds: Vec<f64>,
    pub lambda: f64,
}

impl RidgeModel {
    /// `intercept + Σ w_j (x_j - mean_j) / std_j` over retained columns.
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.retained
            .iter()
            .enumerate()
            .fold(self.intercept, |acc, (k, &j)| {
                acc + self.weights[k] * (row[j] - self.column_means[k]) / self.column_stds[k]
            })
    }

    pub fn predict(&self, m: &FeatureMatrix) -> Vec<f64> {
        (0..m.n_rows()).map(|i| self.predict_row(m.row(i))).collect()
    }

    /// Weight per retained column name.
    pub fn named_weights(&self) -> Vec<(&str, f64)> {
        self.retained
            .iter()
            .zip(&self.weights)
            .map(|(&j, &w)| (self.columns[j].as_str(), w))
            .collect()
    }
}

/// In-place Cholesky solve of the symmetric system `a x = b` (`a` is `p × p`,
/// row-major). Pivots that vanish relative to the diagonal scale mean the
/// system is singular.
fn cholesky_solve(mut a: Vec<f64>, mut b: Vec<f64>, p: usize) -> Result<Vec<f64>> {
    let scale = (0..p).map(|i| a[i * p + i].abs()).fold(0.0, f64::max);
    let tol = scale * 1e-12;
    for j in 0..p {
        let mut d = a[j * p + j];
        for k in 0..j {
            d -= a[j * p + k] * a[j * p + k];
        }
        if !(d > tol) {
            return Err(Error::SingularSystem);
        }
        let d = d.sqrt();
        a[j * p + j] = d;
        for i in j + 1..p {
            let mut s = a[i * p + j];
            for k in 0..j {
                s -= a[i * p + k] * a[j * p + k];
            }
            a[i * p + j] = s / d;
        }
    }
    for i in 0..p {
        let mut s = b[i];
        for k in 0..i {
            s -= a[i * p + k] * b[k];
        }
        b[i] = s / a[i * p + i];
    }
    for i in (0..p).rev() {
        let mut s = b[i];
        for k in i + 1..p {
            s -= a[k * p + i] * b[k];
        }
        b[i] = s / a[i * p + i];
    }
    Ok(b)
}

/// Solves `(ZᵀZ + λI) w = Zᵀ(y - ȳ)` directly; the intercept is `ȳ`.
pub fn fit_ridge(m: &FeatureMatrix, lambda: f64) -> Result<RidgeModel> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::invalid(format!("lambda must be >= 0, got {lambda}")));
    }
    let n = m.n_rows();
    let nf = n as f64;
    let y_mean = m.y().iter().sum::<f64>() / nf;

    let mut retained = Vec::new();
    let mut means = Vec::new();
    let mut stds = Vec::new();
    for j in 0..m.n_cols() {
        let col = m.column(j);
        if col.iter().all(|&v| v == col[0]) {
            log::warn!("dropping zero-variance column {}", m.columns()[j].name);
            continue;
        }
        let mean = col.iter().sum::<f64>() / nf;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / nf;
        retained.push(j);
        means.push(mean);
        stds.push(var.sqrt());
    }

    let p = retained.len();
    let z: Vec<f64> = (0..n)
        .flat_map(|i| {
            let row = m.row(i);
            let (means, stds, retained) = (&means, &stds, &retained);
            (0..p).map(move |k| (row[retained[k]] - means[k]) / stds[k])
        })
        .collect();
    let mut gram = vec![0.0; p * p];
    let mut rhs = vec![0.0; p];
    for i in 0..n {
        let zi = &z[i * p..(i + 1) * p];
        let yc = m.y()[i] - y_mean;
        for a in 0..p {
            rhs[a] += zi[a] * yc;
            for b in 0..=a {
                gram[a * p + b] += zi[a] * zi[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            gram[b * p + a] = gram[a * p + b];
        }
        gram[a * p + a] += lambda;
    }
    let weights = if p == 0 { Vec::new() } else { cholesky_solve(gram, rhs, p)? };

    Ok(RidgeModel {
        columns: m.columns().iter().map(|c| c.name.clone()).collect(),
        retained,
        weights,
        intercept: y_mean,
        column_means: means,
        column_stds: stds,
        lambda,
    })
}

/// Coefficient of determination and root-mean-square error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub r2: f64,
    pub rmse: f64,
}

pub fn rmse(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    check_lengths(y_true, y_pred)?;
    let sse: f64 = y_true.iter().zip(y_pred).map(|(a, b)| (a - b).powi(2)).sum();
    Ok((sse / y_true.len() as f64).sqrt())
}

fn check_lengths(y_true: &[f64], y_pred: &[f64]) -> Result<()> {
    if y_true.is_empty() || y_true.len() != y_pred.len() {
        return Err(Error::invalid(format!(
            "metrics need equal non-zero lengths, got {} and {}",
            y_true.len(),
            y_pred.len()
        )));
    }
    Ok(())
}

pub fn metrics(y_true: &[f64], y_pred: &[f64]) -> Result<Metrics> {
    check_lengths(y_true, y_pred)?;
    let mean = y_true.iter().sum::<f64>() / y_true.len() as f64;
    let sst: f64 = y_true.iter().map(|y| (y - mean).powi(2)).sum();
    if sst == 0.0 {
        return Err(Error::UndefinedR2);
    }
    let sse: f64 = y_true.iter().zip(y_pred).map(|(a, b)| (a - b).powi(2)).sum();
    Ok(Metrics {
        r2: 1.0 - sse / sst,
        rmse: (sse / y_true.len() as f64).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fusion::matrix::{Column, Domain};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn matrix(cols: usize, x: Vec<f64>, y: Vec<f64>) -> FeatureMatrix {
        let n = y.len();
        FeatureMatrix::new(
            (0..n).map(|i| format!("p{i}")).collect(),
            vec!["g".into(); n],
            (0..cols)
                .map(|j| Column { name: format!("f{j}"), domain: Domain::RemoteSensing })
                .collect(),
            x,
            y,
        )
        .unwrap()
    }

    /// Gaussian elimination with partial pivoting on the raw normal equations.
    fn gauss_oracle(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let p = b.len();
        for c in 0..p {
            let piv = (c..p).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
            a.swap(c, piv);
            b.swap(c, piv);
            for r in c + 1..p {
                let f = a[r][c] / a[c][c];
                for k in c..p {
                    a[r][k] -= f * a[c][k];
                }
                b[r] -= f * b[c];
            }
        }
        let mut x = vec![0.0; p];
        for r in (0..p).rev() {
            let s: f64 = (r + 1..p).map(|k| a[r][k] * x[k]).sum();
            x[r] = (b[r] - s) / a[r][r];
        }
        x
    }

    #[test]
    fn metrics_hand_values() {
        let m = metrics(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]).unwrap();
        assert!((m.rmse - (1.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!((m.r2 - 0.5).abs() < 1e-12);
        let m = metrics(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!((m.r2, m.rmse), (1.0, 0.0));
        assert_eq!(metrics(&[1.0, 2.0, 3.0], &[2.0; 3]).unwrap().r2, 0.0);
        assert!(matches!(metrics(&[2.0; 3], &[1.0; 3]), Err(Error::UndefinedR2)));
        assert!(metrics(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn planted_slope_recovered() {
        let x: Vec<f64> = (0..10).map(|i| i as f64 * 0.37 + 1.0).collect();
        let y: Vec<f64> = x.iter().map(|v| 250.0 * v + 4000.0).collect();
        let m = matrix(1, x.clone(), y.clone());
        let model = fit_ridge(&m, 0.0).unwrap();
        let slope = model.weights[0] / model.column_stds[0];
        assert!((slope - 250.0).abs() < 1e-8);
        let pred = model.predict(&m);
        assert!((metrics(&y, &pred).unwrap().r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn huge_lambda_shrinks_to_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<f64> = (0..30).map(|_| rng.random::<f64>()).collect();
        let y: Vec<f64> = (0..10).map(|_| rng.random::<f64>() * 100.0).collect();
        let model = fit_ridge(&matrix(3, x, y), 1e9).unwrap();
        assert!(model.weights.iter().all(|w| w.abs() < 1e-6));
    }

    #[test]
    fn agrees_with_elimination_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x: Vec<f64> = (0..15).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
        let y: Vec<f64> = (0..5).map(|_| rng.random::<f64>() * 10.0).collect();
        let lambda = 0.3;
        let model = fit_ridge(&matrix(3, x.clone(), y.clone()), lambda).unwrap();

        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let cols: Vec<Vec<f64>> = (0..3).map(|j| (0..5).map(|i| x[i * 3 + j]).collect()).collect();
        let z: Vec<Vec<f64>> = cols
            .iter()
            .map(|c| {
                let m = mean(c);
                let s = (c.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / 5.0).sqrt();
                c.iter().map(|v| (v - m) / s).collect()
            })
            .collect();
        let ym = mean(&y);
        let a: Vec<Vec<f64>> = (0..3)
            .map(|r| {
                (0..3)
                    .map(|c| (0..5).map(|i| z[r][i] * z[c][i]).sum::<f64>() + if r == c { lambda } else { 0.0 })
                    .collect()
            })
            .collect();
        let b: Vec<f64> = (0..3).map(|r| (0..5).map(|i| z[r][i] * (y[i] - ym)).sum()).collect();
        let w = gauss_oracle(a, b);
        for (got, want) in model.weights.iter().zip(&w) {
            assert!((got - want).abs() < 1e-8, "{got} vs {want}");
        }
        assert_eq!(model.intercept, ym);
    }

    #[test]
    fn collinear_columns_singular_at_zero_lambda() {
        let x: Vec<f64> = (0..6).flat_map(|i| [i as f64, 2.0 * i as f64 + 1.0]).collect();
        let y: Vec<f64> = (0..6).map(|i| i as f64 * 3.0).collect();
        let m = matrix(2, x, y);
        assert!(matches!(fit_ridge(&m, 0.0), Err(Error::SingularSystem)));
        assert!(fit_ridge(&m, 1.0).is_ok());
    }

    #[test]
    fn constant_column_dropped() {
        let x: Vec<f64> = (0..5).flat_map(|i| [0.1, i as f64]).collect();
        let y: Vec<f64> = (0..5).map(|i| i as f64).collect();
        let model = fit_ridge(&matrix(2, x, y), 0.0).unwrap();
        assert_eq!(model.retained, vec![1]);
        assert_eq!(model.named_weights()[0].0, "f1");
    }

    fn random_problem() -> impl Strategy<Value = (usize, Vec<f64>, Vec<f64>)> {
        (1usize..4, 4usize..12).prop_flat_map(|(p, n)| {
            (
                Just(p),
                prop::collection::vec(-10.0f64..10.0, n * p),
                prop::collection::vec(-100.0f64..100.0, n),
            )
        })
    }

    proptest! {
        #[test]
        fn training_mse_grows_with_lambda((p, x, y) in random_problem(), lambda in 0.01f64..100.0) {
            let m = matrix(p, x, y.clone());
            prop_assume!(y.iter().any(|v| *v != y[0]));
            let Ok(m0) = fit_ridge(&m, 0.0) else { return Ok(()) };
            let ml = fit_ridge(&m, lambda).unwrap();
            let mse = |model: &RidgeModel| rmse(&y, &model.predict(&m)).unwrap().powi(2);
            prop_assert!(mse(&m0) <= mse(&ml) * (1.0 + 1e-9) + 1e-9);
        }

        #[test]
        fn predictions_invariant_to_column_rescaling(
            (p, x, y) in random_problem(), col in 0usize..3, scale in 0.1f64..10.0, shift in -50.0f64..50.0,
        ) {
            let m = matrix(p, x, y);
            let col = col % p;
            let mut scaled = m.clone();
            scaled.map_column(col, |v| v * scale + shift);
            let a = fit_ridge(&m, 1.0).unwrap().predict(&m);
            let b = fit_ridge(&scaled, 1.0).unwrap().predict(&scaled);
            for (u, v) in a.iter().zip(&b) {
                prop_assert!((u - v).abs() < 1e-8 * (1.0 + u.abs()), "{u} vs {v}");
            }
        }
    }
}
