//! Accuracy metrics and repeated k-fold cross-validation.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::regress::{build_design, fit_spec, ModelSpec, TrainingSet};

pub const DEFAULT_FOLDS: usize = 10;
pub const DEFAULT_REPEATS: usize = 5;
pub const DEFAULT_CV_SEED: u64 = 20170106;

fn check_pair(observed: &[f64], predicted: &[f64]) -> Result<()> {
    if observed.len() != predicted.len() {
        return Err(Error::LengthMismatch {
            left: observed.len(),
            right: predicted.len(),
        });
    }
    if observed.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(())
}

fn sum_sq_err(observed: &[f64], predicted: &[f64]) -> f64 {
    observed.iter().zip(predicted).map(|(y, p)| (y - p) * (y - p)).sum()
}

/// Root mean squared error.
pub fn rmse(observed: &[f64], predicted: &[f64]) -> Result<f64> {
    check_pair(observed, predicted)?;
    Ok((sum_sq_err(observed, predicted) / observed.len() as f64).sqrt())
}

/// Mean absolute percentage error, in percent.
pub fn mape(observed: &[f64], predicted: &[f64]) -> Result<f64> {
    check_pair(observed, predicted)?;
    if let Some(index) = observed.iter().position(|&y| y == 0.0) {
        return Err(Error::ZeroObserved { index });
    }
    let total: f64 = observed.iter().zip(predicted).map(|(y, p)| ((y - p) / y).abs()).sum();
    Ok(total / observed.len() as f64 * 100.0)
}

/// `sqrt(mean squared error / sum of squared predictions)`, in percent.
/// The count divides the numerator only.
pub fn rrmse(observed: &[f64], predicted: &[f64]) -> Result<f64> {
    check_pair(observed, predicted)?;
    let norm: f64 = predicted.iter().map(|p| p * p).sum();
    if norm == 0.0 {
        return Err(Error::ZeroPredictedNorm);
    }
    let mse = sum_sq_err(observed, predicted) / observed.len() as f64;
    Ok((mse / norm).sqrt() * 100.0)
}

/// `1 - SSE/SST`.
pub fn r_squared(observed: &[f64], predicted: &[f64]) -> Result<f64> {
    check_pair(observed, predicted)?;
    let mean = observed.iter().sum::<f64>() / observed.len() as f64;
    let sst: f64 = observed.iter().map(|y| (y - mean) * (y - mean)).sum();
    if sst == 0.0 {
        return Err(Error::ZeroTotalVariance);
    }
    Ok(1.0 - sum_sq_err(observed, predicted) / sst)
}

/// `1 - (1 - R²)(n - 1)/(n - k - 1)` for `k` predictors.
pub fn adj_r_squared(r2: f64, n: usize, k: usize) -> Result<f64> {
    if n <= k + 1 {
        return Err(Error::DegreesOfFreedomExhausted { n, k });
    }
    Ok(1.0 - (1.0 - r2) * (n as f64 - 1.0) / (n - k - 1) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub k: usize,
    pub repeats: usize,
    pub seed: u64,
    #[serde(skip)]
    pub execution: Execution,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            k: DEFAULT_FOLDS,
            repeats: DEFAULT_REPEATS,
            seed: DEFAULT_CV_SEED,
            execution: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    /// Training MSE of the fit on all rows (transformed scale).
    pub msetr: f64,
    /// Mean of the held-out fold MSEs (transformed scale).
    pub mspe: f64,
    /// Repeat-major, fold-minor.
    pub per_fold_mse: Vec<f64>,
    pub k: usize,
    pub repeats: usize,
    pub seed: u64,
}

/// Fold label of every row, one assignment per repeat: shuffled indices
/// dealt round-robin.
pub fn fold_assignments(n: usize, k: usize, repeats: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..repeats)
        .map(|_| {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            let mut fold = vec![0; n];
            for (pos, &row) in order.iter().enumerate() {
                fold[row] = pos % k;
            }
            fold
        })
        .collect()
}

pub fn kfold_cv(data: &TrainingSet, spec: &ModelSpec, config: &CvConfig) -> Result<CvReport> {
    let n = data.len();
    let k = config.k;
    if k < 2 || k > n {
        return Err(Error::InvalidParameter(format!("fold count {k} must lie in [2, {n}]")));
    }
    if config.repeats == 0 {
        return Err(Error::InvalidParameter("repeats must be at least 1".into()));
    }
    let largest_fold = n.div_ceil(k);
    if n - largest_fold <= spec.n_params() {
        return Err(Error::FoldTooSmall {
            n_train: n - largest_fold,
            n_params: spec.n_params(),
        });
    }

    let full = fit_spec(data, spec)?;
    let msetr = full.sse / n as f64;

    let assignments = fold_assignments(n, k, config.repeats, config.seed);
    let jobs = config.repeats * k;
    let results = map_indexed(config.execution, jobs, |job| -> Result<f64> {
        let (repeat, fold) = (job / k, job % k);
        let labels = &assignments[repeat];
        let (held, kept): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| labels[i] == fold);
        let fit = fit_spec(&data.subset(&kept), spec)?;
        let test = data.subset(&held);
        let x = build_design(test.features(), spec);
        let beta = nalgebra::DVector::from_column_slice(&fit.coefficients);
        let pred = x * beta;
        let sse: f64 = test
            .response()
            .iter()
            .zip(pred.iter())
            .map(|(y, p)| (y - p) * (y - p))
            .sum();
        Ok(sse / held.len() as f64)
    });
    let per_fold_mse = results.into_iter().collect::<Result<Vec<_>>>()?;
    let mspe = per_fold_mse.iter().sum::<f64>() / per_fold_mse.len() as f64;
    Ok(CvReport {
        msetr,
        mspe,
        per_fold_mse,
        k,
        repeats: config.repeats,
        seed: config.seed,
    })
}

/// Price-scale accuracy of predictions against observed closes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceMetrics {
    pub n: usize,
    pub rmse: f64,
    pub mape_percent: f64,
    pub rrmse_percent: f64,
}

pub fn price_metrics(observed: &[f64], predicted: &[f64]) -> Result<PriceMetrics> {
    Ok(PriceMetrics {
        n: observed.len(),
        rmse: rmse(observed, predicted)?,
        mape_percent: mape(observed, predicted)?,
        rrmse_percent: rrmse(observed, predicted)?,
    })
}

/// Every accuracy figure for a fitted model, each labelled with its scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub r_squared: f64,
    pub adj_r_squared: f64,
    /// Test rows, price scale (index points / percent).
    pub price: PriceMetrics,
    /// Transformed scale.
    pub train_rmse_transformed: f64,
    pub test_rmse_transformed: f64,
    pub cv: CvReport,
}

impl ValidationReport {
    pub fn table(&self) -> String {
        let rows: [(&str, String, &str); 10] = [
            ("R-squared", format!("{:.4}", self.r_squared), "train"),
            ("adj. R-squared", format!("{:.4}", self.adj_r_squared), "train"),
            ("RMSE", format!("{:.4}", self.price.rmse), "test, price"),
            ("MAPE %", format!("{:.4}", self.price.mape_percent), "test, price"),
            ("RRMSE %", format!("{:.4}", self.price.rrmse_percent), "test, price"),
            ("train RMSE", format!("{:.4}", self.train_rmse_transformed), "transformed"),
            ("test RMSE", format!("{:.4}", self.test_rmse_transformed), "transformed"),
            ("MSETr", format!("{:.7}", self.cv.msetr), "transformed"),
            ("MSPE", format!("{:.7}", self.cv.mspe), "transformed"),
            ("folds x repeats", format!("{} x {}", self.cv.k, self.cv.repeats), ""),
        ];
        let mut out = String::new();
        for (name, value, scale) in rows {
            out.push_str(&format!("{name:<16} {value:>14}  {scale}\n"));
        }
        out
    }
}
