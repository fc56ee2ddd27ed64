//! Seeded synthetic data with known structure, for tests, benches and
//! demonstrations.

use chrono::{Duration, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dataset::{CompanyWeekRecord, Dataset, ObservationRow, N_FINANCIAL, N_INDICATORS};
use crate::johnson::JohnsonSbParams;
use crate::regress::TrainingSet;

pub fn first_week() -> NaiveDate {
    NaiveDate::from_ymd_opt(2017, 1, 6).expect("valid date")
}

pub fn week(i: usize) -> NaiveDate {
    first_week() + Duration::weeks(i as i64)
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// `n` rows of independent standard-normal features with
/// `y = response(x) + sigma * noise`.
pub fn training_set(n: usize, sigma: f64, seed: u64, response: impl Fn(&[f64; N_INDICATORS]) -> f64) -> TrainingSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let x: [f64; N_INDICATORS] = std::array::from_fn(|_| normal(&mut rng));
        y.push(response(&x) + sigma * normal(&mut rng));
        features.push(x);
    }
    TrainingSet::new(features, y).expect("finite synthetic data")
}

/// Typical level and spread of each raw indicator.
const RAW_SCALE: [(f64, f64); N_INDICATORS] = [
    (1.2, 0.08),
    (6.5, 0.9),
    (9.0, 1.1),
    (28.0, 3.0),
    (2.1, 0.25),
    (1.3, 0.15),
    (1.5, 0.7),
    (97.0, 3.0),
    (7.5, 0.6),
    (20000.0, 700.0),
];

/// Johnson SB law used to map the planted linear predictor to prices.
pub fn price_transform() -> JohnsonSbParams {
    JohnsonSbParams::new(0.4, 1.2, 700.0, 1100.0).expect("valid constants")
}

/// Linear predictor (transformed scale) of the planted index model, on
/// standardized indicators.
pub fn planted_index_signal(z: &[f64; N_INDICATORS]) -> f64 {
    0.1 + 0.6 * z[9] + 0.25 * z[4] + 0.15 * z[2] - 0.3 * z[4] * z[6]
}

/// Weekly index-level dataset whose prices follow
/// `price_transform().inverse(planted_index_signal(z) + sigma * noise)`.
pub fn index_dataset(n_weeks: usize, sigma: f64, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let transform = price_transform();
    let rows = (0..n_weeks)
        .map(|i| {
            let z: [f64; N_INDICATORS] = std::array::from_fn(|_| normal(&mut rng));
            let t = planted_index_signal(&z) + sigma * normal(&mut rng);
            ObservationRow {
                week_start: week(i),
                indicators: std::array::from_fn(|k| RAW_SCALE[k].0 + RAW_SCALE[k].1 * z[k]),
                wcp: transform.inverse(t),
            }
        })
        .collect();
    Dataset::from_rows(rows, format!("synthetic index data, seed {seed}")).expect("valid synthetic rows")
}

/// Company-level records for `n_tickers` tickers over `n_weeks` weeks.
pub fn company_records(n_tickers: usize, n_weeks: usize, seed: u64) -> Vec<CompanyWeekRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n_tickers * n_weeks);
    for w in 0..n_weeks {
        for t in 0..n_tickers {
            let values: [f64; N_FINANCIAL] = std::array::from_fn(|k| RAW_SCALE[k].0 + 3.0 * RAW_SCALE[k].1 * normal(&mut rng));
            out.push(CompanyWeekRecord {
                ticker: format!("T{t:03}"),
                week_start: week(w),
                values,
            });
        }
    }
    out
}
