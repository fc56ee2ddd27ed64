//! The published reference model: fixed coefficients on standardized
//! indicators, its Johnson SB response transform, and the printed
//! observed-versus-predicted pairs.

use crate::dataset::{ScalerParams, N_INDICATORS};
use crate::error::{Error, Result};
use crate::johnson::JohnsonSbParams;
use crate::regress::{FittedModel, ModelSpec, TermId};

pub const INTERCEPT: f64 = 0.0732;

/// Term coefficients, four decimals as printed.
pub const COEFFICIENTS: [(TermId, f64); 19] = [
    (TermId::Main(1), 0.0070),
    (TermId::Main(2), -0.0504),
    (TermId::Main(3), 0.1067),
    (TermId::Main(4), 0.0578),
    (TermId::Main(5), 0.0941),
    (TermId::Main(6), -0.0041),
    (TermId::Main(7), -0.0168),
    (TermId::Main(8), -0.0120),
    (TermId::Main(9), 0.0211),
    (TermId::Main(10), 0.6781),
    (TermId::Interaction(1, 3), 0.1013),
    (TermId::Interaction(1, 9), -0.0864),
    (TermId::Interaction(2, 6), 0.0351),
    (TermId::Interaction(2, 7), -0.1139),
    (TermId::Interaction(2, 10), -0.0989),
    (TermId::Interaction(4, 7), -0.0380),
    (TermId::Interaction(5, 7), -0.6059),
    (TermId::Interaction(5, 10), 0.6054),
    (TermId::Interaction(8, 9), 0.0331),
];

pub const GAMMA: f64 = 0.4091;
pub const ETA: f64 = 1.2208;
pub const XI: f64 = 711.5838;
pub const LAMBDA: f64 = 1082.963;

/// Observation id, observed and predicted closing price.
pub const TABLE3: [(u32, f64, f64); 30] = [
    (6, 865.88, 862.88),
    (12, 897.57, 892.78),
    (15, 904.64, 927.23),
    (23, 951.57, 949.24),
    (24, 957.79, 944.71),
    (27, 979.69, 976.07),
    (28, 979.93, 982.68),
    (39, 1018.15, 1019.11),
    (42, 1047.08, 1066.12),
    (46, 1087.60, 1046.87),
    (49, 1103.12, 1110.35),
    (65, 1157.09, 1131.20),
    (69, 1180.28, 1161.03),
    (74, 1184.62, 1178.35),
    (75, 1203.88, 1187.35),
    (81, 1206.58, 1211.22),
    (82, 1279.16, 1211.22),
    (103, 1283.32, 1279.86),
    (106, 1300.75, 1293.12),
    (111, 1311.17, 1330.36),
    (112, 1320.19, 1315.09),
    (114, 1370.62, 1339.02),
    (121, 1374.82, 1351.95),
    (123, 1378.90, 1358.36),
    (125, 1410.34, 1387.87),
    (131, 1415.14, 1396.16),
    (133, 1421.26, 1416.56),
    (135, 1424.52, 1412.52),
    (137, 1426.76, 1456.27),
    (146, 1542.98, 1530.36),
];

#[derive(Debug, Clone, PartialEq)]
pub struct PublishedModel {
    pub intercept: f64,
    pub coefficients: Vec<(TermId, f64)>,
    pub transform: JohnsonSbParams,
}

impl PublishedModel {
    pub fn spec(&self) -> ModelSpec {
        ModelSpec::new(self.coefficients.iter().map(|c| c.0)).expect("published terms are distinct")
    }

    pub fn coefficient(&self, term: TermId) -> Option<f64> {
        self.coefficients.iter().find(|c| c.0 == term).map(|c| c.1)
    }

    /// Linear predictor on the transformed scale.
    pub fn transformed(&self, standardized: &[f64; N_INDICATORS]) -> f64 {
        self.intercept
            + self
                .coefficients
                .iter()
                .map(|&(t, b)| b * t.evaluate(standardized))
                .sum::<f64>()
    }

    /// As a [`FittedModel`] whose scaler is the identity, so inputs must be
    /// standardized already.
    pub fn to_fitted(&self) -> FittedModel {
        let spec = self.spec();
        let mut coefficients = vec![self.intercept];
        coefficients.extend(spec.terms().map(|t| self.coefficient(t).unwrap_or(0.0)));
        FittedModel {
            spec,
            coefficients,
            estimate: None,
            scaler: ScalerParams::identity(),
            transform: self.transform,
        }
    }
}

pub fn published_spec() -> PublishedModel {
    PublishedModel {
        intercept: INTERCEPT,
        coefficients: COEFFICIENTS.to_vec(),
        transform: JohnsonSbParams::new(GAMMA, ETA, XI, LAMBDA).expect("valid constants"),
    }
}

/// Price prediction from ten already-standardized indicator values (the
/// scaler behind the published coefficients is not available, so raw
/// values cannot be used).
pub fn predict_published(standardized: &[f64; N_INDICATORS]) -> Result<f64> {
    if standardized.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput);
    }
    let model = published_spec();
    Ok(model.transform.inverse(model.transformed(standardized)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Table3Pair {
    pub obs_id: u32,
    pub observed: f64,
    pub predicted: f64,
}

pub fn table3_fixtures() -> Vec<Table3Pair> {
    TABLE3
        .iter()
        .map(|&(obs_id, observed, predicted)| Table3Pair {
            obs_id,
            observed,
            predicted,
        })
        .collect()
}
