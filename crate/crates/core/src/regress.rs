//! Main-effect and pairwise-interaction term algebra, design matrices and
//! ordinary least squares with inference statistics.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::dataset::{Dataset, Indicator, ScalerParams, N_INDICATORS};
use crate::dist::t_two_sided_p;
use crate::error::{Error, Result};
use crate::johnson::JohnsonSbParams;

/// Relative size of a QR pivot below which a column is treated as a linear
/// combination of the columns before it.
const RANK_TOLERANCE: f64 = 1e-10;

/// A model term over the ten indicators (1-based indices).
///
/// The derived ordering is the design-matrix column order: mains by index,
/// then interactions in lexicographic `(i, j)` order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TermId {
    Main(u8),
    Interaction(u8, u8),
}

fn valid_index(i: usize) -> bool {
    (1..=N_INDICATORS).contains(&i)
}

impl TermId {
    pub fn main(i: usize) -> Result<Self> {
        if !valid_index(i) {
            return Err(Error::InvalidParameter(format!("indicator index {i} outside 1..=10")));
        }
        Ok(TermId::Main(i as u8))
    }

    /// Interaction of two distinct indicators; the indices are ordered.
    pub fn interaction(i: usize, j: usize) -> Result<Self> {
        if !valid_index(i) || !valid_index(j) || i == j {
            return Err(Error::InvalidParameter(format!("invalid interaction ({i}, {j})")));
        }
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        Ok(TermId::Interaction(a as u8, b as u8))
    }

    /// Zero-based indicator positions involved in the term.
    pub fn indices(self) -> (usize, Option<usize>) {
        match self {
            TermId::Main(i) => (i as usize - 1, None),
            TermId::Interaction(i, j) => (i as usize - 1, Some(j as usize - 1)),
        }
    }

    pub fn involves(self, indicator: usize) -> bool {
        match self {
            TermId::Main(i) => i as usize == indicator,
            TermId::Interaction(i, j) => i as usize == indicator || j as usize == indicator,
        }
    }

    pub fn is_interaction(self) -> bool {
        matches!(self, TermId::Interaction(..))
    }

    /// Value of the term for one standardized row.
    pub fn evaluate(self, z: &[f64; N_INDICATORS]) -> f64 {
        match self.indices() {
            (i, None) => z[i],
            (i, Some(j)) => z[i] * z[j],
        }
    }

    /// Indicator names, e.g. `GDP` or `PEG Ratio ∩ Int_Rate`.
    pub fn label(self) -> String {
        let name = |i: u8| Indicator::from_number(i as usize).map(|x| x.label()).unwrap_or("?");
        match self {
            TermId::Main(i) => name(i).to_string(),
            TermId::Interaction(i, j) => format!("{} ∩ {}", name(i), name(j)),
        }
    }
}

impl fmt::Display for TermId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TermId::Main(i) => write!(f, "X{i}"),
            TermId::Interaction(i, j) => write!(f, "X{i}:X{j}"),
        }
    }
}

impl FromStr for TermId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("cannot parse term `{s}`"));
        let index = |p: &str| -> Result<usize> {
            let p = p.trim();
            p.strip_prefix('X')
                .or_else(|| p.strip_prefix('x'))
                .and_then(|d| d.parse().ok())
                .ok_or_else(bad)
        };
        match s.split_once(':') {
            None => TermId::main(index(s)?),
            Some((a, b)) => {
                let (i, j) = (index(a)?, index(b)?);
                if i >= j {
                    return Err(bad());
                }
                TermId::interaction(i, j)
            }
        }
    }
}

impl Serialize for TermId {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TermId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// An intercept plus an ordered set of terms. The intercept is always
/// present.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ModelSpec {
    terms: BTreeSet<TermId>,
}

impl ModelSpec {
    pub fn new(terms: impl IntoIterator<Item = TermId>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for t in terms {
            if !set.insert(t) {
                return Err(Error::InvalidParameter(format!("duplicate term {t}")));
            }
        }
        Ok(ModelSpec { terms: set })
    }

    pub fn intercept_only() -> Self {
        ModelSpec::default()
    }

    /// All ten mains and all 45 pairwise interactions.
    pub fn full() -> Self {
        let mut terms: BTreeSet<TermId> = (1..=N_INDICATORS as u8).map(TermId::Main).collect();
        for i in 1..=N_INDICATORS as u8 {
            for j in (i + 1)..=N_INDICATORS as u8 {
                terms.insert(TermId::Interaction(i, j));
            }
        }
        ModelSpec { terms }
    }

    pub fn terms(&self) -> impl Iterator<Item = TermId> + '_ {
        self.terms.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Terms plus the intercept.
    pub fn n_params(&self) -> usize {
        self.terms.len() + 1
    }

    pub fn contains(&self, term: TermId) -> bool {
        self.terms.contains(&term)
    }

    pub fn without(&self, term: TermId) -> ModelSpec {
        let mut terms = self.terms.clone();
        terms.remove(&term);
        ModelSpec { terms }
    }

    pub fn is_subset(&self, other: &ModelSpec) -> bool {
        self.terms.is_subset(&other.terms)
    }

    /// Column labels in design order, starting with `(Intercept)`.
    pub fn column_labels(&self) -> Vec<String> {
        std::iter::once(INTERCEPT_LABEL.to_string())
            .chain(self.terms().map(|t| t.to_string()))
            .collect()
    }
}

pub const INTERCEPT_LABEL: &str = "(Intercept)";

/// Standardized features with the (transformed) response.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    features: Vec<[f64; N_INDICATORS]>,
    response: Vec<f64>,
}

impl TrainingSet {
    pub fn new(features: Vec<[f64; N_INDICATORS]>, response: Vec<f64>) -> Result<Self> {
        if features.len() != response.len() {
            return Err(Error::LengthMismatch {
                left: features.len(),
                right: response.len(),
            });
        }
        let finite = features.iter().all(|r| r.iter().all(|v| v.is_finite()))
            && response.iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::NonFiniteInput);
        }
        Ok(TrainingSet { features, response })
    }

    /// Features of an already-standardized dataset with the Johnson-
    /// transformed price as response.
    pub fn from_scaled(scaled: &Dataset, transform: &JohnsonSbParams) -> Result<Self> {
        let response = scaled
            .rows()
            .iter()
            .map(|r| transform.forward(r.wcp))
            .collect::<Result<Vec<_>>>()?;
        TrainingSet::new(scaled.features(), response)
    }

    pub fn features(&self) -> &[[f64; N_INDICATORS]] {
        &self.features
    }

    pub fn response(&self) -> &[f64] {
        &self.response
    }

    pub fn len(&self) -> usize {
        self.response.len()
    }

    pub fn is_empty(&self) -> bool {
        self.response.is_empty()
    }

    pub fn subset(&self, indices: &[usize]) -> TrainingSet {
        TrainingSet {
            features: indices.iter().map(|&i| self.features[i]).collect(),
            response: indices.iter().map(|&i| self.response[i]).collect(),
        }
    }
}

/// `[1, mains..., interactions...]` for every row, restricted to `spec`.
pub fn build_design(features: &[[f64; N_INDICATORS]], spec: &ModelSpec) -> DMatrix<f64> {
    let terms: Vec<TermId> = spec.terms().collect();
    DMatrix::from_fn(features.len(), terms.len() + 1, |r, c| {
        if c == 0 {
            1.0
        } else {
            terms[c - 1].evaluate(&features[r])
        }
    })
}

/// Coefficients and inference statistics of a least-squares fit.
/// Per-parameter vectors are in design-column order, intercept first.
#[derive(Debug, Clone, PartialEq)]
pub struct OlsEstimate {
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub t_stats: Vec<f64>,
    pub p_values: Vec<f64>,
    pub residuals: Vec<f64>,
    pub fitted: Vec<f64>,
    pub leverage: Vec<f64>,
    pub sse: f64,
    pub sst: f64,
    pub sigma2: f64,
    pub r_squared: f64,
    pub adj_r_squared: f64,
    pub n_obs: usize,
    pub n_params: usize,
}

impl OlsEstimate {
    pub fn df_resid(&self) -> usize {
        self.n_obs - self.n_params
    }
}

/// Least squares through a Householder QR factorization.
///
/// `x` must contain an intercept column for the R² definitions to hold.
pub fn fit_ols(x: &DMatrix<f64>, y: &[f64]) -> Result<OlsEstimate> {
    let labels: Vec<String> = (0..x.ncols()).map(|j| format!("column {j}")).collect();
    fit_labeled(x, y, &labels)
}

fn fit_labeled(x: &DMatrix<f64>, y: &[f64], labels: &[String]) -> Result<OlsEstimate> {
    let (n, p) = x.shape();
    if y.len() != n {
        return Err(Error::LengthMismatch { left: n, right: y.len() });
    }
    if n <= p {
        return Err(Error::InsufficientObservations { n_obs: n, n_params: p });
    }

    let qr = x.clone().qr();
    let r = qr.r();
    let q = qr.q();
    for j in 0..p {
        let col_norm = x.column(j).norm();
        if col_norm == 0.0 || r[(j, j)].abs() <= RANK_TOLERANCE * col_norm {
            return Err(Error::RankDeficient {
                column: labels[j].clone(),
            });
        }
    }

    let yv = DVector::from_column_slice(y);
    let qty = q.transpose() * &yv;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::RankDeficient { column: labels[p - 1].clone() })?;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(p, p))
        .ok_or_else(|| Error::RankDeficient { column: labels[p - 1].clone() })?;

    let fitted_v = x * &beta;
    let fitted: Vec<f64> = fitted_v.iter().copied().collect();
    let residuals: Vec<f64> = y.iter().zip(&fitted).map(|(a, b)| a - b).collect();
    let leverage: Vec<f64> = (0..n).map(|i| q.row(i).norm_squared()).collect();

    let sse: f64 = residuals.iter().map(|e| e * e).sum();
    let y_mean = y.iter().sum::<f64>() / n as f64;
    let sst: f64 = y.iter().map(|v| (v - y_mean) * (v - y_mean)).sum();
    if sst == 0.0 {
        return Err(Error::ZeroTotalVariance);
    }
    let df = (n - p) as f64;
    let sigma2 = sse / df;
    let r_squared = 1.0 - sse / sst;
    let adj_r_squared = 1.0 - (1.0 - r_squared) * (n as f64 - 1.0) / df;

    let coefficients: Vec<f64> = beta.iter().copied().collect();
    let std_errors: Vec<f64> = (0..p)
        .map(|j| (sigma2 * r_inv.row(j).norm_squared()).sqrt())
        .collect();
    let t_stats: Vec<f64> = coefficients
        .iter()
        .zip(&std_errors)
        .map(|(&b, &se)| {
            if se > 0.0 {
                b / se
            } else if b == 0.0 {
                0.0
            } else {
                b.signum() * f64::INFINITY
            }
        })
        .collect();
    let p_values = t_stats.iter().map(|&t| t_two_sided_p(t, df)).collect();

    Ok(OlsEstimate {
        coefficients,
        std_errors,
        t_stats,
        p_values,
        residuals,
        fitted,
        leverage,
        sse,
        sst,
        sigma2,
        r_squared,
        adj_r_squared,
        n_obs: n,
        n_params: p,
    })
}

/// Builds the design for `spec` and fits it; rank deficiency names the
/// offending term.
pub fn fit_spec(data: &TrainingSet, spec: &ModelSpec) -> Result<OlsEstimate> {
    let x = build_design(data.features(), spec);
    fit_labeled(&x, data.response(), &spec.column_labels())
}

/// A fitted (or published) model with the context needed to predict in
/// price units.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel {
    pub spec: ModelSpec,
    /// Intercept first, then one coefficient per term in spec order.
    pub coefficients: Vec<f64>,
    /// Inference statistics; absent for models entered from constants.
    pub estimate: Option<OlsEstimate>,
    pub scaler: ScalerParams,
    pub transform: JohnsonSbParams,
}

impl FittedModel {
    pub fn from_estimate(spec: ModelSpec, estimate: OlsEstimate, scaler: ScalerParams, transform: JohnsonSbParams) -> Self {
        FittedModel {
            coefficients: estimate.coefficients.clone(),
            spec,
            estimate: Some(estimate),
            scaler,
            transform,
        }
    }

    pub fn intercept(&self) -> f64 {
        self.coefficients[0]
    }

    pub fn coefficient(&self, term: TermId) -> Option<f64> {
        self.spec
            .terms()
            .position(|t| t == term)
            .map(|k| self.coefficients[k + 1])
    }

    /// `(term, coefficient)` pairs in spec order, intercept excluded.
    pub fn term_coefficients(&self) -> Vec<(TermId, f64)> {
        self.spec.terms().zip(self.coefficients[1..].iter().copied()).collect()
    }

    /// Linear predictor for an already-standardized row.
    pub fn linear_predictor(&self, z: &[f64; N_INDICATORS]) -> f64 {
        self.intercept()
            + self
                .spec
                .terms()
                .zip(&self.coefficients[1..])
                .map(|(t, b)| b * t.evaluate(z))
                .sum::<f64>()
    }

    /// Transformed-scale prediction for a raw indicator row.
    pub fn predict_transformed(&self, raw: &[f64; N_INDICATORS]) -> Result<f64> {
        if raw.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput);
        }
        Ok(self.linear_predictor(&self.scaler.apply(raw)))
    }

    /// Price-scale prediction: the inverse Johnson transform of
    /// [`predict_transformed`](Self::predict_transformed).
    pub fn predict_price(&self, raw: &[f64; N_INDICATORS]) -> Result<f64> {
        Ok(self.transform.inverse(self.predict_transformed(raw)?))
    }
}

pub const MODEL_SCHEMA_VERSION: u32 = 1;

/// One row of the serialized coefficient table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientRow {
    pub term: String,
    pub estimate: f64,
    pub std_error: Option<f64>,
    pub t: Option<f64>,
    pub p: Option<f64>,
}

/// JSON form of a [`FittedModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub schema_version: u32,
    pub kind: String,
    pub terms: ModelSpec,
    pub coefficients: Vec<CoefficientRow>,
    pub r_squared: Option<f64>,
    pub adj_r_squared: Option<f64>,
    pub n_obs: Option<usize>,
    pub n_params: usize,
    pub sse: Option<f64>,
    pub sst: Option<f64>,
    pub sigma2: Option<f64>,
    pub scaler: ScalerParams,
    pub transform: JohnsonSbParams,
    #[serde(default)]
    pub residuals: Vec<f64>,
    #[serde(default)]
    pub fitted: Vec<f64>,
    #[serde(default)]
    pub leverage: Vec<f64>,
    #[serde(default)]
    pub config: Option<serde_json::Value>,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

impl FittedModel {
    pub fn to_document(&self, kind: &str, config: Option<serde_json::Value>) -> ModelDocument {
        let labels = self.spec.column_labels();
        let est = self.estimate.as_ref();
        let coefficients = labels
            .into_iter()
            .enumerate()
            .map(|(k, term)| CoefficientRow {
                term,
                estimate: self.coefficients[k],
                std_error: est.and_then(|e| finite(e.std_errors[k])),
                t: est.and_then(|e| finite(e.t_stats[k])),
                p: est.and_then(|e| finite(e.p_values[k])),
            })
            .collect();
        ModelDocument {
            schema_version: MODEL_SCHEMA_VERSION,
            kind: kind.to_string(),
            terms: self.spec.clone(),
            coefficients,
            r_squared: est.map(|e| e.r_squared),
            adj_r_squared: est.map(|e| e.adj_r_squared),
            n_obs: est.map(|e| e.n_obs),
            n_params: self.spec.n_params(),
            sse: est.map(|e| e.sse),
            sst: est.map(|e| e.sst),
            sigma2: est.map(|e| e.sigma2),
            scaler: self.scaler.clone(),
            transform: self.transform,
            residuals: est.map(|e| e.residuals.clone()).unwrap_or_default(),
            fitted: est.map(|e| e.fitted.clone()).unwrap_or_default(),
            leverage: est.map(|e| e.leverage.clone()).unwrap_or_default(),
            config,
        }
    }

    pub fn from_document(doc: &ModelDocument) -> Result<Self> {
        if doc.schema_version != MODEL_SCHEMA_VERSION {
            return Err(Error::InvalidParameter(format!(
                "unsupported model schema version {}",
                doc.schema_version
            )));
        }
        let labels = doc.terms.column_labels();
        if doc.coefficients.len() != labels.len()
            || doc.coefficients.iter().zip(&labels).any(|(row, l)| &row.term != l)
        {
            return Err(Error::InvalidParameter(
                "coefficient table does not match the term list".into(),
            ));
        }
        doc.scaler.validate()?;
        let coefficients: Vec<f64> = doc.coefficients.iter().map(|c| c.estimate).collect();
        let estimate = match (doc.r_squared, doc.adj_r_squared, doc.n_obs, doc.sse, doc.sst, doc.sigma2) {
            (Some(r_squared), Some(adj_r_squared), Some(n_obs), Some(sse), Some(sst), Some(sigma2)) => {
                let nan = |v: Option<f64>| v.unwrap_or(f64::NAN);
                Some(OlsEstimate {
                    coefficients: coefficients.clone(),
                    std_errors: doc.coefficients.iter().map(|c| nan(c.std_error)).collect(),
                    t_stats: doc.coefficients.iter().map(|c| nan(c.t)).collect(),
                    p_values: doc.coefficients.iter().map(|c| nan(c.p)).collect(),
                    residuals: doc.residuals.clone(),
                    fitted: doc.fitted.clone(),
                    leverage: doc.leverage.clone(),
                    sse,
                    sst,
                    sigma2,
                    r_squared,
                    adj_r_squared,
                    n_obs,
                    n_params: doc.n_params,
                })
            }
            _ => None,
        };
        Ok(FittedModel {
            spec: doc.terms.clone(),
            coefficients,
            estimate,
            scaler: doc.scaler.clone(),
            transform: doc.transform,
        })
    }
}
