//! End-to-end stages shared by the command-line tool: fitting, validation
//! and ranking on an index-level dataset.

use serde::{Deserialize, Serialize};

use crate::attribute::{coefficient_shares, rank_contributions, AttributionMethod, ContributionRanking};
use crate::dataset::{split, standardize, Dataset, SplitSpec};
use crate::diagnose::{anderson_darling, qq_points, residual_diagnostics, shapiro_wilk, DiagnosticsReport, NormalityResult, QqPoint};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::johnson::fit_sb_with;
use crate::regress::{fit_spec, FittedModel, ModelSpec, TrainingSet};
use crate::select::{backward_eliminate, correlation_matrix, vif, CorrelationMatrix, EliminationOptions, EliminationTrace, VifReport};
use crate::validate::{kfold_cv, price_metrics, rmse, CvConfig, ValidationReport};

/// An error tagged with the pipeline stage that produced it.
#[derive(Debug, thiserror::Error)]
#[error("{stage}: {source}")]
pub struct StageError {
    pub stage: &'static str,
    #[source]
    pub source: Error,
}

pub type StageResult<T> = std::result::Result<T, StageError>;

trait AtStage<T> {
    fn at(self, stage: &'static str) -> StageResult<T>;
}

impl<T> AtStage<T> for Result<T> {
    fn at(self, stage: &'static str) -> StageResult<T> {
        self.map_err(|source| StageError { stage, source })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FitConfig {
    pub split: SplitSpec,
    pub elimination: EliminationOptions,
    pub execution: Execution,
}

/// Response normality before and after the transform plus the
/// multicollinearity screens; advisory only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Screening {
    pub wcp_shapiro: NormalityResult,
    pub wcp_anderson: NormalityResult,
    pub transformed_shapiro: NormalityResult,
    pub transformed_anderson: NormalityResult,
    pub correlation: CorrelationMatrix,
    /// `None` when the indicators are jointly rank deficient.
    pub vif: Option<VifReport>,
    pub full_model_r_squared: f64,
    pub full_model_adj_r_squared: f64,
    #[serde(skip)]
    pub qq_wcp: Vec<QqPoint>,
    #[serde(skip)]
    pub qq_transformed: Vec<QqPoint>,
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub model: FittedModel,
    pub trace: EliminationTrace,
    pub diagnostics: DiagnosticsReport,
    pub screening: Screening,
    pub n_train: usize,
    pub n_test: usize,
}

/// Scale, fit the response transform, split, fit the full interaction
/// model, eliminate, and diagnose the final fit.
pub fn fit_pipeline(data: &Dataset, config: &FitConfig) -> StageResult<FitOutcome> {
    data.require_fittable().at("load")?;
    let (scaled, scaler) = standardize(data).at("scale")?;
    let wcp = data.wcp();
    let transform = fit_sb_with(&wcp, config.execution).at("johnson")?;
    let transformed: Vec<f64> = wcp.iter().map(|&x| transform.forward(x)).collect::<Result<_>>().at("johnson")?;

    let correlation = correlation_matrix(data).at("screen")?;
    let vif = match vif(data) {
        Ok(v) => Some(v),
        Err(Error::RankDeficient { .. }) => None,
        Err(e) => return Err(e).at("screen"),
    };
    let wcp_shapiro = shapiro_wilk(&wcp).at("screen")?;
    let wcp_anderson = anderson_darling(&wcp).at("screen")?;
    let transformed_shapiro = shapiro_wilk(&transformed).at("screen")?;
    let transformed_anderson = anderson_darling(&transformed).at("screen")?;

    let (train, test) = split(&scaled, &config.split).at("split")?;
    let train_set = TrainingSet::from_scaled(&train, &transform).at("split")?;

    let full = ModelSpec::full();
    if train_set.len() <= full.n_params() {
        return Err(Error::UnfittableStart {
            n_obs: train_set.len(),
            n_params: full.n_params(),
        })
        .at("full-fit");
    }
    let full_fit = fit_spec(&train_set, &full).at("full-fit")?;
    let (spec, trace) = backward_eliminate(&train_set, &full, &config.elimination).at("eliminate")?;
    let estimate = fit_spec(&train_set, &spec).at("final-fit")?;
    let diagnostics = residual_diagnostics(&estimate).at("diagnose")?;

    let screening = Screening {
        wcp_shapiro,
        wcp_anderson,
        transformed_shapiro,
        transformed_anderson,
        correlation,
        vif,
        full_model_r_squared: full_fit.r_squared,
        full_model_adj_r_squared: full_fit.adj_r_squared,
        qq_wcp: qq_points(&wcp).at("screen")?,
        qq_transformed: qq_points(&transformed).at("screen")?,
    };
    Ok(FitOutcome {
        model: FittedModel::from_estimate(spec, estimate, scaler, transform),
        trace,
        diagnostics,
        screening,
        n_train: train.len(),
        n_test: test.len(),
    })
}

/// Training rows scaled with the model's stored scaler and transformed
/// with its stored transform.
pub fn model_training_set(model: &FittedModel, rows: &Dataset) -> Result<TrainingSet> {
    let features = rows.rows().iter().map(|r| model.scaler.apply(&r.indicators)).collect();
    let response = rows
        .rows()
        .iter()
        .map(|r| model.transform.forward(r.wcp))
        .collect::<Result<Vec<_>>>()?;
    TrainingSet::new(features, response)
}

fn transformed_rmse(model: &FittedModel, set: &TrainingSet) -> Result<f64> {
    let predicted: Vec<f64> = set.features().iter().map(|z| model.linear_predictor(z)).collect();
    rmse(set.response(), &predicted)
}

/// Test-set price metrics, transformed-scale train/test RMSE and repeated
/// k-fold CV on the training rows.
pub fn validate_pipeline(model: &FittedModel, data: &Dataset, split_spec: &SplitSpec, cv: &CvConfig) -> StageResult<ValidationReport> {
    let estimate = model
        .estimate
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("model carries no fit statistics".into()))
        .at("load")?;
    let (train, test) = split(data, split_spec).at("split")?;
    let train_set = model_training_set(model, &train).at("split")?;
    let test_set = model_training_set(model, &test).at("split")?;

    let observed = test.wcp();
    let predicted = test
        .rows()
        .iter()
        .map(|r| model.predict_price(&r.indicators))
        .collect::<Result<Vec<_>>>()
        .at("predict")?;
    let price = price_metrics(&observed, &predicted).at("metrics")?;
    let cv_report = kfold_cv(&train_set, &model.spec, cv).at("cross-validate")?;
    Ok(ValidationReport {
        r_squared: estimate.r_squared,
        adj_r_squared: estimate.adj_r_squared,
        price,
        train_rmse_transformed: transformed_rmse(model, &train_set).at("metrics")?,
        test_rmse_transformed: transformed_rmse(model, &test_set).at("metrics")?,
        cv: cv_report,
    })
}

/// Contribution ranking; `partial_ss` needs the training rows.
pub fn rank_pipeline(
    model: &FittedModel,
    data: Option<(&Dataset, &SplitSpec)>,
    method: AttributionMethod,
    exec: Execution,
) -> StageResult<ContributionRanking> {
    match (method, data) {
        (AttributionMethod::CoefShare, _) => coefficient_shares(&model.term_coefficients()).at("rank"),
        (AttributionMethod::PartialSs, Some((data, split_spec))) => {
            let (train, _) = split(data, split_spec).at("split")?;
            let set = model_training_set(model, &train).at("split")?;
            rank_contributions(&model.spec, &model.coefficients, &set, method, exec).at("rank")
        }
        (AttributionMethod::PartialSs, None) => Err(Error::InvalidParameter(
            "partial_ss attribution needs the dataset (--input)".into(),
        ))
        .at("rank"),
    }
}
